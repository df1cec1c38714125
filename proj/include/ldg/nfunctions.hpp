#pragma once

#include "ldg/errors.hpp"

namespace ldg {

/// Parameters of the N-function phi(t) = int_0^t (delta+s)^(p-2) s ds.
struct NFunctionParams {
  double p;      // growth exponent, p > 1
  double delta;  // regularization, delta >= 0

  NFunctionParams(double p_, double delta_) : p(p_), delta(delta_) {
    if (!(p > 1.0)) throw ConfigError("NFunctionParams: p must be > 1");
    if (!(delta >= 0.0)) throw ConfigError("NFunctionParams: delta must be >= 0");
  }

  double conjugate_exponent() const { return p / (p - 1.0); }
};

/// Shifted member of the family: with shift a the function coincides with
/// the base function at parameters (p, delta + a).
struct ShiftedNFunction {
  NFunctionParams base;
  double shift;  // a >= 0

  ShiftedNFunction(NFunctionParams base_, double shift_)
      : base(base_), shift(shift_) {
    if (!(shift >= 0.0)) throw ConfigError("ShiftedNFunction: shift must be >= 0");
  }
};

// phi'(t) = (delta+t)^(p-2) t, with the limit value 0 at t = 0.
double phi_prime(const NFunctionParams& params, double t);

// phi(t) = int_0^t phi'(s) ds.
double phi_eval(const NFunctionParams& params, double t);

// psi_a'(t) = phi'(a+t) t/(a+t) = (delta+a+t)^(p-2) t.
double shifted_phi_prime(const ShiftedNFunction& shifted, double t);

// psi_a(t) = int_0^t psi_a'(s) ds.
double shifted_phi_eval(const ShiftedNFunction& shifted, double t);

// (phi*)'(t) = (phi')^{-1}(t).
double conjugate_prime(const NFunctionParams& params, double t);

// phi*(t) = sup_{s>=0} (s t - phi(s)).
double conjugate_eval(const NFunctionParams& params, double t);

}  // namespace ldg
