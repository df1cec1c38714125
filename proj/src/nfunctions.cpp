#include "ldg/nfunctions.hpp"

#include <algorithm>
#include <cmath>

#include "ldg/quadrature.hpp"

namespace ldg {

namespace {

void require_nonnegative(double t, const char* where) {
  if (!(t >= 0.0)) throw ConfigError(std::string(where) + ": t must be >= 0");
}

// Antiderivative of (delta+s)^(p-2) s, evaluated as a difference
// F(t) - F(0) with F(t) = (delta+t)^p/p - delta (delta+t)^(p-1)/(p-1).
double phi_closed_form(double p, double delta, double t) {
  const double u = delta + t;
  const double a = std::pow(u, p) / p - delta * std::pow(u, p - 1.0) / (p - 1.0);
  const double b = std::pow(delta, p) * (1.0 / (p - 1.0) - 1.0 / p);
  return a + b;
}

// 32-point Gauss on [0,t]; the integrand is analytic there, so this is
// machine-accurate whenever it is used (t small against delta).
double phi_by_quadrature(double p, double delta, double t) {
  static thread_local std::vector<double> gt, gw;
  if (gt.empty()) gauss_legendre_01(32, gt, gw);
  double sum = 0.0;
  for (std::size_t q = 0; q < gt.size(); ++q) {
    const double s = gt[q] * t;
    sum += gw[q] * std::pow(delta + s, p - 2.0) * s;
  }
  return sum * t;
}

}  // namespace

double phi_prime(const NFunctionParams& params, double t) {
  require_nonnegative(t, "phi_prime");
  if (t == 0.0) return 0.0;  // limit value, also for p < 2 with delta = 0
  return std::pow(params.delta + t, params.p - 2.0) * t;
}

double phi_eval(const NFunctionParams& params, double t) {
  require_nonnegative(t, "phi_eval");
  if (t == 0.0) return 0.0;
  const double p = params.p, delta = params.delta;
  if (delta == 0.0) return std::pow(t, p) / p;
  // The closed form cancels catastrophically for t << delta; phi(t) is of
  // order delta^(p-2) t^2 there while the individual terms are ~delta^p.
  if (t < 0.1 * delta) return phi_by_quadrature(p, delta, t);
  return phi_closed_form(p, delta, t);
}

double shifted_phi_prime(const ShiftedNFunction& shifted, double t) {
  // (phi_{p,delta})_a = phi_{p,delta+a}
  NFunctionParams moved(shifted.base.p, shifted.base.delta + shifted.shift);
  return phi_prime(moved, t);
}

double shifted_phi_eval(const ShiftedNFunction& shifted, double t) {
  NFunctionParams moved(shifted.base.p, shifted.base.delta + shifted.shift);
  return phi_eval(moved, t);
}

double conjugate_prime(const NFunctionParams& params, double t) {
  require_nonnegative(t, "conjugate_prime");
  if (t == 0.0) return 0.0;
  const double p = params.p, delta = params.delta;
  if (delta == 0.0) return std::pow(t, 1.0 / (p - 1.0));

  // Invert the strictly increasing phi' by bisection-safeguarded Newton.
  double hi = std::max(1.0, std::pow(t, 1.0 / (p - 1.0)) * (1.0 + delta));
  while (phi_prime(params, hi) < t) hi *= 2.0;
  double lo = 0.0;
  double s = std::min(hi, std::pow(t, 1.0 / (p - 1.0)));
  if (!(s > lo && s < hi)) s = 0.5 * hi;
  for (int it = 0; it < 200; ++it) {
    const double f = phi_prime(params, s) - t;
    if (f > 0.0)
      hi = s;
    else
      lo = s;
    // phi''(s) = (delta+s)^(p-3) (delta + (p-1) s)
    const double fp = std::pow(delta + s, p - 3.0) * (delta + (p - 1.0) * s);
    double step = f / fp;
    double snew = s - step;
    if (!(snew > lo && snew < hi)) snew = 0.5 * (lo + hi);
    if (std::abs(snew - s) <= 1e-15 * (1.0 + std::abs(s))) {
      s = snew;
      break;
    }
    s = snew;
  }
  return s;
}

double conjugate_eval(const NFunctionParams& params, double t) {
  require_nonnegative(t, "conjugate_eval");
  if (t == 0.0) return 0.0;
  if (params.delta == 0.0) {
    const double pc = params.conjugate_exponent();
    return std::pow(t, pc) / pc;
  }
  // The supremum of s t - phi(s) is attained at s* = (phi')^{-1}(t).
  const double s = conjugate_prime(params, t);
  return s * t - phi_eval(params, s);
}

}  // namespace ldg
