#pragma once

#include "ldg/nfunctions.hpp"
#include "ldg/tensor.hpp"

namespace ldg {

/// Extra stress S(A) = (delta + |A^sym|)^(p-2) A^sym and the transforms
/// derived from it. The viscosity scale is fixed to 1.
struct StressLaw {
  NFunctionParams params;

  explicit StressLaw(NFunctionParams params_) : params(params_) {}
  StressLaw(double p, double delta) : params(p, delta) {}
};

Tensor2 stress(const StressLaw& law, const Tensor2& A);

// S_a(A) = (delta + a + |A^sym|)^(p-2) A^sym, the shift-a member of the family.
Tensor2 shifted_stress(const StressLaw& law, double a, const Tensor2& A);

// F(A) = (delta + |A^sym|)^((p-2)/2) A^sym.
Tensor2 natural_transform_F(const StressLaw& law, const Tensor2& A);

// F*(A) = (delta^(p-1) + |A^sym|)^((p'-2)/2) A^sym.
Tensor2 conjugate_transform_Fstar(const StressLaw& law, const Tensor2& A);

// Directional derivative d/de S(A + e B) at e = 0.
Tensor2 stress_jacobian(const StressLaw& law, const Tensor2& A, const Tensor2& B);

}  // namespace ldg
