#include "ldg/constitutive.hpp"

#include <cmath>

namespace ldg {

namespace {

Tensor2 scaled_sym(double base, double p, const Tensor2& A) {
  const Tensor2 As = A.sym();
  const double r = As.norm();
  if (r == 0.0) return Tensor2{};
  return std::pow(base + r, p - 2.0) * As;
}

}  // namespace

Tensor2 stress(const StressLaw& law, const Tensor2& A) {
  return scaled_sym(law.params.delta, law.params.p, A);
}

Tensor2 shifted_stress(const StressLaw& law, double a, const Tensor2& A) {
  return scaled_sym(law.params.delta + a, law.params.p, A);
}

Tensor2 natural_transform_F(const StressLaw& law, const Tensor2& A) {
  const Tensor2 As = A.sym();
  const double r = As.norm();
  if (r == 0.0) return Tensor2{};
  return std::pow(law.params.delta + r, 0.5 * (law.params.p - 2.0)) * As;
}

Tensor2 conjugate_transform_Fstar(const StressLaw& law, const Tensor2& A) {
  const Tensor2 As = A.sym();
  const double r = As.norm();
  if (r == 0.0) return Tensor2{};
  const double p = law.params.p;
  const double pc = law.params.p / (p - 1.0);
  return std::pow(std::pow(law.params.delta, p - 1.0) + r, 0.5 * (pc - 2.0)) * As;
}

Tensor2 stress_jacobian(const StressLaw& law, const Tensor2& A, const Tensor2& B) {
  const double p = law.params.p, delta = law.params.delta;
  const Tensor2 As = A.sym();
  const Tensor2 Bs = B.sym();
  const double r = As.norm();
  const double guard = 1e-14 * (1.0 + delta);
  double factor = std::pow(delta + r, p - 2.0);
  if (!std::isfinite(factor))  // delta = 0, p < 2, A^sym ~ 0
    factor = std::pow(delta + std::max(r, guard), p - 2.0);
  Tensor2 out = factor * Bs;
  if (r >= guard) {
    const double c = (p - 2.0) * std::pow(delta + r, p - 3.0) * (As.dot(Bs) / r);
    out += c * As;
  }
  return out;
}

}  // namespace ldg
