#include "ldg/quadrature.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace ldg {

void gauss_legendre_01(int n, std::vector<double>& t, std::vector<double>& w) {
  if (n < 1) throw std::invalid_argument("gauss_legendre_01: n must be >= 1");
  t.assign(n, 0.0);
  w.assign(n, 0.0);
  // Nodes on [-1,1] by Newton iteration on P_n, then mapped to [0,1].
  for (int i = 0; i < n; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    t[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * pp * pp);
  }
}

FaceQuadratureRule face_quadrature_rule(int degree) {
  if (degree < 0 || degree > 60)
    throw std::invalid_argument("face_quadrature_rule: unsupported degree");
  FaceQuadratureRule rule;
  int n = degree / 2 + 1;
  gauss_legendre_01(n, rule.t, rule.w);
  rule.degree = 2 * n - 1;
  return rule;
}

QuadratureRule quadrature_rule(int degree) {
  if (degree < 0 || degree > 40)
    throw std::invalid_argument("quadrature_rule: unsupported degree");

  // Tensor rule under the Duffy map x = u(1-v), y = v with the Jacobian
  // (1-v) folded into the weights, then symmetrized over the six vertex
  // permutations of the triangle. All points stay strictly interior and
  // all weights positive, for any degree.
  int n = (degree + 2) / 2 + 1;  // GL in v must handle degree+1
  std::vector<double> gt, gw;
  gauss_legendre_01(n, gt, gw);

  QuadratureRule rule;
  rule.degree = degree;
  rule.x.reserve(6 * n * n);
  rule.y.reserve(6 * n * n);
  rule.w.reserve(6 * n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double u = gt[i], v = gt[j];
      const double px = u * (1.0 - v);
      const double py = v;
      const double pw = gw[i] * gw[j] * (1.0 - v);
      // barycentric coordinates (l1,l2,l3) = (1-x-y, x, y); emit all
      // six permutations with 1/6 of the weight each
      const double l1 = 1.0 - px - py, l2 = px, l3 = py;
      const std::array<std::array<double, 2>, 6> perms = {{
          {l2, l3}, {l3, l2}, {l1, l3}, {l3, l1}, {l1, l2}, {l2, l1},
      }};
      for (const auto& pt : perms) {
        rule.x.push_back(pt[0]);
        rule.y.push_back(pt[1]);
        rule.w.push_back(pw / 6.0);
      }
    }
  }
  return rule;
}

}  // namespace ldg
