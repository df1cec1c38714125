#pragma once

#include <vector>

namespace ldg {

/// Quadrature rule on the reference triangle {x,y >= 0, x+y <= 1}.
/// Points are strictly interior, weights positive, and the point set is
/// invariant under the six affine symmetries of the triangle.
struct QuadratureRule {
  std::vector<double> x;  // reference coordinates
  std::vector<double> y;
  std::vector<double> w;  // weights, sum to 1/2 (reference area)
  int degree = 0;         // every polynomial up to this total degree is exact

  std::size_t size() const { return w.size(); }
};

/// Gauss rule on the reference segment [0,1]; exact to the stated degree.
struct FaceQuadratureRule {
  std::vector<double> t;
  std::vector<double> w;  // sum to 1
  int degree = 0;

  std::size_t size() const { return w.size(); }
};

QuadratureRule quadrature_rule(int degree);
FaceQuadratureRule face_quadrature_rule(int degree);

/// Gauss-Legendre nodes/weights on [0,1] (n points, exact to degree 2n-1).
void gauss_legendre_01(int n, std::vector<double>& t, std::vector<double>& w);

}  // namespace ldg
