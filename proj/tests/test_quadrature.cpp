#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ldg/quadrature.hpp"

using namespace ldg;

namespace {

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

// exact reference-triangle moment, the independent oracle for exactness
double moment(int a, int b) { return factorial(a) * factorial(b) / factorial(a + b + 2); }

}  // namespace

TEST_CASE("triangle rules are exact up to their stated degree") {
  for (int degree : {0, 1, 2, 3, 4, 5, 6, 8, 10, 12}) {
    const QuadratureRule rule = quadrature_rule(degree);
    REQUIRE(rule.degree >= degree);
    for (int d = 0; d <= degree; ++d) {
      for (int a = 0; a <= d; ++a) {
        const int b = d - a;
        double sum = 0.0;
        for (std::size_t q = 0; q < rule.size(); ++q)
          sum += rule.w[q] * std::pow(rule.x[q], a) * std::pow(rule.y[q], b);
        CHECK(sum == doctest::Approx(moment(a, b)).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("degree-2 rule integrates x1 x2 to 1/24") {
  const QuadratureRule rule = quadrature_rule(2);
  double sum = 0.0;
  for (std::size_t q = 0; q < rule.size(); ++q) sum += rule.w[q] * rule.x[q] * rule.y[q];
  CHECK(sum == doctest::Approx(1.0 / 24.0).epsilon(1e-14));
}

TEST_CASE("weights are positive and sum to the reference area") {
  for (int degree : {1, 4, 8, 12}) {
    const QuadratureRule rule = quadrature_rule(degree);
    double sum = 0.0;
    for (double w : rule.w) {
      CHECK(w > 0.0);
      sum += w;
    }
    CHECK(sum == doctest::Approx(0.5).epsilon(1e-14));
  }
}

TEST_CASE("points are strictly interior, never at vertices") {
  for (int degree : {1, 2, 8, 12}) {
    const QuadratureRule rule = quadrature_rule(degree);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      CHECK(rule.x[q] > 0.0);
      CHECK(rule.y[q] > 0.0);
      CHECK(rule.x[q] + rule.y[q] < 1.0);
    }
  }
}

TEST_CASE("point set is symmetric under the vertex permutations") {
  const QuadratureRule rule = quadrature_rule(6);
  // integrating any monomial and its coordinate swap must agree exactly
  double sxy = 0.0, syx = 0.0, sl = 0.0, sx = 0.0;
  for (std::size_t q = 0; q < rule.size(); ++q) {
    sxy += rule.w[q] * rule.x[q] * rule.x[q] * rule.y[q];
    syx += rule.w[q] * rule.y[q] * rule.y[q] * rule.x[q];
    sx += rule.w[q] * rule.x[q];
    sl += rule.w[q] * (1.0 - rule.x[q] - rule.y[q]);
  }
  CHECK(sxy == doctest::Approx(syx).epsilon(1e-15));
  CHECK(sx == doctest::Approx(sl).epsilon(1e-15));
}

TEST_CASE("face rule: degree 5 integrates t^5 on [0,1] to 1/6") {
  const FaceQuadratureRule rule = face_quadrature_rule(5);
  double sum = 0.0;
  for (std::size_t q = 0; q < rule.size(); ++q) sum += rule.w[q] * std::pow(rule.t[q], 5);
  CHECK(sum == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
}

TEST_CASE("face rule weights sum to 1; nodes interior; high degree supported") {
  for (int degree : {0, 3, 12, 13}) {
    const FaceQuadratureRule rule = face_quadrature_rule(degree);
    double sum = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      CHECK(rule.t[q] > 0.0);
      CHECK(rule.t[q] < 1.0);
      sum += rule.w[q];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    for (int d = 0; d <= degree; ++d) {
      double s = 0.0;
      for (std::size_t q = 0; q < rule.size(); ++q)
        s += rule.w[q] * std::pow(rule.t[q], d);
      CHECK(s == doctest::Approx(1.0 / (d + 1.0)).epsilon(1e-13));
    }
  }
}

TEST_CASE("unsupported degrees are rejected") {
  CHECK_THROWS(quadrature_rule(-1));
  CHECK_THROWS(face_quadrature_rule(-2));
}
