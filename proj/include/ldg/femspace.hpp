#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "ldg/mesh.hpp"
#include "ldg/quadrature.hpp"
#include "ldg/tensor.hpp"

namespace ldg {

enum class SpaceKind { BrokenScalar, BrokenVector, BrokenTensor, ContinuousScalar };

/// Scalar polynomial basis on the reference triangle, orthonormal with
/// respect to the reference L2 inner product.
class ReferenceBasis {
public:
  explicit ReferenceBasis(int degree);

  int degree() const { return degree_; }
  int dim() const { return dim_; }
  double value(int i, double xi, double eta) const;
  Vec2 gradient(int i, double xi, double eta) const;  // reference coordinates

private:
  int degree_ = 0;
  int dim_ = 0;
  std::vector<std::pair<int, int>> expo_;
  Eigen::MatrixXd coeff_;  // dim x monomials
};

struct Space {
  const Mesh* mesh = nullptr;
  SpaceKind kind = SpaceKind::BrokenScalar;
  int degree = 0;
  int components = 1;      // scalar factors per basis function: 1, 2 or 4
  int scalar_dim = 0;      // local scalar basis size
  int dofs_per_cell = 0;   // components * scalar_dim
  long dof_count = 0;
  std::vector<long> cell_dofs;  // cell-major, dofs_per_cell entries per cell
  std::shared_ptr<const ReferenceBasis> basis;  // broken kinds only

  bool is_broken() const { return kind != SpaceKind::ContinuousScalar; }
  long cell_dof(int cell, int local) const {
    return cell_dofs[static_cast<long>(cell) * dofs_per_cell + local];
  }
  /// Local scalar basis values / reference gradients at a reference point.
  void scalar_values(double xi, double eta, double* out) const;
  void scalar_gradients(double xi, double eta, Vec2* out) const;
  /// Node coordinates (ContinuousScalar only), indexed by global dof.
  Vec2 node_position(long dof) const;
};

struct Field {
  const Space* space = nullptr;
  Eigen::VectorXd coeffs;

  Field() = default;
  explicit Field(const Space& s) : space(&s), coeffs(Eigen::VectorXd::Zero(s.dof_count)) {}
};

Space make_space(const Mesh& mesh, SpaceKind kind, int k);

double evaluate_scalar(const Field& f, int cell, double xi, double eta);
Vec2 evaluate_vector(const Field& f, int cell, double xi, double eta);
Tensor2 evaluate_tensor(const Field& f, int cell, double xi, double eta);
Vec2 evaluate_scalar_gradient(const Field& f, int cell, double xi, double eta);
/// Gradient (d_j v_i) of a vector field in physical coordinates.
Tensor2 evaluate_vector_gradient(const Field& f, int cell, double xi, double eta);

using ScalarFn = std::function<double(const Vec2&)>;
using VectorFn = std::function<Vec2(const Vec2&)>;
using TensorFn = std::function<Tensor2(const Vec2&)>;

/// Cell-local L2 projection onto a broken space.
Field l2_project(const ScalarFn& f, const Space& target, const QuadratureRule& rule);
Field l2_project(const VectorFn& f, const Space& target, const QuadratureRule& rule);
Field l2_project(const TensorFn& f, const Space& target, const QuadratureRule& rule);
Field l2_project(const Field& f, const Space& target, const QuadratureRule& rule);

/// Nodal interpolation onto ContinuousScalar.
Field nodal_interpolate(const ScalarFn& f, const Space& target);

}  // namespace ldg
