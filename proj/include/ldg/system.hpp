#pragma once

#include <Eigen/Sparse>
#include <memory>
#include <vector>

#include "ldg/constitutive.hpp"
#include "ldg/dgops.hpp"

namespace ldg {

enum class ModelKind { PStokes, PNavierStokes };

/// Data of one boundary value problem. The boundary velocity is given as an
/// extension into the domain; its interior jumps vanish by construction.
struct ProblemData {
  NFunctionParams params;
  double alpha = 2.5;
  ModelKind model = ModelKind::PNavierStokes;
  VectorFn body_force;
  TensorFn tensor_force;
  ScalarFn divergence;
  VectorFn boundary_velocity;
  TensorFn boundary_velocity_gradient;  // used by error measures, may be empty

  ProblemData(NFunctionParams params_, double alpha_, ModelKind model_)
      : params(params_), alpha(alpha_), model(model_) {
    if (!(alpha > 0.0)) throw ConfigError("ProblemData: alpha must be > 0");
  }
};

/// All discrete structure tied to one mesh level.
struct Spaces {
  const Mesh* mesh = nullptr;
  FaceSet faces;
  Space velocity;  // broken vector, degree k
  Space tensor;    // broken tensor, degree k
  Space pressure;  // continuous scalar, degree k
  QuadratureRule volume_rule;
  FaceQuadratureRule face_rule;
  double h = 0.0;
  int k = 1;
};

/// volume_degree / face_degree default to 2k+6 when negative.
Spaces make_spaces(const Mesh& mesh, int k, int volume_degree = -1, int face_degree = -1);

struct DiscreteSolution {
  Field velocity;
  Field pressure;
  double multiplier = 0.0;
};

DiscreteSolution zero_solution(const Spaces& spaces);

/// The eliminated LDG variables, reconstructed from a converged solution.
struct AuxiliaryFields {
  Field gradient;    // L_h = G_h^k v_h + R_h^k v*
  Field stress;      // S_h = Pi S(L_h^sym)
  Field convection;  // K_h = Pi (v_h x v_h)
};

struct NewtonOptions {
  double tol_abs = 1e-8;
  double tol_rel = 1e-10;
  int max_iter = 50;
  bool line_search = false;     // Armijo backtracking
  bool check_jacobian = false;  // finite-difference consistency at each iterate
};

struct NewtonLog {
  std::vector<double> residual_norms;
  int iterations = 0;
  bool converged = false;
};

/// Assembled problem on one level: residual, Jacobian, Newton driver.
/// Unknown layout: [velocity dofs | pressure dofs | mean multiplier].
class System {
public:
  System(const Spaces& spaces, const ProblemData& data);
  ~System();

  long size() const;
  long velocity_offset() const { return 0; }
  long pressure_offset() const;

  Eigen::VectorXd pack(const DiscreteSolution& s) const;
  DiscreteSolution unpack(const Eigen::VectorXd& x) const;

  Eigen::VectorXd residual(const Eigen::VectorXd& x) const;
  Eigen::SparseMatrix<double> jacobian(const Eigen::VectorXd& x) const;

  NewtonLog newton(DiscreteSolution& state, const NewtonOptions& opts) const;
  AuxiliaryFields reconstruct(const DiscreteSolution& s) const;

  const Spaces& spaces() const;
  const ProblemData& data() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Eigen::VectorXd assemble_residual(const DiscreteSolution& state, const ProblemData& data,
                                  const Spaces& spaces);
Eigen::SparseMatrix<double> assemble_jacobian(const DiscreteSolution& state,
                                              const ProblemData& data, const Spaces& spaces);
DiscreteSolution newton_solve(const DiscreteSolution& initial, const ProblemData& data,
                              const Spaces& spaces, const NewtonOptions& opts,
                              NewtonLog* log = nullptr);
AuxiliaryFields reconstruct_auxiliary(const DiscreteSolution& solution,
                                      const ProblemData& data, const Spaces& spaces);

/// Sparse direct solve with relative residual contract 1e-11.
Eigen::VectorXd linear_solve(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b);

}  // namespace ldg
