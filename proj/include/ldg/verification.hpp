#pragma once

#include <functional>

#include "ldg/system.hpp"

namespace ldg {

/// The singular solution family v = |x|^beta (x2,-x1), q = |x|^gamma - mean,
/// with beta = 2(rho-1)/p and gamma = rho - 2/p'. div v = 0 identically.
struct ManufacturedSolution {
  double p = 2.0, delta = 0.0, rho = 1.0;
  double beta = 0.0, gamma = 0.0;
  double q_offset = 0.0;  // <|x|^gamma> over the domain

  Vec2 velocity(const Vec2& x) const;
  Tensor2 velocity_gradient(const Vec2& x) const;
  Tensor2 sym_velocity_gradient(const Vec2& x) const;
  double pressure(const Vec2& x) const;
};

struct ManufacturedProblem {
  ManufacturedSolution exact;
  ProblemData data;
};

/// Realizes the data as G = S(Dv) - q I and bfg = [grad v] v (zero for the
/// p-Stokes model), v* = v, g = 0.
ManufacturedProblem make_manufactured(double p, double delta, double rho,
                                      ModelKind model, double alpha);

/// <|x|^gamma> over (-1,1)^2 by high-order quadrature away from the origin
/// plus the exact self-similar summation of the dyadic shells around it.
double mean_radial_power(double gamma);

struct ErrorRecord {
  int level = 0;
  double h = 0.0;
  long ndof_v = 0, ndof_q = 0;
  double e_L = 0.0, e_S = 0.0, e_jump = 0.0, e_q = 0.0;
  int newton_iterations = 0;
  double velocity_norm = 0.0;  // ||v_h||_{grad,p,h}
  double pressure_norm = 0.0;  // ||q_h||_{p'}
};

ErrorRecord compute_errors(const DiscreteSolution& solution, const AuxiliaryFields& aux,
                           const ManufacturedSolution& exact, const StressLaw& law,
                           const Spaces& spaces);

struct StudyConfig {
  double p = 2.5;
  double delta = 1e-4;
  double alpha = 2.5;
  double rho = 0.1;
  ModelKind model = ModelKind::PNavierStokes;
  int k = 1;
  int n0 = 4;
  int levels = 5;  // number of meshes; EOC entries start at level 1
  int volume_degree = -1;
  int face_degree = -1;
  NewtonOptions newton;
  bool warm_start = true;
  bool verbose = false;
};

struct EocRecord {
  double e_L = 0.0, e_S = 0.0, e_jump = 0.0, e_q = 0.0;
};

struct StudyReport {
  StudyConfig config;
  std::vector<ErrorRecord> records;
  std::vector<EocRecord> eocs;  // aligned with records; entry 0 is unset
  double reference_rate = 0.0;  // rho p'/2
};

using StudyObserver = std::function<void(int level, const DiscreteSolution&,
                                         const AuxiliaryFields&, const Spaces&)>;

StudyReport run_convergence_study(const StudyConfig& config,
                                  const StudyObserver& observer = {});

double eoc_value(double e_fine, double e_coarse, double h_fine, double h_coarse);

/// Represent a coarse solution on the once-refined mesh (exact for nested
/// piecewise polynomials); used to warm-start Newton across levels.
DiscreteSolution prolong(const DiscreteSolution& coarse, const Spaces& coarse_spaces,
                         const Spaces& fine_spaces);

}  // namespace ldg
