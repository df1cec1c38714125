#include "ldg/verification.hpp"

#include <cmath>
#include <iostream>
#include <map>

namespace ldg {

Vec2 ManufacturedSolution::velocity(const Vec2& x) const {
  const double r = x.norm();
  if (r == 0.0) return beta == 0.0 ? Vec2{x.y, -x.x} : Vec2{0.0, 0.0};
  const double rb = std::pow(r, beta);
  return {rb * x.y, -rb * x.x};
}

Tensor2 ManufacturedSolution::velocity_gradient(const Vec2& x) const {
  const double r = x.norm();
  if (beta == 0.0) return {0.0, 1.0, -1.0, 0.0};
  const double rb = std::pow(r, beta);
  const double rb2 = beta * std::pow(r, beta - 2.0);
  return {rb2 * x.x * x.y, rb2 * x.y * x.y + rb,
          -rb2 * x.x * x.x - rb, -rb2 * x.x * x.y};
}

Tensor2 ManufacturedSolution::sym_velocity_gradient(const Vec2& x) const {
  return velocity_gradient(x).sym();
}

double ManufacturedSolution::pressure(const Vec2& x) const {
  return std::pow(x.norm(), gamma) - q_offset;
}

double mean_radial_power(double gamma) {
  if (!(gamma > -2.0)) throw ConfigError("mean_radial_power: gamma must be > -2");
  static std::map<double, double> cache;
  auto it = cache.find(gamma);
  if (it != cache.end()) return it->second;

  // Tensor Gauss over an axis-aligned rectangle.
  auto integrate_box = [gamma](double x0, double x1, double y0, double y1, int n) {
    std::vector<double> t, w;
    gauss_legendre_01(n, t, w);
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double x = x0 + t[i] * (x1 - x0);
        const double y = y0 + t[j] * (y1 - y0);
        sum += w[i] * w[j] * std::pow(x * x + y * y, 0.5 * gamma);
      }
    return sum * (x1 - x0) * (y1 - y0);
  };
  // L-shaped shell (0,1)^2 \ (0,1/2)^2; the remaining corner square follows
  // from self-similarity: int over (0,s)^2 of |x|^gamma = s^(gamma+2) int
  // over (0,1)^2.
  auto shell = [&](int n) {
    return integrate_box(0.5, 1.0, 0.0, 1.0, n) + integrate_box(0.0, 0.5, 0.5, 1.0, n);
  };
  double prev = shell(24), curr = shell(48);
  for (int n = 96; std::abs(curr - prev) > 1e-13 * std::abs(curr) && n <= 384; n *= 2) {
    prev = curr;
    curr = shell(n);
  }
  const double unit_square = curr / (1.0 - std::pow(2.0, -(gamma + 2.0)));
  const double mean = unit_square;  // 4 * integral / |Omega| with |Omega| = 4
  cache[gamma] = mean;
  return mean;
}

ManufacturedProblem make_manufactured(double p, double delta, double rho,
                                      ModelKind model, double alpha) {
  if (!(rho > 0.0 && rho <= 1.0))
    throw ConfigError("make_manufactured: rho must lie in (0,1]");
  if (model == ModelKind::PNavierStokes && p <= 2.0)
    std::cerr << "warning: p <= 2 with the convective model is outside the "
                 "supported theory\n";

  ManufacturedSolution exact;
  exact.p = p;
  exact.delta = delta;
  exact.rho = rho;
  exact.beta = 2.0 * (rho - 1.0) / p;
  const double pc = p / (p - 1.0);
  exact.gamma = rho - 2.0 / pc;
  exact.q_offset = mean_radial_power(exact.gamma);

  ProblemData data(NFunctionParams(p, delta), alpha, model);
  const StressLaw law(data.params);
  data.divergence = [](const Vec2&) { return 0.0; };
  data.boundary_velocity = [exact](const Vec2& x) { return exact.velocity(x); };
  data.boundary_velocity_gradient = [exact](const Vec2& x) {
    return exact.velocity_gradient(x);
  };
  data.tensor_force = [exact, law](const Vec2& x) {
    const Tensor2 D = exact.sym_velocity_gradient(x);
    return stress(law, D) - exact.pressure(x) * Tensor2::identity();
  };
  if (model == ModelKind::PNavierStokes) {
    data.body_force = [exact](const Vec2& x) {
      // [grad v] v = -|x|^(2 beta) x for this rotational family
      const double r2b = std::pow(x.norm(), 2.0 * exact.beta);
      return Vec2{-r2b * x.x, -r2b * x.y};
    };
  } else {
    data.body_force = [](const Vec2&) { return Vec2{0.0, 0.0}; };
  }
  return {exact, data};
}

ErrorRecord compute_errors(const DiscreteSolution& solution, const AuxiliaryFields& aux,
                           const ManufacturedSolution& exact, const StressLaw& law,
                           const Spaces& spaces) {
  const Mesh& mesh = *spaces.mesh;
  const QuadratureRule& vr = spaces.volume_rule;

  ErrorRecord rec;
  rec.level = mesh.level;
  rec.h = spaces.h;
  rec.ndof_v = spaces.velocity.dof_count;
  rec.ndof_q = spaces.pressure.dof_count;

  const double pc = law.params.p / (law.params.p - 1.0);
  double sum_L = 0.0, sum_S = 0.0, sum_q = 0.0, sum_qnorm = 0.0;
  std::vector<double> cell_shift(mesh.cell_count());
  for (int c = 0; c < mesh.cell_count(); ++c) {
    const double jac = 2.0 * mesh.cell_area(c);
    Tensor2 mean_L{};
    for (std::size_t q = 0; q < vr.size(); ++q) {
      const double wq = jac * vr.w[q];
      const Vec2 x = mesh.map_to_physical(c, vr.x[q], vr.y[q]);
      const Tensor2 Lh = evaluate_tensor(aux.gradient, c, vr.x[q], vr.y[q]).sym();
      const Tensor2 Dv = exact.sym_velocity_gradient(x);
      const Tensor2 dF = natural_transform_F(law, Lh) - natural_transform_F(law, Dv);
      sum_L += wq * dF.dot(dF);

      const Tensor2 Sh = evaluate_tensor(aux.stress, c, vr.x[q], vr.y[q]);
      const Tensor2 dS = conjugate_transform_Fstar(law, Sh) -
                         conjugate_transform_Fstar(law, stress(law, Dv));
      sum_S += wq * dS.dot(dS);

      const double qh = evaluate_scalar(solution.pressure, c, vr.x[q], vr.y[q]);
      sum_q += wq * std::pow(std::abs(qh - exact.pressure(x)), pc);
      sum_qnorm += wq * std::pow(std::abs(qh), pc);
      mean_L += (2.0 * vr.w[q]) * Lh;  // reference weights sum to 1/2
    }
    cell_shift[c] = mean_L.norm();  // |cell mean of L_h^sym|
  }
  rec.e_L = std::sqrt(sum_L);
  rec.e_S = std::sqrt(sum_S);
  rec.e_q = std::sqrt(sum_q);
  rec.pressure_norm = std::pow(sum_qnorm, 1.0 / pc);

  const std::vector<double> shifts = face_shifts_from_cells(spaces.faces, cell_shift);
  const VectorFn datum = [&exact](const Vec2& x) { return exact.velocity(x); };
  rec.e_jump = std::sqrt(jump_modular(solution.velocity, &datum, shifts, law.params,
                                      spaces.h, spaces.faces, spaces.face_rule));
  rec.velocity_norm = dg_norm(solution.velocity, law.params.p, spaces.h, spaces.faces,
                              spaces.volume_rule, spaces.face_rule);

  for (double e : {rec.e_L, rec.e_S, rec.e_jump, rec.e_q})
    if (!std::isfinite(e) || e < 0.0)
      throw SolveError("compute_errors: non-finite error quantity");
  return rec;
}

double eoc_value(double e_fine, double e_coarse, double h_fine, double h_coarse) {
  return std::log(e_fine / e_coarse) / std::log(h_fine / h_coarse);
}

DiscreteSolution prolong(const DiscreteSolution& coarse, const Spaces& coarse_spaces,
                         const Spaces& fine_spaces) {
  const Mesh& fine_mesh = *fine_spaces.mesh;
  const Mesh& coarse_mesh = *coarse_spaces.mesh;
  if (fine_mesh.parent_cells.empty())
    throw ConfigError("prolong: fine mesh has no refinement history");

  DiscreteSolution out = zero_solution(fine_spaces);
  const Space& v = fine_spaces.velocity;
  const QuadratureRule& vr = fine_spaces.volume_rule;
  const int nsc = v.scalar_dim;
  std::vector<double> psi(nsc);
  for (int c = 0; c < fine_mesh.cell_count(); ++c) {
    const int parent = fine_mesh.parent_cells[c];
    for (std::size_t q = 0; q < vr.size(); ++q) {
      const Vec2 x = fine_mesh.map_to_physical(c, vr.x[q], vr.y[q]);
      double xi, eta;
      coarse_mesh.map_to_reference(parent, x, xi, eta);
      const Vec2 val = evaluate_vector(coarse.velocity, parent, xi, eta);
      v.scalar_values(vr.x[q], vr.y[q], psi.data());
      for (int m = 0; m < nsc; ++m) {
        out.velocity.coeffs[v.cell_dof(c, 0 * nsc + m)] += vr.w[q] * val.x * psi[m];
        out.velocity.coeffs[v.cell_dof(c, 1 * nsc + m)] += vr.w[q] * val.y * psi[m];
      }
    }
    // continuous pressure: nodal values evaluated through the parent cell
    static const double nodes[6][2] = {{0, 0}, {1, 0}, {0, 1},
                                       {0.5, 0}, {0.5, 0.5}, {0, 0.5}};
    for (int n = 0; n < fine_spaces.pressure.dofs_per_cell; ++n) {
      const Vec2 x = fine_mesh.map_to_physical(c, nodes[n][0], nodes[n][1]);
      double xi, eta;
      coarse_mesh.map_to_reference(parent, x, xi, eta);
      out.pressure.coeffs[fine_spaces.pressure.cell_dof(c, n)] =
          evaluate_scalar(coarse.pressure, parent, xi, eta);
    }
  }
  out.multiplier = coarse.multiplier;
  return out;
}

StudyReport run_convergence_study(const StudyConfig& config, const StudyObserver& observer) {
  if (config.levels < 2)
    throw ConfigError("run_convergence_study: at least 2 levels required for an EOC");

  StudyReport report;
  report.config = config;
  const double pc = config.p / (config.p - 1.0);
  report.reference_rate = config.rho * pc / 2.0;

  ManufacturedProblem problem =
      make_manufactured(config.p, config.delta, config.rho, config.model, config.alpha);
  const StressLaw law(problem.data.params);

  // meshes and spaces are heap-allocated so fields can keep stable pointers
  std::vector<std::unique_ptr<Mesh>> meshes;
  meshes.push_back(std::make_unique<Mesh>(generate_square_mesh(config.n0)));
  std::unique_ptr<Spaces> spaces, prev_spaces;
  DiscreteSolution prev_solution;

  for (int level = 0; level < config.levels; ++level) {
    if (level > 0) meshes.push_back(std::make_unique<Mesh>(red_refine(*meshes.back())));
    prev_spaces = std::move(spaces);
    spaces = std::make_unique<Spaces>(make_spaces(
        *meshes.back(), config.k, config.volume_degree, config.face_degree));

    System system(*spaces, problem.data);
    DiscreteSolution state = zero_solution(*spaces);
    const bool nonlinear = !(config.p == 2.0 && config.delta == 0.0 &&
                             config.model == ModelKind::PStokes);
    if (level > 0 && config.warm_start) {
      state = prolong(prev_solution, *prev_spaces, *spaces);
    } else if (nonlinear) {
      // initialize from the Newtonian problem on the coarsest level
      ProblemData newtonian = problem.data;
      newtonian.params = NFunctionParams(2.0, 0.0);
      newtonian.model = ModelKind::PStokes;
      System linear_system(*spaces, newtonian);
      NewtonOptions lin_opts = config.newton;
      lin_opts.line_search = false;
      linear_system.newton(state, lin_opts);
    }

    NewtonLog log = system.newton(state, config.newton);
    AuxiliaryFields aux = system.reconstruct(state);

    ErrorRecord rec = compute_errors(state, aux, problem.exact, law, *spaces);
    rec.newton_iterations = log.iterations;
    report.records.push_back(rec);
    if (config.verbose) {
      std::cerr << "level " << level << ": h = " << rec.h << ", e_L = " << rec.e_L
                << ", e_S = " << rec.e_S << ", e_jump = " << rec.e_jump
                << ", e_q = " << rec.e_q << ", newton = " << rec.newton_iterations
                << "\n";
    }
    if (observer) observer(level, state, aux, *spaces);
    prev_solution = std::move(state);
  }

  report.eocs.resize(report.records.size());
  for (std::size_t i = 1; i < report.records.size(); ++i) {
    const ErrorRecord& f = report.records[i];
    const ErrorRecord& c = report.records[i - 1];
    report.eocs[i].e_L = eoc_value(f.e_L, c.e_L, f.h, c.h);
    report.eocs[i].e_S = eoc_value(f.e_S, c.e_S, f.h, c.h);
    report.eocs[i].e_jump = eoc_value(f.e_jump, c.e_jump, f.h, c.h);
    report.eocs[i].e_q = eoc_value(f.e_q, c.e_q, f.h, c.h);
  }
  return report;
}

}  // namespace ldg
