// Command line driver: convergence studies, single solves with VTK output,
// and seeded property checks.

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <random>
#include <thread>

#include "ldg/cli.hpp"

namespace {

using namespace ldg;

void usage(std::ostream& out) {
  out << "usage: ldgpflow <study|solve|check> [--key value | key=value ...]\n"
         "  study  run an EOC study per (p,rho) pair and emit CSV tables\n"
         "  solve  solve one level and emit a VTK file\n"
         "  check  run the seeded operator/constitutive property suites\n"
         "keys: p rho delta alpha k model n0 levels level quad_volume_degree\n"
         "      quad_face_degree newton_max_iter newton_tol_abs newton_tol_rel\n"
         "      newton_line_search newton_check_jacobian warm_start seed verbose\n"
         "      out config\n";
}

int worker_count(std::size_t jobs) {
  unsigned n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("LDGPFLOW_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1 && cap < static_cast<long>(n)) n = static_cast<unsigned>(cap);
  }
  return static_cast<int>(std::min<std::size_t>(n, jobs));
}

std::string table_path(const RunConfig& cfg, double p, double rho) {
  const std::string prefix = cfg.out.empty() ? "eoc" : cfg.out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s_p%g_rho%g.csv", prefix.c_str(), p, rho);
  return buf;
}

int run_study(const RunConfig& cfg) {
  struct Job {
    double p, rho;
  };
  std::vector<Job> jobs;
  for (double p : cfg.p_values)
    for (double rho : cfg.rho_values) jobs.push_back({p, rho});

  std::mutex mtx;
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  auto work = [&]() {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      try {
        StudyReport report = run_convergence_study(cfg.study_config(jobs[j].p, jobs[j].rho));
        const std::string path = table_path(cfg, jobs[j].p, jobs[j].rho);
        emit_table(report, path);
        std::lock_guard<std::mutex> lock(mtx);
        std::cout << "p=" << jobs[j].p << " rho=" << jobs[j].rho
                  << " ref=" << report.reference_rate << " -> " << path << "\n";
        for (std::size_t i = 1; i < report.records.size(); ++i)
          std::cout << "  level " << report.records[i].level
                    << ": eoc_L=" << report.eocs[i].e_L
                    << " eoc_S=" << report.eocs[i].e_S
                    << " eoc_jump=" << report.eocs[i].e_jump
                    << " eoc_q=" << report.eocs[i].e_q
                    << " newton=" << report.records[i].newton_iterations << "\n";
      } catch (...) {
        std::lock_guard<std::mutex> lock(mtx);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const int nthreads = worker_count(jobs.size());
  if (nthreads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return 0;
}

int run_solve(const RunConfig& cfg) {
  StudyConfig sc = cfg.study_config(cfg.p_values.front(), cfg.rho_values.front());
  sc.levels = cfg.solve_level + 1;
  const std::string path = cfg.out.empty() ? "solution.vtk" : cfg.out;
  run_convergence_study(sc, [&](int level, const DiscreteSolution& sol,
                                const AuxiliaryFields&, const Spaces& spaces) {
    if (level != cfg.solve_level) return;
    emit_vtk(sol, *spaces.mesh, path);
    std::cout << "level " << level << " solved; wrote " << path << "\n";
  });
  return 0;
}

// ---- property suites -------------------------------------------------------

struct CheckContext {
  int failures = 0;
  void report(const char* name, bool ok, double value) {
    std::cout << (ok ? "[ok]   " : "[FAIL] ") << name << " (" << value << ")\n";
    if (!ok) ++failures;
  }
};

Field random_broken_vector(const Space& space, std::mt19937& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Field f(space);
  for (long i = 0; i < f.coeffs.size(); ++i) f.coeffs[i] = dist(rng);
  return f;
}

void check_constitutive(CheckContext& ctx, std::mt19937& rng) {
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  auto random_tensor = [&]() {
    return Tensor2{dist(rng), dist(rng), dist(rng), dist(rng)};
  };
  double worst_mono = 0.0, worst_fd = 0.0, worst_conj = 0.0;
  for (double p : {1.5, 2.2, 2.5, 3.0, 3.5}) {
    for (double delta : {0.0, 1e-4, 1.0}) {
      const StressLaw law(p, delta);
      for (int i = 0; i < 2000; ++i) {
        const Tensor2 A = random_tensor(), B = random_tensor();
        const double m = (stress(law, A) - stress(law, B)).dot(A.sym() - B.sym());
        worst_mono = std::min(worst_mono, m);
      }
    }
    const StressLaw law(p, 1e-4);
    for (int i = 0; i < 200; ++i) {
      const Tensor2 A = random_tensor(), B = random_tensor();
      const double hstep = 1e-6;
      const Tensor2 fd = (1.0 / (2.0 * hstep)) * (stress(law, A + hstep * B) -
                                                  stress(law, A + (-hstep) * B));
      const Tensor2 an = stress_jacobian(law, A, B);
      worst_fd = std::max(worst_fd, (fd - an).norm() / (1.0 + an.norm()));
    }
    const NFunctionParams params(p, 0.37);
    for (int i = 0; i < 200; ++i) {
      const double t = std::pow(10.0, -6.0 + 12.0 * (i / 199.0));
      const double roundtrip = phi_prime(params, conjugate_prime(params, t));
      worst_conj = std::max(worst_conj, std::abs(roundtrip - t) / (1.0 + t));
    }
  }
  ctx.report("constitutive monotonicity >= -1e-12", worst_mono >= -1e-12, worst_mono);
  ctx.report("stress jacobian vs finite differences <= 1e-6", worst_fd <= 1e-6, worst_fd);
  ctx.report("conjugate roundtrip <= 1e-10", worst_conj <= 1e-10, worst_conj);
}

void check_operators(CheckContext& ctx, std::mt19937& rng) {
  const int k = 1;
  Mesh mesh = generate_square_mesh(4);
  double prev_korn = 0.0;
  for (int level = 0; level < 2; ++level) {
    if (level > 0) mesh = red_refine(mesh);
    const Spaces spaces = make_spaces(mesh, k);
    const FaceQuadratureRule& fr = spaces.face_rule;

    // lifting adjointness on random fields
    double worst_adj = 0.0;
    for (int trial = 0; trial < 25; ++trial) {
      const Field w = random_broken_vector(spaces.velocity, rng);
      const Field X = [&] {
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        Field f(spaces.tensor);
        for (long i = 0; i < f.coeffs.size(); ++i) f.coeffs[i] = dist(rng);
        return f;
      }();
      const Field R = lifting(w, spaces.tensor, spaces.faces, fr);
      double lhs = 0.0;
      for (int c = 0; c < mesh.cell_count(); ++c)
        for (std::size_t q = 0; q < spaces.volume_rule.size(); ++q)
          lhs += 2.0 * mesh.cell_area(c) * spaces.volume_rule.w[q] *
                 evaluate_tensor(R, c, spaces.volume_rule.x[q], spaces.volume_rule.y[q])
                     .dot(evaluate_tensor(X, c, spaces.volume_rule.x[q],
                                          spaces.volume_rule.y[q]));
      double rhs = 0.0;
      for (const Face& face : spaces.faces.faces)
        for (std::size_t q = 0; q < fr.size(); ++q) {
          const FacePoint pt = face_point(mesh, face, fr.t[q]);
          Tensor2 avg = evaluate_tensor(X, face.minus_cell, pt.xi_minus, pt.eta_minus);
          if (!face.is_boundary())
            avg = 0.5 * (avg + evaluate_tensor(X, face.plus_cell, pt.xi_plus, pt.eta_plus));
          rhs += fr.w[q] * face.length * face_jump_tensor(w, face, pt).dot(avg);
        }
      worst_adj = std::max(worst_adj, std::abs(lhs - rhs) / (1.0 + std::abs(rhs)));
    }
    ctx.report("lifting adjointness <= 1e-11", worst_adj <= 1e-11, worst_adj);

    // zero lifting for a polynomial with zero boundary trace
    const VectorFn bubble = [](const Vec2& x) {
      const double b = (1.0 - x.x * x.x) * (1.0 - x.y * x.y);
      return Vec2{b, -0.5 * b};
    };
    const Field Rb = lifting(bubble, spaces.tensor, spaces.faces, fr);
    const double lift_norm = Rb.coeffs.cwiseAbs().maxCoeff();
    ctx.report("conforming field lifts to zero <= 1e-12", lift_norm <= 1e-12, lift_norm);

    // divergence / gradient duality against a continuous scalar
    const Field w = random_broken_vector(spaces.velocity, rng);
    const Field Rw = lifting(w, spaces.tensor, spaces.faces, fr);
    const Field z = nodal_interpolate(
        [](const Vec2& x) { return 0.25 + x.x - 0.5 * x.y; }, spaces.pressure);
    double ibp = 0.0;
    for (int c = 0; c < mesh.cell_count(); ++c)
      for (std::size_t q = 0; q < spaces.volume_rule.size(); ++q) {
        const double wq = 2.0 * mesh.cell_area(c) * spaces.volume_rule.w[q];
        const double div =
            dg_divergence_at(w, Rw, c, spaces.volume_rule.x[q], spaces.volume_rule.y[q]);
        const double zv =
            evaluate_scalar(z, c, spaces.volume_rule.x[q], spaces.volume_rule.y[q]);
        const Vec2 gz = evaluate_scalar_gradient(z, c, spaces.volume_rule.x[q],
                                                 spaces.volume_rule.y[q]);
        const Vec2 wv =
            evaluate_vector(w, c, spaces.volume_rule.x[q], spaces.volume_rule.y[q]);
        ibp += wq * (div * zv + wv.dot(gz));
      }
    ctx.report("divergence duality <= 1e-10", std::abs(ibp) <= 1e-10, ibp);

    // Korn ratio across levels
    double korn = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const Field f = random_broken_vector(spaces.velocity, rng);
      const double full = dg_norm(f, 2.5, spaces.h, spaces.faces, spaces.volume_rule, fr);
      const double symn =
          sym_dg_norm(f, 2.5, spaces.h, spaces.faces, spaces.volume_rule, fr);
      korn = std::max(korn, full / symn);
    }
    if (level > 0)
      ctx.report("Korn ratio non-inflating", korn <= 1.1 * prev_korn, korn / prev_korn);
    prev_korn = korn;

    // projection idempotence
    const QuadratureRule& vr = spaces.volume_rule;
    const TensorFn smooth = [](const Vec2& x) {
      return Tensor2{std::sin(x.x), x.x * x.y, std::cos(x.y), x.y - 0.3 * x.x};
    };
    const Field P1 = l2_project(smooth, spaces.tensor, vr);
    const Field P2 = l2_project(P1, spaces.tensor, vr);
    const double idem = (P1.coeffs - P2.coeffs).cwiseAbs().maxCoeff();
    ctx.report("projection idempotent <= 1e-13", idem <= 1e-13, idem);
  }
}

int run_check(const RunConfig& cfg) {
  std::mt19937 rng(cfg.seed);
  CheckContext ctx;
  check_constitutive(ctx, rng);
  check_operators(ctx, rng);
  if (ctx.failures > 0) {
    std::cout << ctx.failures << " check(s) failed\n";
    return 1;
  }
  std::cout << "all checks passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    usage(std::cerr);
    return 2;
  }
  const std::string mode = argv[1];
  std::vector<std::string> args(argv + 2, argv + argc);
  try {
    if (mode == "study") return run_study(parse_config(args, RunMode::Study));
    if (mode == "solve") return run_solve(parse_config(args, RunMode::Solve));
    if (mode == "check") return run_check(parse_config(args, RunMode::Check));
    if (mode == "--help" || mode == "-h" || mode == "help") {
      usage(std::cout);
      return 0;
    }
    usage(std::cerr);
    throw ldg::ConfigError("unknown subcommand '" + mode + "'");
  } catch (const ldg::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ldg::SolveError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ldg::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
