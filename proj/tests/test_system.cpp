#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ldg/system.hpp"

using namespace ldg;

namespace {

std::mt19937 rng(1123581321);

ProblemData zero_data(double p, double delta, ModelKind model, double alpha = 2.5) {
  ProblemData data(NFunctionParams(p, delta), alpha, model);
  data.body_force = [](const Vec2&) { return Vec2{}; };
  data.tensor_force = [](const Vec2&) { return Tensor2{}; };
  data.divergence = [](const Vec2&) { return 0.0; };
  data.boundary_velocity = [](const Vec2&) { return Vec2{}; };
  data.boundary_velocity_gradient = [](const Vec2&) { return Tensor2{}; };
  return data;
}

// affine divergence-free velocity with linear zero-mean pressure and the
// matching data realization for p = 2, delta = 0
struct PatchProblem {
  Tensor2 A{0.3, 0.7, 0.2, -0.3};  // trace-free
  Vec2 shift{0.1, -0.2};

  Vec2 velocity(const Vec2& x) const { return A.apply(x) + shift; }
  double pressure(const Vec2& x) const { return x.x + 2.0 * x.y; }

  ProblemData data() const {
    ProblemData d(NFunctionParams(2.0, 0.0), 2.5, ModelKind::PStokes);
    const Tensor2 A_ = A;
    const Vec2 shift_ = shift;
    d.body_force = [](const Vec2&) { return Vec2{}; };
    d.divergence = [](const Vec2&) { return 0.0; };
    d.boundary_velocity = [A_, shift_](const Vec2& x) { return A_.apply(x) + shift_; };
    d.boundary_velocity_gradient = [A_](const Vec2&) { return A_; };
    d.tensor_force = [A_, this](const Vec2& x) {
      return A_.sym() - pressure(x) * Tensor2::identity();
    };
    return d;
  }
};

DiscreteSolution random_state(const Spaces& spaces, double scale = 0.5) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  DiscreteSolution s = zero_solution(spaces);
  for (long i = 0; i < s.velocity.coeffs.size(); ++i) s.velocity.coeffs[i] = dist(rng);
  for (long i = 0; i < s.pressure.coeffs.size(); ++i) s.pressure.coeffs[i] = dist(rng);
  s.multiplier = dist(rng);
  return s;
}

}  // namespace

TEST_CASE("zero data and zero state give an exactly zero residual") {
  const Mesh mesh = generate_square_mesh(2);
  const Spaces spaces = make_spaces(mesh, 1);
  const ProblemData data = zero_data(2.5, 1e-4, ModelKind::PNavierStokes);
  const Eigen::VectorXd F = assemble_residual(zero_solution(spaces), data, spaces);
  CHECK(F.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("incompatible divergence data is rejected") {
  const Mesh mesh = generate_square_mesh(2);
  const Spaces spaces = make_spaces(mesh, 1);
  ProblemData data = zero_data(2.0, 0.0, ModelKind::PStokes);
  data.divergence = [](const Vec2&) { return 1.0; };  // no matching flux
  CHECK_THROWS_AS(System(spaces, data), ConfigError);
}

TEST_CASE("linear patch test: exact pair is recovered in one Newton step") {
  const PatchProblem patch;
  const ProblemData data = patch.data();
  const Mesh mesh = generate_square_mesh(4);
  const Spaces spaces = make_spaces(mesh, 1);

  // the interpolated exact pair solves the discrete problem exactly
  DiscreteSolution exact = zero_solution(spaces);
  exact.velocity = l2_project(VectorFn([&](const Vec2& x) { return patch.velocity(x); }),
                              spaces.velocity, spaces.volume_rule);
  exact.pressure =
      nodal_interpolate([&](const Vec2& x) { return patch.pressure(x); }, spaces.pressure);
  const Eigen::VectorXd F = assemble_residual(exact, data, spaces);
  CHECK(F.norm() <= 1e-10);

  NewtonLog log;
  const DiscreteSolution sol =
      newton_solve(zero_solution(spaces), data, spaces, NewtonOptions{}, &log);
  CHECK(log.iterations == 1);
  CHECK(log.residual_norms.back() <= 1e-9);
  CHECK((sol.velocity.coeffs - exact.velocity.coeffs).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((sol.pressure.coeffs - exact.pressure.coeffs).cwiseAbs().maxCoeff() <= 1e-9);

  // restarting from the solution converges without moving
  NewtonLog log2;
  const DiscreteSolution sol2 = newton_solve(sol, data, spaces, NewtonOptions{}, &log2);
  CHECK(log2.iterations <= 1);
  CHECK((sol2.velocity.coeffs - sol.velocity.coeffs).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("jacobian matches dense finite differences, including the pattern") {
  const Mesh mesh = generate_square_mesh(2);
  const Spaces spaces = make_spaces(mesh, 1, 4, 4);
  ProblemData data = zero_data(2.5, 1e-2, ModelKind::PNavierStokes);
  data.boundary_velocity = [](const Vec2& x) { return Vec2{x.y, -x.x}; };
  data.body_force = [](const Vec2& x) { return Vec2{x.x, x.y * x.x}; };
  data.tensor_force = [](const Vec2& x) { return Tensor2{x.y, 0.0, 1.0, x.x}; };

  const System sys(spaces, data);
  const Eigen::VectorXd x = sys.pack(random_state(spaces));
  const Eigen::SparseMatrix<double> J = sys.jacobian(x);
  const Eigen::MatrixXd Jd = Eigen::MatrixXd(J);

  const long n = x.size();
  Eigen::MatrixXd fd(n, n);
  const double h = 1e-6;
  for (long j = 0; j < n; ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    fd.col(j) = (sys.residual(xp) - sys.residual(xm)) / (2.0 * h);
  }
  const double scale = fd.cwiseAbs().maxCoeff();
  CHECK((fd - Jd).cwiseAbs().maxCoeff() <= 2e-6 * scale);

  // structural check: every detectable coupling lies inside the assembled
  // pattern (lifting makes velocity dofs couple across two face layers)
  Eigen::MatrixXd pattern = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < J.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(J, k); it; ++it)
      pattern(it.row(), it.col()) = 1.0;
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      if (std::abs(fd(i, j)) > 1e-7 * scale) CHECK(pattern(i, j) == 1.0);
}

TEST_CASE("directional jacobian check for the pure p-Stokes model") {
  const Mesh mesh = generate_square_mesh(2);
  const Spaces spaces = make_spaces(mesh, 1, 4, 4);
  ProblemData data = zero_data(3.0, 1e-4, ModelKind::PStokes);
  data.boundary_velocity = [](const Vec2& x) { return Vec2{x.y, -x.x}; };

  const System sys(spaces, data);
  const Eigen::VectorXd x = sys.pack(random_state(spaces));
  const Eigen::SparseMatrix<double> J = sys.jacobian(x);
  Eigen::VectorXd dir(x.size());
  for (long i = 0; i < x.size(); ++i) dir[i] = std::cos(0.83 * i);
  dir.normalize();
  const double h = 1e-6;
  const Eigen::VectorXd fd = (sys.residual(x + h * dir) - sys.residual(x - h * dir)) / (2 * h);
  const Eigen::VectorXd jd = J * dir;
  CHECK((fd - jd).norm() <= 1e-6 * (1.0 + jd.norm()));
}

TEST_CASE("p=2 p-Stokes jacobian is independent of the state") {
  const Mesh mesh = generate_square_mesh(2);
  const Spaces spaces = make_spaces(mesh, 1, 4, 4);
  const ProblemData data = zero_data(2.0, 0.0, ModelKind::PStokes);
  const System sys(spaces, data);
  const Eigen::SparseMatrix<double> J0 = sys.jacobian(sys.pack(zero_solution(spaces)));
  const Eigen::SparseMatrix<double> J1 = sys.jacobian(sys.pack(random_state(spaces)));
  CHECK((Eigen::MatrixXd(J0) - Eigen::MatrixXd(J1)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("mean constraint row and column are the transposed weights") {
  const Mesh mesh = generate_square_mesh(2);
  const Spaces spaces = make_spaces(mesh, 1);
  const ProblemData data = zero_data(2.0, 0.0, ModelKind::PStokes);
  const System sys(spaces, data);
  const Eigen::MatrixXd J = Eigen::MatrixXd(sys.jacobian(sys.pack(zero_solution(spaces))));
  const long n = J.rows();
  const long nv = sys.pressure_offset();
  // column and row borders agree, and the weights integrate hats over cells
  for (long j = nv; j < n - 1; ++j) CHECK(J(j, n - 1) == doctest::Approx(J(n - 1, j)));
  double total = 0.0;
  for (long j = nv; j < n - 1; ++j) total += J(n - 1, j);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-13));  // <1>_Omega = 1
}

TEST_CASE("monotonicity of the viscous-plus-penalty part") {
  const Mesh mesh = generate_square_mesh(2);
  const Spaces spaces = make_spaces(mesh, 1);
  for (double p : {1.8, 2.5, 3.0}) {
    const ProblemData data = zero_data(p, 1e-4, ModelKind::PStokes);
    const System sys(spaces, data);
    const long nv = sys.pressure_offset();
    for (int trial = 0; trial < 10; ++trial) {
      DiscreteSolution u = random_state(spaces);
      DiscreteSolution w = random_state(spaces);
      w.pressure = u.pressure;
      w.multiplier = u.multiplier;
      const Eigen::VectorXd Fu = sys.residual(sys.pack(u));
      const Eigen::VectorXd Fw = sys.residual(sys.pack(w));
      const Eigen::VectorXd du = u.velocity.coeffs - w.velocity.coeffs;
      const double pairing = (Fu.head(nv) - Fw.head(nv)).dot(du);
      CHECK(pairing >= -1e-10 * (1.0 + std::abs(pairing)));
    }
  }
}

TEST_CASE("reconstructed auxiliary fields") {
  const Mesh mesh = generate_square_mesh(4);
  const Spaces spaces = make_spaces(mesh, 1);

  // conforming polynomial velocity with zero trace and v* = 0: L_h = grad v_h
  ProblemData data = zero_data(2.0, 0.0, ModelKind::PStokes);
  const System sys(spaces, data);
  DiscreteSolution s = zero_solution(spaces);
  s.velocity = l2_project(
      VectorFn([](const Vec2& x) {
        return Vec2{0.25 * (x.x + x.y), -0.5 * x.x};
      }),
      spaces.velocity, spaces.volume_rule);
  // zero the trace by subtracting the same field's boundary values: instead
  // use a field with interior support is impossible in P1; accept nonzero
  // boundary jumps and compare against grad minus the full lifting
  const AuxiliaryFields aux = sys.reconstruct(s);
  const Field lift = lifting(s.velocity, spaces.tensor, spaces.faces, spaces.face_rule);
  for (int c = 0; c < mesh.cell_count(); c += 3) {
    const Tensor2 L = evaluate_tensor(aux.gradient, c, 0.3, 0.4);
    const Tensor2 expected = dg_gradient_at(s.velocity, lift, c, 0.3, 0.4);
    CHECK((L - expected).norm() <= 1e-12);
    // p=2, delta=0: S_h equals the symmetric part of L_h
    const Tensor2 S = evaluate_tensor(aux.stress, c, 0.3, 0.4);
    CHECK((S - L.sym()).norm() <= 1e-12);
  }

  // K_h projects v x v
  const Field K = aux.convection;
  for (int c = 0; c < mesh.cell_count(); c += 5) {
    const Vec2 v = evaluate_vector(s.velocity, c, 0.25, 0.25);
    const Tensor2 Kv = evaluate_tensor(K, c, 0.25, 0.25);
    // v x v is quadratic; its P1 projection differs, so only check the mean
    double diff = 0.0;
    Tensor2 mean_K{}, mean_vv{};
    for (std::size_t q = 0; q < spaces.volume_rule.size(); ++q) {
      const Vec2 vq = evaluate_vector(s.velocity, c, spaces.volume_rule.x[q],
                                      spaces.volume_rule.y[q]);
      mean_K += (2.0 * spaces.volume_rule.w[q]) *
                evaluate_tensor(K, c, spaces.volume_rule.x[q], spaces.volume_rule.y[q]);
      mean_vv += (2.0 * spaces.volume_rule.w[q]) * Tensor2::outer(vq, vq);
    }
    diff = (mean_K - mean_vv).norm();
    CHECK(diff <= 1e-12);
    (void)v;
    (void)Kv;
  }
}

TEST_CASE("flux-form pairing matches the assembled viscous term") {
  const Mesh mesh = generate_square_mesh(2);
  const Spaces spaces = make_spaces(mesh, 1);
  ProblemData data = zero_data(2.7, 1e-3, ModelKind::PStokes);
  const System sys(spaces, data);
  const DiscreteSolution state = random_state(spaces);
  Eigen::VectorXd x = sys.pack(state);
  // isolate the viscous part: subtract penalty and pressure contributions by
  // rebuilding the residual with q = 0 and alpha -> 0 is not possible, so
  // compare instead on the full residual minus an independent recomputation
  // of every non-viscous term; here we exploit q = 0, zero loads instead.
  DiscreteSolution vonly = state;
  vonly.pressure.coeffs.setZero();
  vonly.multiplier = 0.0;
  x = sys.pack(vonly);
  const Eigen::VectorXd F = sys.residual(x);

  const AuxiliaryFields aux = sys.reconstruct(vonly);
  const Field lift = lifting(vonly.velocity, spaces.tensor, spaces.faces, spaces.face_rule);
  const StressLaw law(data.params);

  // direct evaluation of (S_h, D_h phi_i) = (S_h, sym grad phi_i)
  //   - <[[phi_i x n]], {S_h}> plus the penalty term, for a sample of dofs
  const int nsc = spaces.velocity.scalar_dim;
  std::vector<double> psi(nsc);
  std::vector<Vec2> gpsi(nsc);
  for (long i : {0L, 5L, 17L, 29L, 40L, 47L}) {
    const int cell = static_cast<int>(i / spaces.velocity.dofs_per_cell);
    const int local = static_cast<int>(i % spaces.velocity.dofs_per_cell);
    const int comp = local / nsc, mode = local % nsc;
    double direct = 0.0;
    for (std::size_t q = 0; q < spaces.volume_rule.size(); ++q) {
      const double wq = 2.0 * mesh.cell_area(cell) * spaces.volume_rule.w[q];
      const Tensor2 Sh =
          evaluate_tensor(aux.stress, cell, spaces.volume_rule.x[q], spaces.volume_rule.y[q]);
      spaces.velocity.scalar_gradients(spaces.volume_rule.x[q], spaces.volume_rule.y[q],
                                       gpsi.data());
      const Tensor2 Jm = mesh.cell_jacobian(cell);
      const double det = Jm.a11 * Jm.a22 - Jm.a12 * Jm.a21;
      const Vec2 g = gpsi[mode];
      const Vec2 gphys{(Jm.a22 * g.x - Jm.a21 * g.y) / det,
                       (-Jm.a12 * g.x + Jm.a11 * g.y) / det};
      Tensor2 grad_phi{};
      if (comp == 0) {
        grad_phi.a11 = gphys.x;
        grad_phi.a12 = gphys.y;
      } else {
        grad_phi.a21 = gphys.x;
        grad_phi.a22 = gphys.y;
      }
      direct += wq * Sh.dot(grad_phi.sym());
    }
    for (const Face& face : spaces.faces.faces) {
      const bool on_minus = face.minus_cell == cell;
      const bool on_plus = !face.is_boundary() && face.plus_cell == cell;
      if (!on_minus && !on_plus) continue;
      for (std::size_t q = 0; q < spaces.face_rule.size(); ++q) {
        const FacePoint pt = face_point(mesh, face, spaces.face_rule.t[q]);
        Tensor2 Savg = evaluate_tensor(aux.stress, face.minus_cell, pt.xi_minus, pt.eta_minus);
        if (!face.is_boundary())
          Savg = 0.5 * (Savg + evaluate_tensor(aux.stress, face.plus_cell, pt.xi_plus,
                                               pt.eta_plus));
        const double xi = on_minus ? pt.xi_minus : pt.xi_plus;
        const double eta = on_minus ? pt.eta_minus : pt.eta_plus;
        spaces.velocity.scalar_values(xi, eta, psi.data());
        const Vec2 nrm = on_minus ? face.normal : face.normal * -1.0;
        Vec2 phi{};
        if (comp == 0)
          phi.x = psi[mode];
        else
          phi.y = psi[mode];
        direct -= spaces.face_rule.w[q] * face.length * Tensor2::outer(phi, nrm).dot(Savg);
        // the stabilization flux
        const Tensor2 jump = face.is_boundary()
                                 ? Tensor2::outer(evaluate_vector(vonly.velocity,
                                                                  face.minus_cell,
                                                                  pt.xi_minus, pt.eta_minus),
                                                  face.normal)
                                 : face_jump_tensor(vonly.velocity, face, pt);
        const Tensor2 Spen = stress(law, (1.0 / spaces.h) * jump);
        direct += data.alpha * spaces.face_rule.w[q] * face.length *
                  Spen.dot(Tensor2::outer(phi, nrm));
      }
    }
    CHECK(F[i] == doctest::Approx(direct).epsilon(1e-10));
  }
  (void)lift;
}

TEST_CASE("linear_solve: identity, saddle example, SPD residual contract") {
  {
    Eigen::SparseMatrix<double> I(3, 3);
    I.setIdentity();
    Eigen::VectorXd b(3);
    b << 1.0, -2.0, 0.5;
    CHECK((linear_solve(I, b) - b).norm() == 0.0);
  }
  {
    Eigen::SparseMatrix<double> A(2, 2);
    std::vector<Eigen::Triplet<double>> t{{0, 1, 1.0}, {1, 0, 1.0}};
    A.setFromTriplets(t.begin(), t.end());
    Eigen::VectorXd b(2);
    b << 1.0, 2.0;
    const Eigen::VectorXd x = linear_solve(A, b);
    CHECK(x[0] == doctest::Approx(2.0));
    CHECK(x[1] == doctest::Approx(1.0));
  }
  {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Eigen::MatrixXd M(50, 50);
    for (int i = 0; i < 50; ++i)
      for (int j = 0; j < 50; ++j) M(i, j) = dist(rng);
    const Eigen::MatrixXd spd = M * M.transpose() + 50.0 * Eigen::MatrixXd::Identity(50, 50);
    Eigen::SparseMatrix<double> A = spd.sparseView();
    Eigen::VectorXd b(50);
    for (int i = 0; i < 50; ++i) b[i] = dist(rng);
    const Eigen::VectorXd x = linear_solve(A, b);
    CHECK((A * x - b).norm() <= 1e-11 * b.norm());
  }
  {
    // singular matrix must raise a solver error
    Eigen::SparseMatrix<double> S(2, 2);
    std::vector<Eigen::Triplet<double>> t{{0, 0, 1.0}, {1, 0, 1.0}};
    S.setFromTriplets(t.begin(), t.end());
    Eigen::VectorXd b(2);
    b << 1.0, 2.0;
    CHECK_THROWS_AS(linear_solve(S, b), SolveError);
  }
}

TEST_CASE("newton failure carries the iteration log") {
  const Mesh mesh = generate_square_mesh(2);
  const Spaces spaces = make_spaces(mesh, 1);
  const PatchProblem patch;
  const ProblemData data = patch.data();
  NewtonOptions opts;
  opts.max_iter = 0;
  try {
    newton_solve(zero_solution(spaces), data, spaces, opts);
    CHECK(false);
  } catch (const SolveError& e) {
    CHECK(std::string(e.what()).find("residuals") != std::string::npos);
  }
}
