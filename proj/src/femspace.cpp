#include "ldg/femspace.hpp"

#include <cmath>
#include <map>

namespace ldg {

namespace {

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

// int_T xi^a eta^b = a! b! / (a+b+2)!
double monomial_moment(int a, int b) {
  return factorial(a) * factorial(b) / factorial(a + b + 2);
}

}  // namespace

ReferenceBasis::ReferenceBasis(int degree) : degree_(degree) {
  if (degree < 0 || degree > 6)
    throw ConfigError("ReferenceBasis: degree must be in [0,6]");
  dim_ = (degree + 1) * (degree + 2) / 2;
  for (int d = 0; d <= degree; ++d)
    for (int a = d; a >= 0; --a) expo_.emplace_back(a, d - a);

  Eigen::MatrixXd gram(dim_, dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j)
      gram(i, j) = monomial_moment(expo_[i].first + expo_[j].first,
                                   expo_[i].second + expo_[j].second);
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("ReferenceBasis: Gram factorization failed");
  Eigen::MatrixXd L = llt.matrixL();
  coeff_ = L.triangularView<Eigen::Lower>()
               .solve(Eigen::MatrixXd::Identity(dim_, dim_));
}

double ReferenceBasis::value(int i, double xi, double eta) const {
  double sum = 0.0;
  for (int j = 0; j <= i; ++j) {
    if (coeff_(i, j) == 0.0) continue;
    sum += coeff_(i, j) * std::pow(xi, expo_[j].first) * std::pow(eta, expo_[j].second);
  }
  return sum;
}

Vec2 ReferenceBasis::gradient(int i, double xi, double eta) const {
  Vec2 g;
  for (int j = 0; j <= i; ++j) {
    if (coeff_(i, j) == 0.0) continue;
    const int a = expo_[j].first, b = expo_[j].second;
    if (a > 0) g.x += coeff_(i, j) * a * std::pow(xi, a - 1) * std::pow(eta, b);
    if (b > 0) g.y += coeff_(i, j) * b * std::pow(xi, a) * std::pow(eta, b - 1);
  }
  return g;
}

void Space::scalar_values(double xi, double eta, double* out) const {
  if (is_broken()) {
    for (int i = 0; i < scalar_dim; ++i) out[i] = basis->value(i, xi, eta);
    return;
  }
  const double l0 = 1.0 - xi - eta, l1 = xi, l2 = eta;
  if (degree == 1) {
    out[0] = l0;
    out[1] = l1;
    out[2] = l2;
  } else {
    out[0] = l0 * (2.0 * l0 - 1.0);
    out[1] = l1 * (2.0 * l1 - 1.0);
    out[2] = l2 * (2.0 * l2 - 1.0);
    out[3] = 4.0 * l0 * l1;
    out[4] = 4.0 * l1 * l2;
    out[5] = 4.0 * l2 * l0;
  }
}

void Space::scalar_gradients(double xi, double eta, Vec2* out) const {
  if (is_broken()) {
    for (int i = 0; i < scalar_dim; ++i) out[i] = basis->gradient(i, xi, eta);
    return;
  }
  const double l0 = 1.0 - xi - eta, l1 = xi, l2 = eta;
  const Vec2 g0{-1.0, -1.0}, g1{1.0, 0.0}, g2{0.0, 1.0};
  if (degree == 1) {
    out[0] = g0;
    out[1] = g1;
    out[2] = g2;
  } else {
    out[0] = (4.0 * l0 - 1.0) * g0;
    out[1] = (4.0 * l1 - 1.0) * g1;
    out[2] = (4.0 * l2 - 1.0) * g2;
    out[3] = 4.0 * (l1 * g0 + l0 * g1);
    out[4] = 4.0 * (l2 * g1 + l1 * g2);
    out[5] = 4.0 * (l0 * g2 + l2 * g0);
  }
}

Vec2 Space::node_position(long dof) const {
  if (is_broken()) throw ConfigError("node_position: broken spaces have no nodes");
  if (dof < mesh->vertex_count()) return mesh->vertices[dof];
  // edge midpoint nodes are appended after the vertices (degree 2)
  throw ConfigError("node_position: use cell-wise node enumeration for k=2");
}

Space make_space(const Mesh& mesh, SpaceKind kind, int k) {
  Space s;
  s.mesh = &mesh;
  s.kind = kind;
  s.degree = k;
  if (kind == SpaceKind::ContinuousScalar) {
    if (k < 1 || k > 2)
      throw ConfigError("make_space: ContinuousScalar supports k in {1,2}");
    s.components = 1;
    s.scalar_dim = (k == 1) ? 3 : 6;
    s.dofs_per_cell = s.scalar_dim;
    s.cell_dofs.resize(static_cast<long>(mesh.cell_count()) * s.dofs_per_cell);
    std::map<std::pair<int, int>, long> edge_ids;
    if (k == 2) {
      for (int c = 0; c < mesh.cell_count(); ++c)
        for (int e = 0; e < 3; ++e)
          edge_ids.emplace(std::minmax(mesh.cells[c][e], mesh.cells[c][(e + 1) % 3]), 0);
      long next = mesh.vertex_count();
      for (auto& [key, id] : edge_ids) id = next++;
    }
    for (int c = 0; c < mesh.cell_count(); ++c) {
      for (int v = 0; v < 3; ++v)
        s.cell_dofs[static_cast<long>(c) * s.dofs_per_cell + v] = mesh.cells[c][v];
      if (k == 2)
        for (int e = 0; e < 3; ++e)
          s.cell_dofs[static_cast<long>(c) * s.dofs_per_cell + 3 + e] =
              edge_ids[std::minmax(mesh.cells[c][e], mesh.cells[c][(e + 1) % 3])];
    }
    s.dof_count = mesh.vertex_count() + static_cast<long>(k == 2 ? edge_ids.size() : 0);
    return s;
  }

  if (k < 0) throw ConfigError("make_space: negative degree");
  s.components = (kind == SpaceKind::BrokenScalar) ? 1
                 : (kind == SpaceKind::BrokenVector) ? 2
                                                     : 4;
  s.basis = std::make_shared<ReferenceBasis>(k);
  s.scalar_dim = s.basis->dim();
  s.dofs_per_cell = s.components * s.scalar_dim;
  s.dof_count = static_cast<long>(mesh.cell_count()) * s.dofs_per_cell;
  s.cell_dofs.resize(s.dof_count);
  for (long i = 0; i < s.dof_count; ++i) s.cell_dofs[i] = i;
  return s;
}

namespace {

// Accumulate component values at a point: out[c] = sum_m coeff[(c,m)] psi_m.
void component_values(const Field& f, int cell, double xi, double eta, double* out) {
  const Space& s = *f.space;
  std::vector<double> psi(s.scalar_dim);
  s.scalar_values(xi, eta, psi.data());
  for (int c = 0; c < s.components; ++c) {
    double sum = 0.0;
    for (int m = 0; m < s.scalar_dim; ++m)
      sum += f.coeffs[s.cell_dof(cell, c * s.scalar_dim + m)] * psi[m];
    out[c] = sum;
  }
}

void component_gradients(const Field& f, int cell, double xi, double eta, Vec2* out) {
  const Space& s = *f.space;
  std::vector<Vec2> gref(s.scalar_dim);
  s.scalar_gradients(xi, eta, gref.data());
  const Tensor2 J = s.mesh->cell_jacobian(cell);
  const double det = J.a11 * J.a22 - J.a12 * J.a21;
  // physical gradient = J^{-T} reference gradient
  auto to_phys = [&](const Vec2& g) {
    return Vec2{(J.a22 * g.x - J.a21 * g.y) / det, (-J.a12 * g.x + J.a11 * g.y) / det};
  };
  for (int c = 0; c < s.components; ++c) {
    Vec2 sum;
    for (int m = 0; m < s.scalar_dim; ++m)
      sum += f.coeffs[s.cell_dof(cell, c * s.scalar_dim + m)] * gref[m];
    out[c] = to_phys(sum);
  }
}

}  // namespace

double evaluate_scalar(const Field& f, int cell, double xi, double eta) {
  if (cell < 0 || cell >= f.space->mesh->cell_count())
    throw std::out_of_range("evaluate_scalar: cell index");
  double v;
  component_values(f, cell, xi, eta, &v);
  return v;
}

Vec2 evaluate_vector(const Field& f, int cell, double xi, double eta) {
  if (cell < 0 || cell >= f.space->mesh->cell_count())
    throw std::out_of_range("evaluate_vector: cell index");
  double v[2];
  component_values(f, cell, xi, eta, v);
  return {v[0], v[1]};
}

Tensor2 evaluate_tensor(const Field& f, int cell, double xi, double eta) {
  if (cell < 0 || cell >= f.space->mesh->cell_count())
    throw std::out_of_range("evaluate_tensor: cell index");
  double v[4];
  component_values(f, cell, xi, eta, v);
  return {v[0], v[1], v[2], v[3]};
}

Vec2 evaluate_scalar_gradient(const Field& f, int cell, double xi, double eta) {
  Vec2 g;
  component_gradients(f, cell, xi, eta, &g);
  return g;
}

Tensor2 evaluate_vector_gradient(const Field& f, int cell, double xi, double eta) {
  Vec2 g[2];
  component_gradients(f, cell, xi, eta, g);
  return {g[0].x, g[0].y, g[1].x, g[1].y};
}

namespace {

template <typename Eval>
Field project_components(const Eval& values_at, const Space& target,
                         const QuadratureRule& rule) {
  if (!target.is_broken())
    throw ConfigError("l2_project: target must be a broken space");
  const Mesh& mesh = *target.mesh;
  Field out(target);
  const int nsc = target.scalar_dim, ncomp = target.components;
  std::vector<double> psi(static_cast<std::size_t>(rule.size()) * nsc);
  for (std::size_t q = 0; q < rule.size(); ++q)
    target.scalar_values(rule.x[q], rule.y[q], &psi[q * nsc]);

  // The basis is orthonormal on the reference cell, so the physical mass
  // matrix is 2|K| I and the affine factors cancel: the projection is a
  // plain reference-measure integral against the basis.
  std::vector<double> vals(ncomp);
  for (int c = 0; c < mesh.cell_count(); ++c) {
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec2 x = mesh.map_to_physical(c, rule.x[q], rule.y[q]);
      values_at(c, rule.x[q], rule.y[q], x, vals.data());
      for (int comp = 0; comp < ncomp; ++comp) {
        const double fw = rule.w[q] * vals[comp];
        for (int m = 0; m < nsc; ++m)
          out.coeffs[target.cell_dof(c, comp * nsc + m)] += fw * psi[q * nsc + m];
      }
    }
  }
  return out;
}

}  // namespace

Field l2_project(const ScalarFn& f, const Space& target, const QuadratureRule& rule) {
  if (target.components != 1) throw ConfigError("l2_project: scalar target expected");
  return project_components(
      [&](int, double, double, const Vec2& x, double* out) { out[0] = f(x); }, target, rule);
}

Field l2_project(const VectorFn& f, const Space& target, const QuadratureRule& rule) {
  if (target.components != 2) throw ConfigError("l2_project: vector target expected");
  return project_components(
      [&](int, double, double, const Vec2& x, double* out) {
        const Vec2 v = f(x);
        out[0] = v.x;
        out[1] = v.y;
      },
      target, rule);
}

Field l2_project(const TensorFn& f, const Space& target, const QuadratureRule& rule) {
  if (target.components != 4) throw ConfigError("l2_project: tensor target expected");
  return project_components(
      [&](int, double, double, const Vec2& x, double* out) {
        const Tensor2 t = f(x);
        out[0] = t.a11;
        out[1] = t.a12;
        out[2] = t.a21;
        out[3] = t.a22;
      },
      target, rule);
}

Field l2_project(const Field& f, const Space& target, const QuadratureRule& rule) {
  if (f.space->mesh != target.mesh)
    throw ConfigError("l2_project: source and target live on different meshes");
  const int ncomp = target.components;
  if (f.space->components != ncomp)
    throw ConfigError("l2_project: component mismatch");
  return project_components(
      [&](int cell, double xi, double eta, const Vec2&, double* out) {
        if (ncomp == 1) {
          out[0] = evaluate_scalar(f, cell, xi, eta);
        } else if (ncomp == 2) {
          const Vec2 v = evaluate_vector(f, cell, xi, eta);
          out[0] = v.x;
          out[1] = v.y;
        } else {
          const Tensor2 t = evaluate_tensor(f, cell, xi, eta);
          out[0] = t.a11;
          out[1] = t.a12;
          out[2] = t.a21;
          out[3] = t.a22;
        }
      },
      target, rule);
}

Field nodal_interpolate(const ScalarFn& f, const Space& target) {
  if (target.is_broken())
    throw ConfigError("nodal_interpolate: ContinuousScalar target expected");
  const Mesh& mesh = *target.mesh;
  Field out(target);
  for (long v = 0; v < mesh.vertex_count(); ++v)
    out.coeffs[v] = f(mesh.vertices[v]);
  if (target.degree == 2) {
    for (int c = 0; c < mesh.cell_count(); ++c) {
      for (int e = 0; e < 3; ++e) {
        const Vec2 a = mesh.vertex_of_cell(c, e);
        const Vec2 b = mesh.vertex_of_cell(c, (e + 1) % 3);
        out.coeffs[target.cell_dof(c, 3 + e)] = f({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
      }
    }
  }
  return out;
}

}  // namespace ldg
