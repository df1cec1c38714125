#include "ldg/system.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace ldg {

Spaces make_spaces(const Mesh& mesh, int k, int volume_degree, int face_degree) {
  if (k < 1) throw ConfigError("make_spaces: k must be >= 1");
  Spaces s;
  s.mesh = &mesh;
  s.k = k;
  s.faces = build_faces(mesh);
  s.velocity = make_space(mesh, SpaceKind::BrokenVector, k);
  s.tensor = make_space(mesh, SpaceKind::BrokenTensor, k);
  s.pressure = make_space(mesh, SpaceKind::ContinuousScalar, k);
  if (volume_degree < 0) volume_degree = 2 * k + 6;
  if (face_degree < 0) face_degree = 2 * k + 6;
  s.volume_rule = quadrature_rule(volume_degree);
  s.face_rule = face_quadrature_rule(face_degree);
  s.h = mesh_metrics(mesh).h;
  return s;
}

DiscreteSolution zero_solution(const Spaces& spaces) {
  DiscreteSolution s;
  s.velocity = Field(spaces.velocity);
  s.pressure = Field(spaces.pressure);
  s.multiplier = 0.0;
  return s;
}

namespace {

constexpr int kTensorComps = 4;

// component index of a 2x2 tensor entry (row i, column j), both 0-based
inline int comp_index(int i, int j) { return 2 * i + j; }

struct FaceSideCache {
  int cell = 0;
  std::vector<double> psi;  // nsc values per quadrature point, flattened
};

struct FaceCache {
  const Face* face = nullptr;
  std::vector<Vec2> x;        // physical quadrature points
  std::vector<double> w;      // weight * length
  std::vector<Vec2> vstar;    // boundary datum at the points (boundary only)
  FaceSideCache side[2];      // [0] = minus; [1] = plus (interior only)
  int sides = 1;
};

}  // namespace

struct System::Impl {
  const Spaces* sp;
  ProblemData prob;
  StressLaw law;

  int nsc = 0;    // scalar basis size of the broken degree-k spaces
  int nvc = 0;    // velocity dofs per cell (2 nsc)
  int ntc = 0;    // tensor dofs per cell (4 nsc)
  long nv = 0, nq = 0, nt = 0;

  // volume tables on the reference cell
  std::vector<double> psi;    // [q*nsc + m]
  std::vector<Vec2> gpsi;     // reference gradients
  std::vector<double> ppsi;   // pressure basis [q*npsc + m]
  std::vector<Vec2> pgpsi;
  int npsc = 0;

  std::vector<double> area;       // per cell
  std::vector<Tensor2> inv_jt;    // transpose-inverse Jacobian per cell

  // per-cell gradient stencil: D/G blocks over the coupled velocity dofs
  std::vector<std::vector<long>> stencil_cols;
  std::vector<Eigen::MatrixXd> Dblock;  // ntc x ncols
  std::vector<Eigen::MatrixXd> Gblock;

  Eigen::VectorXd r_full;  // lifting of v* in the tensor space
  Eigen::VectorXd r_sym;
  Eigen::VectorXd gG;      // projection of the tensor force
  Eigen::VectorXd f_b;     // (body force, phi_i)
  Eigen::VectorXd f_G;     // (Pi G, G_h phi_i)
  Eigen::VectorXd d_star;  // (tr R v* - g, psi_j)
  Eigen::VectorXd mean_w;  // <q> weights, int psi_j / |Omega|
  Eigen::SparseMatrix<double> P;  // (phi_i, grad psi_j)

  std::vector<FaceCache> fcache;

  Impl(const Spaces& spaces, const ProblemData& data)
      : sp(&spaces), prob(data), law(data.params) {
    setup();
  }

  void setup();
  void build_gradient_stencils();
  void build_face_cache();
  void build_loads();
  void check_compatibility() const;

  // tensor-space coefficients of D_h v_h + R^sym v* and G_h v_h + R v*
  void gradient_fields(const Eigen::VectorXd& c, Eigen::VectorXd& a,
                       Eigen::VectorXd& l) const;

  Eigen::VectorXd residual(const Eigen::VectorXd& x) const;
  Eigen::SparseMatrix<double> jacobian(const Eigen::VectorXd& x) const;
};

void System::Impl::setup() {
  const Mesh& mesh = *sp->mesh;
  nsc = sp->velocity.scalar_dim;
  nvc = sp->velocity.dofs_per_cell;
  ntc = sp->tensor.dofs_per_cell;
  nv = sp->velocity.dof_count;
  nq = sp->pressure.dof_count;
  nt = sp->tensor.dof_count;
  npsc = sp->pressure.scalar_dim;

  const QuadratureRule& vr = sp->volume_rule;
  psi.resize(vr.size() * nsc);
  gpsi.resize(vr.size() * nsc);
  ppsi.resize(vr.size() * npsc);
  pgpsi.resize(vr.size() * npsc);
  for (std::size_t q = 0; q < vr.size(); ++q) {
    sp->velocity.scalar_values(vr.x[q], vr.y[q], &psi[q * nsc]);
    sp->velocity.scalar_gradients(vr.x[q], vr.y[q], &gpsi[q * nsc]);
    sp->pressure.scalar_values(vr.x[q], vr.y[q], &ppsi[q * npsc]);
    sp->pressure.scalar_gradients(vr.x[q], vr.y[q], &pgpsi[q * npsc]);
  }

  area.resize(mesh.cell_count());
  inv_jt.resize(mesh.cell_count());
  for (int c = 0; c < mesh.cell_count(); ++c) {
    area[c] = mesh.cell_area(c);
    const Tensor2 J = mesh.cell_jacobian(c);
    const double det = J.a11 * J.a22 - J.a12 * J.a21;
    inv_jt[c] = Tensor2{J.a22 / det, -J.a21 / det, -J.a12 / det, J.a11 / det};
  }

  build_face_cache();
  build_gradient_stencils();
  build_loads();
  check_compatibility();
}

void System::Impl::build_face_cache() {
  const Mesh& mesh = *sp->mesh;
  const FaceQuadratureRule& fr = sp->face_rule;
  fcache.resize(sp->faces.faces.size());
  for (std::size_t f = 0; f < sp->faces.faces.size(); ++f) {
    const Face& face = sp->faces.faces[f];
    FaceCache& fc = fcache[f];
    fc.face = &face;
    fc.sides = face.is_boundary() ? 1 : 2;
    fc.side[0].cell = face.minus_cell;
    fc.side[1].cell = face.plus_cell;
    fc.x.resize(fr.size());
    fc.w.resize(fr.size());
    fc.side[0].psi.resize(fr.size() * nsc);
    if (fc.sides == 2) fc.side[1].psi.resize(fr.size() * nsc);
    if (face.is_boundary()) fc.vstar.resize(fr.size());
    for (std::size_t q = 0; q < fr.size(); ++q) {
      const FacePoint pt = face_point(mesh, face, fr.t[q]);
      fc.x[q] = pt.x;
      fc.w[q] = fr.w[q] * face.length;
      sp->velocity.scalar_values(pt.xi_minus, pt.eta_minus, &fc.side[0].psi[q * nsc]);
      if (fc.sides == 2)
        sp->velocity.scalar_values(pt.xi_plus, pt.eta_plus, &fc.side[1].psi[q * nsc]);
      if (face.is_boundary()) fc.vstar[q] = prob.boundary_velocity(pt.x);
    }
  }
}

void System::Impl::build_gradient_stencils() {
  const Mesh& mesh = *sp->mesh;
  const int ncells = mesh.cell_count();
  const QuadratureRule& vr = sp->volume_rule;

  std::vector<std::vector<int>> neighbor_cells(ncells);
  for (const Face& face : sp->faces.faces) {
    if (face.is_boundary()) continue;
    neighbor_cells[face.minus_cell].push_back(face.plus_cell);
    neighbor_cells[face.plus_cell].push_back(face.minus_cell);
  }

  stencil_cols.resize(ncells);
  Dblock.resize(ncells);
  Gblock.resize(ncells);
  std::vector<std::vector<int>> stencil_cells(ncells);
  for (int c = 0; c < ncells; ++c) {
    auto& cells = stencil_cells[c];
    cells.push_back(c);
    for (int n : neighbor_cells[c]) cells.push_back(n);
    std::sort(cells.begin() + 1, cells.end());
    auto& cols = stencil_cols[c];
    for (int cc : cells)
      for (int d = 0; d < nvc; ++d) cols.push_back(sp->velocity.cell_dof(cc, d));
    Gblock[c] = Eigen::MatrixXd::Zero(ntc, static_cast<long>(cols.size()));
  }
  auto local_col = [&](int cell, int in_cell, int dof) {
    const auto& cells = stencil_cells[cell];
    for (std::size_t s = 0; s < cells.size(); ++s)
      if (cells[s] == in_cell) return static_cast<int>(s) * nvc + dof;
    throw std::logic_error("gradient stencil: cell not in own stencil");
  };

  // broken gradient: expand grad(psi_n e_d) in the cell tensor basis
  for (int c = 0; c < ncells; ++c) {
    Eigen::MatrixXd& G = Gblock[c];
    for (std::size_t q = 0; q < vr.size(); ++q) {
      for (int n = 0; n < nsc; ++n) {
        const Vec2 gr = gpsi[q * nsc + n];
        const Vec2 gphys = {inv_jt[c].a11 * gr.x + inv_jt[c].a12 * gr.y,
                            inv_jt[c].a21 * gr.x + inv_jt[c].a22 * gr.y};
        for (int d = 0; d < 2; ++d) {
          const int col = local_col(c, c, d * nsc + n);
          for (int m = 0; m < nsc; ++m) {
            const double wpsi = vr.w[q] * psi[q * nsc + m];
            G(comp_index(d, 0) * nsc + m, col) += wpsi * gphys.x;
            G(comp_index(d, 1) * nsc + m, col) += wpsi * gphys.y;
          }
        }
      }
    }
  }

  // minus the lifting: R rows of cell K collect the faces of K
  const FaceQuadratureRule& fr = sp->face_rule;
  for (const FaceCache& fc : fcache) {
    const Face& face = *fc.face;
    const double avg = face.is_boundary() ? 1.0 : 0.5;
    for (int si = 0; si < fc.sides; ++si) {       // test side (rows)
      const int cK = fc.side[si].cell;
      const double scale = avg / (2.0 * area[cK]);
      for (int sj = 0; sj < fc.sides; ++sj) {     // trial side (columns)
        const int cJ = fc.side[sj].cell;
        const Vec2 nrm = sj == 0 ? face.normal : face.normal * -1.0;
        for (std::size_t q = 0; q < fr.size(); ++q) {
          const double wq = fc.w[q] * scale;
          for (int n = 0; n < nsc; ++n) {
            const double tr = fc.side[sj].psi[q * nsc + n];
            for (int d = 0; d < 2; ++d) {
              const int col = local_col(cK, cJ, d * nsc + n);
              for (int m = 0; m < nsc; ++m) {
                const double w2 = wq * tr * fc.side[si].psi[q * nsc + m];
                Gblock[cK](comp_index(d, 0) * nsc + m, col) -= w2 * nrm.x;
                Gblock[cK](comp_index(d, 1) * nsc + m, col) -= w2 * nrm.y;
              }
            }
          }
        }
      }
    }
  }

  for (int c = 0; c < ncells; ++c) {
    Dblock[c] = Gblock[c];
    auto r12 = Dblock[c].middleRows(comp_index(0, 1) * nsc, nsc);
    auto r21 = Dblock[c].middleRows(comp_index(1, 0) * nsc, nsc);
    const Eigen::MatrixXd off = 0.5 * (r12 + r21);
    r12 = off;
    r21 = off;
  }
}

void System::Impl::build_loads() {
  const Mesh& mesh = *sp->mesh;
  const QuadratureRule& vr = sp->volume_rule;

  r_full = lifting_boundary_only(prob.boundary_velocity, sp->tensor, sp->faces,
                                 sp->face_rule)
               .coeffs;
  r_sym = r_full;
  for (int c = 0; c < mesh.cell_count(); ++c) {
    for (int m = 0; m < nsc; ++m) {
      const long i12 = sp->tensor.cell_dof(c, comp_index(0, 1) * nsc + m);
      const long i21 = sp->tensor.cell_dof(c, comp_index(1, 0) * nsc + m);
      const double off = 0.5 * (r_full[i12] + r_full[i21]);
      r_sym[i12] = off;
      r_sym[i21] = off;
    }
  }

  gG = l2_project(prob.tensor_force, sp->tensor, vr).coeffs;

  f_b = Eigen::VectorXd::Zero(nv);
  d_star = Eigen::VectorXd::Zero(nq);
  mean_w = Eigen::VectorXd::Zero(nq);
  f_G = Eigen::VectorXd::Zero(nv);
  for (int c = 0; c < mesh.cell_count(); ++c) {
    const double jac = 2.0 * area[c];
    for (std::size_t q = 0; q < vr.size(); ++q) {
      const double wq = jac * vr.w[q];
      const Vec2 x = mesh.map_to_physical(c, vr.x[q], vr.y[q]);
      const Vec2 b = prob.body_force(x);
      for (int n = 0; n < nsc; ++n) {
        const double p = psi[q * nsc + n];
        f_b[sp->velocity.cell_dof(c, 0 * nsc + n)] += wq * b.x * p;
        f_b[sp->velocity.cell_dof(c, 1 * nsc + n)] += wq * b.y * p;
      }
      // trace of the boundary lifting, and the prescribed divergence
      double trR = 0.0;
      for (int m = 0; m < nsc; ++m)
        trR += (r_full[sp->tensor.cell_dof(c, comp_index(0, 0) * nsc + m)] +
                r_full[sp->tensor.cell_dof(c, comp_index(1, 1) * nsc + m)]) *
               psi[q * nsc + m];
      const double gx = prob.divergence(x);
      for (int n = 0; n < npsc; ++n) {
        const long j = sp->pressure.cell_dof(c, n);
        d_star[j] += wq * (trR - gx) * ppsi[q * npsc + n];
        mean_w[j] += wq * ppsi[q * npsc + n] / 4.0;
      }
    }
    // f_G = G^T M_X gG, accumulated per cell
    Eigen::VectorXd gg(ntc);
    for (int d = 0; d < ntc; ++d) gg[d] = gG[sp->tensor.cell_dof(c, d)];
    const Eigen::VectorXd fg = Gblock[c].transpose() * (jac * gg);
    const auto& cols = stencil_cols[c];
    for (std::size_t s = 0; s < cols.size(); ++s) f_G[cols[s]] += fg[s];
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(mesh.cell_count()) * nvc * npsc);
  for (int c = 0; c < mesh.cell_count(); ++c) {
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(nvc, npsc);
    const double jac = 2.0 * area[c];
    for (std::size_t q = 0; q < vr.size(); ++q) {
      const double wq = jac * vr.w[q];
      for (int j = 0; j < npsc; ++j) {
        const Vec2 gr = pgpsi[q * npsc + j];
        const Vec2 gphys = {inv_jt[c].a11 * gr.x + inv_jt[c].a12 * gr.y,
                            inv_jt[c].a21 * gr.x + inv_jt[c].a22 * gr.y};
        for (int n = 0; n < nsc; ++n) {
          const double p = wq * psi[q * nsc + n];
          block(0 * nsc + n, j) += p * gphys.x;
          block(1 * nsc + n, j) += p * gphys.y;
        }
      }
    }
    for (int i = 0; i < nvc; ++i)
      for (int j = 0; j < npsc; ++j)
        trip.emplace_back(sp->velocity.cell_dof(c, i), sp->pressure.cell_dof(c, j),
                          block(i, j));
  }
  P.resize(nv, nq);
  P.setFromTriplets(trip.begin(), trip.end());
}

void System::Impl::check_compatibility() const {
  // int_Omega g dx must match the boundary flux of v*
  double volume = 0.0, flux = 0.0, scale = 1.0;
  const Mesh& mesh = *sp->mesh;
  const QuadratureRule& vr = sp->volume_rule;
  for (int c = 0; c < mesh.cell_count(); ++c)
    for (std::size_t q = 0; q < vr.size(); ++q) {
      const double g = prob.divergence(mesh.map_to_physical(c, vr.x[q], vr.y[q]));
      volume += 2.0 * area[c] * vr.w[q] * g;
      scale += 2.0 * area[c] * vr.w[q] * std::abs(g);
    }
  for (const FaceCache& fc : fcache) {
    if (!fc.face->is_boundary()) continue;
    for (std::size_t q = 0; q < fc.w.size(); ++q) {
      flux += fc.w[q] * fc.vstar[q].dot(fc.face->normal);
      scale += fc.w[q] * std::abs(fc.vstar[q].dot(fc.face->normal));
    }
  }
  if (std::abs(volume - flux) > 1e-8 * scale)
    throw ConfigError("ProblemData: incompatible divergence and boundary data");
}

void System::Impl::gradient_fields(const Eigen::VectorXd& c, Eigen::VectorXd& a,
                                   Eigen::VectorXd& l) const {
  a = r_sym;
  l = r_full;
  const int ncells = sp->mesh->cell_count();
  Eigen::VectorXd clocal;
  for (int cell = 0; cell < ncells; ++cell) {
    const auto& cols = stencil_cols[cell];
    clocal.resize(static_cast<long>(cols.size()));
    for (std::size_t s = 0; s < cols.size(); ++s) clocal[s] = c[cols[s]];
    const Eigen::VectorXd da = Dblock[cell] * clocal;
    const Eigen::VectorXd dl = Gblock[cell] * clocal;
    for (int d = 0; d < ntc; ++d) {
      const long gd = sp->tensor.cell_dof(cell, d);
      a[gd] += da[d];
      l[gd] += dl[d];
    }
  }
}

namespace {

inline Tensor2 tensor_at(const Eigen::VectorXd& coeffs, const Space& space, int cell,
                         const double* psi_q, int nsc) {
  double comp[4] = {0, 0, 0, 0};
  for (int c = 0; c < 4; ++c)
    for (int m = 0; m < nsc; ++m)
      comp[c] += coeffs[space.cell_dof(cell, c * nsc + m)] * psi_q[m];
  return {comp[0], comp[1], comp[2], comp[3]};
}

[[noreturn]] void report_nonfinite(const char* term, int entity) {
  std::ostringstream msg;
  msg << "assembly produced a non-finite value in term '" << term << "' at entity "
      << entity;
  throw SolveError(msg.str());
}

}  // namespace

Eigen::VectorXd System::Impl::residual(const Eigen::VectorXd& x) const {
  const Mesh& mesh = *sp->mesh;
  const QuadratureRule& vr = sp->volume_rule;
  const bool convective = prob.model == ModelKind::PNavierStokes;

  const Eigen::VectorXd c = x.head(nv);
  const Eigen::VectorXd qv = x.segment(nv, nq);
  const double lambda = x[nv + nq];

  Eigen::VectorXd a, l;
  gradient_fields(c, a, l);

  Eigen::VectorXd Fv = Eigen::VectorXd::Zero(nv);
  Eigen::VectorXd Fq = -P.transpose() * c + d_star + lambda * mean_w;

  Eigen::VectorXd y(ntc), clocal, scatter;
  for (int cell = 0; cell < mesh.cell_count(); ++cell) {
    y.setZero();
    const double jac = 2.0 * area[cell];
    Eigen::VectorXd conv = Eigen::VectorXd::Zero(nvc);
    for (std::size_t q = 0; q < vr.size(); ++q) {
      const double* psi_q = &psi[q * nsc];
      const Tensor2 A = tensor_at(a, sp->tensor, cell, psi_q, nsc);
      Tensor2 T = stress(law, A);
      Vec2 v;
      if (convective) {
        for (int m = 0; m < nsc; ++m) {
          v.x += c[sp->velocity.cell_dof(cell, 0 * nsc + m)] * psi_q[m];
          v.y += c[sp->velocity.cell_dof(cell, 1 * nsc + m)] * psi_q[m];
        }
        T = T - 0.5 * Tensor2::outer(v, v);
      }
      const double comp[4] = {T.a11, T.a12, T.a21, T.a22};
      for (int cc = 0; cc < 4; ++cc)
        for (int m = 0; m < nsc; ++m) y[cc * nsc + m] += vr.w[q] * comp[cc] * psi_q[m];

      if (convective) {
        const Vec2 xq = mesh.map_to_physical(cell, vr.x[q], vr.y[q]);
        const Tensor2 L = tensor_at(l, sp->tensor, cell, psi_q, nsc);
        const double g = prob.divergence(xq);
        const Vec2 Lv{(L.a11 - g) * v.x + L.a12 * v.y, L.a21 * v.x + (L.a22 - g) * v.y};
        for (int n = 0; n < nsc; ++n) {
          conv[0 * nsc + n] += 0.5 * vr.w[q] * jac * Lv.x * psi_q[n];
          conv[1 * nsc + n] += 0.5 * vr.w[q] * jac * Lv.y * psi_q[n];
        }
      }
    }
    if (!y.allFinite()) report_nonfinite("viscous/convective volume", cell);
    scatter = Dblock[cell].transpose() * (jac * y);
    const auto& cols = stencil_cols[cell];
    for (std::size_t s = 0; s < cols.size(); ++s) Fv[cols[s]] += scatter[s];
    for (int d = 0; d < nvc; ++d) Fv[sp->velocity.cell_dof(cell, d)] += conv[d];
  }

  // stabilization flux on all faces
  for (std::size_t f = 0; f < fcache.size(); ++f) {
    const FaceCache& fc = fcache[f];
    const Face& face = *fc.face;
    for (std::size_t q = 0; q < fc.w.size(); ++q) {
      Vec2 vm, vp;
      for (int m = 0; m < nsc; ++m) {
        vm.x += c[sp->velocity.cell_dof(face.minus_cell, 0 * nsc + m)] *
                fc.side[0].psi[q * nsc + m];
        vm.y += c[sp->velocity.cell_dof(face.minus_cell, 1 * nsc + m)] *
                fc.side[0].psi[q * nsc + m];
      }
      Tensor2 jump;
      if (fc.sides == 2) {
        for (int m = 0; m < nsc; ++m) {
          vp.x += c[sp->velocity.cell_dof(face.plus_cell, 0 * nsc + m)] *
                  fc.side[1].psi[q * nsc + m];
          vp.y += c[sp->velocity.cell_dof(face.plus_cell, 1 * nsc + m)] *
                  fc.side[1].psi[q * nsc + m];
        }
        jump = Tensor2::outer(vm - vp, face.normal);
      } else {
        jump = Tensor2::outer(vm - fc.vstar[q], face.normal);
      }
      const Tensor2 S = stress(law, (1.0 / sp->h) * jump);
      if (!std::isfinite(S.a11)) report_nonfinite("penalty", static_cast<int>(f));
      const Vec2 Sn{S.a11 * face.normal.x + S.a12 * face.normal.y,
                    S.a21 * face.normal.x + S.a22 * face.normal.y};
      const double wq = prob.alpha * fc.w[q];
      for (int side = 0; side < fc.sides; ++side) {
        const double sgn = side == 0 ? 1.0 : -1.0;
        const int cell = fc.side[side].cell;
        for (int n = 0; n < nsc; ++n) {
          const double p = sgn * wq * fc.side[side].psi[q * nsc + n];
          Fv[sp->velocity.cell_dof(cell, 0 * nsc + n)] += p * Sn.x;
          Fv[sp->velocity.cell_dof(cell, 1 * nsc + n)] += p * Sn.y;
        }
      }
    }
  }

  Fv += P * qv - f_b - f_G;

  Eigen::VectorXd F(nv + nq + 1);
  F.head(nv) = Fv;
  F.segment(nv, nq) = Fq;
  F[nv + nq] = mean_w.dot(qv);
  if (!F.allFinite()) report_nonfinite("assembled residual", -1);
  return F;
}

Eigen::SparseMatrix<double> System::Impl::jacobian(const Eigen::VectorXd& x) const {
  const Mesh& mesh = *sp->mesh;
  const QuadratureRule& vr = sp->volume_rule;
  const bool convective = prob.model == ModelKind::PNavierStokes;

  const Eigen::VectorXd c = x.head(nv);
  Eigen::VectorXd a, l;
  gradient_fields(c, a, l);

  std::vector<Eigen::Triplet<double>> trip;
  {
    std::size_t estimate = 0;
    for (int cell = 0; cell < mesh.cell_count(); ++cell) {
      const std::size_t ncols = stencil_cols[cell].size();
      estimate += ncols * ncols + (convective ? 2 * ncols * nvc : 0);
    }
    estimate += fcache.size() * sp->face_rule.size() * 4 * nvc * nvc +
                2 * P.nonZeros() + 2 * nq;
    trip.reserve(estimate);
  }

  Eigen::MatrixXd Sp(ntc, ntc), Kp, Mc, Ec;
  for (int cell = 0; cell < mesh.cell_count(); ++cell) {
    const double jac = 2.0 * area[cell];
    Sp.setZero();
    if (convective) {
      Kp = Eigen::MatrixXd::Zero(ntc, nvc);
      Mc = Eigen::MatrixXd::Zero(nvc, nvc);
      Ec = Eigen::MatrixXd::Zero(ntc, nvc);
    }
    for (std::size_t q = 0; q < vr.size(); ++q) {
      const double* psi_q = &psi[q * nsc];
      const Tensor2 A = tensor_at(a, sp->tensor, cell, psi_q, nsc);
      // directional stress derivatives along the four unit components
      const Tensor2 units[4] = {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}};
      Tensor2 DS[4];
      for (int d = 0; d < 4; ++d) DS[d] = stress_jacobian(law, A, units[d]);
      for (int cd = 0; cd < 4; ++cd) {
        const double comps[4] = {DS[cd].a11, DS[cd].a12, DS[cd].a21, DS[cd].a22};
        for (int cm = 0; cm < 4; ++cm) {
          if (comps[cm] == 0.0) continue;
          const double wv = vr.w[q] * comps[cm];
          for (int m = 0; m < nsc; ++m)
            for (int n = 0; n < nsc; ++n)
              Sp(cm * nsc + m, cd * nsc + n) += wv * psi_q[m] * psi_q[n];
        }
      }

      if (convective) {
        Vec2 v;
        for (int m = 0; m < nsc; ++m) {
          v.x += c[sp->velocity.cell_dof(cell, 0 * nsc + m)] * psi_q[m];
          v.y += c[sp->velocity.cell_dof(cell, 1 * nsc + m)] * psi_q[m];
        }
        const Vec2 xq = mesh.map_to_physical(cell, vr.x[q], vr.y[q]);
        const double g = prob.divergence(xq);
        const Tensor2 L = tensor_at(l, sp->tensor, cell, psi_q, nsc);
        const Tensor2 Lg{L.a11 - g, L.a12, L.a21, L.a22 - g};
        const double vcomp[2] = {v.x, v.y};
        for (int d = 0; d < 2; ++d) {
          for (int n = 0; n < nsc; ++n) {
            // d(v x v): e_d psi_n x v + v x e_d psi_n
            for (int m = 0; m < nsc; ++m) {
              const double w2 = vr.w[q] * psi_q[n] * psi_q[m];
              for (int j = 0; j < 2; ++j) {
                Kp(comp_index(d, j) * nsc + m, d * nsc + n) += w2 * vcomp[j];
                Kp(comp_index(j, d) * nsc + m, d * nsc + n) += w2 * vcomp[j];
              }
            }
            // ((L - gI) e_d psi_n) . (e_{d'} psi_{n'})
            const double lcol[2] = {d == 0 ? Lg.a11 : Lg.a12, d == 0 ? Lg.a21 : Lg.a22};
            for (int dp = 0; dp < 2; ++dp)
              for (int np = 0; np < nsc; ++np)
                Mc(dp * nsc + np, d * nsc + n) +=
                    vr.w[q] * jac * lcol[dp] * psi_q[n] * psi_q[np];
          }
        }
        // (Psi_(cm,m) v) . (e_d psi_n)
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            for (int m = 0; m < nsc; ++m)
              for (int n = 0; n < nsc; ++n)
                Ec(comp_index(i, j) * nsc + m, i * nsc + n) +=
                    vr.w[q] * jac * vcomp[j] * psi_q[m] * psi_q[n];
      }
    }

    const auto& cols = stencil_cols[cell];
    const Eigen::MatrixXd JV =
        Dblock[cell].transpose() * (jac * Sp) * Dblock[cell];
    for (std::size_t i = 0; i < cols.size(); ++i)
      for (std::size_t j = 0; j < cols.size(); ++j)
        if (JV(i, j) != 0.0) trip.emplace_back(cols[i], cols[j], JV(i, j));

    if (convective) {
      const Eigen::MatrixXd JC1 = Dblock[cell].transpose() * (jac * 0.5 * Kp);
      const Eigen::MatrixXd JC2 = 0.5 * Ec.transpose() * Gblock[cell];
      for (std::size_t i = 0; i < cols.size(); ++i)
        for (int j = 0; j < nvc; ++j) {
          const long cj = sp->velocity.cell_dof(cell, j);
          if (JC1(i, j) != 0.0) trip.emplace_back(cols[i], cj, -JC1(i, j));
          if (JC2(j, i) != 0.0) trip.emplace_back(cj, cols[i], JC2(j, i));
        }
      for (int i = 0; i < nvc; ++i)
        for (int j = 0; j < nvc; ++j)
          if (Mc(i, j) != 0.0)
            trip.emplace_back(sp->velocity.cell_dof(cell, i),
                              sp->velocity.cell_dof(cell, j), 0.5 * Mc(i, j));
    }
  }

  // penalty linearization, face-local
  for (const FaceCache& fc : fcache) {
    const Face& face = *fc.face;
    for (std::size_t q = 0; q < fc.w.size(); ++q) {
      Vec2 vm, vp;
      for (int m = 0; m < nsc; ++m) {
        vm.x += c[sp->velocity.cell_dof(face.minus_cell, 0 * nsc + m)] *
                fc.side[0].psi[q * nsc + m];
        vm.y += c[sp->velocity.cell_dof(face.minus_cell, 1 * nsc + m)] *
                fc.side[0].psi[q * nsc + m];
      }
      Tensor2 jump;
      if (fc.sides == 2) {
        for (int m = 0; m < nsc; ++m) {
          vp.x += c[sp->velocity.cell_dof(face.plus_cell, 0 * nsc + m)] *
                  fc.side[1].psi[q * nsc + m];
          vp.y += c[sp->velocity.cell_dof(face.plus_cell, 1 * nsc + m)] *
                  fc.side[1].psi[q * nsc + m];
        }
        jump = Tensor2::outer(vm - vp, face.normal);
      } else {
        jump = Tensor2::outer(vm - fc.vstar[q], face.normal);
      }
      const Tensor2 B = (1.0 / sp->h) * jump;
      const double wq = prob.alpha * fc.w[q];
      for (int sj = 0; sj < fc.sides; ++sj) {
        const double sgnj = sj == 0 ? 1.0 : -1.0;
        const int cj = fc.side[sj].cell;
        for (int dj = 0; dj < 2; ++dj) {
          for (int nj = 0; nj < nsc; ++nj) {
            const double tr = sgnj * fc.side[sj].psi[q * nsc + nj] / sp->h;
            const Vec2 dir = dj == 0 ? Vec2{tr, 0.0} : Vec2{0.0, tr};
            const Tensor2 T = stress_jacobian(law, B, Tensor2::outer(dir, face.normal));
            const Vec2 Tn{T.a11 * face.normal.x + T.a12 * face.normal.y,
                          T.a21 * face.normal.x + T.a22 * face.normal.y};
            const long col = sp->velocity.cell_dof(cj, dj * nsc + nj);
            for (int si = 0; si < fc.sides; ++si) {
              const double sgni = si == 0 ? 1.0 : -1.0;
              const int ci = fc.side[si].cell;
              for (int ni = 0; ni < nsc; ++ni) {
                const double p = sgni * wq * fc.side[si].psi[q * nsc + ni];
                trip.emplace_back(sp->velocity.cell_dof(ci, 0 * nsc + ni), col, p * Tn.x);
                trip.emplace_back(sp->velocity.cell_dof(ci, 1 * nsc + ni), col, p * Tn.y);
              }
            }
          }
        }
      }
    }
  }

  // pressure coupling, its transpose, and the mean constraint border
  for (int k = 0; k < P.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(P, k); it; ++it) {
      trip.emplace_back(it.row(), nv + it.col(), it.value());
      trip.emplace_back(nv + it.col(), it.row(), -it.value());
    }
  for (long j = 0; j < nq; ++j) {
    trip.emplace_back(nv + j, nv + nq, mean_w[j]);
    trip.emplace_back(nv + nq, nv + j, mean_w[j]);
  }

  Eigen::SparseMatrix<double> J(nv + nq + 1, nv + nq + 1);
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

System::System(const Spaces& spaces, const ProblemData& data)
    : impl_(std::make_unique<Impl>(spaces, data)) {}
System::~System() = default;

long System::size() const { return impl_->nv + impl_->nq + 1; }
long System::pressure_offset() const { return impl_->nv; }
const Spaces& System::spaces() const { return *impl_->sp; }
const ProblemData& System::data() const { return impl_->prob; }

Eigen::VectorXd System::pack(const DiscreteSolution& s) const {
  Eigen::VectorXd x(size());
  x.head(impl_->nv) = s.velocity.coeffs;
  x.segment(impl_->nv, impl_->nq) = s.pressure.coeffs;
  x[impl_->nv + impl_->nq] = s.multiplier;
  return x;
}

DiscreteSolution System::unpack(const Eigen::VectorXd& x) const {
  DiscreteSolution s = zero_solution(*impl_->sp);
  s.velocity.coeffs = x.head(impl_->nv);
  s.pressure.coeffs = x.segment(impl_->nv, impl_->nq);
  s.multiplier = x[impl_->nv + impl_->nq];
  return s;
}

Eigen::VectorXd System::residual(const Eigen::VectorXd& x) const {
  return impl_->residual(x);
}

Eigen::SparseMatrix<double> System::jacobian(const Eigen::VectorXd& x) const {
  return impl_->jacobian(x);
}

namespace {

void fd_jacobian_check(const System& sys, const Eigen::VectorXd& x,
                       const Eigen::SparseMatrix<double>& J) {
  // directional probe against central differences
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(x.size());
  for (long i = 0; i < x.size(); ++i) dir[i] = std::sin(0.37 * (i + 1));
  dir.normalize();
  const double step = 1e-6 * (1.0 + x.norm());
  const Eigen::VectorXd fp = sys.residual(x + step * dir);
  const Eigen::VectorXd fm = sys.residual(x - step * dir);
  const Eigen::VectorXd fd = (fp - fm) / (2.0 * step);
  const Eigen::VectorXd jd = J * dir;
  const double err = (fd - jd).norm() / (1.0 + jd.norm());
  if (err > 1e-5)
    throw SolveError("newton: Jacobian disagrees with finite differences, error " +
                     std::to_string(err));
}

}  // namespace

NewtonLog System::newton(DiscreteSolution& state, const NewtonOptions& opts) const {
  NewtonLog log;
  Eigen::VectorXd x = pack(state);
  Eigen::VectorXd F = residual(x);
  double norm0 = F.norm();
  log.residual_norms.push_back(norm0);
  const double target = std::max(opts.tol_abs, opts.tol_rel * norm0);

  while (log.residual_norms.back() > target) {
    if (log.iterations >= opts.max_iter) {
      std::ostringstream msg;
      msg << "newton: no convergence in " << opts.max_iter << " iterations; residuals:";
      for (double r : log.residual_norms) msg << " " << r;
      throw SolveError(msg.str());
    }
    const Eigen::SparseMatrix<double> J = jacobian(x);
    if (opts.check_jacobian) fd_jacobian_check(*this, x, J);
    const Eigen::VectorXd dx = linear_solve(J, -F);

    double stepsize = 1.0;
    Eigen::VectorXd xn = x + dx;
    Eigen::VectorXd Fn = residual(xn);
    if (opts.line_search) {
      const double fnorm = log.residual_norms.back();
      while (Fn.norm() > (1.0 - 1e-4 * stepsize) * fnorm && stepsize > 1e-4) {
        stepsize *= 0.5;
        xn = x + stepsize * dx;
        Fn = residual(xn);
      }
    }
    x = xn;
    F = Fn;
    ++log.iterations;
    log.residual_norms.push_back(F.norm());
    if (!std::isfinite(F.norm()))
      throw SolveError("newton: residual became non-finite at iteration " +
                       std::to_string(log.iterations));
  }
  log.converged = true;
  state = unpack(x);
  return log;
}

AuxiliaryFields System::reconstruct(const DiscreteSolution& s) const {
  const Impl& im = *impl_;
  AuxiliaryFields aux;
  aux.gradient = Field(im.sp->tensor);
  aux.stress = Field(im.sp->tensor);
  aux.convection = Field(im.sp->tensor);

  Eigen::VectorXd a, l;
  im.gradient_fields(s.velocity.coeffs, a, l);
  aux.gradient.coeffs = l;

  const QuadratureRule& vr = im.sp->volume_rule;
  for (int cell = 0; cell < im.sp->mesh->cell_count(); ++cell) {
    for (std::size_t q = 0; q < vr.size(); ++q) {
      const double* psi_q = &im.psi[q * im.nsc];
      const Tensor2 A = tensor_at(a, im.sp->tensor, cell, psi_q, im.nsc);
      const Tensor2 S = stress(im.law, A);
      Vec2 v;
      for (int m = 0; m < im.nsc; ++m) {
        v.x += s.velocity.coeffs[im.sp->velocity.cell_dof(cell, 0 * im.nsc + m)] * psi_q[m];
        v.y += s.velocity.coeffs[im.sp->velocity.cell_dof(cell, 1 * im.nsc + m)] * psi_q[m];
      }
      const Tensor2 K = Tensor2::outer(v, v);
      const double sc[4] = {S.a11, S.a12, S.a21, S.a22};
      const double kc[4] = {K.a11, K.a12, K.a21, K.a22};
      for (int ccomp = 0; ccomp < 4; ++ccomp)
        for (int m = 0; m < im.nsc; ++m) {
          const long dof = im.sp->tensor.cell_dof(cell, ccomp * im.nsc + m);
          aux.stress.coeffs[dof] += vr.w[q] * sc[ccomp] * psi_q[m];
          aux.convection.coeffs[dof] += vr.w[q] * kc[ccomp] * psi_q[m];
        }
    }
  }
  return aux;
}

Eigen::VectorXd assemble_residual(const DiscreteSolution& state, const ProblemData& data,
                                  const Spaces& spaces) {
  System sys(spaces, data);
  return sys.residual(sys.pack(state));
}

Eigen::SparseMatrix<double> assemble_jacobian(const DiscreteSolution& state,
                                              const ProblemData& data,
                                              const Spaces& spaces) {
  System sys(spaces, data);
  return sys.jacobian(sys.pack(state));
}

DiscreteSolution newton_solve(const DiscreteSolution& initial, const ProblemData& data,
                              const Spaces& spaces, const NewtonOptions& opts,
                              NewtonLog* log) {
  System sys(spaces, data);
  DiscreteSolution state = initial;
  NewtonLog l = sys.newton(state, opts);
  if (log) *log = l;
  return state;
}

AuxiliaryFields reconstruct_auxiliary(const DiscreteSolution& solution,
                                      const ProblemData& data, const Spaces& spaces) {
  System sys(spaces, data);
  return sys.reconstruct(solution);
}

Eigen::VectorXd linear_solve(const Eigen::SparseMatrix<double>& A,
                             const Eigen::VectorXd& b) {
  if (A.rows() != A.cols() || A.rows() != b.size())
    throw ConfigError("linear_solve: dimension mismatch");
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  Eigen::SparseMatrix<double> Ac = A;
  Ac.makeCompressed();
  lu.compute(Ac);
  if (lu.info() != Eigen::Success)
    throw SolveError("linear_solve: factorization failed (" + lu.lastErrorMessage() + ")");
  Eigen::VectorXd x = lu.solve(b);
  const double bnorm = b.norm();
  if (bnorm == 0.0) return Eigen::VectorXd::Zero(b.size());
  // iterative refinement until the residual contract holds
  for (int round = 0; round < 4; ++round) {
    const Eigen::VectorXd r = b - A * x;
    if (r.norm() <= 1e-11 * bnorm) return x;
    x += lu.solve(r);
  }
  if ((b - A * x).norm() > 1e-11 * bnorm)
    throw SolveError("linear_solve: residual contract not met (matrix near-singular)");
  return x;
}

}  // namespace ldg
