#include "ldg/dgops.hpp"

#include <cmath>

namespace ldg {

namespace {

// Reference coordinates of the point at parameter t along local edge e of a
// cell; edge e runs from local vertex e to (e+1)%3, but the global face is
// parameterized from its smaller to its larger vertex index.
void edge_reference_point(const Mesh& mesh, int cell, int edge, int v0, double t,
                          double& xi, double& eta) {
  static const double ref[3][2] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  int la = edge, lb = (edge + 1) % 3;
  if (mesh.cells[cell][la] != v0) std::swap(la, lb);
  xi = ref[la][0] + t * (ref[lb][0] - ref[la][0]);
  eta = ref[la][1] + t * (ref[lb][1] - ref[la][1]);
}

}  // namespace

FacePoint face_point(const Mesh& mesh, const Face& face, double t) {
  FacePoint pt;
  const Vec2 a = mesh.vertices[face.v0], b = mesh.vertices[face.v1];
  pt.x = {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
  edge_reference_point(mesh, face.minus_cell, face.minus_edge, face.v0, t,
                       pt.xi_minus, pt.eta_minus);
  if (!face.is_boundary())
    edge_reference_point(mesh, face.plus_cell, face.plus_edge, face.v0, t,
                         pt.xi_plus, pt.eta_plus);
  return pt;
}

TraceSample face_traces(const Field& w, const Face& face, const FacePoint& pt) {
  TraceSample s;
  s.minus = evaluate_vector(w, face.minus_cell, pt.xi_minus, pt.eta_minus);
  if (!face.is_boundary())
    s.plus = evaluate_vector(w, face.plus_cell, pt.xi_plus, pt.eta_plus);
  return s;
}

Vec2 face_average(const Field& w, const Face& face, const FacePoint& pt) {
  const TraceSample s = face_traces(w, face, pt);
  if (!s.plus) return s.minus;
  return 0.5 * (s.minus + *s.plus);
}

Tensor2 face_jump_tensor(const Field& w, const Face& face, const FacePoint& pt) {
  const TraceSample s = face_traces(w, face, pt);
  if (!s.plus) return Tensor2::outer(s.minus, face.normal);
  // n- is the stored normal (minus -> plus), n+ its negative
  return Tensor2::outer(s.minus, face.normal) + Tensor2::outer(*s.plus, face.normal * -1.0);
}

namespace {

template <typename JumpAt>
Field lift_from_jumps(const JumpAt& jump_at, bool boundary_only, const Space& tensor_space,
                      const FaceSet& faces, const FaceQuadratureRule& rule) {
  if (tensor_space.kind != SpaceKind::BrokenTensor)
    throw ConfigError("lifting: tensor target space expected");
  const Mesh& mesh = *tensor_space.mesh;
  Field out(tensor_space);
  const int nsc = tensor_space.scalar_dim;
  std::vector<double> psi(nsc);

  for (const Face& face : faces.faces) {
    if (boundary_only && !face.is_boundary()) continue;
    const double halfweight = face.is_boundary() ? 1.0 : 0.5;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const FacePoint pt = face_point(mesh, face, rule.t[q]);
      const Tensor2 jump = jump_at(face, pt);
      const double wq = rule.w[q] * face.length * halfweight;
      // scatter <[[w x n]], {X}> into both adjacent cells; the broken mass
      // matrix is 2|K| I in the orthonormal basis
      const int sides = face.is_boundary() ? 1 : 2;
      for (int side = 0; side < sides; ++side) {
        const int cell = side == 0 ? face.minus_cell : face.plus_cell;
        const double xi = side == 0 ? pt.xi_minus : pt.xi_plus;
        const double eta = side == 0 ? pt.eta_minus : pt.eta_plus;
        tensor_space.scalar_values(xi, eta, psi.data());
        const double scale = wq / (2.0 * mesh.cell_area(cell));
        const double comp[4] = {jump.a11, jump.a12, jump.a21, jump.a22};
        for (int c = 0; c < 4; ++c)
          for (int m = 0; m < nsc; ++m)
            out.coeffs[tensor_space.cell_dof(cell, c * nsc + m)] +=
                scale * comp[c] * psi[m];
      }
    }
  }
  return out;
}

}  // namespace

Field lifting(const Field& w, const Space& tensor_space, const FaceSet& faces,
              const FaceQuadratureRule& rule) {
  return lift_from_jumps(
      [&](const Face& face, const FacePoint& pt) { return face_jump_tensor(w, face, pt); },
      false, tensor_space, faces, rule);
}

Field lifting(const VectorFn& w, const Space& tensor_space, const FaceSet& faces,
              const FaceQuadratureRule& rule) {
  return lift_from_jumps(
      [&](const Face& face, const FacePoint& pt) {
        if (face.is_boundary()) return Tensor2::outer(w(pt.x), face.normal);
        // one-sided traces coincide for a continuous evaluator
        return Tensor2::outer(w(pt.x), face.normal) +
               Tensor2::outer(w(pt.x), face.normal * -1.0);
      },
      false, tensor_space, faces, rule);
}

Field lifting_boundary_only(const VectorFn& w, const Space& tensor_space,
                            const FaceSet& faces, const FaceQuadratureRule& rule) {
  return lift_from_jumps(
      [&](const Face& face, const FacePoint& pt) {
        return Tensor2::outer(w(pt.x), face.normal);
      },
      true, tensor_space, faces, rule);
}

Tensor2 dg_gradient_at(const Field& w, const Field& lift, int cell, double xi, double eta) {
  return evaluate_vector_gradient(w, cell, xi, eta) - evaluate_tensor(lift, cell, xi, eta);
}

Tensor2 sym_dg_gradient_at(const Field& w, const Field& lift, int cell, double xi,
                           double eta) {
  return dg_gradient_at(w, lift, cell, xi, eta).sym();
}

double dg_divergence_at(const Field& w, const Field& lift, int cell, double xi, double eta) {
  return dg_gradient_at(w, lift, cell, xi, eta).trace();
}

namespace {

template <typename GradAt>
double broken_norm_p(const Field& w, double p, const FaceSet& faces,
                     const QuadratureRule& vrule, const FaceQuadratureRule& frule,
                     double h, const GradAt& grad_at) {
  const Mesh& mesh = *w.space->mesh;
  double vol = 0.0;
  for (int c = 0; c < mesh.cell_count(); ++c) {
    const double scale = 2.0 * mesh.cell_area(c);
    for (std::size_t q = 0; q < vrule.size(); ++q)
      vol += scale * vrule.w[q] * std::pow(grad_at(c, vrule.x[q], vrule.y[q]), p);
  }
  double jump = 0.0;
  for (const Face& face : faces.faces) {
    for (std::size_t q = 0; q < frule.size(); ++q) {
      const FacePoint pt = face_point(mesh, face, frule.t[q]);
      const double j = face_jump_tensor(w, face, pt).norm();
      jump += frule.w[q] * face.length * std::pow(j / h, p);
    }
  }
  return std::pow(vol, 1.0 / p) + std::pow(h, 1.0 / p) * std::pow(jump, 1.0 / p);
}

}  // namespace

double dg_norm(const Field& w, double p, double h, const FaceSet& faces,
               const QuadratureRule& vrule, const FaceQuadratureRule& frule) {
  return broken_norm_p(w, p, faces, vrule, frule, h, [&](int c, double xi, double eta) {
    return evaluate_vector_gradient(w, c, xi, eta).norm();
  });
}

double sym_dg_norm(const Field& w, double p, double h, const FaceSet& faces,
                   const QuadratureRule& vrule, const FaceQuadratureRule& frule) {
  return broken_norm_p(w, p, faces, vrule, frule, h, [&](int c, double xi, double eta) {
    return evaluate_vector_gradient(w, c, xi, eta).sym().norm();
  });
}

double jump_modular(const Field& w, const VectorFn* boundary_datum,
                    const std::vector<double>& face_shifts, const NFunctionParams& params,
                    double h, const FaceSet& faces, const FaceQuadratureRule& rule) {
  const Mesh& mesh = *w.space->mesh;
  if (face_shifts.size() != faces.faces.size())
    throw ConfigError("jump_modular: one shift per face expected");
  double sum = 0.0;
  for (std::size_t f = 0; f < faces.faces.size(); ++f) {
    const Face& face = faces.faces[f];
    const ShiftedNFunction shifted(params, face_shifts[f]);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const FacePoint pt = face_point(mesh, face, rule.t[q]);
      Tensor2 jump = face_jump_tensor(w, face, pt);
      if (face.is_boundary() && boundary_datum)
        jump = jump - Tensor2::outer((*boundary_datum)(pt.x), face.normal);
      sum += rule.w[q] * face.length * shifted_phi_eval(shifted, jump.norm() / h);
    }
  }
  return h * sum;
}

std::vector<double> face_shifts_from_cells(const FaceSet& faces,
                                           const std::vector<double>& cell_values) {
  std::vector<double> shifts(faces.faces.size());
  for (std::size_t f = 0; f < faces.faces.size(); ++f) {
    const Face& face = faces.faces[f];
    shifts[f] = face.is_boundary()
                    ? cell_values[face.minus_cell]
                    : 0.5 * (cell_values[face.minus_cell] + cell_values[face.plus_cell]);
  }
  return shifts;
}

}  // namespace ldg
