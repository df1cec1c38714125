#pragma once

#include <optional>

#include "ldg/femspace.hpp"
#include "ldg/nfunctions.hpp"

namespace ldg {

/// Reference coordinates of a point on a face, seen from both sides.
struct FacePoint {
  Vec2 x;  // physical location
  double xi_minus = 0.0, eta_minus = 0.0;
  double xi_plus = 0.0, eta_plus = 0.0;  // valid for interior faces
};

FacePoint face_point(const Mesh& mesh, const Face& face, double t);

/// One-sided traces of a broken vector field at a face point.
struct TraceSample {
  Vec2 minus;
  std::optional<Vec2> plus;  // absent on the boundary
};

TraceSample face_traces(const Field& w, const Face& face, const FacePoint& pt);

/// Interior: {w} = (tr+ + tr-)/2. Boundary: {w} = tr(w).
Vec2 face_average(const Field& w, const Face& face, const FacePoint& pt);

/// Interior: [[w x n]] = tr+ w x n+ + tr- w x n-. Boundary: tr(w) x n.
Tensor2 face_jump_tensor(const Field& w, const Face& face, const FacePoint& pt);

/// Global jump operator R_h^k: the broken tensor field defined by
/// (R w, X) = <[[w x n]], {X}> over all faces.
Field lifting(const Field& w, const Space& tensor_space, const FaceSet& faces,
              const FaceQuadratureRule& rule);

/// Same, for an analytic field; interior faces use the (vanishing) jump of
/// the continuous evaluator, so only round-off enters there.
Field lifting(const VectorFn& w, const Space& tensor_space, const FaceSet& faces,
              const FaceQuadratureRule& rule);

/// Lifting of a globally continuous field: interior jumps vanish identically
/// and only boundary faces are visited.
Field lifting_boundary_only(const VectorFn& w, const Space& tensor_space,
                            const FaceSet& faces, const FaceQuadratureRule& rule);

/// DG gradient G_h^k w = grad_h w - R_h^k w at a reference point; `lift`
/// must be the lifting of w in the matching tensor space.
Tensor2 dg_gradient_at(const Field& w, const Field& lift, int cell, double xi, double eta);
Tensor2 sym_dg_gradient_at(const Field& w, const Field& lift, int cell, double xi, double eta);
double dg_divergence_at(const Field& w, const Field& lift, int cell, double xi, double eta);

/// ||grad_h w||_p + h^(1/p) || h^{-1} [[w x n]] ||_{p,Gamma_h}.
double dg_norm(const Field& w, double p, double h, const FaceSet& faces,
               const QuadratureRule& vrule, const FaceQuadratureRule& frule);

/// Same with the local symmetric gradient D_h w.
double sym_dg_norm(const Field& w, double p, double h, const FaceSet& faces,
                   const QuadratureRule& vrule, const FaceQuadratureRule& frule);

/// Shifted jump modular m_{psi,h}(w) = h sum_f int_f psi_{a_f}(h^{-1}|[[w x n]]|) ds.
/// When `boundary_datum` is given, boundary jumps use (w - datum) x n.
double jump_modular(const Field& w, const VectorFn* boundary_datum,
                    const std::vector<double>& face_shifts, const NFunctionParams& params,
                    double h, const FaceSet& faces, const FaceQuadratureRule& rule);

/// Per-face shift a_f = average over the adjacent cells of `cell_values`
/// (one value on boundary faces).
std::vector<double> face_shifts_from_cells(const FaceSet& faces,
                                           const std::vector<double>& cell_values);

}  // namespace ldg
