#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "ldg/errors.hpp"
#include "ldg/tensor.hpp"

namespace ldg {

/// Conforming triangulation of (-1,1)^2. Cells are positively oriented
/// vertex-index triples; immutable once built.
struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> cells;
  int level = 0;                  // refinement generation
  std::vector<int> parent_cells;  // child -> parent index; empty at level 0

  int cell_count() const { return static_cast<int>(cells.size()); }
  int vertex_count() const { return static_cast<int>(vertices.size()); }

  Vec2 vertex_of_cell(int cell, int local) const {
    return vertices[cells[cell][local]];
  }
  double cell_area(int cell) const;
  /// Affine map columns (v1-v0, v2-v0); reference triangle (0,0),(1,0),(0,1).
  Tensor2 cell_jacobian(int cell) const;
  Vec2 map_to_physical(int cell, double xi, double eta) const;
  /// Inverse of the affine map; valid for points inside the cell.
  void map_to_reference(int cell, const Vec2& x, double& xi, double& eta) const;
};

constexpr int kBoundary = -1;

struct Face {
  int v0 = 0, v1 = 0;        // endpoint vertex indices, v0 < v1
  int minus_cell = 0;        // lower adjacent cell index
  int plus_cell = kBoundary;  // higher cell index, or kBoundary
  int minus_edge = 0;        // local edge of minus cell (edge e = verts e, (e+1)%3)
  int plus_edge = 0;
  Vec2 normal;               // unit; minus -> plus, outward on the boundary
  double length = 0.0;

  bool is_boundary() const { return plus_cell == kBoundary; }
};

struct FaceSet {
  std::vector<Face> faces;
  int interior_count = 0;
  int boundary_count = 0;
};

struct MeshMetrics {
  double h = 0.0;                 // max cell diameter
  std::vector<double> h_cell;     // per-cell diameter
  std::vector<double> rho_cell;   // per-cell inradius
  double chunkiness = 0.0;        // max h_K / rho_K
};

/// Initial criss-cross grid: n0 x n0 squares, each split along alternating
/// diagonals so that no triangle has more than one boundary edge and the
/// origin is a grid vertex. Requires n0 >= 2 and even.
Mesh generate_square_mesh(int n0);

/// Red refinement: every triangle split into four congruent children.
Mesh red_refine(const Mesh& mesh);

FaceSet build_faces(const Mesh& mesh);

MeshMetrics mesh_metrics(const Mesh& mesh);

/// Plain-text format "ldgmesh v1"; write/read round-trips bit-exactly.
void write_mesh(const Mesh& mesh, std::ostream& out);
Mesh read_mesh(std::istream& in);
void write_mesh_file(const Mesh& mesh, const std::string& path);
Mesh read_mesh_file(const std::string& path);

}  // namespace ldg
