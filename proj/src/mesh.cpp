#include "ldg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace ldg {

double Mesh::cell_area(int cell) const {
  const Vec2 a = vertex_of_cell(cell, 0);
  const Vec2 b = vertex_of_cell(cell, 1);
  const Vec2 c = vertex_of_cell(cell, 2);
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
}

Tensor2 Mesh::cell_jacobian(int cell) const {
  const Vec2 a = vertex_of_cell(cell, 0);
  const Vec2 b = vertex_of_cell(cell, 1);
  const Vec2 c = vertex_of_cell(cell, 2);
  return {b.x - a.x, c.x - a.x, b.y - a.y, c.y - a.y};
}

Vec2 Mesh::map_to_physical(int cell, double xi, double eta) const {
  const Vec2 a = vertex_of_cell(cell, 0);
  const Vec2 b = vertex_of_cell(cell, 1);
  const Vec2 c = vertex_of_cell(cell, 2);
  return {a.x + xi * (b.x - a.x) + eta * (c.x - a.x),
          a.y + xi * (b.y - a.y) + eta * (c.y - a.y)};
}

void Mesh::map_to_reference(int cell, const Vec2& x, double& xi, double& eta) const {
  const Vec2 a = vertex_of_cell(cell, 0);
  const Tensor2 J = cell_jacobian(cell);
  const double det = J.a11 * J.a22 - J.a12 * J.a21;
  const double rx = x.x - a.x, ry = x.y - a.y;
  xi = (J.a22 * rx - J.a12 * ry) / det;
  eta = (-J.a21 * rx + J.a11 * ry) / det;
}

namespace {

void validate(const Mesh& mesh) {
  for (int c = 0; c < mesh.cell_count(); ++c) {
    for (int v : mesh.cells[c])
      if (v < 0 || v >= mesh.vertex_count())
        throw MeshError("mesh: vertex index out of range in cell " + std::to_string(c));
    if (!(mesh.cell_area(c) > 0.0))
      throw MeshError("mesh: nonpositive area in cell " + std::to_string(c));
  }
}

}  // namespace

Mesh generate_square_mesh(int n0) {
  if (n0 < 2 || n0 % 2 != 0)
    throw ConfigError("generate_square_mesh: n0 must be even and >= 2");
  Mesh mesh;
  mesh.level = 0;
  const int nv = n0 + 1;
  mesh.vertices.reserve(nv * nv);
  for (int j = 0; j < nv; ++j)
    for (int i = 0; i < nv; ++i)
      mesh.vertices.push_back({-1.0 + 2.0 * i / n0, -1.0 + 2.0 * j / n0});

  auto vid = [nv](int i, int j) { return j * nv + i; };
  mesh.cells.reserve(2 * n0 * n0);
  for (int j = 0; j < n0; ++j) {
    for (int i = 0; i < n0; ++i) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j);
      const int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      if ((i + j) % 2 == 0) {
        // diagonal v00 -- v11
        mesh.cells.push_back({v00, v10, v11});
        mesh.cells.push_back({v00, v11, v01});
      } else {
        // diagonal v10 -- v01
        mesh.cells.push_back({v00, v10, v01});
        mesh.cells.push_back({v10, v11, v01});
      }
    }
  }
  validate(mesh);
  return mesh;
}

Mesh red_refine(const Mesh& mesh) {
  Mesh fine;
  fine.level = mesh.level + 1;
  fine.vertices = mesh.vertices;
  std::map<std::pair<int, int>, int> midpoints;
  auto midpoint = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = midpoints.find(key);
    if (it != midpoints.end()) return it->second;
    const Vec2 pa = mesh.vertices[a], pb = mesh.vertices[b];
    // coordinates are dyadic, so midpoints are exact in binary
    fine.vertices.push_back({0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)});
    const int id = static_cast<int>(fine.vertices.size()) - 1;
    midpoints.emplace(key, id);
    return id;
  };

  fine.cells.reserve(4 * mesh.cells.size());
  fine.parent_cells.reserve(4 * mesh.cells.size());
  for (int c = 0; c < mesh.cell_count(); ++c) {
    const auto [a, b, d] = mesh.cells[c];
    const int mab = midpoint(a, b), mbd = midpoint(b, d), mda = midpoint(d, a);
    fine.cells.push_back({a, mab, mda});
    fine.cells.push_back({mab, b, mbd});
    fine.cells.push_back({mda, mbd, d});
    fine.cells.push_back({mab, mbd, mda});
    for (int r = 0; r < 4; ++r) fine.parent_cells.push_back(c);
  }
  validate(fine);
  return fine;
}

FaceSet build_faces(const Mesh& mesh) {
  struct HalfEdge {
    int cell;
    int edge;
  };
  std::map<std::pair<int, int>, std::vector<HalfEdge>> edges;
  for (int c = 0; c < mesh.cell_count(); ++c) {
    for (int e = 0; e < 3; ++e) {
      const int a = mesh.cells[c][e];
      const int b = mesh.cells[c][(e + 1) % 3];
      edges[std::minmax(a, b)].push_back({c, e});
    }
  }

  FaceSet set;
  set.faces.reserve(edges.size());
  for (const auto& [key, halves] : edges) {
    if (halves.size() > 2)
      throw MeshError("build_faces: edge (" + std::to_string(key.first) + "," +
                      std::to_string(key.second) + ") shared by >2 cells");
    Face f;
    f.v0 = key.first;
    f.v1 = key.second;
    const Vec2 pa = mesh.vertices[f.v0], pb = mesh.vertices[f.v1];
    f.length = (pb - pa).norm();
    if (f.length <= 0.0) throw MeshError("build_faces: degenerate edge");

    if (halves.size() == 2) {
      const HalfEdge lo = halves[0].cell < halves[1].cell ? halves[0] : halves[1];
      const HalfEdge hi = halves[0].cell < halves[1].cell ? halves[1] : halves[0];
      f.minus_cell = lo.cell;
      f.minus_edge = lo.edge;
      f.plus_cell = hi.cell;
      f.plus_edge = hi.edge;
      ++set.interior_count;
    } else {
      f.minus_cell = halves[0].cell;
      f.minus_edge = halves[0].edge;
      f.plus_cell = kBoundary;
      ++set.boundary_count;
    }

    // unit normal pointing away from the minus cell
    Vec2 n{pb.y - pa.y, -(pb.x - pa.x)};
    n = n * (1.0 / f.length);
    int third = 0;
    for (int v : mesh.cells[f.minus_cell])
      if (v != f.v0 && v != f.v1) third = v;
    const Vec2 mid{0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)};
    if (n.dot(mid - mesh.vertices[third]) < 0.0) n = n * -1.0;
    f.normal = n;
    set.faces.push_back(f);
  }

  // conformity: a hanging node shows up as a vertex strictly inside an edge
  // that only one cell references
  for (const Face& f : set.faces) {
    if (!f.is_boundary()) continue;
    const Vec2 a = mesh.vertices[f.v0], b = mesh.vertices[f.v1];
    for (int v = 0; v < mesh.vertex_count(); ++v) {
      if (v == f.v0 || v == f.v1) continue;
      const Vec2 p = mesh.vertices[v];
      const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
      const double t = ((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) /
                       (f.length * f.length);
      if (std::abs(cross) <= 1e-12 * f.length && t > 1e-12 && t < 1.0 - 1e-12)
        throw MeshError("build_faces: non-conforming mesh, vertex " + std::to_string(v) +
                        " hangs on edge (" + std::to_string(f.v0) + "," +
                        std::to_string(f.v1) + ")");
    }
  }
  return set;
}

MeshMetrics mesh_metrics(const Mesh& mesh) {
  MeshMetrics m;
  m.h_cell.resize(mesh.cell_count());
  m.rho_cell.resize(mesh.cell_count());
  for (int c = 0; c < mesh.cell_count(); ++c) {
    const Vec2 a = mesh.vertex_of_cell(c, 0);
    const Vec2 b = mesh.vertex_of_cell(c, 1);
    const Vec2 d = mesh.vertex_of_cell(c, 2);
    const double la = (b - a).norm(), lb = (d - b).norm(), lc = (a - d).norm();
    const double area = mesh.cell_area(c);
    if (!(area > 0.0)) throw MeshError("mesh_metrics: degenerate cell");
    const double diam = std::max({la, lb, lc});
    const double inradius = area / (0.5 * (la + lb + lc));
    m.h_cell[c] = diam;
    m.rho_cell[c] = inradius;
    m.h = std::max(m.h, diam);
    m.chunkiness = std::max(m.chunkiness, diam / inradius);
  }
  return m;
}

void write_mesh(const Mesh& mesh, std::ostream& out) {
  out << "ldgmesh v1\n";
  out << mesh.vertex_count() << "\n";
  char buf[64];
  for (const Vec2& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", v.x, v.y);
    out << buf;
  }
  out << mesh.cell_count() << "\n";
  for (const auto& c : mesh.cells)
    out << c[0] << " " << c[1] << " " << c[2] << "\n";
}

Mesh read_mesh(std::istream& in) {
  std::string magic, version;
  in >> magic >> version;
  if (magic != "ldgmesh" || version != "v1")
    throw IoError("read_mesh: not an ldgmesh v1 file");
  int nv = 0;
  in >> nv;
  if (!in || nv <= 0) throw IoError("read_mesh: bad vertex count");
  Mesh mesh;
  mesh.vertices.resize(nv);
  for (Vec2& v : mesh.vertices) in >> v.x >> v.y;
  int nc = 0;
  in >> nc;
  if (!in || nc <= 0) throw IoError("read_mesh: bad cell count");
  mesh.cells.resize(nc);
  for (auto& c : mesh.cells) in >> c[0] >> c[1] >> c[2];
  if (!in) throw IoError("read_mesh: truncated file");
  validate(mesh);
  build_faces(mesh);  // throws on non-conforming input
  return mesh;
}

void write_mesh_file(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_mesh_file: cannot open " + path);
  write_mesh(mesh, out);
  if (!out) throw IoError("write_mesh_file: write failed for " + path);
}

Mesh read_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_mesh_file: cannot open " + path);
  return read_mesh(in);
}

}  // namespace ldg
