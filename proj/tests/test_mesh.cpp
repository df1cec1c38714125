#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "ldg/mesh.hpp"

using namespace ldg;

TEST_CASE("generator rejects invalid n0") {
  CHECK_THROWS_AS(generate_square_mesh(1), ConfigError);
  CHECK_THROWS_AS(generate_square_mesh(3), ConfigError);
  CHECK_THROWS_AS(generate_square_mesh(0), ConfigError);
}

TEST_CASE("base mesh counts and geometry") {
  const Mesh m2 = generate_square_mesh(2);
  CHECK(m2.cell_count() == 8);
  CHECK(m2.vertex_count() == 9);

  const Mesh m4 = generate_square_mesh(4);
  CHECK(m4.cell_count() == 32);
  const MeshMetrics metrics = mesh_metrics(m4);
  CHECK(metrics.h == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-15));

  double total = 0.0;
  for (int c = 0; c < m4.cell_count(); ++c) {
    CHECK(m4.cell_area(c) > 0.0);
    total += m4.cell_area(c);
  }
  CHECK(total == doctest::Approx(4.0).epsilon(1e-14));

  // the origin must be a grid vertex
  bool origin = false;
  for (const Vec2& v : m4.vertices) origin |= (v.x == 0.0 && v.y == 0.0);
  CHECK(origin);
}

TEST_CASE("each cell has at most one boundary edge") {
  for (int n0 : {2, 4, 6}) {
    Mesh mesh = generate_square_mesh(n0);
    for (int round = 0; round < 2; ++round) {
      const FaceSet faces = build_faces(mesh);
      std::map<int, int> boundary_edges;
      for (const Face& f : faces.faces)
        if (f.is_boundary()) ++boundary_edges[f.minus_cell];
      for (const auto& [cell, count] : boundary_edges) CHECK(count <= 1);
      mesh = red_refine(mesh);
    }
  }
}

TEST_CASE("red refinement quadruples cells, halves h exactly, keeps shape") {
  Mesh mesh = generate_square_mesh(2);
  CHECK(mesh.cell_count() == 8);
  const double chunk0 = mesh_metrics(mesh).chunkiness;
  double h = mesh_metrics(mesh).h;
  for (int level = 1; level <= 3; ++level) {
    mesh = red_refine(mesh);
    CHECK(mesh.level == level);
    CHECK(mesh.cell_count() == 8 * std::pow(4, level));
    const MeshMetrics metrics = mesh_metrics(mesh);
    CHECK(metrics.h == h / 2.0);  // dyadic midpoints are exact
    h = metrics.h;
    CHECK(metrics.chunkiness == doctest::Approx(chunk0).epsilon(1e-14));

    double total = 0.0;
    for (int c = 0; c < mesh.cell_count(); ++c) total += mesh.cell_area(c);
    CHECK(total == doctest::Approx(4.0).epsilon(1e-13));

    const FaceSet faces = build_faces(mesh);
    double perimeter = 0.0;
    for (const Face& f : faces.faces)
      if (f.is_boundary()) perimeter += f.length;
    CHECK(perimeter == doctest::Approx(8.0).epsilon(1e-13));
  }
}

TEST_CASE("face counts satisfy 3 cells = 2 interior + boundary") {
  Mesh mesh = generate_square_mesh(2);
  for (int round = 0; round < 3; ++round) {
    const FaceSet faces = build_faces(mesh);
    CHECK(3 * mesh.cell_count() == 2 * faces.interior_count + faces.boundary_count);
    CHECK(faces.interior_count + faces.boundary_count ==
          static_cast<int>(faces.faces.size()));
    mesh = red_refine(mesh);
  }
}

TEST_CASE("boundary faces lie on the rim with outward normals") {
  const Mesh mesh = generate_square_mesh(4);
  const FaceSet faces = build_faces(mesh);
  for (const Face& f : faces.faces) {
    CHECK(f.normal.norm() == doctest::Approx(1.0).epsilon(1e-14));
    const Vec2 edge = mesh.vertices[f.v1] - mesh.vertices[f.v0];
    CHECK(std::abs(f.normal.dot(edge)) <= 1e-14);
    if (!f.is_boundary()) continue;
    const Vec2 a = mesh.vertices[f.v0], b = mesh.vertices[f.v1];
    const bool on_x = std::abs(a.x) == 1.0 && a.x == b.x;
    const bool on_y = std::abs(a.y) == 1.0 && a.y == b.y;
    CHECK((on_x || on_y));
    if (on_x && a.x == 1.0) {
      CHECK(f.normal.x == doctest::Approx(1.0));
      CHECK(f.normal.y == doctest::Approx(0.0));
    }
  }
}

TEST_CASE("per-cell Gauss identity: edge normals weighted by length sum to zero") {
  const Mesh mesh = red_refine(generate_square_mesh(4));
  const FaceSet faces = build_faces(mesh);
  std::vector<Vec2> sums(mesh.cell_count());
  for (const Face& f : faces.faces) {
    sums[f.minus_cell] += f.length * f.normal;
    if (!f.is_boundary()) sums[f.plus_cell] += f.length * (f.normal * -1.0);
  }
  for (const Vec2& s : sums) CHECK(s.norm() <= 1e-13);
}

TEST_CASE("metrics: inradius formulas") {
  // unit right isosceles triangle (legs 1)
  Mesh tri;
  tri.vertices = {{0, 0}, {1, 0}, {0, 1}};
  tri.cells = {{0, 1, 2}};
  const MeshMetrics m = mesh_metrics(tri);
  CHECK(m.h_cell[0] == doctest::Approx(std::sqrt(2.0)));
  CHECK(m.rho_cell[0] == doctest::Approx((2.0 - std::sqrt(2.0)) / 2.0).epsilon(1e-14));
  CHECK(m.chunkiness ==
        doctest::Approx(2.0 * std::sqrt(2.0) / (2.0 - std::sqrt(2.0))).epsilon(1e-14));

  // equilateral triangle, side 1: ratio 2 sqrt(3)
  Mesh eq;
  eq.vertices = {{0, 0}, {1, 0}, {0.5, std::sqrt(3.0) / 2.0}};
  eq.cells = {{0, 1, 2}};
  CHECK(mesh_metrics(eq).chunkiness == doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-13));
}

TEST_CASE("mesh text format round trips bit-exactly") {
  const Mesh mesh = red_refine(generate_square_mesh(4));
  std::ostringstream first;
  write_mesh(mesh, first);
  std::istringstream in(first.str());
  const Mesh reread = read_mesh(in);
  CHECK(reread.cell_count() == mesh.cell_count());
  std::ostringstream second;
  write_mesh(reread, second);
  CHECK(first.str() == second.str());
}

TEST_CASE("reader rejects malformed and non-conforming input") {
  std::istringstream bad_magic("nope v1\n");
  CHECK_THROWS_AS(read_mesh(bad_magic), IoError);

  // hanging node: vertex 3 sits in the middle of cell 0's bottom edge
  std::istringstream hanging(
      "ldgmesh v1\n5\n-1 -1\n1 -1\n-1 1\n0 -1\n0.5 -2\n2\n0 1 2\n3 4 1\n");
  CHECK_THROWS_AS(read_mesh(hanging), MeshError);

  std::istringstream negative_area("ldgmesh v1\n3\n0 0\n1 0\n0 1\n1\n0 2 1\n");
  CHECK_THROWS_AS(read_mesh(negative_area), MeshError);
}

TEST_CASE("reference map round trip") {
  const Mesh mesh = generate_square_mesh(2);
  for (int c = 0; c < mesh.cell_count(); ++c) {
    const Vec2 x = mesh.map_to_physical(c, 0.25, 0.5);
    double xi, eta;
    mesh.map_to_reference(c, x, xi, eta);
    CHECK(xi == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(eta == doctest::Approx(0.5).epsilon(1e-14));
  }
}
