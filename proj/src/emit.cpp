#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ldg/cli.hpp"

namespace ldg {

namespace {

std::string format_g6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// atomic emit: write to a temporary and rename into place
void write_atomically(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("emit: cannot open '" + tmp + "'");
    out << content;
    if (!out) throw IoError("emit: write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("emit: cannot rename '" + tmp + "' to '" + path + "'");
}

}  // namespace

void emit_table(const StudyReport& report, const std::string& path) {
  std::ostringstream out;
  out << "level,h,ndof_v,ndof_q,e_L,eoc_L,e_S,eoc_S,e_jump,eoc_jump,e_q,eoc_q,"
         "newton_iters\n";
  for (std::size_t i = 0; i < report.records.size(); ++i) {
    const ErrorRecord& r = report.records[i];
    out << r.level << "," << format_g6(r.h) << "," << r.ndof_v << "," << r.ndof_q << ",";
    out << format_g6(r.e_L) << ",";
    if (i > 0) out << format_g6(report.eocs[i].e_L);
    out << "," << format_g6(r.e_S) << ",";
    if (i > 0) out << format_g6(report.eocs[i].e_S);
    out << "," << format_g6(r.e_jump) << ",";
    if (i > 0) out << format_g6(report.eocs[i].e_jump);
    out << "," << format_g6(r.e_q) << ",";
    if (i > 0) out << format_g6(report.eocs[i].e_q);
    out << "," << r.newton_iterations << "\n";
  }
  char ref[64];
  std::snprintf(ref, sizeof ref, "ref,,,,,,%.4f\n", report.reference_rate);
  out << ref;
  write_atomically(path, out.str());
}

void emit_vtk(const DiscreteSolution& solution, const Mesh& mesh,
              const std::string& path) {
  std::ostringstream out;
  out << "# vtk DataFile Version 3.0\n";
  out << "ldgpflow solution level " << mesh.level << "\n";
  out << "ASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.vertex_count() << " double\n";
  char buf[96];
  for (const Vec2& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "%.12g %.12g 0\n", v.x, v.y);
    out << buf;
  }
  out << "CELLS " << mesh.cell_count() << " " << 4 * mesh.cell_count() << "\n";
  for (const auto& c : mesh.cells) out << "3 " << c[0] << " " << c[1] << " " << c[2] << "\n";
  out << "CELL_TYPES " << mesh.cell_count() << "\n";
  for (int c = 0; c < mesh.cell_count(); ++c) out << "5\n";

  // broken velocity: vertex samples averaged per cell (cell data) and over
  // all incident cells (point data)
  static const double ref[3][2] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  std::vector<Vec2> cell_velocity(mesh.cell_count());
  std::vector<Vec2> point_velocity(mesh.vertex_count());
  std::vector<int> incident(mesh.vertex_count(), 0);
  for (int c = 0; c < mesh.cell_count(); ++c) {
    Vec2 mean;
    for (int v = 0; v < 3; ++v) {
      const Vec2 val = evaluate_vector(solution.velocity, c, ref[v][0], ref[v][1]);
      mean += val;
      point_velocity[mesh.cells[c][v]] += val;
      ++incident[mesh.cells[c][v]];
    }
    cell_velocity[c] = mean * (1.0 / 3.0);
  }
  for (int v = 0; v < mesh.vertex_count(); ++v)
    point_velocity[v] = point_velocity[v] * (1.0 / std::max(1, incident[v]));

  out << "CELL_DATA " << mesh.cell_count() << "\n";
  out << "VECTORS velocity double\n";
  for (const Vec2& v : cell_velocity) {
    std::snprintf(buf, sizeof buf, "%.12g %.12g 0\n", v.x, v.y);
    out << buf;
  }
  out << "POINT_DATA " << mesh.vertex_count() << "\n";
  out << "VECTORS velocity_avg double\n";
  for (const Vec2& v : point_velocity) {
    std::snprintf(buf, sizeof buf, "%.12g %.12g 0\n", v.x, v.y);
    out << buf;
  }
  out << "SCALARS pressure double 1\n";
  out << "LOOKUP_TABLE default\n";
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    std::snprintf(buf, sizeof buf, "%.12g\n", solution.pressure.coeffs[v]);
    out << buf;
  }
  write_atomically(path, out.str());
}

}  // namespace ldg
