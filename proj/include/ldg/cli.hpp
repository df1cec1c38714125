#pragma once

#include <string>
#include <vector>

#include "ldg/verification.hpp"

namespace ldg {

enum class RunMode { Study, Solve, Check };

/// Defaults mirror the reference experimental setup: delta = 1e-4,
/// alpha = 2.5, linear elements, n0 = 4 base grid, 5 levels.
struct RunConfig {
  std::vector<double> p_values{2.5};
  std::vector<double> rho_values{0.1};
  double delta = 1e-4;
  double alpha = 2.5;
  int k = 1;
  ModelKind model = ModelKind::PNavierStokes;
  int n0 = 4;
  int levels = 5;
  int solve_level = 2;  // mesh level used by the `solve` subcommand
  int volume_degree = -1;
  int face_degree = -1;
  NewtonOptions newton;
  bool warm_start = true;
  unsigned seed = 42;
  bool verbose = false;
  std::string out;  // output path (solve) or prefix (study)

  StudyConfig study_config(double p, double rho) const;
};

/// Flags come as `--key value`, `--key=value` or `key=value`; `--config FILE`
/// loads the same keys from a flat text file. Unknown keys are rejected.
RunConfig parse_config(const std::vector<std::string>& args, RunMode mode);

/// CSV table: one row per level plus a trailing reference-rate row.
void emit_table(const StudyReport& report, const std::string& path);

/// Legacy ASCII VTK (version 3.0) with the broken velocity as cell data,
/// its vertex average as point data, and the pressure as point data.
void emit_vtk(const DiscreteSolution& solution, const Mesh& mesh, const std::string& path);

}  // namespace ldg
