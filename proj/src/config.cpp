#include <fstream>
#include <sstream>

#include "ldg/cli.hpp"

namespace ldg {

StudyConfig RunConfig::study_config(double p, double rho) const {
  StudyConfig sc;
  sc.p = p;
  sc.rho = rho;
  sc.delta = delta;
  sc.alpha = alpha;
  sc.model = model;
  sc.k = k;
  sc.n0 = n0;
  sc.levels = levels;
  sc.volume_degree = volume_degree;
  sc.face_degree = face_degree;
  sc.newton = newton;
  sc.warm_start = warm_start;
  sc.verbose = verbose;
  return sc;
}

namespace {

double parse_double(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
  }
  if (pos != value.size())
    throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
  return v;
}

int parse_int(const std::string& key, const std::string& value) {
  const double v = parse_double(key, value);
  if (v != static_cast<int>(v))
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + value + "'");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on") return true;
  if (value == "0" || value == "false" || value == "off") return false;
  throw ConfigError("config: key '" + key + "' expects a boolean, got '" + value + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, item));
  if (out.empty()) throw ConfigError("config: key '" + key + "' expects values");
  return out;
}

void apply(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "p") {
    cfg.p_values = parse_list(key, value);
  } else if (key == "rho") {
    cfg.rho_values = parse_list(key, value);
  } else if (key == "delta") {
    cfg.delta = parse_double(key, value);
  } else if (key == "alpha") {
    cfg.alpha = parse_double(key, value);
  } else if (key == "k") {
    cfg.k = parse_int(key, value);
  } else if (key == "model") {
    if (value == "pstokes")
      cfg.model = ModelKind::PStokes;
    else if (value == "pnavierstokes")
      cfg.model = ModelKind::PNavierStokes;
    else
      throw ConfigError("config: model must be 'pstokes' or 'pnavierstokes'");
  } else if (key == "n0") {
    cfg.n0 = parse_int(key, value);
  } else if (key == "levels") {
    cfg.levels = parse_int(key, value);
  } else if (key == "level") {
    cfg.solve_level = parse_int(key, value);
  } else if (key == "quad_volume_degree") {
    cfg.volume_degree = parse_int(key, value);
  } else if (key == "quad_face_degree") {
    cfg.face_degree = parse_int(key, value);
  } else if (key == "newton_max_iter") {
    cfg.newton.max_iter = parse_int(key, value);
  } else if (key == "newton_tol_abs") {
    cfg.newton.tol_abs = parse_double(key, value);
  } else if (key == "newton_tol_rel") {
    cfg.newton.tol_rel = parse_double(key, value);
  } else if (key == "newton_line_search") {
    cfg.newton.line_search = parse_bool(key, value);
  } else if (key == "newton_check_jacobian") {
    cfg.newton.check_jacobian = parse_bool(key, value);
  } else if (key == "warm_start") {
    cfg.warm_start = parse_bool(key, value);
  } else if (key == "seed") {
    cfg.seed = static_cast<unsigned>(parse_int(key, value));
  } else if (key == "verbose") {
    cfg.verbose = parse_bool(key, value);
  } else if (key == "out") {
    cfg.out = value;
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

void load_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t\r");
    line = line.substr(begin, end - begin + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + " of '" + path +
                        "' is not key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t");
      return s.substr(b, e - b + 1);
    };
    apply(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void validate(const RunConfig& cfg, RunMode mode) {
  for (double p : cfg.p_values)
    if (!(p > 1.0)) throw ConfigError("config: p must be > 1");
  for (double rho : cfg.rho_values)
    if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("config: rho must lie in (0,1]");
  if (!(cfg.delta >= 0.0)) throw ConfigError("config: delta must be >= 0");
  if (!(cfg.alpha > 0.0)) throw ConfigError("config: alpha must be > 0");
  if (cfg.k < 1 || cfg.k > 2) throw ConfigError("config: k must be 1 or 2");
  if (cfg.n0 < 2 || cfg.n0 % 2 != 0) throw ConfigError("config: n0 must be even, >= 2");
  if (mode == RunMode::Study && cfg.levels < 2)
    throw ConfigError("config: a study needs levels >= 2 for an EOC");
  if (cfg.levels < 1) throw ConfigError("config: levels must be >= 1");
  if (cfg.solve_level < 0) throw ConfigError("config: level must be >= 0");
  if (cfg.newton.max_iter < 1) throw ConfigError("config: newton_max_iter must be >= 1");
}

}  // namespace

RunConfig parse_config(const std::vector<std::string>& args, RunMode mode) {
  RunConfig cfg;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string token = args[i];
    std::string key, value;
    if (token.rfind("--", 0) == 0) token = token.substr(2);
    const auto eq = token.find('=');
    if (eq != std::string::npos) {
      key = token.substr(0, eq);
      value = token.substr(eq + 1);
    } else {
      key = token;
      if (i + 1 >= args.size())
        throw ConfigError("config: flag '" + key + "' is missing its value");
      value = args[++i];
    }
    if (key == "config")
      load_file(cfg, value);
    else
      apply(cfg, key, value);
  }
  validate(cfg, mode);
  return cfg;
}

}  // namespace ldg
