#pragma once

#include <stdexcept>
#include <string>

namespace ldg {

// Invalid user-facing configuration (bad parameter, malformed config file).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Geometry / topology violations detected while building or reading meshes.
class MeshError : public std::runtime_error {
public:
  explicit MeshError(const std::string& what) : std::runtime_error(what) {}
};

// Nonlinear solver failed to converge; carries the iteration history in what().
class SolveError : public std::runtime_error {
public:
  explicit SolveError(const std::string& what) : std::runtime_error(what) {}
};

// File system problems (unwritable path, truncated file).
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ldg
