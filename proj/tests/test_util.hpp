#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "resdiff/grid.hpp"
#include "resdiff/rng.hpp"

namespace testutil {

inline resdiff::GridGeometry geom(int ny, int nx, double dy = 1.0, double dx = 1.0) {
  return {ny, nx, 40.0, -100.0, dy, dx};
}

inline resdiff::UtcHour hour0() { return resdiff::make_utc_hour(2024, 3, 1, 0); }

inline resdiff::GridField field(int ny, int nx, const std::vector<double>& values,
                                resdiff::Variable v = resdiff::Variable::Rainfall) {
  resdiff::GridField f = resdiff::GridField::zeros(geom(ny, nx), v, hour0());
  f.values = values;
  return f;
}

inline resdiff::GridField constant(int ny, int nx, double c, resdiff::Variable v = resdiff::Variable::Rainfall) {
  return field(ny, nx, std::vector<double>(static_cast<std::size_t>(ny * nx), c), v);
}

/// Uniform rainfall in [0, hi) with a fraction `dry` of exact zeros.
inline resdiff::GridField random_rain(int ny, int nx, resdiff::Rng& rng, double hi = 10.0, double dry = 0.3) {
  resdiff::GridField f = constant(ny, nx, 0.0);
  for (auto& v : f.values) v = rng.uniform() < dry ? 0.0 : rng.uniform(0.0, hi);
  return f;
}

inline resdiff::GridField random_signed(int ny, int nx, resdiff::Rng& rng, double scale = 1.0) {
  resdiff::GridField f = constant(ny, nx, 0.0, resdiff::Variable::Residual);
  for (auto& v : f.values) v = scale * rng.normal();
  return f;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("resdiff_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil
