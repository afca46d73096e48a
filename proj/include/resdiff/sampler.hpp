#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "resdiff/grid.hpp"
#include "resdiff/rng.hpp"

namespace resdiff {

struct SamplingCriteria {
  double min_coverage_fraction = 0.25;
  double min_spacing_km = 30.0;
  int max_candidates_per_timestep = 50;
  int max_retained_per_timestep = 20;
  int tile_size_px = 512;

  void validate() const;
};

struct TileVerdict {
  bool valid = false;
  std::string reason;  // "coverage", "ari" or "dry"
};

/// Valid when at least the configured fraction of non-missing pixels is wet,
/// or any pixel exceeds the local ARI threshold.
TileVerdict tile_valid(const GridField& field, const TileSpec& tile, const GridField& ari_map,
                       const SamplingCriteria& criteria);

struct SampledTile {
  TileSpec tile;
  std::string reason;
};

double tile_center_distance_km(const TileSpec& a, const TileSpec& b, const GridGeometry& g);

/// Random candidate placements until the retained or candidate budget runs
/// out. Accepted tiles are valid and keep their centres at least
/// min_spacing_km apart.
std::vector<SampledTile> sample_timestep(const GridField& field, const GridField& ari_map,
                                         const SamplingCriteria& criteria, Rng& rng);

/// Per-pixel region labels. Code -1 marks an unlabeled pixel.
struct RegionMap {
  GridGeometry geom;
  std::vector<int> codes;
  std::vector<std::string> labels;

  [[nodiscard]] const std::string& label_at(int row, int col) const;
};

void write_region_map(const RegionMap& map, const std::filesystem::path& grid_path,
                      const std::filesystem::path& labels_csv);
RegionMap read_region_map(const std::filesystem::path& grid_path, const std::filesystem::path& labels_csv);

inline constexpr int kRegionalCap = 120;

/// Caps every (region, month) group at `cap` tiles chosen uniformly at random.
/// Regions come from each tile's centre pixel; output keeps pool order.
std::vector<TileSpec> regional_balance(std::span<const TileSpec> pool, const RegionMap& regions, int cap,
                                       std::uint64_t seed);

/// The same selection as pool indices, ascending.
std::vector<std::size_t> regional_balance_indices(std::span<const TileSpec> pool, const RegionMap& regions, int cap,
                                                 std::uint64_t seed);

/// The two evaluation initialization hours (UTC) for a month, 12 h apart.
std::pair<int, int> eval_hours(int year, int month);

std::string month_key(UtcHour t);

}  // namespace resdiff
