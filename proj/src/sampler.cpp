#include "resdiff/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "resdiff/error.hpp"

namespace resdiff {

void SamplingCriteria::validate() const {
  if (!(min_coverage_fraction > 0.0 && min_coverage_fraction <= 1.0)) {
    throw_config("sampler", "coverage fraction must lie in (0, 1]");
  }
  if (!(min_spacing_km > 0.0)) throw_config("sampler", "spacing must be positive");
  if (max_retained_per_timestep < 0 || max_retained_per_timestep > max_candidates_per_timestep) {
    throw_config("sampler", "retained tiles cannot exceed candidates");
  }
  if (tile_size_px < 1) throw_config("sampler", "tile size must be positive");
}

TileVerdict tile_valid(const GridField& field, const TileSpec& tile, const GridField& ari_map,
                       const SamplingCriteria& criteria) {
  if (!tile.inside(field.geom)) throw_data("sampler", "tile outside field");
  if (!tile.inside(ari_map.geom)) throw_data("sampler", "tile outside ARI map");
  if (!(ari_map.geom == field.geom)) throw_data("sampler", "ARI map geometry differs from the field");

  std::size_t present = 0;
  std::size_t wet = 0;
  bool exceeds = false;
  for (int r = tile.row0; r < tile.row0 + tile.size; ++r) {
    for (int c = tile.col0; c < tile.col0 + tile.size; ++c) {
      const auto i = field.geom.index(r, c);
      if (field.missing[i]) continue;
      ++present;
      if (field.values[i] > 0.0) ++wet;
      if (!ari_map.missing[i] && field.values[i] > ari_map.values[i]) exceeds = true;
    }
  }
  if (present > 0 &&
      static_cast<double>(wet) >= criteria.min_coverage_fraction * static_cast<double>(present)) {
    return {true, "coverage"};
  }
  if (exceeds) return {true, "ari"};
  return {false, "dry"};
}

double tile_center_distance_km(const TileSpec& a, const TileSpec& b, const GridGeometry& g) {
  const double dy = (a.center_row() - b.center_row()) * g.dy_km;
  const double dx = (a.center_col() - b.center_col()) * g.dx_km;
  return std::hypot(dy, dx);
}

std::string month_key(UtcHour t) {
  const std::string iso = format_utc_hour(t);
  return iso.substr(0, 7);
}

std::vector<SampledTile> sample_timestep(const GridField& field, const GridField& ari_map,
                                         const SamplingCriteria& criteria, Rng& rng) {
  criteria.validate();
  const int size = criteria.tile_size_px;
  if (size > field.geom.ny || size > field.geom.nx) throw_data("sampler", "domain smaller than one tile");

  std::vector<SampledTile> accepted;
  const std::string month = month_key(field.valid_time);
  for (int k = 0; k < criteria.max_candidates_per_timestep; ++k) {
    if (static_cast<int>(accepted.size()) >= criteria.max_retained_per_timestep) break;
    TileSpec cand{static_cast<int>(rng.below(static_cast<std::uint64_t>(field.geom.ny - size + 1))),
                  static_cast<int>(rng.below(static_cast<std::uint64_t>(field.geom.nx - size + 1))), size, {}, month};
    const auto verdict = tile_valid(field, cand, ari_map, criteria);
    if (!verdict.valid) continue;
    const bool spaced = std::all_of(accepted.begin(), accepted.end(), [&](const SampledTile& s) {
      return tile_center_distance_km(s.tile, cand, field.geom) >= criteria.min_spacing_km;
    });
    if (spaced) accepted.push_back({cand, verdict.reason});
  }
  return accepted;
}

const std::string& RegionMap::label_at(int row, int col) const {
  const int code = codes[geom.index(row, col)];
  if (code < 0 || code >= static_cast<int>(labels.size())) {
    throw_data("sampler", "unlabeled pixel (" + std::to_string(row) + "," + std::to_string(col) + ")");
  }
  return labels[static_cast<std::size_t>(code)];
}

void write_region_map(const RegionMap& map, const std::filesystem::path& grid_path,
                      const std::filesystem::path& labels_csv) {
  GridField f = GridField::zeros(map.geom, Variable::Region, UtcHour{});
  for (std::size_t i = 0; i < map.codes.size(); ++i) {
    if (map.codes[i] < 0) {
      f.set_missing(i);
    } else {
      f.values[i] = map.codes[i];
    }
  }
  write_grid(f, grid_path);
  std::ofstream out(labels_csv, std::ios::trunc);
  if (!out) throw_data("sampler", "cannot write " + labels_csv.string());
  out << "code,label\n";
  for (std::size_t i = 0; i < map.labels.size(); ++i) out << i << ',' << map.labels[i] << '\n';
}

RegionMap read_region_map(const std::filesystem::path& grid_path, const std::filesystem::path& labels_csv) {
  const GridField f = read_grid(grid_path);
  if (f.variable != Variable::Region) throw_data("sampler", grid_path.string() + " is not a region grid");
  RegionMap map;
  map.geom = f.geom;
  map.codes.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) map.codes[i] = f.missing[i] ? -1 : static_cast<int>(f.values[i]);

  std::ifstream in(labels_csv);
  if (!in) throw_data("sampler", "cannot read " + labels_csv.string());
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw_data("sampler", "bad region label line '" + line + "'");
    const auto code = static_cast<std::size_t>(std::stoul(line.substr(0, comma)));
    if (code != map.labels.size()) throw_data("sampler", "region codes must be listed in order");
    map.labels.push_back(line.substr(comma + 1));
  }
  return map;
}

std::vector<std::size_t> regional_balance_indices(std::span<const TileSpec> pool, const RegionMap& regions, int cap,
                                                 std::uint64_t seed) {
  if (cap < 0) throw_config("sampler", "regional cap must be non-negative");
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& t = pool[i];
    if (!t.inside(regions.geom)) throw_data("sampler", "tile outside region map");
    groups[{regions.label_at(t.center_row(), t.center_col()), t.month}].push_back(i);
  }

  const Rng root(seed);
  std::vector<std::size_t> keep;
  std::uint64_t ordinal = 0;
  for (auto& [key, idx] : groups) {
    Rng rng = root.stream(ordinal++);
    const std::size_t take = std::min(idx.size(), static_cast<std::size_t>(cap));
    for (std::size_t i = 0; i < take; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

std::vector<TileSpec> regional_balance(std::span<const TileSpec> pool, const RegionMap& regions, int cap,
                                       std::uint64_t seed) {
  std::vector<TileSpec> out;
  for (auto i : regional_balance_indices(pool, regions, cap, seed)) {
    TileSpec t = pool[i];
    t.region = regions.label_at(t.center_row(), t.center_col());
    out.push_back(std::move(t));
  }
  return out;
}

std::pair<int, int> eval_hours(int year, int month) {
  if (month < 1 || month > 12) throw_data("sampler", "month must be in 1..12");
  const int base = ((year % 12) + 12) % 12;
  const int h1 = (base + month) % 12;
  return {h1, h1 + 12};
}

}  // namespace resdiff
