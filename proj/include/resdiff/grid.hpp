#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace resdiff {

using UtcHour = std::chrono::time_point<std::chrono::system_clock, std::chrono::hours>;

/// "YYYY-MM-DDTHH:00:00Z"
std::string format_utc_hour(UtcHour t);
UtcHour parse_utc_hour(std::string_view iso);
UtcHour make_utc_hour(int year, unsigned month, unsigned day, int hour);

/// Kilometres per degree of latitude on the mean-radius sphere.
inline constexpr double kKmPerDegLat = 111.19492664455873;
/// Longitudes are scaled at a fixed standard parallel so that every grid
/// shares one locally Cartesian km frame.
inline constexpr double kStandardParallelDeg = 38.5;
double km_per_deg_lon();

enum class Variable { Rainfall, Residual, Standardized, Threshold, Auxiliary, Region };

std::string_view to_string(Variable v);
Variable variable_from_string(std::string_view s);
std::string_view default_units(Variable v);

struct GridGeometry {
  int ny = 0;
  int nx = 0;
  double lat0 = 0.0;  // degrees, centre of pixel (0, 0)
  double lon0 = 0.0;
  double dy_km = 1.0;  // rows advance southward
  double dx_km = 1.0;  // columns advance eastward

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(ny) * static_cast<std::size_t>(nx); }
  [[nodiscard]] std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(col);
  }
  /// Pixel-centre position in the shared km frame (north, east).
  [[nodiscard]] double north_km(double row) const;
  [[nodiscard]] double east_km(double col) const;

  void validate() const;
  bool operator==(const GridGeometry&) const = default;
};

/// A 2D raster with a per-pixel missing mask. Values at missing pixels are
/// quiet NaN and must not be read as data.
struct GridField {
  GridGeometry geom;
  Variable variable = Variable::Rainfall;
  std::string units = "mm/h";
  UtcHour valid_time{};
  std::vector<double> values;
  std::vector<std::uint8_t> missing;

  static GridField zeros(const GridGeometry& g, Variable v, UtcHour t);
  /// Same geometry and time, zero-filled, with a new variable tag.
  [[nodiscard]] GridField like(Variable v) const;

  [[nodiscard]] std::size_t size() const { return values.size(); }
  [[nodiscard]] bool is_missing(std::size_t i) const { return missing[i] != 0; }
  void set_missing(std::size_t i);
  [[nodiscard]] double at(int row, int col) const { return values[geom.index(row, col)]; }
  double& at(int row, int col) { return values[geom.index(row, col)]; }
  [[nodiscard]] std::size_t missing_count() const;

  /// Checks array sizes and the variable-specific value invariants.
  void validate() const;
};

/// Equality as the file format sees it: metadata, mask, and bit-identical
/// values at non-missing pixels.
bool same_content(const GridField& a, const GridField& b);
void require_same_geometry(const GridField& a, const GridField& b, std::string_view context);

// --- file format -----------------------------------------------------------

std::string encode_grid(const GridField& field);
GridField decode_grid(std::string_view bytes);
GridField read_grid(const std::filesystem::path& path);
void write_grid(const GridField& field, const std::filesystem::path& path);

// --- normalization ---------------------------------------------------------

struct NormStats {
  double mean = 0.0;
  double std = 1.0;
};

inline constexpr double kDefaultStdFloor = 1e-6;

NormStats compute_stats(std::span<const GridField> fields, double std_floor = kDefaultStdFloor);
GridField zscore(const GridField& field, const NormStats& stats);
/// Restores physical units; rainfall output is clamped at zero to absorb
/// rounding below the dry value.
GridField inverse_zscore(const GridField& field, const NormStats& stats, Variable target);

// --- regridding, tiles, mosaics --------------------------------------------

GridField bilinear_regrid(const GridField& src, const GridGeometry& target);

struct TileSpec {
  int row0 = 0;
  int col0 = 0;
  int size = 512;
  std::string region;
  std::string month;  // "YYYY-MM"

  [[nodiscard]] bool inside(const GridGeometry& g) const;
  [[nodiscard]] int center_row() const { return row0 + size / 2; }
  [[nodiscard]] int center_col() const { return col0 + size / 2; }
  bool operator==(const TileSpec&) const = default;
};

GridGeometry tile_geometry(const GridGeometry& parent, const TileSpec& tile);
GridField extract_tile(const GridField& field, const TileSpec& tile);

/// Tiles covering the domain with the given overlap: stride = size - overlap,
/// the last tile on each axis is clamped to the domain edge.
std::vector<TileSpec> layout_tiles(const GridGeometry& domain, int size, int overlap);

/// Overlap-averaging merge. Each output pixel is the mean of all non-missing
/// tile contributions, summed in sorted order so tile order never matters.
GridField mosaic(std::span<const std::pair<TileSpec, GridField>> tiles, const GridGeometry& target);

}  // namespace resdiff
