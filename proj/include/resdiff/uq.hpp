#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "resdiff/grid.hpp"

namespace resdiff {

/// Pixel-wise envelope of the early, on-time and delayed reconstructions.
struct UqBounds {
  GridField lower;
  GridField middle;
  GridField upper;
  int lead = 1;

  /// Throws NumericError if lower <= middle <= upper fails anywhere.
  void check_ordering() const;
};

/// Builds the three lead-offset scenarios fL-1, fL, fL+1 (each plus the same
/// residual) and their envelope. `early` may be null; the on-time member
/// then stands in for it.
UqBounds make_scenarios(const GridField* early, const GridField& on_time, const GridField& delayed,
                        const GridField& residual, int lead);

/// Intensity bins (lo, hi]; the first starts at 0 so dry pixels never land
/// in a bin.
struct IntensityBins {
  std::vector<double> edges;  // size = labels.size() + 1, last may be +inf
  std::vector<std::string> labels;

  [[nodiscard]] std::size_t count() const { return labels.size(); }
  /// Bin of value v, or nullopt outside every bin.
  [[nodiscard]] std::optional<std::size_t> find(double v) const;
};

/// Bins split at the given percentiles of the non-zero truth values, e.g.
/// {50, 75, 90, 95} -> p0-50, p50-75, p75-90, p90-95, p95+.
IntensityBins percentile_bins(const GridField& truth, const std::vector<double>& percentiles = {50, 75, 90, 95});

/// Linear-interpolation percentile of an unsorted sample, q in [0, 100].
double percentile(std::vector<double> sample, double q);

struct BinReport {
  std::string label;
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  std::size_t n = 0;
  std::optional<double> coverage;
  std::optional<double> interval_error;
  std::optional<double> distance_to_bound;
};

struct CoverageReport {
  double tolerance_km = 10.0;
  bool with_distance_to_bound = false;
  std::vector<BinReport> bins;
};

/// Fills coverage only; interval errors are left absent.
CoverageReport coverage_rate(const UqBounds& bounds, const GridField& truth, double tolerance_km,
                             const IntensityBins& bins);

/// Per-bin mean |middle - truth| over non-zero truth pixels. When
/// `distance_to_bound` is set the distance from truth to the nearest bound
/// (0 inside the interval) is reported alongside.
std::vector<BinReport> interval_error(const UqBounds& bounds, const GridField& truth, const IntensityBins& bins,
                                      bool distance_to_bound = false);

/// coverage_rate and interval_error merged into one report.
CoverageReport evaluate_bounds(const UqBounds& bounds, const GridField& truth, double tolerance_km,
                               const IntensityBins& bins, bool distance_to_bound = false);

/// Columns: bin_label, bin_lo_mm, bin_hi_mm, coverage, avg_interval_error_mm,
/// n_pixels, plus avg_distance_to_bound_mm when requested.
std::string coverage_csv(const CoverageReport& report);

}  // namespace resdiff
