#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "resdiff/grid.hpp"

namespace resdiff {

// --- pixel-wise ------------------------------------------------------------

struct MaeAccum {
  double abs_sum = 0.0;
  std::size_t n = 0;

  MaeAccum& operator+=(const MaeAccum& o) {
    abs_sum += o.abs_sum;
    n += o.n;
    return *this;
  }
  [[nodiscard]] std::optional<double> value() const;
};

/// Sum of |pred - truth| over pixels with truth > 0 and neither missing.
MaeAccum mae_accum(const GridField& pred, const GridField& truth);
/// Throws DataError when no pixel qualifies.
double mae_nonzero(const GridField& pred, const GridField& truth);

// --- categorical -----------------------------------------------------------

struct ContingencyCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  [[nodiscard]] std::uint64_t total() const { return tp + fp + fn + tn; }
  ContingencyCounts& operator+=(const ContingencyCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  bool operator==(const ContingencyCounts&) const = default;
};

/// Event means value >= threshold. With `exclude_zero_truth`, pixels whose
/// truth is exactly 0 are left out of the table.
ContingencyCounts contingency(const GridField& pred, const GridField& truth, double threshold,
                              bool exclude_zero_truth = false);

std::optional<double> pod(const ContingencyCounts& c);
std::optional<double> csi(const ContingencyCounts& c);

// --- neighborhood ----------------------------------------------------------

inline constexpr int kDefaultNeighborhood = 27;
inline constexpr int kSmallNeighborhood = 5;

/// Pooled FSS sums: sum (f - o)^2, sum f^2, sum o^2 over the scored pixels.
struct FssAccum {
  double sq_diff = 0.0;
  double f2 = 0.0;
  double o2 = 0.0;
  std::size_t n = 0;

  FssAccum& operator+=(const FssAccum& o) {
    sq_diff += o.sq_diff;
    f2 += o.f2;
    o2 += o.o2;
    n += o.n;
    return *this;
  }
  /// 1 - MSE / (mean f^2 + mean o^2), or nullopt when the reference is 0.
  [[nodiscard]] std::optional<double> value() const;
};

/// Neighborhood event fractions over an n x n window. Windows are truncated
/// at the edges and normalized by the in-bounds pixel count. Missing pixels
/// count as non-events and are not scored.
FssAccum fss_accum(const GridField& pred, const GridField& truth, double threshold, int n);
std::optional<double> fss(const GridField& pred, const GridField& truth, double threshold, int n);

/// Event fraction field for one binarized input, exposed for tests.
std::vector<double> neighborhood_fractions(std::span<const std::uint8_t> events, int ny, int nx, int n);

// --- thresholds ------------------------------------------------------------

inline constexpr std::array<int, 4> kThresholdPercentiles{50, 75, 90, 95};

struct ThresholdTable {
  std::map<std::string, std::array<double, 4>> rows;

  /// The default regional table.
  static ThresholdTable defaults();
  /// CSV with header region,p50,p75,p90,p95.
  static ThresholdTable load(const std::filesystem::path& path);
  static ThresholdTable parse(const std::string& csv);

  void validate() const;
  [[nodiscard]] double at(const std::string& region, int percentile) const;
  [[nodiscard]] std::string to_csv() const;
};

// --- bootstrap -------------------------------------------------------------

struct BootstrapConfig {
  int n_boot = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BootstrapResult {
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int used = 0;
  int skipped = 0;
};

/// A statistic evaluated on a multiset of unit indices (indices may repeat).
using UnitStatistic = std::function<std::optional<double>(std::span<const std::size_t>)>;

/// Percentile interval from resampling whole units with replacement.
/// Replicate b draws from its own stream of the seed, so the result does not
/// depend on evaluation order. Replicates where the statistic is undefined
/// are skipped and counted.
BootstrapResult bootstrap_ci(const UnitStatistic& stat, std::size_t n_units, const BootstrapConfig& cfg = {});

// --- reports ---------------------------------------------------------------

struct MetricRow {
  std::string metric;
  std::optional<double> value;
  std::optional<double> ci_lo;
  std::optional<double> ci_hi;
  std::string month;
  std::string region;
  int lead_hours = 0;
  std::optional<double> threshold_mm;
  std::optional<int> neighborhood;
  std::size_t n = 0;
};

std::string metrics_csv(std::span<const MetricRow> rows);
std::string metrics_json(std::span<const MetricRow> rows);

}  // namespace resdiff
