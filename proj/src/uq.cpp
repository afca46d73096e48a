#include "resdiff/uq.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "resdiff/error.hpp"
#include "resdiff/parallel.hpp"
#include "resdiff/residual.hpp"

namespace resdiff {

namespace {

using std::chrono::hours;

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.8g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_g(*v) : std::string{}; }

std::string pct_label(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

bool evaluable(const UqBounds& b, const GridField& truth, std::size_t i) {
  return !truth.missing[i] && truth.values[i] > 0.0 && !b.lower.missing[i] && !b.upper.missing[i] &&
         !b.middle.missing[i];
}

void check_inputs(const UqBounds& b, const GridField& truth) {
  require_same_geometry(b.middle, truth, "uq");
  require_same_geometry(b.lower, truth, "uq");
  require_same_geometry(b.upper, truth, "uq");
}

}  // namespace

void UqBounds::check_ordering() const {
  for (std::size_t i = 0; i < middle.size(); ++i) {
    if (lower.missing[i] || middle.missing[i] || upper.missing[i]) continue;
    if (!(lower.values[i] <= middle.values[i] && middle.values[i] <= upper.values[i] && lower.values[i] >= 0.0)) {
      throw_numeric("uq", "bounds out of order at pixel " + std::to_string(i));
    }
  }
}

UqBounds make_scenarios(const GridField* early, const GridField& on_time, const GridField& delayed,
                        const GridField& residual, int lead) {
  if (lead < 1) throw_data("uq", "lead must be at least 1");
  require_same_geometry(on_time, residual, "uq");
  require_same_geometry(on_time, delayed, "uq");
  if (on_time.valid_time != residual.valid_time) throw_data("uq", "on-time forecast and residual differ in valid time");
  if (delayed.valid_time - on_time.valid_time != hours{1}) {
    throw_data("uq", "delayed member must be the next lead of the same cycle");
  }
  if (early != nullptr) {
    require_same_geometry(on_time, *early, "uq");
    if (on_time.valid_time - early->valid_time != hours{1}) {
      throw_data("uq", "early member must be the previous lead of the same cycle");
    }
  }

  UqBounds b;
  b.lead = lead;
  b.middle = reconstruct(on_time, residual);
  const GridField late = reconstruct(delayed, residual);
  const GridField first = early != nullptr ? reconstruct(*early, residual) : b.middle;
  b.lower = b.middle;
  b.upper = b.middle;
  for (std::size_t i = 0; i < b.middle.size(); ++i) {
    if (first.missing[i] || b.middle.missing[i] || late.missing[i]) {
      b.lower.set_missing(i);
      b.middle.set_missing(i);
      b.upper.set_missing(i);
      continue;
    }
    const double v[3] = {first.values[i], b.middle.values[i], late.values[i]};
    b.lower.values[i] = std::min({v[0], v[1], v[2]});
    b.upper.values[i] = std::max({v[0], v[1], v[2]});
  }
  return b;
}

std::optional<std::size_t> IntensityBins::find(double v) const {
  for (std::size_t b = 0; b < count(); ++b) {
    if (v > edges[b] && v <= edges[b + 1]) return b;
  }
  return std::nullopt;
}

double percentile(std::vector<double> sample, double q) {
  if (sample.empty()) throw_data("uq", "percentile of an empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw_config("uq", "percentile must lie in [0, 100]");
  std::sort(sample.begin(), sample.end());
  const double pos = q / 100.0 * static_cast<double>(sample.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sample.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sample[lo] + frac * (sample[hi] - sample[lo]);
}

IntensityBins percentile_bins(const GridField& truth, const std::vector<double>& percentiles) {
  for (std::size_t i = 1; i < percentiles.size(); ++i) {
    if (!(percentiles[i] > percentiles[i - 1])) throw_config("uq", "bin percentiles must be strictly increasing");
  }
  std::vector<double> wet;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!truth.missing[i] && truth.values[i] > 0.0) wet.push_back(truth.values[i]);
  }
  if (wet.empty()) throw_data("uq", "no rainy truth pixels to derive intensity bins from");

  IntensityBins bins;
  bins.edges.push_back(0.0);
  double prev_pct = 0.0;
  for (double p : percentiles) {
    bins.edges.push_back(percentile(wet, p));
    bins.labels.push_back("p" + pct_label(prev_pct) + "-" + pct_label(p));
    prev_pct = p;
  }
  bins.edges.push_back(std::numeric_limits<double>::infinity());
  bins.labels.push_back("p" + pct_label(prev_pct) + "+");
  return bins;
}

CoverageReport coverage_rate(const UqBounds& bounds, const GridField& truth, double tolerance_km,
                             const IntensityBins& bins) {
  check_inputs(bounds, truth);
  if (!(tolerance_km >= 0.0)) throw_config("uq", "tolerance must be non-negative");
  const auto& g = truth.geom;

  std::vector<std::pair<int, int>> disc;
  const int ry = static_cast<int>(std::floor(tolerance_km / g.dy_km + 1e-9));
  const int rx = static_cast<int>(std::floor(tolerance_km / g.dx_km + 1e-9));
  for (int dr = -ry; dr <= ry; ++dr) {
    for (int dc = -rx; dc <= rx; ++dc) {
      if (std::hypot(dr * g.dy_km, dc * g.dx_km) <= tolerance_km + 1e-9) disc.emplace_back(dr, dc);
    }
  }

  // Per-row tallies keep the reduction order fixed whatever the thread count.
  const std::size_t nb = bins.count();
  std::vector<std::size_t> row_covered(static_cast<std::size_t>(g.ny) * nb, 0);
  std::vector<std::size_t> row_total(static_cast<std::size_t>(g.ny) * nb, 0);
  parallel_for(static_cast<std::size_t>(g.ny), [&](std::size_t begin, std::size_t end) {
    for (auto row = begin; row < end; ++row) {
      const int r = static_cast<int>(row);
      for (int c = 0; c < g.nx; ++c) {
        const auto p = g.index(r, c);
        if (!evaluable(bounds, truth, p)) continue;
        const auto bin = bins.find(truth.values[p]);
        if (!bin) continue;
        ++row_total[row * nb + *bin];
        const double v = truth.values[p];
        for (const auto& [dr, dc] : disc) {
          const int rr = r + dr;
          const int cc = c + dc;
          if (rr < 0 || rr >= g.ny || cc < 0 || cc >= g.nx) continue;
          const auto q = g.index(rr, cc);
          if (bounds.lower.missing[q] || bounds.upper.missing[q]) continue;
          if (bounds.lower.values[q] <= v && v <= bounds.upper.values[q]) {
            ++row_covered[row * nb + *bin];
            break;
          }
        }
      }
    }
  });
  std::vector<std::size_t> covered(nb, 0);
  std::vector<std::size_t> total(nb, 0);
  for (std::size_t row = 0; row < static_cast<std::size_t>(g.ny); ++row) {
    for (std::size_t b = 0; b < nb; ++b) {
      covered[b] += row_covered[row * nb + b];
      total[b] += row_total[row * nb + b];
    }
  }

  CoverageReport report;
  report.tolerance_km = tolerance_km;
  for (std::size_t b = 0; b < bins.count(); ++b) {
    BinReport br{bins.labels[b], bins.edges[b], bins.edges[b + 1], total[b], {}, {}, {}};
    if (total[b] > 0) br.coverage = static_cast<double>(covered[b]) / static_cast<double>(total[b]);
    report.bins.push_back(br);
  }
  return report;
}

std::vector<BinReport> interval_error(const UqBounds& bounds, const GridField& truth, const IntensityBins& bins,
                                      bool distance_to_bound) {
  check_inputs(bounds, truth);
  std::vector<double> abs_sum(bins.count(), 0.0);
  std::vector<double> dist_sum(bins.count(), 0.0);
  std::vector<std::size_t> n(bins.count(), 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!evaluable(bounds, truth, i)) continue;
    const auto bin = bins.find(truth.values[i]);
    if (!bin) continue;
    const double v = truth.values[i];
    ++n[*bin];
    abs_sum[*bin] += std::abs(bounds.middle.values[i] - v);
    if (v < bounds.lower.values[i]) {
      dist_sum[*bin] += bounds.lower.values[i] - v;
    } else if (v > bounds.upper.values[i]) {
      dist_sum[*bin] += v - bounds.upper.values[i];
    }
  }
  std::vector<BinReport> out;
  for (std::size_t b = 0; b < bins.count(); ++b) {
    BinReport br{bins.labels[b], bins.edges[b], bins.edges[b + 1], n[b], {}, {}, {}};
    if (n[b] > 0) {
      br.interval_error = abs_sum[b] / static_cast<double>(n[b]);
      if (distance_to_bound) br.distance_to_bound = dist_sum[b] / static_cast<double>(n[b]);
    }
    out.push_back(br);
  }
  return out;
}

CoverageReport evaluate_bounds(const UqBounds& bounds, const GridField& truth, double tolerance_km,
                               const IntensityBins& bins, bool distance_to_bound) {
  CoverageReport report = coverage_rate(bounds, truth, tolerance_km, bins);
  const auto errors = interval_error(bounds, truth, bins, distance_to_bound);
  report.with_distance_to_bound = distance_to_bound;
  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    report.bins[b].interval_error = errors[b].interval_error;
    report.bins[b].distance_to_bound = errors[b].distance_to_bound;
  }
  return report;
}

std::string coverage_csv(const CoverageReport& report) {
  std::string out = "bin_label,bin_lo_mm,bin_hi_mm,coverage,avg_interval_error_mm,n_pixels";
  if (report.with_distance_to_bound) out += ",avg_distance_to_bound_mm";
  out += '\n';
  for (const auto& b : report.bins) {
    out += b.label + ',' + fmt_g(b.lo) + ',' + (std::isinf(b.hi) ? std::string("inf") : fmt_g(b.hi)) + ',' +
           fmt_opt(b.coverage) + ',' + fmt_opt(b.interval_error) + ',' + std::to_string(b.n);
    if (report.with_distance_to_bound) out += ',' + fmt_opt(b.distance_to_bound);
    out += '\n';
  }
  return out;
}

}  // namespace resdiff
