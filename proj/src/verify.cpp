#include "resdiff/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "resdiff/error.hpp"
#include "resdiff/parallel.hpp"
#include "resdiff/rng.hpp"
#include "resdiff/uq.hpp"

namespace resdiff {

namespace {

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.8g", v);
  return buf;
}

std::vector<std::uint8_t> binarize(const GridField& f, double threshold) {
  std::vector<std::uint8_t> e(f.size(), 0);
  for (std::size_t i = 0; i < f.size(); ++i) e[i] = !f.missing[i] && f.values[i] >= threshold;
  return e;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

}  // namespace

std::optional<double> MaeAccum::value() const {
  if (n == 0) return std::nullopt;
  return abs_sum / static_cast<double>(n);
}

MaeAccum mae_accum(const GridField& pred, const GridField& truth) {
  require_same_geometry(pred, truth, "verify");
  MaeAccum acc;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (pred.missing[i] || truth.missing[i] || !(truth.values[i] > 0.0)) continue;
    acc.abs_sum += std::abs(pred.values[i] - truth.values[i]);
    ++acc.n;
  }
  return acc;
}

double mae_nonzero(const GridField& pred, const GridField& truth) {
  const auto v = mae_accum(pred, truth).value();
  if (!v) throw_data("verify", "mae_nonzero: no rainy, non-missing truth pixels");
  return *v;
}

ContingencyCounts contingency(const GridField& pred, const GridField& truth, double threshold,
                              bool exclude_zero_truth) {
  require_same_geometry(pred, truth, "verify");
  if (!(threshold > 0.0)) throw_config("verify", "threshold must be positive");
  ContingencyCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (pred.missing[i] || truth.missing[i]) continue;
    if (exclude_zero_truth && truth.values[i] == 0.0) continue;
    const bool p = pred.values[i] >= threshold;
    const bool o = truth.values[i] >= threshold;
    if (p && o) {
      ++c.tp;
    } else if (p) {
      ++c.fp;
    } else if (o) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

std::optional<double> pod(const ContingencyCounts& c) {
  if (c.tp + c.fn == 0) return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

std::optional<double> csi(const ContingencyCounts& c) {
  if (c.tp + c.fp + c.fn == 0) return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp + c.fn);
}

std::vector<double> neighborhood_fractions(std::span<const std::uint8_t> events, int ny, int nx, int n) {
  const int h = n / 2;
  const auto w = static_cast<std::size_t>(nx) + 1;
  // Integer-valued summed-area table: exact in double for any realistic grid.
  std::vector<double> sat((static_cast<std::size_t>(ny) + 1) * w, 0.0);
  for (int r = 0; r < ny; ++r) {
    double row = 0.0;
    for (int c = 0; c < nx; ++c) {
      row += events[static_cast<std::size_t>(r) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(c)];
      sat[(static_cast<std::size_t>(r) + 1) * w + static_cast<std::size_t>(c) + 1] =
          sat[static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c) + 1] + row;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ny) * static_cast<std::size_t>(nx));
  for (int r = 0; r < ny; ++r) {
    const auto r0 = static_cast<std::size_t>(std::max(r - h, 0));
    const auto r1 = static_cast<std::size_t>(std::min(r + h, ny - 1)) + 1;
    for (int c = 0; c < nx; ++c) {
      const auto c0 = static_cast<std::size_t>(std::max(c - h, 0));
      const auto c1 = static_cast<std::size_t>(std::min(c + h, nx - 1)) + 1;
      const double sum = sat[r1 * w + c1] - sat[r0 * w + c1] - sat[r1 * w + c0] + sat[r0 * w + c0];
      const double area = static_cast<double>((r1 - r0) * (c1 - c0));
      out[static_cast<std::size_t>(r) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(c)] = sum / area;
    }
  }
  return out;
}

std::optional<double> FssAccum::value() const {
  if (n == 0) return std::nullopt;
  const double ref = f2 + o2;
  if (!(ref > 0.0)) return std::nullopt;
  return 1.0 - sq_diff / ref;
}

FssAccum fss_accum(const GridField& pred, const GridField& truth, double threshold, int n) {
  require_same_geometry(pred, truth, "verify");
  if (!(threshold > 0.0)) throw_config("verify", "threshold must be positive");
  const auto& g = truth.geom;
  if (n < 1 || n % 2 == 0) throw_config("verify", "FSS neighborhood must be a positive odd number");
  if (n > std::min(g.ny, g.nx)) throw_config("verify", "FSS neighborhood larger than the grid");

  const auto f = neighborhood_fractions(binarize(pred, threshold), g.ny, g.nx, n);
  const auto o = neighborhood_fractions(binarize(truth, threshold), g.ny, g.nx, n);
  FssAccum acc;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (pred.missing[i] || truth.missing[i]) continue;
    acc.sq_diff += (f[i] - o[i]) * (f[i] - o[i]);
    acc.f2 += f[i] * f[i];
    acc.o2 += o[i] * o[i];
    ++acc.n;
  }
  return acc;
}

std::optional<double> fss(const GridField& pred, const GridField& truth, double threshold, int n) {
  return fss_accum(pred, truth, threshold, n).value();
}

ThresholdTable ThresholdTable::defaults() {
  ThresholdTable t;
  t.rows = {
      {"CONUS", {1.02, 2.40, 5.26, 8.43}}, {"PCST", {0.96, 1.89, 3.18, 4.21}},
      {"ROCK", {0.90, 1.92, 3.94, 6.13}},  {"NGP", {1.14, 2.80, 6.33, 10.14}},
      {"MDWST", {1.33, 3.15, 6.66, 10.27}}, {"NE", {0.88, 2.03, 4.71, 7.72}},
      {"SW", {0.72, 1.41, 2.52, 3.55}},    {"SGP", {0.99, 2.17, 4.47, 7.04}},
      {"SE", {0.96, 2.04, 4.00, 5.90}},
  };
  return t;
}

ThresholdTable ThresholdTable::parse(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw_data("verify", "threshold table is empty");
  const auto header = split_csv(line);
  if (header != std::vector<std::string>{"region", "p50", "p75", "p90", "p95"}) {
    throw_data("verify", "threshold table header must be region,p50,p75,p90,p95");
  }
  ThresholdTable t;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != 5) throw_data("verify", "threshold row needs 5 columns: '" + line + "'");
    std::array<double, 4> v{};
    for (std::size_t k = 0; k < 4; ++k) {
      try {
        std::size_t used = 0;
        v[k] = std::stod(cells[k + 1], &used);
        if (used != cells[k + 1].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw_data("verify", "bad threshold '" + cells[k + 1] + "' for region " + cells[0]);
      }
    }
    if (!t.rows.emplace(cells[0], v).second) throw_data("verify", "duplicate region " + cells[0]);
  }
  t.validate();
  return t;
}

ThresholdTable ThresholdTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("verify", "cannot read threshold table " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ThresholdTable::validate() const {
  if (rows.empty()) throw_data("verify", "threshold table has no regions");
  for (const auto& [region, v] : rows) {
    if (!(v[0] > 0.0)) throw_data("verify", "thresholds must be positive (" + region + ")");
    for (std::size_t k = 1; k < v.size(); ++k) {
      if (!(v[k] > v[k - 1])) throw_data("verify", "thresholds not strictly increasing for " + region);
    }
  }
}

double ThresholdTable::at(const std::string& region, int pct) const {
  const auto it = rows.find(region);
  if (it == rows.end()) throw_data("verify", "no thresholds for region " + region);
  for (std::size_t k = 0; k < kThresholdPercentiles.size(); ++k) {
    if (kThresholdPercentiles[k] == pct) return it->second[k];
  }
  throw_config("verify", "percentile must be one of 50, 75, 90, 95");
}

std::string ThresholdTable::to_csv() const {
  std::string out = "region,p50,p75,p90,p95\n";
  for (const auto& [region, v] : rows) {
    out += region;
    for (double x : v) out += ',' + fmt_g(x);
    out += '\n';
  }
  return out;
}

void BootstrapConfig::validate() const {
  if (n_boot < 1) throw_config("verify", "bootstrap count must be positive");
  if (!(level > 0.0 && level < 1.0)) throw_config("verify", "confidence level must lie in (0, 1)");
}

BootstrapResult bootstrap_ci(const UnitStatistic& stat, std::size_t n_units, const BootstrapConfig& cfg) {
  cfg.validate();
  if (n_units < 2) throw_data("verify", "bootstrap needs at least 2 units");
  std::vector<std::size_t> idx(n_units);
  for (std::size_t i = 0; i < n_units; ++i) idx[i] = i;
  const auto point = stat(idx);
  if (!point) throw_data("verify", "statistic undefined on the full sample");

  const Rng root(cfg.seed);
  std::vector<std::optional<double>> values(static_cast<std::size_t>(cfg.n_boot));
  parallel_for(values.size(), [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> draw(n_units);
    for (std::size_t b = begin; b < end; ++b) {
      Rng rng = root.stream(b);
      for (auto& i : draw) i = static_cast<std::size_t>(rng.below(n_units));
      values[b] = stat(draw);
    }
  });
  BootstrapResult res;
  res.point = *point;
  std::vector<double> reps;
  reps.reserve(values.size());
  for (const auto& v : values) {
    if (v && std::isfinite(*v)) {
      reps.push_back(*v);
    } else {
      ++res.skipped;
    }
  }
  res.used = static_cast<int>(reps.size());
  if (reps.empty()) throw_numeric("verify", "statistic undefined on every bootstrap replicate");
  const double tail = 50.0 * (1.0 - cfg.level);
  res.lo = percentile(reps, tail);
  res.hi = percentile(std::move(reps), 100.0 - tail);
  return res;
}

std::string metrics_csv(std::span<const MetricRow> rows) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt_g(*v) : std::string{}; };
  std::string out = "metric,value,ci_lo,ci_hi,month,region,lead_hours,threshold_mm,neighborhood,n\n";
  for (const auto& r : rows) {
    out += r.metric + ',' + opt(r.value) + ',' + opt(r.ci_lo) + ',' + opt(r.ci_hi) + ',' + r.month + ',' + r.region +
           ',' + std::to_string(r.lead_hours) + ',' + opt(r.threshold_mm) + ',' +
           (r.neighborhood ? std::to_string(*r.neighborhood) : std::string{}) + ',' + std::to_string(r.n) + '\n';
  }
  return out;
}

std::string metrics_json(std::span<const MetricRow> rows) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"metric", r.metric},
                   {"value", opt(r.value)},
                   {"ci_lo", opt(r.ci_lo)},
                   {"ci_hi", opt(r.ci_hi)},
                   {"month", r.month},
                   {"region", r.region},
                   {"lead_hours", r.lead_hours},
                   {"threshold_mm", opt(r.threshold_mm)},
                   {"neighborhood", r.neighborhood ? nlohmann::json(*r.neighborhood) : nlohmann::json(nullptr)},
                   {"n", r.n}});
  }
  return arr.dump(2) + '\n';
}

}  // namespace resdiff
