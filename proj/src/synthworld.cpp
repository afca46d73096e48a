#include "resdiff/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "resdiff/error.hpp"
#include "resdiff/rng.hpp"

namespace resdiff {

namespace {

struct Blob {
  double north_km;  // at t = 0, measured down from row 0
  double east_km;
  double amplitude;
  double radius_km;
};

std::vector<Blob> make_blobs(const WorldConfig& cfg) {
  Rng rng(cfg.seed);
  std::vector<Blob> blobs;
  for (int i = 0; i < cfg.blob_count; ++i) {
    Blob b{};
    b.north_km = rng.uniform(0.0, cfg.ny * cfg.pixel_km);
    b.east_km = rng.uniform(0.0, cfg.nx * cfg.pixel_km);
    b.amplitude = rng.uniform(cfg.amplitude_min, cfg.amplitude_max);
    b.radius_km = rng.uniform(cfg.radius_min_km, cfg.radius_max_km);
    blobs.push_back(b);
  }
  return blobs;
}

/// Minimum-image separation on a periodic axis of length `period`.
double wrap(double d, double period) {
  d = std::fmod(d, period);
  if (d < -0.5 * period) d += period;
  if (d >= 0.5 * period) d -= period;
  return d;
}

double lead_scale(const WorldConfig& cfg, int lead) { return 1.0 + cfg.lead_growth * std::max(lead - 1, 0); }

UtcHour hour_at(const WorldConfig& cfg, int t) { return cfg.start + std::chrono::hours{t}; }

}  // namespace

void WorldConfig::validate() const {
  if (ny < 1 || nx < 1 || !(pixel_km > 0.0)) throw_config("synthworld", "invalid domain");
  if (blob_count < 0) throw_config("synthworld", "blob count must be non-negative");
  if (!(amplitude_min > 0.0 && amplitude_max >= amplitude_min)) throw_config("synthworld", "bad amplitude range");
  if (!(radius_min_km > 0.0 && radius_max_km >= radius_min_km)) throw_config("synthworld", "bad radius range");
  if (lag_hours < 0.0 || bias < 0.0 || smoothing_km < 0.0 || lead_growth < 0.0 || rain_floor < 0.0) {
    throw_config("synthworld", "degradation parameters must be non-negative");
  }
}

GridGeometry world_geometry(const WorldConfig& cfg) {
  return {cfg.ny, cfg.nx, cfg.lat0, cfg.lon0, cfg.pixel_km, cfg.pixel_km};
}

GridField gen_truth_at(const WorldConfig& cfg, double hours) {
  cfg.validate();
  const auto geom = world_geometry(cfg);
  const int whole = static_cast<int>(std::floor(hours));
  GridField f = GridField::zeros(geom, Variable::Rainfall, hour_at(cfg, whole));
  const double height = cfg.ny * cfg.pixel_km;
  const double width = cfg.nx * cfg.pixel_km;
  for (const auto& b : make_blobs(cfg)) {
    const double cy = b.north_km + cfg.velocity_south_kmh * hours;
    const double cx = b.east_km + cfg.velocity_east_kmh * hours;
    const double inv = 1.0 / (2.0 * b.radius_km * b.radius_km);
    for (int r = 0; r < cfg.ny; ++r) {
      const double dy = wrap(r * cfg.pixel_km - cy, height);
      for (int c = 0; c < cfg.nx; ++c) {
        const double dx = wrap(c * cfg.pixel_km - cx, width);
        f.values[geom.index(r, c)] += b.amplitude * std::exp(-(dx * dx + dy * dy) * inv);
      }
    }
  }
  for (auto& v : f.values) v = std::max(v - cfg.rain_floor, 0.0);
  return f;
}

GridField gen_truth(const WorldConfig& cfg, int t) { return gen_truth_at(cfg, static_cast<double>(t)); }

GridField gen_pseudo_hrrr(const WorldConfig& cfg, int t, int lead) {
  if (lead < 0) throw_config("synthworld", "lead must be non-negative");
  const double scale = lead_scale(cfg, lead);
  GridField f = gen_truth_at(cfg, t + lead - cfg.lag_hours * scale);
  for (auto& v : f.values) v *= cfg.bias;
  if (cfg.smoothing_km > 0.0) f = periodic_gaussian_blur(f, cfg.smoothing_km * scale);
  f.valid_time = hour_at(cfg, t + lead);
  return f;
}

GridField gen_ari_map(const WorldConfig& cfg) {
  const auto geom = world_geometry(cfg);
  GridField f = GridField::zeros(geom, Variable::Threshold, cfg.start);
  for (int r = 0; r < cfg.ny; ++r) {
    for (int c = 0; c < cfg.nx; ++c) {
      const double s = std::sin(2.0 * std::numbers::pi * c / cfg.nx) * std::cos(2.0 * std::numbers::pi * r / cfg.ny);
      f.values[geom.index(r, c)] = cfg.ari_base + cfg.ari_amplitude * (0.5 + 0.5 * s);
    }
  }
  return f;
}

RegionMap gen_region_map(const WorldConfig& cfg) {
  RegionMap map;
  map.geom = world_geometry(cfg);
  map.labels = {"PCST", "NGP", "MDWST", "NE", "SW", "ROCK", "SGP", "SE"};
  map.codes.resize(map.geom.size());
  for (int r = 0; r < cfg.ny; ++r) {
    const int band = r * 2 / cfg.ny;
    for (int c = 0; c < cfg.nx; ++c) map.codes[map.geom.index(r, c)] = band * 4 + c * 4 / cfg.nx;
  }
  return map;
}

GridField periodic_gaussian_blur(const GridField& f, double sigma_km) {
  if (!(sigma_km > 0.0)) return f;
  auto kernel = [](double sigma_px) {
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma_px)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
      k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma_px * sigma_px));
      sum += k[static_cast<std::size_t>(i + radius)];
    }
    for (auto& v : k) v /= sum;
    return k;
  };
  const int ny = f.geom.ny;
  const int nx = f.geom.nx;
  const auto kx = kernel(sigma_km / f.geom.dx_km);
  const auto ky = kernel(sigma_km / f.geom.dy_km);
  const int rx = static_cast<int>(kx.size() / 2);
  const int ry = static_cast<int>(ky.size() / 2);

  GridField tmp = f;
  for (int r = 0; r < ny; ++r) {
    for (int c = 0; c < nx; ++c) {
      double acc = 0.0;
      for (int i = -rx; i <= rx; ++i) {
        const int cc = ((c + i) % nx + nx) % nx;
        acc += kx[static_cast<std::size_t>(i + rx)] * f.values[f.geom.index(r, cc)];
      }
      tmp.values[f.geom.index(r, c)] = acc;
    }
  }
  GridField out = f;
  for (int r = 0; r < ny; ++r) {
    for (int c = 0; c < nx; ++c) {
      double acc = 0.0;
      for (int i = -ry; i <= ry; ++i) {
        const int rr = ((r + i) % ny + ny) % ny;
        acc += ky[static_cast<std::size_t>(i + ry)] * tmp.values[f.geom.index(rr, c)];
      }
      out.values[f.geom.index(r, c)] = std::max(acc, 0.0);
    }
  }
  return out;
}

}  // namespace resdiff
