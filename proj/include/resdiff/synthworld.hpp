#pragma once

#include <cstdint>

#include "resdiff/grid.hpp"
#include "resdiff/sampler.hpp"

namespace resdiff {

/// A doubly periodic "storm world": Gaussian rain blobs advected at one
/// constant velocity, plus a degraded forecast of it. Time t is in hours
/// since `start`.
struct WorldConfig {
  int ny = 256;
  int nx = 256;
  double pixel_km = 1.0;
  double lat0 = 40.0;
  double lon0 = -100.0;
  UtcHour start = make_utc_hour(2024, 3, 1, 0);

  int blob_count = 6;
  double amplitude_min = 2.0;  // mm/h
  double amplitude_max = 25.0;
  double radius_min_km = 8.0;
  double radius_max_km = 30.0;
  double velocity_east_kmh = 15.0;
  double velocity_south_kmh = 0.0;
  /// Subtracted from the blob sum before clamping at zero, so dry areas are
  /// exactly zero.
  double rain_floor = 0.1;

  // Forecast degradation. The forecast valid at t + L shows the world as it
  // was at t + L - lag, times `bias`, blurred by a Gaussian of `smoothing_km`.
  double lag_hours = 1.0;
  double bias = 0.7;
  double smoothing_km = 2.0;
  /// Lag and smoothing scale by (1 + lead_growth * (L - 1)).
  double lead_growth = 0.05;

  double ari_base = 25.0;
  double ari_amplitude = 15.0;

  std::uint64_t seed = 7;

  void validate() const;
};

GridGeometry world_geometry(const WorldConfig& cfg);

/// Rainfall at a (possibly fractional) time in hours.
GridField gen_truth_at(const WorldConfig& cfg, double hours);
GridField gen_truth(const WorldConfig& cfg, int t);

/// Pseudo-HRRR forecast initialized at t with lead L (valid at t + L).
GridField gen_pseudo_hrrr(const WorldConfig& cfg, int t, int lead);

/// Smooth 10-year ARI stand-in (mm/h).
GridField gen_ari_map(const WorldConfig& cfg);

/// Eight labeled regions in a 2 x 4 block layout.
RegionMap gen_region_map(const WorldConfig& cfg);

/// Periodic separable Gaussian blur; preserves the field integral.
GridField periodic_gaussian_blur(const GridField& f, double sigma_km);

}  // namespace resdiff
