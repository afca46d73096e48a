#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "resdiff/error.hpp"
#include "resdiff/synthworld.hpp"

using namespace resdiff;

namespace {

std::pair<int, int> argmax(const GridField& f) {
  const auto it = std::max_element(f.values.begin(), f.values.end());
  const auto i = static_cast<int>(it - f.values.begin());
  return {i / f.geom.nx, i % f.geom.nx};
}

double integral(const GridField& f) { return std::accumulate(f.values.begin(), f.values.end(), 0.0); }

WorldConfig one_blob() {
  WorldConfig w;
  w.ny = 64;
  w.nx = 64;
  w.blob_count = 1;
  w.radius_min_km = 4.0;
  w.radius_max_km = 6.0;
  w.velocity_east_kmh = 5.0;
  w.velocity_south_kmh = 2.0;
  return w;
}

}  // namespace

TEST_CASE("truth generator") {
  SUBCASE("no blobs, no rain") {
    WorldConfig w = one_blob();
    w.blob_count = 0;
    const GridField f = gen_truth(w, 3);
    CHECK(std::all_of(f.values.begin(), f.values.end(), [](double v) { return v == 0.0; }));
  }
  SUBCASE("one hour moves the peak by the velocity") {
    const WorldConfig w = one_blob();
    const auto [r0, c0] = argmax(gen_truth(w, 0));
    const auto [r1, c1] = argmax(gen_truth(w, 1));
    CHECK((r1 - r0 + 64) % 64 == 2);
    CHECK((c1 - c0 + 64) % 64 == 5);
  }
  SUBCASE("superposition bound and non-negativity") {
    WorldConfig w;
    w.ny = 96;
    w.nx = 96;
    const GridField f = gen_truth(w, 7);
    const double bound = w.blob_count * w.amplitude_max;
    for (double v : f.values) {
      CHECK(v >= 0.0);
      CHECK(v <= bound);
    }
    f.validate();
  }
  SUBCASE("valid times count hours from the start") {
    const WorldConfig w = one_blob();
    CHECK(gen_truth(w, 5).valid_time == w.start + std::chrono::hours{5});
    CHECK(gen_pseudo_hrrr(w, 5, 3).valid_time == w.start + std::chrono::hours{8});
  }
}

TEST_CASE("pseudo forecast degradation") {
  SUBCASE("no degradation is the truth") {
    WorldConfig w = one_blob();
    w.lag_hours = 0.0;
    w.bias = 1.0;
    w.smoothing_km = 0.0;
    const GridField f = gen_pseudo_hrrr(w, 4, 3);
    const GridField t = gen_truth(w, 7);
    CHECK(f.values == t.values);
  }
  SUBCASE("bias 0.5 halves the integral") {
    WorldConfig w = one_blob();
    w.bias = 0.5;
    w.lead_growth = 0.0;
    const GridField f = gen_pseudo_hrrr(w, 4, 2);
    const GridField src = gen_truth_at(w, 4 + 2 - w.lag_hours);
    CHECK(std::abs(integral(f) / integral(src) - 0.5) < 1e-6);
  }
  SUBCASE("a one-hour lag shows as the displacement under cross-correlation") {
    WorldConfig w = one_blob();
    w.blob_count = 5;
    w.bias = 1.0;
    w.smoothing_km = 0.0;
    w.lead_growth = 0.0;
    const GridField f = gen_pseudo_hrrr(w, 10, 1);  // world at hour 10, valid at 11
    const GridField t = gen_truth(w, 11);
    int best_dy = 0;
    int best_dx = 0;
    double best = -1.0;
    for (int dy = -8; dy <= 8; ++dy) {
      for (int dx = -8; dx <= 8; ++dx) {
        double s = 0.0;
        for (int r = 0; r < 64; ++r) {
          for (int c = 0; c < 64; ++c) s += f.at(r, c) * t.at((r + dy + 64) % 64, (c + dx + 64) % 64);
        }
        if (s > best) {
          best = s;
          best_dy = dy;
          best_dx = dx;
        }
      }
    }
    CHECK(best_dy == 2);
    CHECK(best_dx == 5);
  }
  SUBCASE("blur preserves the integral") {
    const WorldConfig w = one_blob();
    const GridField t = gen_truth(w, 2);
    CHECK(integral(periodic_gaussian_blur(t, 3.0)) == doctest::Approx(integral(t)).epsilon(1e-10));
  }
}

TEST_CASE("static maps") {
  WorldConfig w;
  w.ny = 40;
  w.nx = 80;
  const GridField ari = gen_ari_map(w);
  for (double v : ari.values) CHECK(v > 0.0);
  const RegionMap rm = gen_region_map(w);
  CHECK(rm.labels.size() == 8);
  CHECK(rm.codes.size() == ari.size());
  CHECK(std::all_of(rm.codes.begin(), rm.codes.end(), [](int c) { return c >= 0 && c < 8; }));
}

TEST_CASE("world configuration is validated") {
  WorldConfig w;
  w.radius_min_km = 10.0;
  w.radius_max_km = 5.0;
  CHECK_THROWS_AS(w.validate(), ConfigError);
  WorldConfig v;
  v.ny = 0;
  CHECK_THROWS_AS(v.validate(), ConfigError);
}
