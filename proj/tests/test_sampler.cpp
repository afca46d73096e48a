#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "resdiff/error.hpp"
#include "resdiff/sampler.hpp"
#include "resdiff/synthworld.hpp"
#include "test_util.hpp"

using namespace resdiff;
using testutil::constant;

namespace {

SamplingCriteria small_criteria(int size) {
  SamplingCriteria c;
  c.tile_size_px = size;
  return c;
}

// Two-region map: columns < nx/2 are "west", the rest "east".
RegionMap halves(const GridGeometry& g) {
  RegionMap m{g, std::vector<int>(g.size()), {"west", "east"}};
  for (int r = 0; r < g.ny; ++r) {
    for (int c = 0; c < g.nx; ++c) m.codes[g.index(r, c)] = c < g.nx / 2 ? 0 : 1;
  }
  return m;
}

}  // namespace

TEST_CASE("tile validity rules") {
  const GridField ari = constant(20, 20, 25.0, Variable::Threshold);
  const TileSpec t{0, 0, 10, {}, {}};
  const auto crit = small_criteria(10);
  SUBCASE("dry") {
    const auto v = tile_valid(constant(20, 20, 0.0), t, ari, crit);
    CHECK_FALSE(v.valid);
    CHECK(v.reason == "dry");
  }
  SUBCASE("30% wet passes on coverage") {
    GridField f = constant(20, 20, 0.0);
    for (int k = 0; k < 30; ++k) f.at(k / 10, k % 10) = 1.0;
    const auto v = tile_valid(f, t, ari, crit);
    CHECK(v.valid);
    CHECK(v.reason == "coverage");
  }
  SUBCASE("one pixel above the local ARI passes on exceedance") {
    GridField f = constant(20, 20, 0.0);
    f.at(5, 5) = 30.0;
    const auto v = tile_valid(f, t, ari, crit);
    CHECK(v.valid);
    CHECK(v.reason == "ari");
  }
  SUBCASE("per-tile oracle over random fields") {
    Rng rng(10);
    for (int trial = 0; trial < 200; ++trial) {
      GridField f = constant(20, 20, 0.0);
      const double wet_p = rng.uniform(0.0, 0.5);
      for (auto& v : f.values) v = rng.uniform() < wet_p ? rng.uniform(0.0, 27.0) : 0.0;
      if (rng.uniform() < 0.3) f.set_missing(static_cast<std::size_t>(rng.below(400)));
      const TileSpec tile{static_cast<int>(rng.below(11)), static_cast<int>(rng.below(11)), 10, {}, {}};
      int present = 0;
      int wet = 0;
      bool exceed = false;
      for (int r = tile.row0; r < tile.row0 + 10; ++r) {
        for (int c = tile.col0; c < tile.col0 + 10; ++c) {
          const auto i = f.geom.index(r, c);
          if (f.missing[i]) continue;
          ++present;
          wet += f.values[i] > 0.0;
          exceed = exceed || f.values[i] > 25.0;
        }
      }
      const bool cov = present > 0 && wet >= 0.25 * present;
      const auto v = tile_valid(f, tile, ari, crit);
      CHECK(v.valid == (cov || exceed));
      CHECK(v.reason == (cov ? "coverage" : exceed ? "ari" : "dry"));
    }
  }
}

TEST_CASE("per-timestep sampling") {
  const GridField ari = constant(60, 60, 25.0, Variable::Threshold);
  SUBCASE("all dry gives nothing") {
    Rng rng(1);
    CHECK(sample_timestep(constant(60, 60, 0.0), ari, small_criteria(16), rng).empty());
  }
  SUBCASE("domain that fits one placement yields exactly one tile") {
    const GridField ari16 = constant(16, 16, 25.0, Variable::Threshold);
    Rng rng(2);
    const auto tiles = sample_timestep(constant(16, 16, 1.0), ari16, small_criteria(16), rng);
    REQUIRE(tiles.size() == 1);
    CHECK(tiles[0].tile.row0 == 0);
    CHECK(tiles[0].tile.col0 == 0);
  }
  SUBCASE("spacing audit on every output") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      WorldConfig w;
      w.ny = 128;
      w.nx = 128;
      w.seed = seed;
      const GridField f = gen_truth(w, 0);
      Rng rng(seed);
      auto crit = small_criteria(24);
      const auto tiles = sample_timestep(f, gen_ari_map(w), crit, rng);
      CHECK(static_cast<int>(tiles.size()) <= crit.max_retained_per_timestep);
      for (std::size_t i = 0; i < tiles.size(); ++i) {
        CHECK(tile_valid(f, tiles[i].tile, gen_ari_map(w), crit).valid);
        for (std::size_t j = i + 1; j < tiles.size(); ++j) {
          CHECK(tile_center_distance_km(tiles[i].tile, tiles[j].tile, f.geom) >= 30.0);
        }
      }
    }
  }
  SUBCASE("tile larger than the domain") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_timestep(constant(10, 10, 1.0), constant(10, 10, 25.0, Variable::Threshold),
                                    small_criteria(16), rng),
                    DataError);
  }
}

TEST_CASE("regional balance") {
  const GridGeometry g = testutil::geom(100, 100);
  const RegionMap regions = halves(g);
  auto pool_of = [](int n_west, int n_east, const std::string& month) {
    std::vector<TileSpec> pool;
    for (int i = 0; i < n_west; ++i) pool.push_back({i % 80, 0, 10, {}, month});
    for (int i = 0; i < n_east; ++i) pool.push_back({i % 80, 80, 10, {}, month});
    return pool;
  };
  SUBCASE("small groups are kept whole, large ones capped at 120") {
    const auto pool = pool_of(80, 300, "2024-03");
    const auto kept = regional_balance(pool, regions, kRegionalCap, 5);
    std::map<std::string, int> per;
    for (const auto& t : kept) ++per[t.region];
    CHECK(per["west"] == 80);
    CHECK(per["east"] == 120);
  }
  SUBCASE("months are separate groups") {
    auto pool = pool_of(0, 200, "2024-03");
    const auto more = pool_of(0, 200, "2024-04");
    pool.insert(pool.end(), more.begin(), more.end());
    CHECK(regional_balance(pool, regions, kRegionalCap, 1).size() == 240);
  }
  SUBCASE("same seed, same selection; indices agree") {
    const auto pool = pool_of(150, 300, "2024-05");
    CHECK(regional_balance(pool, regions, 120, 9) == regional_balance(pool, regions, 120, 9));
    const auto idx = regional_balance_indices(pool, regions, 120, 9);
    CHECK(std::is_sorted(idx.begin(), idx.end()));
    CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == idx.size());
    CHECK(regional_balance_indices(pool, regions, 120, 10) != idx);
  }
}

TEST_CASE("evaluation hours") {
  CHECK(eval_hours(2024, 3) == std::pair{11, 23});
  for (int year : {2019, 2020, 2021, 2022, 2023, 2024}) {
    std::set<int> firsts;
    for (int m = 1; m <= 12; ++m) {
      const auto [a, b] = eval_hours(year, m);
      CHECK(b - a == 12);
      CHECK(a >= 0);
      CHECK(b < 24);
      firsts.insert(a);
    }
    CHECK(firsts.size() == 12);
  }
  CHECK_THROWS(eval_hours(2024, 13));
}

TEST_CASE("region map files round-trip") {
  const auto dir = testutil::temp_dir("regions");
  WorldConfig w;
  w.ny = 32;
  w.nx = 64;
  const RegionMap m = gen_region_map(w);
  write_region_map(m, dir / "r.grdf", dir / "r.csv");
  const RegionMap back = read_region_map(dir / "r.grdf", dir / "r.csv");
  CHECK(back.codes == m.codes);
  CHECK(back.labels == m.labels);
  CHECK(back.label_at(0, 0) == m.label_at(0, 0));
}
