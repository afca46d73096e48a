#include <doctest.h>

#include <atomic>
#include <chrono>

#include "resdiff/parallel.hpp"
#include "resdiff/uq.hpp"
#include "resdiff/verify.hpp"
#include "test_util.hpp"

using namespace resdiff;

namespace {

struct ThreadGuard {
  ~ThreadGuard() { set_thread_count(1); }
};

}  // namespace

TEST_CASE("parallel_for covers every index once") {
  ThreadGuard guard;
  for (int threads : {1, 2, 3, 8}) {
    set_thread_count(threads);
    for (std::size_t n : {0UL, 1UL, 7UL, 1000UL}) {
      std::vector<std::atomic<int>> hits(n);
      parallel_for(n, [&](std::size_t b, std::size_t e) {
        for (auto i = b; i < e; ++i) ++hits[i];
      });
      for (const auto& h : hits) CHECK(h.load() == 1);
    }
  }
}

TEST_CASE("results do not depend on the thread count") {
  ThreadGuard guard;
  Rng rng(5);
  std::vector<double> units(50);
  for (auto& u : units) u = rng.normal();
  const UnitStatistic mean = [&](std::span<const std::size_t> idx) -> std::optional<double> {
    double s = 0.0;
    for (auto i : idx) s += units[i];
    return s / static_cast<double>(idx.size());
  };

  auto at = [](GridField f, int h) {
    f.valid_time = testutil::hour0() + std::chrono::hours{h};
    return f;
  };
  const GridField early = at(testutil::random_rain(40, 40, rng), 0);
  const GridField on_time = at(testutil::random_rain(40, 40, rng), 1);
  const GridField delayed = at(testutil::random_rain(40, 40, rng), 2);
  const GridField residual = at(testutil::random_signed(40, 40, rng), 1);
  const GridField truth = at(testutil::random_rain(40, 40, rng), 1);
  const auto bounds = make_scenarios(&early, on_time, delayed, residual, 2);
  const auto bins = percentile_bins(truth);

  set_thread_count(1);
  const auto ref_ci = bootstrap_ci(mean, units.size(), {1000, 0.95, 3});
  const auto ref_cov = coverage_csv(evaluate_bounds(bounds, truth, 3.0, bins));
  for (int threads : {2, 4, 7}) {
    set_thread_count(threads);
    const auto ci = bootstrap_ci(mean, units.size(), {1000, 0.95, 3});
    CHECK(ci.lo == ref_ci.lo);
    CHECK(ci.hi == ref_ci.hi);
    CHECK(coverage_csv(evaluate_bounds(bounds, truth, 3.0, bins)) == ref_cov);
  }
}
