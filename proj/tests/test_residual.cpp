#include <doctest.h>

#include <chrono>

#include "resdiff/error.hpp"
#include "resdiff/residual.hpp"
#include "test_util.hpp"

using namespace resdiff;
using std::chrono::hours;
using testutil::constant;

TEST_CASE("delta target") {
  GridField now = constant(2, 2, 3.0);
  GridField next = constant(2, 2, 5.0);
  next.valid_time += hours{1};
  const GridField d = make_delta_target(next, now);
  CHECK(d.variable == Variable::Residual);
  CHECK(d.values[0] == 2.0);
  CHECK(d.valid_time == next.valid_time);

  GridField same = now;
  same.valid_time += hours{1};
  const GridField z = make_delta_target(same, now);
  for (double v : z.values) CHECK(v == 0.0);

  SUBCASE("random pair equals element-wise subtraction") {
    Rng rng(2);
    GridField a = testutil::random_rain(16, 16, rng);
    GridField b = testutil::random_rain(16, 16, rng);
    b.valid_time += hours{1};
    const GridField r = make_delta_target(b, a);
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(r.values[i] == b.values[i] - a.values[i]);
  }
  SUBCASE("must be one hour apart") {
    CHECK_THROWS_AS(make_delta_target(now, now), DataError);
  }
  SUBCASE("missing in either input is missing in the residual") {
    GridField b = next;
    b.set_missing(3);
    CHECK(make_delta_target(b, now).missing[3] == 1);
  }
}

TEST_CASE("error target") {
  const GridField m = constant(2, 2, 4.0);
  const GridField h = constant(2, 2, 1.5);
  CHECK(make_error_target(m, h).values[0] == 2.5);
  for (double v : make_error_target(m, m).values) CHECK(v == 0.0);
  Rng rng(6);
  const GridField a = testutil::random_rain(16, 16, rng);
  const GridField b = testutil::random_rain(16, 16, rng);
  const GridField r = make_error_target(a, b);
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(r.values[i] == a.values[i] - b.values[i]);
  GridField late = b;
  late.valid_time += hours{1};
  CHECK_THROWS_AS(make_error_target(a, late), DataError);
}

TEST_CASE("reconstruction") {
  const GridField base = constant(1, 1, 0.2);
  GridField res = constant(1, 1, -0.5, Variable::Residual);
  CHECK(reconstruct(base, res).values[0] == 0.0);
  CHECK(reconstruct_unclamped(base, res).values[0] == doctest::Approx(-0.3));
  GridField one = constant(1, 1, 1.0);
  res.values[0] = 2.5;
  CHECK(reconstruct(one, res).values[0] == 3.5);

  SUBCASE("inverse of the error target") {
    Rng rng(13);
    const GridField truth = testutil::random_rain(20, 20, rng);
    const GridField fc = testutil::random_rain(20, 20, rng);
    const GridField back = reconstruct(fc, make_error_target(truth, fc));
    for (std::size_t i = 0; i < truth.size(); ++i) CHECK(back.values[i] == doctest::Approx(truth.values[i]).epsilon(1e-12));
  }
  SUBCASE("output is rainfall, never negative") {
    Rng rng(14);
    const GridField b = testutil::random_rain(20, 20, rng);
    const GridField r = testutil::random_signed(20, 20, rng, 5.0);
    const GridField out = reconstruct(b, r);
    CHECK(out.variable == Variable::Rainfall);
    for (double v : out.values) CHECK(v >= 0.0);
  }
}
