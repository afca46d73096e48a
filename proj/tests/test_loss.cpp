#include <doctest.h>

#include <cmath>
#include <vector>

#include "resdiff/error.hpp"
#include "resdiff/loss.hpp"
#include "resdiff/rng.hpp"
#include "test_util.hpp"

using namespace resdiff;

namespace {

// Extended-precision evaluation of the four-ramp intensity weight with its
// low-rain complement, written directly from the reference coefficients.
long double weight_oracle(long double y) {
  auto sig = [](long double x) { return 1.0L / (1.0L + std::exp(-x)); };
  return 3.5L * sig((y - 0.015L) * 150.0L) + 5.0L * sig((y - 0.08L) * 50.0L) + 6.0L * sig((y - 0.25L) * 20.0L) +
         7.0L * sig((y - 0.5L) * 10.0L) + 0.6L * (1.0L - sig((y - 0.015L) * 150.0L));
}

std::vector<double> randn(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("weight curve against 40-digit reference values") {
  // Evaluated with arbitrary-precision arithmetic (mpmath, 40 digits).
  CHECK(std::abs(weight_curve(0.0) - 1.0534515600335784449) < 1e-12);
  CHECK(std::abs(weight_curve(0.015) - 2.3450872191838392546) < 1e-12);
  CHECK(std::abs(weight_curve(0.1) - 7.5657431852453088755) < 1e-12);
  CHECK(std::abs(weight_curve(0.5) - 17.959842890663010656) < 1e-12);
  CHECK(std::abs(weight_curve(1.0) - 21.453148208116644457) < 1e-12);
}

TEST_CASE("weight curve against the extended-precision oracle on 10^4 points") {
  double worst = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    const double y = -0.5 + 2.0 * i / 10000.0;
    worst = std::max(worst, std::abs(weight_curve(y) - static_cast<double>(weight_oracle(y))));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("weight curve shape") {
  double prev = weight_curve(0.0);
  for (int i = 1; i <= 10000; ++i) {
    const double w = weight_curve(i / 10000.0);
    CHECK(w >= prev);
    CHECK(w <= 22.1);
    prev = w;
  }
  CHECK(weight_curve(1.0) > weight_curve(0.0));
}

TEST_CASE("weight curve derivative matches central differences") {
  for (double y : {-0.2, 0.0, 0.01, 0.015, 0.08, 0.3, 0.5, 0.9}) {
    const double h = 1e-6;
    const double fd = (weight_curve(y + h) - weight_curve(y - h)) / (2 * h);
    CHECK(weight_curve_derivative(y) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("scaled_mae") {
  const std::vector<double> a{1, 2, 3, 4};
  CHECK(scaled_mae(a, a, 0.7, 1e-6) == 0.0);
  const std::vector<double> b{2, 3, 4, 5};
  CHECK(scaled_mae(a, b, 0.5, 1e-6) == doctest::Approx(1.0 / (0.5 + 1e-6)).epsilon(1e-15));
  SUBCASE("epsilon guards sigma = 0") {
    const double v = scaled_mae(a, b, 0.0, 1e-6);
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(1e6).epsilon(1e-12));
  }
  SUBCASE("element-wise oracle") {
    Rng rng(4);
    const auto p = randn(500, rng);
    const auto t = randn(500, rng);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - t[i]) / (1.3 + 1e-6);
    CHECK(std::abs(scaled_mae(p, t, 1.3, 1e-6) - s / 500.0) < 1e-12);
  }
  SUBCASE("valid mask restricts the mean") {
    const std::vector<std::uint8_t> valid{1, 0, 0, 1};
    const std::vector<double> c{1, 100, 100, 6};
    CHECK(scaled_mae(c, a, 1.0, 0.0, valid) == doctest::Approx(1.0));
  }
}

TEST_CASE("weighted_mae") {
  const std::vector<double> t{0.5};
  const std::vector<double> p{1.5};
  CHECK(weighted_mae(t, t) == 0.0);
  CHECK(std::abs(weighted_mae(p, t) - 17.959842890663010656) < 1e-12);
  Rng rng(9);
  std::vector<double> pr(400);
  std::vector<double> tr(400);
  for (std::size_t i = 0; i < 400; ++i) {
    tr[i] = rng.uniform(-0.2, 1.2);
    pr[i] = tr[i] + rng.normal();
  }
  double s = 0.0;
  for (std::size_t i = 0; i < 400; ++i) s += static_cast<double>(weight_oracle(tr[i])) * std::abs(pr[i] - tr[i]);
  CHECK(std::abs(weighted_mae(pr, tr) - s / 400.0) < 1e-12);
}

TEST_CASE("hybrid loss boundaries and mixing") {
  Rng rng(12);
  const auto p = randn(256, rng);
  const auto t = randn(256, rng);
  LossConfig c;
  c.alpha = 1.0;
  CHECK(hybrid_sigma_loss(p, t, 0.8, c) == scaled_mae(p, t, 0.8, c.epsilon));
  c.alpha = 0.0;
  CHECK(hybrid_sigma_loss(p, t, 0.8, c) == weighted_mae(p, t, c));
  c.alpha = 0.8;
  const double mixed = hybrid_sigma_loss(p, t, 0.8, c);
  CHECK(mixed == doctest::Approx(0.8 * scaled_mae(p, t, 0.8, c.epsilon) + 0.2 * weighted_mae(p, t, c)).epsilon(1e-14));
  CHECK(0.8 * 2.0 + 0.2 * 10.0 == doctest::Approx(3.6));
}

TEST_CASE("hybrid loss gradient matches finite differences away from kinks") {
  Rng rng(5);
  for (WeightSource src : {WeightSource::Truth, WeightSource::Prediction}) {
    LossConfig c;
    c.weight_source = src;
    std::vector<double> t(64);
    std::vector<double> p(64);
    for (std::size_t i = 0; i < 64; ++i) {
      t[i] = rng.uniform(0.0, 1.0);
      p[i] = t[i] + (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.05, 0.5);
    }
    std::vector<double> g(64);
    hybrid_sigma_loss_grad(p, t, 0.6, c, g);
    for (std::size_t i = 0; i < 64; i += 7) {
      auto q = p;
      const double h = 1e-6;
      q[i] += h;
      const double up = hybrid_sigma_loss(q, t, 0.6, c);
      q[i] -= 2 * h;
      const double dn = hybrid_sigma_loss(q, t, 0.6, c);
      CHECK(g[i] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-5));
    }
  }
}

TEST_CASE("loss configuration is validated") {
  LossConfig c;
  c.alpha = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  LossConfig d;
  d.epsilon = -1.0;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  const std::vector<double> a{1, 2};
  const std::vector<double> b{1};
  CHECK_THROWS(scaled_mae(a, b, 1.0, 1e-6));
}

TEST_CASE("field overloads skip missing pixels") {
  resdiff::GridField p = testutil::field(1, 3, {1.0, 5.0, 2.0}, Variable::Standardized);
  resdiff::GridField t = testutil::field(1, 3, {0.0, 0.0, 0.0}, Variable::Standardized);
  p.set_missing(1);
  CHECK(scaled_mae(p, t, 1.0, 0.0) == doctest::Approx(1.5));
}
