#include "resdiff/edm.hpp"

#include <cmath>
#include <string>

#include "resdiff/error.hpp"

namespace resdiff {

FeatureMap FeatureMap::zeros(int channels, int ny, int nx) {
  if (channels < 0 || ny < 1 || nx < 1) throw_data("edm", "invalid feature map shape");
  FeatureMap f;
  f.channels = channels;
  f.ny = ny;
  f.nx = nx;
  f.data.assign(static_cast<std::size_t>(channels) * f.plane_size(), 0.0);
  return f;
}

EdmCoeffs precondition_coeffs(double sigma, double sigma_data) {
  if (!(sigma > 0.0) || !(sigma_data > 0.0)) throw_numeric("edm", "sigma and sigma_data must be positive");
  const double s2 = sigma * sigma;
  const double d2 = sigma_data * sigma_data;
  const double root = std::sqrt(s2 + d2);
  return {
      .c_skip = d2 / (s2 + d2),
      .c_in = 1.0 / root,
      .c_out = sigma * sigma_data / root,
      .c_noise = std::log(sigma) / 4.0,
  };
}

void SigmaSchedule::validate() const {
  if (!(sigma_min > 0.0) || !(sigma_min < sigma_max)) throw_config("edm", "need 0 < sigma_min < sigma_max");
  if (num_steps < 1) throw_config("edm", "num_steps must be >= 1");
  if (!(rho > 0.0)) throw_config("edm", "rho must be positive");
  if (!(sigma_data > 0.0)) throw_config("edm", "sigma_data must be positive");
}

std::vector<double> SigmaSchedule::ladder() const {
  validate();
  std::vector<double> sigmas;
  sigmas.reserve(static_cast<std::size_t>(num_steps) + 1);
  if (num_steps == 1) {
    sigmas.push_back(sigma_max);
  } else {
    const double hi = std::pow(sigma_max, 1.0 / rho);
    const double lo = std::pow(sigma_min, 1.0 / rho);
    for (int i = 0; i < num_steps; ++i) {
      const double frac = static_cast<double>(i) / static_cast<double>(num_steps - 1);
      sigmas.push_back(std::pow(hi + frac * (lo - hi), rho));
    }
  }
  sigmas.push_back(0.0);
  return sigmas;
}

double sample_sigma(Rng& rng, double p_mean, double p_std) {
  if (p_std < 0.0) throw_config("edm", "p_std must be non-negative");
  return std::exp(p_mean + p_std * rng.normal());
}

FeatureMap wrap_denoise(const Denoiser& d, const FeatureMap& x_noisy, double sigma, const FeatureMap& cond,
                        double sigma_data) {
  if (x_noisy.channels != 1 || (cond.channels > 0 && !x_noisy.same_spatial(cond))) {
    throw_data("edm", "wrap_denoise: shape mismatch between noisy field and condition");
  }
  const auto k = precondition_coeffs(sigma, sigma_data);
  FeatureMap scaled = x_noisy;
  for (auto& v : scaled.data) v *= k.c_in;
  const FeatureMap raw = d.evaluate(scaled, cond, k.c_noise);
  if (raw.channels != 1 || !raw.same_spatial(x_noisy)) {
    throw_data("edm", "denoiser returned a map of the wrong shape");
  }
  FeatureMap out = x_noisy;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = k.c_skip * x_noisy.data[i] + k.c_out * raw.data[i];
  return out;
}

FeatureMap heun_sample(const Denoiser& d, const FeatureMap& cond, const SigmaSchedule& sched, Rng& rng) {
  const auto sigmas = sched.ladder();
  FeatureMap x = FeatureMap::zeros(1, cond.ny, cond.nx);
  for (auto& v : x.data) v = sched.sigma_max * rng.normal();

  auto check = [](const FeatureMap& f, std::size_t step) {
    for (double v : f.data) {
      if (!std::isfinite(v)) throw_numeric("edm", "heun_sample: non-finite state at step " + std::to_string(step));
    }
  };

  std::vector<double> slope(x.data.size());
  for (std::size_t i = 0; i + 1 < sigmas.size(); ++i) {
    const double sigma = sigmas[i];
    const double next = sigmas[i + 1];
    const FeatureMap x0 = wrap_denoise(d, x, sigma, cond, sched.sigma_data);
    check(x0, i);
    for (std::size_t p = 0; p < slope.size(); ++p) slope[p] = (x.data[p] - x0.data[p]) / sigma;

    FeatureMap euler = x;
    for (std::size_t p = 0; p < slope.size(); ++p) euler.data[p] += (next - sigma) * slope[p];

    if (next > 0.0) {
      const FeatureMap x0_next = wrap_denoise(d, euler, next, cond, sched.sigma_data);
      check(x0_next, i);
      for (std::size_t p = 0; p < slope.size(); ++p) {
        const double slope_next = (euler.data[p] - x0_next.data[p]) / next;
        x.data[p] += (next - sigma) * 0.5 * (slope[p] + slope_next);
      }
    } else {
      x = std::move(euler);
    }
    check(x, i);
  }
  return x;
}

FixedResidualDenoiser::FixedResidualDenoiser(FeatureMap target, double sigma_data)
    : target_(std::move(target)), sigma_data_(sigma_data) {
  if (target_.channels != 1) throw_data("edm", "fixed residual target must be a single plane");
}

FeatureMap FixedResidualDenoiser::evaluate(const FeatureMap& scaled_noisy, const FeatureMap& /*cond*/,
                                           double c_noise) const {
  if (!scaled_noisy.same_spatial(target_)) throw_data("edm", "fixed residual target has the wrong shape");
  const double sigma = std::exp(4.0 * c_noise);
  const auto k = precondition_coeffs(sigma, sigma_data_);
  FeatureMap out = scaled_noisy;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double x = scaled_noisy.data[i] / k.c_in;
    out.data[i] = (target_.data[i] - k.c_skip * x) / k.c_out;
  }
  return out;
}

}  // namespace resdiff
