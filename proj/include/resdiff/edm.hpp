#pragma once

#include <span>
#include <utility>
#include <vector>

#include "resdiff/rng.hpp"

namespace resdiff {

/// Channel-major stack of equally sized planes.
struct FeatureMap {
  int channels = 0;
  int ny = 0;
  int nx = 0;
  std::vector<double> data;

  static FeatureMap zeros(int channels, int ny, int nx);
  [[nodiscard]] std::size_t plane_size() const { return static_cast<std::size_t>(ny) * static_cast<std::size_t>(nx); }
  std::span<double> plane(int c) { return {data.data() + c * plane_size(), plane_size()}; }
  [[nodiscard]] std::span<const double> plane(int c) const { return {data.data() + c * plane_size(), plane_size()}; }
  [[nodiscard]] bool same_spatial(const FeatureMap& o) const { return ny == o.ny && nx == o.nx; }
};

struct EdmCoeffs {
  double c_skip = 1.0;
  double c_in = 1.0;
  double c_out = 0.0;
  double c_noise = 0.0;
};

EdmCoeffs precondition_coeffs(double sigma, double sigma_data);

/// Karras-style noise ladder used by the sampler.
struct SigmaSchedule {
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  double rho = 7.0;
  int num_steps = 18;
  double sigma_data = 1.0;

  void validate() const;
  /// num_steps noise levels from sigma_max down to sigma_min, then a final 0.
  [[nodiscard]] std::vector<double> ladder() const;
};

/// Log-normal training noise distribution.
struct SigmaSampling {
  double p_mean = -1.2;
  double p_std = 1.2;
};

double sample_sigma(Rng& rng, double p_mean, double p_std);

/// A raw denoising network F. The preconditioning wrapper feeds it the
/// scaled noisy residual c_in * x, the condition channels, and c_noise, and
/// expects a single plane of the same spatial shape back.
class Denoiser {
public:
  virtual ~Denoiser() = default;
  [[nodiscard]] virtual FeatureMap evaluate(const FeatureMap& scaled_noisy, const FeatureMap& cond,
                                            double c_noise) const = 0;
};

/// x0 estimate: c_skip * x + c_out * F(c_in * x, cond, c_noise).
FeatureMap wrap_denoise(const Denoiser& d, const FeatureMap& x_noisy, double sigma, const FeatureMap& cond,
                        double sigma_data = 1.0);

/// Deterministic second-order (Heun) probability-flow sampler. Starts from
/// N(0, sigma_max^2) noise drawn from `rng`; the last step to sigma = 0 is a
/// plain Euler step.
FeatureMap heun_sample(const Denoiser& d, const FeatureMap& cond, const SigmaSchedule& sched, Rng& rng);

/// Analytic inverse of the wrapper: a raw network whose preconditioned
/// output is always `target`. Used for zero-residual runs and exactness
/// checks. It recovers sigma from c_noise.
class FixedResidualDenoiser final : public Denoiser {
public:
  FixedResidualDenoiser(FeatureMap target, double sigma_data = 1.0);
  void set_target(FeatureMap target) { target_ = std::move(target); }
  [[nodiscard]] const FeatureMap& target() const { return target_; }
  [[nodiscard]] FeatureMap evaluate(const FeatureMap& scaled_noisy, const FeatureMap& cond,
                                    double c_noise) const override;

private:
  FeatureMap target_;
  double sigma_data_;
};

}  // namespace resdiff
