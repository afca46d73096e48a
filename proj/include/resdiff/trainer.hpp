#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "resdiff/denoiser.hpp"
#include "resdiff/edm.hpp"
#include "resdiff/loss.hpp"
#include "resdiff/rng.hpp"

namespace resdiff {

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

void adam_update(std::span<double> params, std::span<const double> grad, const AdamConfig& cfg, AdamState& state);

/// One supervised pair: condition channels and the clean (standardized)
/// residual. `valid` optionally excludes pixels from the loss.
struct TrainingExample {
  FeatureMap cond;
  FeatureMap clean;
  std::vector<std::uint8_t> valid;
};

struct TrainConfig {
  SigmaSampling sigma_sampling{};
  AdamConfig adam{};
  double sigma_data = 1.0;
};

/// Samples sigma and noise per item, evaluates the preconditioned x0
/// prediction under HybridSigmaLoss, applies one Adam update, and returns the
/// mean loss over the batch.
double train_step(TinyConvDenoiser& d, std::span<const TrainingExample> batch, const TrainConfig& cfg,
                  const LossConfig& loss_cfg, AdamState& opt, Rng& rng);

/// A training item with its noise draw frozen, so the loss is a
/// deterministic function of the parameters.
struct ProbeItem {
  TrainingExample example;
  double sigma = 1.0;
  FeatureMap noise;
};

std::vector<ProbeItem> freeze_probe(std::span<const TrainingExample> batch, const SigmaSampling& sampling, Rng& rng);

/// Mean loss over the probe and, if `grad` is non-empty, its parameter
/// gradient.
double probe_loss(const TinyConvDenoiser& d, std::span<const ProbeItem> probe, const LossConfig& loss_cfg,
                  double sigma_data, std::span<double> grad = {});

struct GradCheckOptions {
  double step = 1e-4;
  /// Relative errors use max(|analytic|, |numeric|, floor) as denominator.
  double floor = 1e-6;
  /// Multiplies the analytic gradient; 1.0 except for fault-injection tests.
  double analytic_scale = 1.0;
  double sigma_data = 1.0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_parameter = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central finite differences against the backpropagated gradient for every
/// parameter.
GradCheckResult grad_check(const TinyConvDenoiser& d, std::span<const ProbeItem> probe, const LossConfig& loss_cfg,
                           const GradCheckOptions& opts = {});

}  // namespace resdiff
