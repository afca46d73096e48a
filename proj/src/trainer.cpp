#include "resdiff/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "resdiff/error.hpp"

namespace resdiff {

void adam_update(std::span<double> params, std::span<const double> grad, const AdamConfig& cfg, AdamState& state) {
  if (grad.size() != params.size()) throw_data("edm", "adam: gradient length mismatch");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

std::vector<ProbeItem> freeze_probe(std::span<const TrainingExample> batch, const SigmaSampling& sampling, Rng& rng) {
  std::vector<ProbeItem> items;
  items.reserve(batch.size());
  for (const auto& ex : batch) {
    ProbeItem item{ex, sample_sigma(rng, sampling.p_mean, sampling.p_std), FeatureMap::zeros(1, ex.clean.ny, ex.clean.nx)};
    for (auto& v : item.noise.data) v = rng.normal();
    items.push_back(std::move(item));
  }
  return items;
}

double probe_loss(const TinyConvDenoiser& d, std::span<const ProbeItem> probe, const LossConfig& loss_cfg,
                  double sigma_data, std::span<double> grad) {
  if (probe.empty()) throw_data("edm", "empty training batch");
  const bool want_grad = !grad.empty();
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
  const double inv_batch = 1.0 / static_cast<double>(probe.size());

  double total = 0.0;
  std::vector<double> grad_pred;
  for (const auto& item : probe) {
    const auto& ex = item.example;
    if (ex.clean.channels != 1) throw_data("edm", "clean residual must be one plane");
    const auto k = precondition_coeffs(item.sigma, sigma_data);

    FeatureMap noisy = ex.clean;
    for (std::size_t i = 0; i < noisy.data.size(); ++i) noisy.data[i] += item.sigma * item.noise.data[i];
    FeatureMap scaled = noisy;
    for (auto& v : scaled.data) v *= k.c_in;

    TinyConvDenoiser::Tape tape;
    const FeatureMap raw = d.forward(scaled, ex.cond, k.c_noise, want_grad ? &tape : nullptr);
    std::vector<double> pred(noisy.data.size());
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = k.c_skip * noisy.data[i] + k.c_out * raw.data[i];

    double loss;
    if (want_grad) {
      grad_pred.resize(pred.size());
      loss = hybrid_sigma_loss_grad(pred, ex.clean.data, item.sigma, loss_cfg, grad_pred, ex.valid);
      FeatureMap grad_raw = FeatureMap::zeros(1, raw.ny, raw.nx);
      for (std::size_t i = 0; i < grad_pred.size(); ++i) grad_raw.data[i] = k.c_out * grad_pred[i] * inv_batch;
      d.backward(tape, grad_raw, grad);
    } else {
      loss = hybrid_sigma_loss(pred, ex.clean.data, item.sigma, loss_cfg, ex.valid);
    }
    total += loss * inv_batch;
  }
  return total;
}

double train_step(TinyConvDenoiser& d, std::span<const TrainingExample> batch, const TrainConfig& cfg,
                  const LossConfig& loss_cfg, AdamState& opt, Rng& rng) {
  if (batch.empty()) throw_data("edm", "train_step: empty batch");
  const auto probe = freeze_probe(batch, cfg.sigma_sampling, rng);
  std::vector<double> grad(d.parameter_count());
  const double loss = probe_loss(d, probe, loss_cfg, cfg.sigma_data, grad);
  if (!std::isfinite(loss)) throw_numeric("edm", "train_step: non-finite loss");
  for (double g : grad) {
    if (!std::isfinite(g)) throw_numeric("edm", "train_step: non-finite gradient");
  }
  adam_update(d.parameters(), grad, cfg.adam, opt);
  return loss;
}

GradCheckResult grad_check(const TinyConvDenoiser& d, std::span<const ProbeItem> probe, const LossConfig& loss_cfg,
                           const GradCheckOptions& opts) {
  std::vector<double> analytic(d.parameter_count());
  probe_loss(d, probe, loss_cfg, opts.sigma_data, analytic);
  for (auto& g : analytic) g *= opts.analytic_scale;

  TinyConvDenoiser work = d;
  auto params = work.parameters();
  GradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + opts.step;
    const double up = probe_loss(work, probe, loss_cfg, opts.sigma_data);
    params[i] = saved - opts.step;
    const double down = probe_loss(work, probe, loss_cfg, opts.sigma_data);
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * opts.step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), opts.floor});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > result.max_relative_error || i == 0) {
      result = {rel, i, analytic[i], numeric};
    }
  }
  return result;
}

}  // namespace resdiff
