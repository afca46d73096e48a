#include "resdiff/loss.hpp"

#include <cmath>

#include "resdiff/error.hpp"

namespace resdiff {

namespace {

void check_shapes(std::size_t a, std::size_t b, ValidMask valid) {
  if (a != b || (!valid.empty() && valid.size() != a)) throw_data("loss", "shape mismatch");
}

std::size_t count_valid(std::size_t n, ValidMask valid) {
  if (valid.empty()) return n;
  std::size_t c = 0;
  for (auto v : valid) c += v ? 1 : 0;
  return c;
}

double sign(double x) { return (x > 0.0) - (x < 0.0); }

double curve_input(double y, const LossConfig& cfg) {
  return cfg.weight_scale == WeightScale::Physical ? y * cfg.physical_stats.std + cfg.physical_stats.mean : y;
}

double curve_input_scale(const LossConfig& cfg) {
  return cfg.weight_scale == WeightScale::Physical ? cfg.physical_stats.std : 1.0;
}

std::vector<std::uint8_t> joint_mask(const GridField& a, const GridField& b) {
  require_same_geometry(a, b, "loss");
  std::vector<std::uint8_t> m(a.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = !(a.missing[i] || b.missing[i]);
  return m;
}

}  // namespace

void LossConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw_config("loss", "alpha must lie in [0, 1]");
  if (!(epsilon > 0.0)) throw_config("loss", "epsilon must be positive");
  for (const auto& t : ramps) {
    if (!(t.amplitude > 0.0)) throw_config("loss", "weight-curve amplitudes must be positive");
  }
  if (!(low_rain.amplitude > 0.0)) throw_config("loss", "weight-curve amplitudes must be positive");
  if (weight_scale == WeightScale::Physical && !(physical_stats.std > 0.0)) {
    throw_config("loss", "physical weight scale needs positive std");
  }
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double weight_curve(double y, const LossConfig& cfg) {
  double w = 0.0;
  for (const auto& t : cfg.ramps) w += sigmoid((y - t.threshold) * t.steepness) * t.amplitude;
  w += (1.0 - sigmoid((y - cfg.low_rain.threshold) * cfg.low_rain.steepness)) * cfg.low_rain.amplitude;
  return w;
}

double weight_curve_derivative(double y, const LossConfig& cfg) {
  auto dsig = [](double x) {
    const double s = sigmoid(x);
    return s * (1.0 - s);
  };
  double d = 0.0;
  for (const auto& t : cfg.ramps) d += dsig((y - t.threshold) * t.steepness) * t.steepness * t.amplitude;
  d -= dsig((y - cfg.low_rain.threshold) * cfg.low_rain.steepness) * cfg.low_rain.steepness * cfg.low_rain.amplitude;
  return d;
}

double scaled_mae(std::span<const double> pred, std::span<const double> truth, double sigma, double epsilon,
                  ValidMask valid) {
  check_shapes(pred.size(), truth.size(), valid);
  if (sigma < 0.0) throw_data("loss", "scaled_mae: sigma must be non-negative");
  const std::size_t n = count_valid(pred.size(), valid);
  if (n == 0) throw_data("loss", "no valid pixels");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!valid.empty() && !valid[i]) continue;
    acc += std::abs(pred[i] - truth[i]);
  }
  return acc / (sigma + epsilon) / static_cast<double>(n);
}

double weighted_mae(std::span<const double> pred, std::span<const double> truth, const LossConfig& cfg,
                    ValidMask valid) {
  check_shapes(pred.size(), truth.size(), valid);
  const std::size_t n = count_valid(pred.size(), valid);
  if (n == 0) throw_data("loss", "no valid pixels");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!valid.empty() && !valid[i]) continue;
    const double y = cfg.weight_source == WeightSource::Truth ? truth[i] : pred[i];
    acc += weight_curve(curve_input(y, cfg), cfg) * std::abs(pred[i] - truth[i]);
  }
  return acc / static_cast<double>(n);
}

double hybrid_sigma_loss(std::span<const double> pred, std::span<const double> truth, double sigma,
                         const LossConfig& cfg, ValidMask valid) {
  cfg.validate();
  return cfg.alpha * scaled_mae(pred, truth, sigma, cfg.epsilon, valid) +
         (1.0 - cfg.alpha) * weighted_mae(pred, truth, cfg, valid);
}

double hybrid_sigma_loss_grad(std::span<const double> pred, std::span<const double> truth, double sigma,
                              const LossConfig& cfg, std::span<double> grad, ValidMask valid) {
  cfg.validate();
  check_shapes(pred.size(), truth.size(), valid);
  if (grad.size() != pred.size()) throw_data("loss", "gradient buffer has the wrong length");
  if (sigma < 0.0) throw_data("loss", "sigma must be non-negative");
  const std::size_t n = count_valid(pred.size(), valid);
  if (n == 0) throw_data("loss", "no valid pixels");

  const double inv_n = 1.0 / static_cast<double>(n);
  const double scaled_coef = cfg.alpha / (sigma + cfg.epsilon);
  const double weighted_coef = 1.0 - cfg.alpha;
  const double dscale = curve_input_scale(cfg);
  double scaled = 0.0;
  double weighted = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!valid.empty() && !valid[i]) {
      grad[i] = 0.0;
      continue;
    }
    const double e = pred[i] - truth[i];
    const double ae = std::abs(e);
    const bool by_pred = cfg.weight_source == WeightSource::Prediction;
    const double y = curve_input(by_pred ? pred[i] : truth[i], cfg);
    const double w = weight_curve(y, cfg);
    scaled += ae;
    weighted += w * ae;
    double g = scaled_coef * sign(e) + weighted_coef * w * sign(e);
    if (by_pred) g += weighted_coef * weight_curve_derivative(y, cfg) * dscale * ae;
    grad[i] = g * inv_n;
  }
  return cfg.alpha * scaled / (sigma + cfg.epsilon) * inv_n + weighted_coef * weighted * inv_n;
}

double scaled_mae(const GridField& pred, const GridField& truth, double sigma, double epsilon) {
  const auto m = joint_mask(pred, truth);
  return scaled_mae(pred.values, truth.values, sigma, epsilon, m);
}

double weighted_mae(const GridField& pred, const GridField& truth, const LossConfig& cfg) {
  const auto m = joint_mask(pred, truth);
  return weighted_mae(pred.values, truth.values, cfg, m);
}

double hybrid_sigma_loss(const GridField& pred, const GridField& truth, double sigma, const LossConfig& cfg) {
  const auto m = joint_mask(pred, truth);
  return hybrid_sigma_loss(pred.values, truth.values, sigma, cfg, m);
}

}  // namespace resdiff
