#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "resdiff/grid.hpp"

namespace resdiff {

/// amplitude * sigmoid((y - threshold) * steepness)
struct SigmoidTerm {
  double threshold = 0.0;
  double steepness = 1.0;
  double amplitude = 1.0;
};

/// Which value feeds the intensity weight: the target (default) or the
/// prediction. Weighting by the prediction adds a dw/dpred gradient term.
enum class WeightSource { Truth, Prediction };

/// Scale on which the curve is evaluated. Standardized applies it to the
/// z-scored values the model sees; Physical first maps back to mm/h.
enum class WeightScale { Standardized, Physical };

struct LossConfig {
  double alpha = 0.8;
  double epsilon = 1e-6;
  std::vector<SigmoidTerm> ramps{
      {0.015, 150.0, 3.5},
      {0.08, 50.0, 5.0},
      {0.25, 20.0, 6.0},
      {0.5, 10.0, 7.0},
  };
  /// Contributes (1 - sigmoid((y - threshold) * steepness)) * amplitude.
  SigmoidTerm low_rain{0.015, 150.0, 0.6};
  WeightSource weight_source = WeightSource::Truth;
  WeightScale weight_scale = WeightScale::Standardized;
  NormStats physical_stats{};

  void validate() const;
};

double sigmoid(double x);

double weight_curve(double y, const LossConfig& cfg = {});
double weight_curve_derivative(double y, const LossConfig& cfg = {});

/// Element spans share one layout; `valid` (optional) marks the pixels that
/// count, an empty span means all of them.
using ValidMask = std::span<const std::uint8_t>;

double scaled_mae(std::span<const double> pred, std::span<const double> truth, double sigma, double epsilon,
                  ValidMask valid = {});
double weighted_mae(std::span<const double> pred, std::span<const double> truth, const LossConfig& cfg = {},
                    ValidMask valid = {});
double hybrid_sigma_loss(std::span<const double> pred, std::span<const double> truth, double sigma,
                         const LossConfig& cfg = {}, ValidMask valid = {});

/// Loss value plus d(loss)/d(pred) written into `grad` (same length as pred).
/// |x| uses the subgradient 0 at x = 0.
double hybrid_sigma_loss_grad(std::span<const double> pred, std::span<const double> truth, double sigma,
                              const LossConfig& cfg, std::span<double> grad, ValidMask valid = {});

// Field conveniences: pixels missing in either field are excluded.
double scaled_mae(const GridField& pred, const GridField& truth, double sigma, double epsilon);
double weighted_mae(const GridField& pred, const GridField& truth, const LossConfig& cfg = {});
double hybrid_sigma_loss(const GridField& pred, const GridField& truth, double sigma, const LossConfig& cfg = {});

}  // namespace resdiff
