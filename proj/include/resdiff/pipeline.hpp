#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "resdiff/rollout.hpp"
#include "resdiff/synthworld.hpp"
#include "resdiff/trainer.hpp"

namespace resdiff {

/// Everything a rollout initialized at world hour t needs: MRMS lags,
/// forecast leads 0..max_lead + 1 of the cycle at t, and the previous
/// cycles' f01.
RolloutInputs synth_inputs(const WorldConfig& world, int t, int max_lead = kMaxHorizon);

/// Per-variable statistics over the given initialization hours.
NormSet fit_norms(const WorldConfig& world, ConfigKind kind, std::span<const int> times);

/// Spatial crop of a training pair (all channels).
TrainingExample crop_example(const TrainingExample& ex, int row0, int col0, int size);

/// Step-1 training pairs for the given initialization hours.
std::vector<TrainingExample> synth_examples(const WorldConfig& world, ConfigKind kind, const NormSet& norms,
                                            std::span<const int> times, DualPairing pairing = DualPairing::SameLeadDual);

struct TrainPlan {
  int steps = 2000;
  int batch = 2;
  /// Random square crop taken from each example per step; 0 uses full fields.
  int crop = 64;
  /// Stops early once this many seconds have elapsed; 0 disables.
  double time_budget_s = 0.0;
  std::uint64_t seed = 0;
  TrainConfig train{};
  LossConfig loss{};
};

struct TrainReport {
  int steps = 0;
  double seconds = 0.0;
  double first_loss = 0.0;
  /// Mean loss over the final tenth of the steps.
  double final_loss = 0.0;
  std::vector<double> losses;
};

TrainReport train_denoiser(TinyConvDenoiser& d, std::span<const TrainingExample> pool, const TrainPlan& plan);

}  // namespace resdiff
