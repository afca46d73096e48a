#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "resdiff/edm.hpp"
#include "resdiff/grid.hpp"
#include "resdiff/rng.hpp"
#include "resdiff/trainer.hpp"

namespace resdiff {

enum class ConfigKind { DataDriven, HrrrCorrective, Hybrid };

std::string_view to_string(ConfigKind k);
ConfigKind config_kind_from_string(std::string_view s);

/// How the Corrective model's (normalized, unnormalized) forecast pair is
/// filled for lead L >= 2. Step 1 always uses the training pair
/// (zscore(f01), f02).
///   SameLeadDual: (zscore(fL), fL)
///   NextLeadPair: (zscore(fL), f(L+1))
enum class DualPairing { SameLeadDual, NextLeadPair };

std::string_view to_string(DualPairing p);
DualPairing dual_pairing_from_string(std::string_view s);

inline constexpr int kMaxHorizon = 12;

/// Per-variable standardization statistics.
struct NormSet {
  NormStats mrms{};
  NormStats hrrr{};
  NormStats residual{};
};

struct Channel {
  std::string name;
  GridField field;  // exactly as fed to the model
};

struct ChannelStack {
  std::vector<Channel> channels;

  [[nodiscard]] std::vector<std::string> names() const;
  /// Model input with missing pixels filled by 0 (the standardized mean).
  [[nodiscard]] FeatureMap to_features() const;
  /// Pixels missing in any channel.
  [[nodiscard]] std::vector<std::uint8_t> missing_union() const;
};

/// Latitude/longitude planes, min-max scaled to [0, 1] over the domain.
struct AuxPlanes {
  GridField latitude;
  GridField longitude;
};

AuxPlanes make_aux_planes(const GridGeometry& geom);

/// sin/cos of hour-of-day and of day-of-year, in that order.
std::vector<GridField> temporal_planes(const GridGeometry& geom, UtcHour t);

struct RolloutInputs {
  /// MRMS at t-2, t-1, t (DataDriven, Hybrid).
  std::vector<GridField> mrms_lags;
  /// Forecast leads of the cycle initialized at t, keyed by lead hour.
  std::map<int, GridField> hrrr;
  /// f01 from the cycles initialized at t-3, t-2, t-1 (Corrective).
  std::vector<GridField> hrrr_prior_f01;
};

struct RolloutState {
  ConfigKind kind = ConfigKind::DataDriven;
  DualPairing pairing = DualPairing::SameLeadDual;
  int step = 1;  // the lead being predicted next
  UtcHour init_time{};
  std::vector<GridField> mrms_lags;
  std::map<int, GridField> hrrr;
  std::vector<GridField> hrrr_prior_f01;
  AuxPlanes aux;
  NormSet norms;
  /// DataDriven reconstruction base: MRMS(t), then each new prediction.
  GridField last_rainfall;
  std::vector<GridField> predictions;
  /// Physical residuals that produced each prediction.
  std::vector<GridField> residuals;
  /// Pre-clamp reconstructions, for diagnostics.
  std::vector<GridField> unclamped;
};

RolloutState init_state(ConfigKind kind, RolloutInputs inputs, AuxPlanes aux, NormSet norms,
                        DualPairing pairing = DualPairing::SameLeadDual);

/// Forecast leads needed at a given step.
std::vector<int> required_leads(ConfigKind kind, DualPairing pairing, int step);

/// Model input for the state's current step.
ChannelStack current_stack(const RolloutState& state);

/// Samples one standardized residual, reconstructs rainfall for t + step,
/// feeds it back according to the configuration, and advances the step.
GridField step(RolloutState& state, const Denoiser& denoiser, const SigmaSchedule& sched, Rng& rng);

std::vector<GridField> run(RolloutState& state, const Denoiser& denoiser, const SigmaSchedule& sched, int horizon,
                           Rng& rng);

/// Physical residual the model at step 1 learns to produce, given the truth
/// at t + 1.
GridField training_target(const RolloutState& state, const GridField& truth_next);

/// Step-1 condition stack and standardized target as one training pair.
TrainingExample make_training_example(const RolloutState& state, const GridField& truth_next);

}  // namespace resdiff
