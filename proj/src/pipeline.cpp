#include "resdiff/pipeline.hpp"

#include <chrono>

#include "resdiff/error.hpp"
#include "resdiff/residual.hpp"

namespace resdiff {

namespace {

FeatureMap crop_map(const FeatureMap& m, int row0, int col0, int size) {
  FeatureMap out = FeatureMap::zeros(m.channels, size, size);
  for (int c = 0; c < m.channels; ++c) {
    const auto src = m.plane(c);
    auto dst = out.plane(c);
    for (int r = 0; r < size; ++r) {
      for (int k = 0; k < size; ++k) {
        dst[static_cast<std::size_t>(r * size + k)] =
            src[static_cast<std::size_t>(row0 + r) * static_cast<std::size_t>(m.nx) + static_cast<std::size_t>(col0 + k)];
      }
    }
  }
  return out;
}

}  // namespace

RolloutInputs synth_inputs(const WorldConfig& world, int t, int max_lead) {
  RolloutInputs in;
  for (int lag = 2; lag >= 0; --lag) in.mrms_lags.push_back(gen_truth(world, t - lag));
  for (int lead = 0; lead <= max_lead + 1; ++lead) in.hrrr.emplace(lead, gen_pseudo_hrrr(world, t, lead));
  for (int back = 3; back >= 1; --back) in.hrrr_prior_f01.push_back(gen_pseudo_hrrr(world, t - back, 1));
  return in;
}

NormSet fit_norms(const WorldConfig& world, ConfigKind kind, std::span<const int> times) {
  if (times.empty()) throw_config("pipeline", "no initialization hours to fit statistics on");
  std::vector<GridField> mrms;
  std::vector<GridField> hrrr;
  std::vector<GridField> residual;
  for (int t : times) {
    GridField now = gen_truth(world, t);
    GridField next = gen_truth(world, t + 1);
    GridField f01 = gen_pseudo_hrrr(world, t, 1);
    residual.push_back(kind == ConfigKind::DataDriven ? make_delta_target(next, now) : make_error_target(next, f01));
    mrms.push_back(std::move(now));
    hrrr.push_back(std::move(f01));
  }
  return {compute_stats(mrms), compute_stats(hrrr), compute_stats(residual)};
}

TrainingExample crop_example(const TrainingExample& ex, int row0, int col0, int size) {
  const int ny = ex.clean.ny;
  const int nx = ex.clean.nx;
  if (row0 < 0 || col0 < 0 || size < 1 || row0 + size > ny || col0 + size > nx) {
    throw_data("pipeline", "crop outside the training example");
  }
  TrainingExample out;
  out.cond = crop_map(ex.cond, row0, col0, size);
  out.clean = crop_map(ex.clean, row0, col0, size);
  if (!ex.valid.empty()) {
    out.valid.resize(static_cast<std::size_t>(size) * static_cast<std::size_t>(size));
    for (int r = 0; r < size; ++r) {
      for (int k = 0; k < size; ++k) {
        out.valid[static_cast<std::size_t>(r * size + k)] =
            ex.valid[static_cast<std::size_t>(row0 + r) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(col0 + k)];
      }
    }
  }
  return out;
}

std::vector<TrainingExample> synth_examples(const WorldConfig& world, ConfigKind kind, const NormSet& norms,
                                            std::span<const int> times, DualPairing pairing) {
  const AuxPlanes aux = make_aux_planes(world_geometry(world));
  std::vector<TrainingExample> out;
  for (int t : times) {
    const RolloutState s = init_state(kind, synth_inputs(world, t, 1), aux, norms, pairing);
    out.push_back(make_training_example(s, gen_truth(world, t + 1)));
  }
  return out;
}

TrainReport train_denoiser(TinyConvDenoiser& d, std::span<const TrainingExample> pool, const TrainPlan& plan) {
  if (pool.empty()) throw_config("pipeline", "no training examples");
  if (plan.steps < 1 || plan.batch < 1) throw_config("pipeline", "steps and batch must be positive");
  const auto start = std::chrono::steady_clock::now();
  Rng rng(plan.seed);
  AdamState opt;
  TrainReport rep;
  std::vector<double> losses;
  std::vector<TrainingExample> batch;
  for (int s = 0; s < plan.steps; ++s) {
    batch.clear();
    for (int b = 0; b < plan.batch; ++b) {
      const auto& ex = pool[static_cast<std::size_t>(rng.below(pool.size()))];
      if (plan.crop > 0 && plan.crop < std::min(ex.clean.ny, ex.clean.nx)) {
        const int r0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(ex.clean.ny - plan.crop + 1)));
        const int c0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(ex.clean.nx - plan.crop + 1)));
        batch.push_back(crop_example(ex, r0, c0, plan.crop));
      } else {
        batch.push_back(ex);
      }
    }
    losses.push_back(train_step(d, batch, plan.train, plan.loss, opt, rng));
    rep.steps = s + 1;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (plan.time_budget_s > 0.0 && rep.seconds >= plan.time_budget_s) break;
  }
  rep.first_loss = losses.front();
  const std::size_t tail = std::max<std::size_t>(1, losses.size() / 10);
  double sum = 0.0;
  for (std::size_t i = losses.size() - tail; i < losses.size(); ++i) sum += losses[i];
  rep.final_loss = sum / static_cast<double>(tail);
  rep.losses = std::move(losses);
  return rep;
}

}  // namespace resdiff
