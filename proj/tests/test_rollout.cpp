#include <doctest.h>

#include <chrono>
#include <cmath>

#include "resdiff/error.hpp"
#include "resdiff/pipeline.hpp"
#include "resdiff/residual.hpp"
#include "resdiff/rollout.hpp"
#include "resdiff/synthworld.hpp"
#include "resdiff/verify.hpp"

using namespace resdiff;
using std::chrono::hours;

namespace {

WorldConfig small_world() {
  WorldConfig w;
  w.ny = 48;
  w.nx = 48;
  w.blob_count = 4;
  w.radius_min_km = 3.0;
  w.radius_max_km = 8.0;
  w.velocity_east_kmh = 4.0;
  w.velocity_south_kmh = 1.5;
  return w;
}

FeatureMap as_map(const GridField& f) {
  FeatureMap m = FeatureMap::zeros(1, f.geom.ny, f.geom.nx);
  for (std::size_t i = 0; i < f.size(); ++i) m.data[i] = f.missing[i] ? 0.0 : f.values[i];
  return m;
}

// Physical residual that turns the state's base into the truth at the next
// lead, standardized the way the model's output is interpreted.
FeatureMap true_standardized_residual(const RolloutState& s, const GridField& truth) {
  const GridField r = s.kind == ConfigKind::DataDriven ? make_delta_target(truth, s.last_rainfall)
                                                      : make_error_target(truth, s.hrrr.at(s.step));
  return as_map(zscore(r, s.norms.residual));
}

double max_abs(const GridField& a, const GridField& b) {
  double w = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) w = std::max(w, std::abs(a.values[i] - b.values[i]));
  return w;
}

constexpr int kInit = 5;

}  // namespace

TEST_CASE("channel stacks per configuration") {
  const WorldConfig w = small_world();
  const AuxPlanes aux = make_aux_planes(world_geometry(w));
  const int times[] = {kInit};
  SUBCASE("data-driven has no forecast channels") {
    const NormSet n = fit_norms(w, ConfigKind::DataDriven, times);
    const auto s = init_state(ConfigKind::DataDriven, synth_inputs(w, kInit), aux, n);
    CHECK(current_stack(s).names() == std::vector<std::string>{"mrms(t-2)", "mrms(t-1)", "mrms(t)", "latitude",
                                                               "longitude", "sin_hour", "cos_hour", "sin_doy",
                                                               "cos_doy"});
  }
  SUBCASE("hybrid: three observation lags, two forecast leads, six auxiliary planes") {
    const NormSet n = fit_norms(w, ConfigKind::Hybrid, times);
    auto s = init_state(ConfigKind::Hybrid, synth_inputs(w, kInit), aux, n);
    const auto names = current_stack(s).names();
    CHECK(names.size() == 11);
    CHECK(names[3] == "hrrr_f01");
    CHECK(names[4] == "hrrr_f02");
    // Advancing one step shifts the lags and moves the forecast pair on.
    Rng rng(1);
    step(s, FixedResidualDenoiser(FeatureMap::zeros(1, w.ny, w.nx)), SigmaSchedule{}, rng);
    const auto next = current_stack(s).names();
    CHECK(next[3] == "hrrr_f02");
    CHECK(next[4] == "hrrr_f03");
  }
  SUBCASE("corrective: prior-cycle f01 lags plus the dual pair") {
    const NormSet n = fit_norms(w, ConfigKind::HrrrCorrective, times);
    const auto s = init_state(ConfigKind::HrrrCorrective, synth_inputs(w, kInit), aux, n);
    const auto names = current_stack(s).names();
    CHECK(names.size() == 11);
    CHECK(names[0] == "hrrr_f01(t-3)");
    CHECK(names[3] == "hrrr_f01");
    CHECK(names[4] == "hrrr_f02:raw");
  }
  SUBCASE("corrective without f02 is a missing-channel error") {
    RolloutInputs in = synth_inputs(w, kInit);
    in.hrrr.erase(2);
    CHECK_THROWS_AS(init_state(ConfigKind::HrrrCorrective, in, aux, NormSet{}), DataError);
  }
  SUBCASE("geometry mismatch is rejected") {
    RolloutInputs in = synth_inputs(w, kInit);
    WorldConfig other = w;
    other.nx = 40;
    in.hrrr.at(1) = gen_pseudo_hrrr(other, kInit, 1);
    CHECK_THROWS_AS(init_state(ConfigKind::Hybrid, in, aux, NormSet{}), DataError);
  }
}

TEST_CASE("dual pairing for the corrective configuration") {
  CHECK(required_leads(ConfigKind::HrrrCorrective, DualPairing::SameLeadDual, 1) == std::vector<int>{1, 2});
  CHECK(required_leads(ConfigKind::HrrrCorrective, DualPairing::SameLeadDual, 6) == std::vector<int>{6});
  CHECK(required_leads(ConfigKind::HrrrCorrective, DualPairing::NextLeadPair, 6) == std::vector<int>{6, 7});
  CHECK(required_leads(ConfigKind::Hybrid, DualPairing::SameLeadDual, 12) == std::vector<int>{12, 13});
  CHECK(required_leads(ConfigKind::DataDriven, DualPairing::SameLeadDual, 3).empty());
}

TEST_CASE("oracle denoiser reproduces truth at every lead") {
  const WorldConfig w = small_world();
  const AuxPlanes aux = make_aux_planes(world_geometry(w));
  const int times[] = {kInit - 1, kInit, kInit + 1};
  for (ConfigKind kind : {ConfigKind::DataDriven, ConfigKind::Hybrid, ConfigKind::HrrrCorrective}) {
    for (DualPairing pairing : {DualPairing::SameLeadDual, DualPairing::NextLeadPair}) {
      CAPTURE(to_string(kind));
      CAPTURE(to_string(pairing));
      auto s = init_state(kind, synth_inputs(w, kInit), aux, fit_norms(w, kind, times), pairing);
      FixedResidualDenoiser oracle(FeatureMap::zeros(1, w.ny, w.nx));
      Rng rng(5);
      double worst = 0.0;
      for (int k = 1; k <= kMaxHorizon; ++k) {
        const GridField truth = gen_truth(w, kInit + k);
        oracle.set_target(true_standardized_residual(s, truth));
        const GridField pred = step(s, oracle, SigmaSchedule{}, rng);
        CHECK(pred.valid_time == truth.valid_time);
        worst = std::max(worst, max_abs(pred, truth));
      }
      CHECK(worst < 1e-5);
      CHECK_THROWS_AS(step(s, oracle, SigmaSchedule{}, rng), DataError);
    }
  }
}

TEST_CASE("zero-residual rollouts") {
  const WorldConfig w = small_world();
  const AuxPlanes aux = make_aux_planes(world_geometry(w));
  const FixedResidualDenoiser zero(FeatureMap::zeros(1, w.ny, w.nx));
  SUBCASE("data-driven is persistence") {
    auto s = init_state(ConfigKind::DataDriven, synth_inputs(w, kInit), aux, NormSet{});
    Rng rng(1);
    const auto preds = run(s, zero, SigmaSchedule{}, 12, rng);
    const GridField now = gen_truth(w, kInit);
    for (const auto& p : preds) CHECK(max_abs(p, now) < 1e-12);
  }
  SUBCASE("corrective is the clamped forecast") {
    auto s = init_state(ConfigKind::HrrrCorrective, synth_inputs(w, kInit), aux, NormSet{});
    Rng rng(1);
    const auto preds = run(s, zero, SigmaSchedule{}, 12, rng);
    for (int k = 1; k <= 12; ++k) {
      const GridField f = gen_pseudo_hrrr(w, kInit, k);
      CHECK(max_abs(preds[static_cast<std::size_t>(k - 1)], f) < 1e-12);
    }
    // Inputs never contain model output: the prior-cycle lags are untouched.
    for (int i = 0; i < 3; ++i) {
      CHECK(max_abs(s.hrrr_prior_f01[static_cast<std::size_t>(i)], gen_pseudo_hrrr(w, kInit - 3 + i, 1)) == 0.0);
    }
  }
}

TEST_CASE("run contracts") {
  const WorldConfig w = small_world();
  const AuxPlanes aux = make_aux_planes(world_geometry(w));
  const int times[] = {kInit};
  const NormSet n = fit_norms(w, ConfigKind::Hybrid, times);
  TinyConvDenoiser net({11, 4, Activation::SiLU, 3});
  SigmaSchedule sched;
  sched.num_steps = 4;
  SUBCASE("horizon 1 equals one step") {
    auto a = init_state(ConfigKind::Hybrid, synth_inputs(w, kInit), aux, n);
    auto b = a;
    Rng ra(9);
    Rng rb(9);
    const auto preds = run(a, net, sched, 1, ra);
    REQUIRE(preds.size() == 1);
    CHECK(preds[0].values == step(b, net, sched, rb).values);
  }
  SUBCASE("same seed, same sequence") {
    auto a = init_state(ConfigKind::Hybrid, synth_inputs(w, kInit), aux, n);
    auto b = a;
    Rng ra(9);
    Rng rb(9);
    const auto pa = run(a, net, sched, 4, ra);
    const auto pb = run(b, net, sched, 4, rb);
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].values == pb[i].values);
  }
  SUBCASE("horizon beyond 12 is rejected") {
    auto a = init_state(ConfigKind::Hybrid, synth_inputs(w, kInit), aux, n);
    Rng r(1);
    CHECK_THROWS_AS(run(a, net, sched, 13, r), DataError);
  }
  SUBCASE("missing forecast lead is reported before sampling") {
    RolloutInputs in = synth_inputs(w, kInit, 4);
    auto a = init_state(ConfigKind::Hybrid, in, aux, n);
    Rng r(1);
    CHECK_THROWS_AS(run(a, net, sched, 6, r), DataError);
    CHECK(a.predictions.empty());
  }
}

TEST_CASE("trained data-driven model: error grows with lead") {
  // Seeded regression baseline on a small advecting world.
  const WorldConfig w = small_world();
  std::vector<int> train_times;
  for (int t = 3; t < 40; ++t) train_times.push_back(t);
  const NormSet n = fit_norms(w, ConfigKind::DataDriven, train_times);
  const auto pool = synth_examples(w, ConfigKind::DataDriven, n, train_times);
  TinyConvDenoiser net({static_cast<int>(pool.front().cond.channels), 8, Activation::SiLU, 1});
  TrainPlan plan;
  plan.steps = 300;
  plan.crop = 32;
  plan.train.adam.lr = 1e-3;
  train_denoiser(net, pool, plan);

  const AuxPlanes aux = make_aux_planes(world_geometry(w));
  SigmaSchedule sched;
  sched.num_steps = 8;
  auto s = init_state(ConfigKind::DataDriven, synth_inputs(w, 50), aux, n);
  Rng rng(2);
  const auto preds = run(s, net, sched, 12, rng);
  auto mae = [&](int lead) { return mae_nonzero(preds[static_cast<std::size_t>(lead - 1)], gen_truth(w, 50 + lead)); };
  MESSAGE("data-driven MAE lead 1/6/12: " << mae(1) << " " << mae(6) << " " << mae(12));
  CHECK(mae(1) < mae(6));
  CHECK(mae(6) < mae(12));
}

TEST_CASE("training examples") {
  const WorldConfig w = small_world();
  const int times[] = {kInit};
  const NormSet n = fit_norms(w, ConfigKind::HrrrCorrective, times);
  const auto ex = synth_examples(w, ConfigKind::HrrrCorrective, n, times);
  REQUIRE(ex.size() == 1);
  CHECK(ex[0].cond.channels == 11);
  const GridField target = make_error_target(gen_truth(w, kInit + 1), gen_pseudo_hrrr(w, kInit, 1));
  const GridField z = zscore(target, n.residual);
  for (std::size_t i = 0; i < z.size(); i += 97) CHECK(ex[0].clean.data[i] == doctest::Approx(z.values[i]).epsilon(1e-12));
  const TrainingExample c = crop_example(ex[0], 4, 6, 16);
  CHECK(c.clean.data[0] == ex[0].clean.data[static_cast<std::size_t>(4 * w.nx + 6)]);
  CHECK_THROWS_AS(crop_example(ex[0], 40, 40, 16), DataError);
}
