#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "archive.hpp"
#include "resdiff/denoiser.hpp"
#include "resdiff/edm.hpp"
#include "resdiff/error.hpp"
#include "resdiff/loss.hpp"
#include "resdiff/parallel.hpp"
#include "resdiff/pipeline.hpp"
#include "resdiff/residual.hpp"
#include "resdiff/rollout.hpp"
#include "resdiff/sampler.hpp"
#include "resdiff/spectral.hpp"
#include "resdiff/synthworld.hpp"
#include "resdiff/uq.hpp"
#include "resdiff/verify.hpp"
#include "run_config.hpp"

namespace resdiff::cli {

namespace {

using std::chrono::hours;
using nlohmann::json;

struct Command {
  std::string name;
  std::string summary;
  std::vector<KeySpec> schema;
  std::function<void(const RunConfig&, Manifest&)> run;
};

std::string lead_tag(int lead) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "f%02d", lead);
  return buf;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<UtcHour> hour_range(const RunConfig& cfg, const std::string& from, const std::string& to) {
  const UtcHour a = cfg.time(from);
  const UtcHour b = cfg.time(to);
  if (b < a) throw_config("cli", "'" + to + "' is before '" + from + "'");
  std::vector<UtcHour> out;
  for (UtcHour t = a; t <= b; t += hours{1}) out.push_back(t);
  return out;
}

json norms_json(const NormSet& n) {
  auto one = [](const NormStats& s) { return json{{"mean", s.mean}, {"std", s.std}}; };
  return {{"mrms", one(n.mrms)}, {"hrrr", one(n.hrrr)}, {"residual", one(n.residual)}};
}

NormSet norms_from_json(const json& j) {
  auto one = [](const json& s) { return NormStats{s.at("mean").get<double>(), s.at("std").get<double>()}; };
  return {one(j.at("mrms")), one(j.at("hrrr")), one(j.at("residual"))};
}

SigmaSchedule schedule_from(const RunConfig& cfg) {
  SigmaSchedule s;
  s.sigma_min = cfg.num("sigma_min");
  s.sigma_max = cfg.num("sigma_max");
  s.rho = cfg.num("rho");
  s.num_steps = cfg.integer("num_steps");
  s.validate();
  return s;
}

std::vector<KeySpec> schedule_keys() {
  return {
      {"sigma_min", KeyType::Number, "0.002", "smallest noise level of the sampler ladder"},
      {"sigma_max", KeyType::Number, "80", "largest noise level"},
      {"rho", KeyType::Number, "7", "ladder curvature"},
      {"num_steps", KeyType::Integer, "18", "sampler steps"},
  };
}

// --- synth ------------------------------------------------------------------

WorldConfig world_from(const RunConfig& cfg) {
  WorldConfig w;
  w.seed = cfg.seed("seed");
  w.ny = cfg.integer("ny");
  w.nx = cfg.integer("nx");
  w.pixel_km = cfg.num("pixel_km");
  w.lat0 = cfg.num("lat0");
  w.lon0 = cfg.num("lon0");
  w.start = cfg.time("start");
  w.blob_count = cfg.integer("blob_count");
  w.amplitude_min = cfg.num("amplitude_min");
  w.amplitude_max = cfg.num("amplitude_max");
  w.radius_min_km = cfg.num("radius_min_km");
  w.radius_max_km = cfg.num("radius_max_km");
  w.velocity_east_kmh = cfg.num("velocity_east_kmh");
  w.velocity_south_kmh = cfg.num("velocity_south_kmh");
  w.rain_floor = cfg.num("rain_floor");
  w.lag_hours = cfg.num("lag_hours");
  w.bias = cfg.num("bias");
  w.smoothing_km = cfg.num("smoothing_km");
  w.lead_growth = cfg.num("lead_growth");
  w.ari_base = cfg.num("ari_base");
  w.ari_amplitude = cfg.num("ari_amplitude");
  w.validate();
  return w;
}

void cmd_synth(const RunConfig& cfg, Manifest& m) {
  const WorldConfig w = world_from(cfg);
  const int first = cfg.integer("first_init");
  const int count = cfg.integer("init_count");
  const int max_lead = cfg.integer("max_lead");
  if (count < 1) throw_config("synth", "init_count must be positive");
  if (max_lead < 1 || max_lead > kMaxHorizon) throw_config("synth", "max_lead must be in 1..12");
  const int last = first + count - 1;
  const fs::path root = m.out_dir();

  for (int h = first - 3; h <= last + max_lead + 1; ++h) {
    const GridField f = gen_truth(w, h);
    m.write_grid(mrms_path({}, f.valid_time), f);
  }
  for (int c = first - 3; c <= last; ++c) {
    const UtcHour cycle = w.start + hours{c};
    for (int lead = 0; lead <= max_lead + 1; ++lead) {
      m.write_grid(hrrr_path({}, cycle, lead), gen_pseudo_hrrr(w, c, lead));
    }
  }
  m.write_grid("static/ari.grdf", gen_ari_map(w));
  const RegionMap regions = gen_region_map(w);
  write_region_map(regions, regions_grid_path(root), regions_csv_path(root));
  m.add_output("static/regions.grdf");
  m.add_output("static/regions.csv");
  m.notes()["first_init_time"] = format_utc_hour(w.start + hours{first});
  m.notes()["last_init_time"] = format_utc_hour(w.start + hours{last});
}

std::vector<KeySpec> synth_keys() {
  const WorldConfig d;
  return {
      {"seed", KeyType::Seed, "7", "world seed (blob placement)"},
      {"ny", KeyType::Integer, "256", "rows"},
      {"nx", KeyType::Integer, "256", "columns"},
      {"pixel_km", KeyType::Number, "1", "pixel spacing"},
      {"lat0", KeyType::Number, "40", "latitude of pixel (0,0)"},
      {"lon0", KeyType::Number, "-100", "longitude of pixel (0,0)"},
      {"start", KeyType::Time, format_utc_hour(d.start), "time of world hour 0"},
      {"blob_count", KeyType::Integer, "6", "rain blobs"},
      {"amplitude_min", KeyType::Number, "2", "blob peak rate range, mm/h"},
      {"amplitude_max", KeyType::Number, "25", ""},
      {"radius_min_km", KeyType::Number, "8", "blob radius range"},
      {"radius_max_km", KeyType::Number, "30", ""},
      {"velocity_east_kmh", KeyType::Number, "15", "advection velocity"},
      {"velocity_south_kmh", KeyType::Number, "0", ""},
      {"rain_floor", KeyType::Number, "0.1", "subtracted before clamping so dry areas are 0"},
      {"lag_hours", KeyType::Number, "1", "forecast timing error"},
      {"bias", KeyType::Number, "0.7", "forecast amplitude factor"},
      {"smoothing_km", KeyType::Number, "2", "forecast blur"},
      {"lead_growth", KeyType::Number, "0.05", "per-lead growth of lag and blur"},
      {"ari_base", KeyType::Number, "25", "ARI map base, mm/h"},
      {"ari_amplitude", KeyType::Number, "15", "ARI map modulation"},
      {"first_init", KeyType::Integer, "3", "first initialization, world hour"},
      {"init_count", KeyType::Integer, "4", "number of hourly initializations"},
      {"max_lead", KeyType::Integer, "12", "longest lead to support"},
  };
}

// --- regrid -----------------------------------------------------------------

void cmd_regrid(const RunConfig& cfg, Manifest& m) {
  const fs::path in = cfg.str("input");
  const GridField src = load_grid(in, "input grid");
  m.add_input(in);
  GridGeometry g{cfg.integer("ny"), cfg.integer("nx"), cfg.num("lat0"), cfg.num("lon0"), cfg.num("dy_km"),
                 cfg.num("dx_km")};
  m.write_grid("regridded.grdf", bilinear_regrid(src, g));
}

// --- sample -----------------------------------------------------------------

void cmd_sample(const RunConfig& cfg, Manifest& m) {
  const fs::path root = cfg.str("data_dir");
  SamplingCriteria crit;
  crit.tile_size_px = cfg.integer("tile_size");
  crit.min_coverage_fraction = cfg.num("min_coverage");
  crit.min_spacing_km = cfg.num("spacing_km");
  crit.max_candidates_per_timestep = cfg.integer("candidates");
  crit.max_retained_per_timestep = cfg.integer("retained");
  crit.validate();
  const GridField ari = load_grid(ari_path(root), "ARI map");
  m.add_input(ari_path(root));
  const RegionMap regions = read_region_map(regions_grid_path(root), regions_csv_path(root));
  m.add_input(regions_grid_path(root));
  m.add_input(regions_csv_path(root));

  const Rng root_rng(cfg.seed("seed"));
  std::vector<TileSpec> pool;
  std::vector<std::string> reasons;
  std::vector<UtcHour> times;
  for (UtcHour t : hour_range(cfg, "start", "end")) {
    const auto path = mrms_path(root, t);
    const GridField f = load_grid(path, "MRMS field");
    m.add_input(path);
    Rng rng = root_rng.stream(static_cast<std::uint64_t>(t.time_since_epoch().count()));
    for (auto& s : sample_timestep(f, ari, crit, rng)) {
      pool.push_back(s.tile);
      reasons.push_back(s.reason);
      times.push_back(t);
    }
  }
  std::string csv = "valid_time,row0,col0,size,region,month,reason\n";
  const auto keep = regional_balance_indices(pool, regions, cfg.integer("regional_cap"), cfg.seed("seed"));
  for (auto i : keep) {
    const auto& t = pool[i];
    csv += format_utc_hour(times[i]) + ',' + std::to_string(t.row0) + ',' + std::to_string(t.col0) + ',' +
           std::to_string(t.size) + ',' + regions.label_at(t.center_row(), t.center_col()) + ',' + t.month + ',' +
           reasons[i] + '\n';
  }
  m.write_text("tiles.csv", csv);
  m.notes()["candidates_accepted"] = pool.size();
  m.notes()["tiles_retained"] = keep.size();

  std::string hours_csv = "month,hour_a,hour_b\n";
  std::string last_month;
  for (UtcHour t : hour_range(cfg, "start", "end")) {
    const std::string key = month_key(t);
    if (key == last_month) continue;
    last_month = key;
    const auto [a, b] = eval_hours(std::stoi(key.substr(0, 4)), std::stoi(key.substr(5, 2)));
    hours_csv += key + ',' + std::to_string(a) + ',' + std::to_string(b) + '\n';
  }
  m.write_text("eval_hours.csv", hours_csv);
}

// --- targets / train ------------------------------------------------------------

NormSet fit_archive_norms(const fs::path& root, ConfigKind kind, const std::vector<UtcHour>& times, Manifest& m) {
  std::vector<GridField> mrms;
  std::vector<GridField> hrrr;
  std::vector<GridField> residual;
  for (UtcHour t : times) {
    GridField now = load_grid(mrms_path(root, t), "MRMS(t)");
    GridField next = load_grid(mrms_path(root, t + hours{1}), "MRMS(t+1)");
    m.add_input(mrms_path(root, t));
    m.add_input(mrms_path(root, t + hours{1}));
    if (kind == ConfigKind::DataDriven) {
      residual.push_back(make_delta_target(next, now));
    } else {
      GridField f01 = load_grid(hrrr_path(root, t, 1), "HRRR f01");
      m.add_input(hrrr_path(root, t, 1));
      residual.push_back(make_error_target(next, f01));
      hrrr.push_back(std::move(f01));
    }
    mrms.push_back(std::move(now));
  }
  NormSet n;
  n.mrms = compute_stats(mrms);
  if (!hrrr.empty()) n.hrrr = compute_stats(hrrr);
  n.residual = compute_stats(residual);
  return n;
}

void cmd_targets(const RunConfig& cfg, Manifest& m) {
  const fs::path root = cfg.str("data_dir");
  const ConfigKind kind = config_kind_from_string(cfg.str("kind"));
  const auto times = hour_range(cfg, "start", "end");
  const NormSet norms = fit_archive_norms(root, kind, times, m);
  for (UtcHour t : times) {
    const GridField next = load_grid(mrms_path(root, t + hours{1}), "MRMS(t+1)");
    const GridField target = kind == ConfigKind::DataDriven
                                 ? make_delta_target(next, load_grid(mrms_path(root, t), "MRMS(t)"))
                                 : make_error_target(next, load_grid(hrrr_path(root, t, 1), "HRRR f01"));
    m.write_grid(fs::path("targets") / (compact_time(t) + ".grdf"), target);
  }
  m.write_text("norms.json", norms_json(norms).dump(2) + "\n");
}

void cmd_train(const RunConfig& cfg, Manifest& m) {
  const fs::path root = cfg.str("data_dir");
  const ConfigKind kind = config_kind_from_string(cfg.str("kind"));
  const DualPairing pairing = dual_pairing_from_string(cfg.str("pairing"));
  const auto times = hour_range(cfg, "start", "end");
  const NormSet norms = fit_archive_norms(root, kind, times, m);

  std::vector<TrainingExample> pool;
  std::vector<std::string> channel_names;
  AuxPlanes aux;
  bool have_aux = false;
  for (UtcHour t : times) {
    RolloutInputs in = load_rollout_inputs(root, kind, t, 1);
    if (!have_aux) {
      const GridGeometry g = kind == ConfigKind::HrrrCorrective ? in.hrrr.at(1).geom : in.mrms_lags.back().geom;
      aux = make_aux_planes(g);
      have_aux = true;
    }
    const RolloutState s = init_state(kind, std::move(in), aux, norms, pairing);
    const GridField truth = load_grid(mrms_path(root, t + hours{1}), "MRMS(t+1)");
    pool.push_back(make_training_example(s, truth));
    if (channel_names.empty()) channel_names = current_stack(s).names();
  }

  TinyConvConfig net;
  net.cond_channels = pool.front().cond.channels;
  net.width = cfg.integer("width");
  net.activation = activation_from_string(cfg.str("activation"));
  net.seed = cfg.seed("seed");
  TinyConvDenoiser d(net);

  TrainPlan plan;
  plan.steps = cfg.integer("steps");
  plan.batch = cfg.integer("batch");
  plan.crop = cfg.integer("crop");
  plan.time_budget_s = cfg.num("time_budget_s");
  plan.seed = cfg.seed("seed");
  plan.train.adam = {cfg.num("lr"), cfg.num("beta1"), cfg.num("beta2"), cfg.num("adam_eps")};
  plan.train.sigma_sampling = {cfg.num("p_mean"), cfg.num("p_std")};
  plan.train.sigma_data = cfg.num("sigma_data");
  plan.loss.alpha = cfg.num("alpha");
  plan.loss.epsilon = cfg.num("loss_epsilon");
  const std::string ws = cfg.str("weight_source");
  if (ws != "truth" && ws != "prediction") throw_config("train", "weight_source must be truth or prediction");
  plan.loss.weight_source = ws == "truth" ? WeightSource::Truth : WeightSource::Prediction;
  plan.loss.validate();

  const TrainReport rep = train_denoiser(d, pool, plan);
  json meta;
  meta["kind"] = std::string(to_string(kind));
  meta["pairing"] = std::string(to_string(pairing));
  meta["norms"] = norms_json(norms);
  meta["channels"] = channel_names;
  meta["sigma_data"] = plan.train.sigma_data;
  meta["steps"] = rep.steps;
  save_checkpoint(d, meta, m.out_dir() / "checkpoint.denz");
  m.add_output("checkpoint.denz");

  std::string log = "step,loss\n";
  for (std::size_t i = 0; i < rep.losses.size(); ++i) log += std::to_string(i + 1) + ',' + fmt(rep.losses[i]) + '\n';
  m.write_text("train_log.csv", log);
  m.notes()["steps_run"] = rep.steps;
  m.notes()["final_loss"] = rep.final_loss;
}

// --- rollout ----------------------------------------------------------------

void cmd_rollout(const RunConfig& cfg, Manifest& m) {
  const fs::path root = cfg.str("data_dir");
  const UtcHour t = cfg.time("init_time");
  const int horizon = cfg.integer("horizon");
  if (horizon < 1 || horizon > kMaxHorizon) throw_config("rollout", "horizon must be in 1..12");
  const std::string which = cfg.str("denoiser");

  std::unique_ptr<Denoiser> denoiser;
  NormSet norms;
  ConfigKind kind;
  std::string pairing_name = cfg.str("pairing");
  double sigma_data = 1.0;
  if (which == "checkpoint") {
    const fs::path ckpt = cfg.str("checkpoint");
    if (ckpt.empty()) throw_config("rollout", "denoiser=checkpoint needs 'checkpoint'");
    if (!fs::exists(ckpt)) throw_data("rollout", "missing checkpoint " + ckpt.string());
    auto loaded = load_checkpoint(ckpt);
    m.add_input(ckpt);
    try {
      kind = config_kind_from_string(loaded.metadata.at("kind").get<std::string>());
      norms = norms_from_json(loaded.metadata.at("norms"));
      if (pairing_name.empty()) pairing_name = loaded.metadata.at("pairing").get<std::string>();
      sigma_data = loaded.metadata.value("sigma_data", 1.0);
    } catch (const json::exception& e) {
      throw_data("rollout", std::string("checkpoint metadata incomplete: ") + e.what());
    }
    if (!cfg.str("kind").empty() && config_kind_from_string(cfg.str("kind")) != kind) {
      throw_config("rollout", "'kind' disagrees with the checkpoint");
    }
    denoiser = std::make_unique<TinyConvDenoiser>(std::move(loaded.denoiser));
  } else if (which == "zero") {
    if (cfg.str("kind").empty()) throw_config("rollout", "denoiser=zero needs 'kind'");
    kind = config_kind_from_string(cfg.str("kind"));
  } else {
    throw_config("rollout", "denoiser must be checkpoint or zero");
  }

  const DualPairing pairing = dual_pairing_from_string(pairing_name.empty() ? "same_lead_dual" : pairing_name);
  SigmaSchedule sched = schedule_from(cfg);
  sched.sigma_data = sigma_data;
  RolloutInputs in = load_rollout_inputs(root, kind, t, horizon);
  const GridGeometry g = kind == ConfigKind::HrrrCorrective ? in.hrrr.at(1).geom : in.mrms_lags.back().geom;
  if (which == "zero") denoiser = std::make_unique<FixedResidualDenoiser>(FeatureMap::zeros(1, g.ny, g.nx));
  for (const auto& f : in.mrms_lags) m.add_input(mrms_path(root, f.valid_time));
  for (const auto& [lead, f] : in.hrrr) m.add_input(hrrr_path(root, t, lead));
  for (const auto& f : in.hrrr_prior_f01) m.add_input(hrrr_path(root, f.valid_time - hours{1}, 1));

  RolloutState s = init_state(kind, std::move(in), make_aux_planes(g), norms, pairing);
  const auto channels = current_stack(s).names();
  Rng rng(cfg.seed("seed"));
  run(s, *denoiser, sched, horizon, rng);
  json steps = json::array();
  for (int k = 1; k <= horizon; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    const std::string pred = "pred_" + lead_tag(k) + ".grdf";
    const std::string res = "residual_" + lead_tag(k) + ".grdf";
    m.write_grid(pred, s.predictions[i]);
    m.write_grid(res, s.residuals[i]);
    json entry{{"lead", k}, {"valid_time", format_utc_hour(s.predictions[i].valid_time)}, {"prediction", pred},
               {"residual", res}};
    if (cfg.flag("write_unclamped")) {
      entry["unclamped"] = "unclamped_" + lead_tag(k) + ".grdf";
      m.write_grid(entry["unclamped"].get<std::string>(), s.unclamped[i]);
    }
    steps.push_back(entry);
  }
  json info{{"init_time", format_utc_hour(t)},
            {"kind", std::string(to_string(kind))},
            {"pairing", std::string(to_string(pairing))},
            {"horizon", horizon},
            {"denoiser", which},
            {"seed", cfg.seed("seed")},
            {"schedule",
             {{"sigma_min", sched.sigma_min},
              {"sigma_max", sched.sigma_max},
              {"rho", sched.rho},
              {"num_steps", sched.num_steps},
              {"sigma_data", sched.sigma_data}}},
            {"channels", channels},
            {"steps", steps}};
  m.write_text("rollout.json", info.dump(2) + "\n");
}

struct RolloutInfo {
  UtcHour init_time;
  int horizon = 0;
};

RolloutInfo read_rollout_info(const fs::path& dir) {
  const auto path = dir / "rollout.json";
  if (!fs::exists(path)) throw_data("cli", "not a rollout directory (no rollout.json): " + dir.string());
  try {
    const json j = json::parse(read_file(path));
    return {parse_utc_hour(j.at("init_time").get<std::string>()), j.at("horizon").get<int>()};
  } catch (const json::exception& e) {
    throw_data("cli", "bad rollout.json in " + dir.string() + ": " + e.what());
  }
}

// --- uq ---------------------------------------------------------------------

void cmd_uq(const RunConfig& cfg, Manifest& m) {
  const fs::path root = cfg.str("data_dir");
  const fs::path rdir = cfg.str("rollout_dir");
  const RolloutInfo info = read_rollout_info(rdir);
  const double tol = cfg.num("tolerance_km");
  const auto pcts = cfg.nums("bin_percentiles");
  for (int lead : cfg.ints("leads")) {
    if (lead < 1 || lead > info.horizon) throw_config("uq", "lead " + std::to_string(lead) + " not in the rollout");
    const auto res_path = rdir / ("residual_" + lead_tag(lead) + ".grdf");
    const GridField residual = load_grid(res_path, "sampled residual");
    m.add_input(res_path);
    const auto early_path = hrrr_path(root, info.init_time, lead - 1);
    std::optional<GridField> early;
    if (fs::exists(early_path)) {
      early = read_grid(early_path);
      m.add_input(early_path);
    }
    const GridField on = load_grid(hrrr_path(root, info.init_time, lead), "on-time forecast");
    const GridField next = load_grid(hrrr_path(root, info.init_time, lead + 1), "delayed forecast");
    const GridField truth = load_grid(mrms_path(root, info.init_time + hours{lead}), "truth");
    m.add_input(hrrr_path(root, info.init_time, lead));
    m.add_input(hrrr_path(root, info.init_time, lead + 1));
    m.add_input(mrms_path(root, info.init_time + hours{lead}));

    const UqBounds b = make_scenarios(early ? &*early : nullptr, on, next, residual, lead);
    b.check_ordering();
    const IntensityBins bins = percentile_bins(truth, pcts);
    const CoverageReport rep = evaluate_bounds(b, truth, tol, bins, cfg.flag("distance_to_bound"));
    m.write_grid("lower_" + lead_tag(lead) + ".grdf", b.lower);
    m.write_grid("middle_" + lead_tag(lead) + ".grdf", b.middle);
    m.write_grid("upper_" + lead_tag(lead) + ".grdf", b.upper);
    m.write_text("coverage_" + lead_tag(lead) + ".csv", coverage_csv(rep));
    m.notes()["early_member_" + lead_tag(lead)] = early ? "forecast" : "on-time fallback";
  }
}

// --- verify -----------------------------------------------------------------

struct Unit {
  GridField pred;
  GridField truth;
};

std::string common_month(const std::vector<Unit>& units) {
  const std::string first = month_key(units.front().truth.valid_time);
  for (const auto& u : units) {
    if (month_key(u.truth.valid_time) != first) return "all";
  }
  return first;
}

template <typename Acc, typename Eval>
void add_metric(std::vector<MetricRow>& rows, MetricRow base, const std::vector<Acc>& per_unit, Eval eval,
                const BootstrapConfig& boot, std::size_t n) {
  auto pooled = [&](std::span<const std::size_t> idx) {
    Acc acc{};
    for (auto i : idx) acc += per_unit[i];
    return eval(acc);
  };
  std::vector<std::size_t> all(per_unit.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  base.value = pooled(all);
  base.n = n;
  if (base.value && per_unit.size() >= 2) {
    const auto r = bootstrap_ci(pooled, per_unit.size(), boot);
    base.ci_lo = r.lo;
    base.ci_hi = r.hi;
  }
  rows.push_back(std::move(base));
}

void cmd_verify(const RunConfig& cfg, Manifest& m) {
  const fs::path root = cfg.str("data_dir");
  const auto dirs = cfg.strs("pred_dirs");
  if (dirs.empty()) throw_config("verify", "pred_dirs lists no rollout directories");
  const std::string source = cfg.str("source");
  if (source != "model" && source != "hrrr") throw_config("verify", "source must be model or hrrr");
  const std::string region = cfg.str("region");

  ThresholdTable table = ThresholdTable::defaults();
  if (!cfg.str("thresholds_csv").empty()) {
    table = ThresholdTable::load(cfg.str("thresholds_csv"));
    m.add_input(cfg.str("thresholds_csv"));
  }
  std::optional<RegionMap> regions;
  if (cfg.flag("region_mask")) {
    regions = read_region_map(regions_grid_path(root), regions_csv_path(root));
    m.add_input(regions_grid_path(root));
    m.add_input(regions_csv_path(root));
  }

  BootstrapConfig boot;
  boot.n_boot = cfg.integer("n_boot");
  boot.level = cfg.num("level");
  boot.seed = cfg.seed("seed");
  boot.validate();
  const bool exclude_zero = cfg.flag("exclude_zero_categorical");

  std::vector<MetricRow> rows;
  for (int lead : cfg.ints("leads")) {
    std::vector<Unit> units;
    for (const auto& d : dirs) {
      const RolloutInfo info = read_rollout_info(d);
      if (lead < 1 || lead > info.horizon) throw_config("verify", "lead " + std::to_string(lead) + " not in " + d);
      const fs::path pred_path = source == "model" ? fs::path(d) / ("pred_" + lead_tag(lead) + ".grdf")
                                                   : hrrr_path(root, info.init_time, lead);
      const fs::path truth_path = mrms_path(root, info.init_time + hours{lead});
      Unit u{load_grid(pred_path, "prediction"), load_grid(truth_path, "truth")};
      m.add_input(pred_path);
      m.add_input(truth_path);
      if (regions) {
        require_same_geometry(u.truth, GridField::zeros(regions->geom, Variable::Region, UtcHour{}), "verify");
        for (std::size_t i = 0; i < u.truth.size(); ++i) {
          const int code = regions->codes[i];
          if (code < 0 || regions->labels[static_cast<std::size_t>(code)] != region) {
            u.pred.set_missing(i);
            u.truth.set_missing(i);
          }
        }
      }
      units.push_back(std::move(u));
    }
    MetricRow base;
    base.month = common_month(units);
    base.region = region;
    base.lead_hours = lead;

    std::vector<MaeAccum> mae;
    for (const auto& u : units) mae.push_back(mae_accum(u.pred, u.truth));
    std::size_t mae_n = 0;
    for (const auto& a : mae) mae_n += a.n;
    MetricRow r = base;
    r.metric = "mae";
    add_metric(rows, r, mae, [](const MaeAccum& a) { return a.value(); }, boot, mae_n);

    for (int pct : cfg.ints("percentiles")) {
      const double thr = table.at(region, pct);
      std::vector<ContingencyCounts> tables;
      std::size_t n = 0;
      for (const auto& u : units) {
        tables.push_back(contingency(u.pred, u.truth, thr, exclude_zero));
        n += tables.back().total();
      }
      MetricRow c = base;
      c.threshold_mm = thr;
      c.metric = "pod";
      add_metric(rows, c, tables, [](const ContingencyCounts& t) { return pod(t); }, boot, n);
      c.metric = "csi";
      add_metric(rows, c, tables, [](const ContingencyCounts& t) { return csi(t); }, boot, n);
      for (int nb : cfg.ints("neighborhoods")) {
        std::vector<FssAccum> acc;
        std::size_t scored = 0;
        for (const auto& u : units) {
          acc.push_back(fss_accum(u.pred, u.truth, thr, nb));
          scored += acc.back().n;
        }
        MetricRow f = base;
        f.metric = "fss";
        f.threshold_mm = thr;
        f.neighborhood = nb;
        add_metric(rows, f, acc, [](const FssAccum& a) { return a.value(); }, boot, scored);
      }
    }
  }
  m.write_text("metrics.csv", metrics_csv(rows));
  m.write_text("metrics.json", metrics_json(rows));
  m.notes()["units"] = dirs.size();
}

// --- spectra ----------------------------------------------------------------

void cmd_spectra(const RunConfig& cfg, Manifest& m) {
  GridField pred = load_grid(cfg.str("pred"), "prediction");
  GridField truth = load_grid(cfg.str("truth"), "truth");
  m.add_input(cfg.str("pred"));
  m.add_input(cfg.str("truth"));
  m.notes()["fill_fraction_pred"] = fill_missing_with_zero(pred);
  m.notes()["fill_fraction_truth"] = fill_missing_with_zero(truth);
  m.notes()["fft_convention"] = std::string(kFftConvention);

  const Window w = window_from_string(cfg.str("window"));
  m.write_text("power_pred.csv", radial_csv(power_spectrum_2d(pred, w).radial));
  m.write_text("power_truth.csv", radial_csv(power_spectrum_2d(truth, w).radial));

  CoherenceConfig cc;
  cc.segment = cfg.integer("segment");
  cc.overlap = cfg.num("overlap");
  cc.window = window_from_string(cfg.str("coherence_window"));
  cc.detrend_mean = cfg.flag("detrend");
  cc.squared = cfg.flag("squared");
  const CoherenceCurve coh = spectral_coherence(pred, truth, cc);
  m.write_text("coherence.csv", coherence_csv(coh));
  m.notes()["coherence_segments"] = coh.segments;

  const auto edges = cfg.nums("hist_edges");
  const bool ez = cfg.flag("exclude_zero");
  m.write_text("pdf_pred.csv", histogram_csv(intensity_pdf(pred, edges, ez)));
  m.write_text("pdf_truth.csv", histogram_csv(intensity_pdf(truth, edges, ez)));
}

// --- mosaic -----------------------------------------------------------------

void cmd_mosaic(const RunConfig& cfg, Manifest& m) {
  const std::string mode = cfg.str("mode");
  if (mode == "split") {
    const GridField f = load_grid(cfg.str("input"), "input grid");
    m.add_input(cfg.str("input"));
    const auto tiles = layout_tiles(f.geom, cfg.integer("tile_size"), cfg.integer("overlap"));
    std::string csv = "index,row0,col0,size,file\n";
    for (std::size_t i = 0; i < tiles.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "tile_%03zu.grdf", i);
      m.write_grid(fs::path("tiles") / name, extract_tile(f, tiles[i]));
      csv += std::to_string(i) + ',' + std::to_string(tiles[i].row0) + ',' + std::to_string(tiles[i].col0) + ',' +
             std::to_string(tiles[i].size) + ',' + name + '\n';
    }
    m.write_text("tiles/tiles.csv", csv);
    m.notes()["tile_count"] = tiles.size();
  } else if (mode == "merge") {
    const fs::path dir = cfg.str("tiles_dir");
    const GridField ref = load_grid(cfg.str("reference"), "reference grid");
    m.add_input(cfg.str("reference"));
    const std::string csv = read_file(dir / "tiles.csv");
    m.add_input(dir / "tiles.csv");
    std::vector<std::pair<TileSpec, GridField>> tiles;
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      if (cells.size() != 5) throw_data("mosaic", "bad tiles.csv line '" + line + "'");
      TileSpec spec{std::stoi(cells[1]), std::stoi(cells[2]), std::stoi(cells[3]), {}, {}};
      tiles.emplace_back(spec, load_grid(dir / cells[4], "tile " + cells[4]));
      m.add_input(dir / cells[4]);
    }
    m.write_grid("mosaic.grdf", mosaic(tiles, ref.geom));
  } else {
    throw_config("mosaic", "mode must be split or merge");
  }
}

// --- weights ----------------------------------------------------------------

void cmd_weights(const RunConfig& cfg, Manifest& m) {
  const int n = cfg.integer("points");
  if (n < 2) throw_config("weights", "points must be at least 2");
  const double lo = cfg.num("y_min");
  const double hi = cfg.num("y_max");
  const LossConfig loss;
  std::string csv = "y,w\n";
  for (int i = 0; i < n; ++i) {
    const double y = lo + (hi - lo) * i / (n - 1);
    csv += fmt(y) + ',' + fmt(weight_curve(y, loss)) + '\n';
  }
  m.write_text("weights.csv", csv);
}

std::vector<Command> command_table() {
  std::vector<KeySpec> rollout_keys = {
      {"data_dir", KeyType::Path, "", "archive root"},
      {"init_time", KeyType::Time, "", "initialization time"},
      {"denoiser", KeyType::String, "checkpoint", "checkpoint or zero (zero residual)"},
      {"checkpoint", KeyType::Path, "", "trained denoiser"},
      {"kind", KeyType::String, "", "data_driven, hrrr_corrective or hybrid (default: from checkpoint)"},
      {"pairing", KeyType::String, "", "same_lead_dual or next_lead_pair (default: from checkpoint)"},
      {"horizon", KeyType::Integer, "12", "hours to roll out"},
      {"seed", KeyType::Seed, "0", "sampler noise seed"},
      {"write_unclamped", KeyType::Bool, "false", "also write pre-clamp reconstructions"},
  };
  for (auto& k : schedule_keys()) rollout_keys.push_back(k);

  return {
      {"synth", "generate a synthetic storm world archive", synth_keys(), cmd_synth},
      {"regrid", "bilinear regrid of one grid onto a target geometry",
       {
           {"input", KeyType::Path, "", "source grid"},
           {"ny", KeyType::Integer, "", "target rows"},
           {"nx", KeyType::Integer, "", "target columns"},
           {"lat0", KeyType::Number, "", "target pixel (0,0) latitude"},
           {"lon0", KeyType::Number, "", "target pixel (0,0) longitude"},
           {"dy_km", KeyType::Number, "1", "target row spacing"},
           {"dx_km", KeyType::Number, "1", "target column spacing"},
       },
       cmd_regrid},
      {"sample", "sample training tiles and balance them by region and month",
       {
           {"data_dir", KeyType::Path, "", "archive root"},
           {"start", KeyType::Time, "", "first hour"},
           {"end", KeyType::Time, "", "last hour"},
           {"tile_size", KeyType::Integer, "512", "tile edge, pixels"},
           {"min_coverage", KeyType::Number, "0.25", "wet fraction making a tile valid"},
           {"spacing_km", KeyType::Number, "30", "minimum centre spacing"},
           {"candidates", KeyType::Integer, "50", "candidates per timestep"},
           {"retained", KeyType::Integer, "20", "tiles kept per timestep"},
           {"regional_cap", KeyType::Integer, "120", "tiles per region and month"},
           {"seed", KeyType::Seed, "0", "sampling seed"},
       },
       cmd_sample},
      {"targets", "residual targets and normalization statistics",
       {
           {"data_dir", KeyType::Path, "", "archive root"},
           {"kind", KeyType::String, "hrrr_corrective", "configuration"},
           {"start", KeyType::Time, "", "first initialization"},
           {"end", KeyType::Time, "", "last initialization"},
       },
       cmd_targets},
      {"train", "train the reference convolutional denoiser",
       {
           {"data_dir", KeyType::Path, "", "archive root"},
           {"kind", KeyType::String, "hrrr_corrective", "configuration"},
           {"pairing", KeyType::String, "same_lead_dual", "dual pairing stored with the checkpoint"},
           {"start", KeyType::Time, "", "first training initialization"},
           {"end", KeyType::Time, "", "last training initialization"},
           {"steps", KeyType::Integer, "2000", "optimizer steps"},
           {"batch", KeyType::Integer, "2", "examples per step"},
           {"crop", KeyType::Integer, "64", "random crop edge (0 = full field)"},
           {"lr", KeyType::Number, "1e-5", "Adam learning rate"},
           {"beta1", KeyType::Number, "0.9", ""},
           {"beta2", KeyType::Number, "0.999", ""},
           {"adam_eps", KeyType::Number, "1e-8", ""},
           {"p_mean", KeyType::Number, "-1.2", "log-normal training sigma"},
           {"p_std", KeyType::Number, "1.2", ""},
           {"sigma_data", KeyType::Number, "1", "data standard deviation for preconditioning"},
           {"alpha", KeyType::Number, "0.8", "loss mix: alpha * scaled MAE + (1 - alpha) * weighted MAE"},
           {"loss_epsilon", KeyType::Number, "1e-6", "division guard"},
           {"weight_source", KeyType::String, "truth", "truth or prediction"},
           {"width", KeyType::Integer, "16", "hidden channels"},
           {"activation", KeyType::String, "silu", "silu or identity"},
           {"seed", KeyType::Seed, "0", "initialization and batch seed"},
           {"time_budget_s", KeyType::Number, "0", "stop after this many seconds (0 = off)"},
       },
       cmd_train},
      {"rollout", "autoregressive 1..12 h rollout", rollout_keys, cmd_rollout},
      {"uq", "lead-offset bounds and their coverage",
       {
           {"data_dir", KeyType::Path, "", "archive root"},
           {"rollout_dir", KeyType::Path, "", "output of rollout"},
           {"leads", KeyType::IntList, "1", "leads to evaluate"},
           {"tolerance_km", KeyType::Number, "10", "spatial tolerance"},
           {"bin_percentiles", KeyType::NumberList, "50,75,90,95", "intensity bin split points"},
           {"distance_to_bound", KeyType::Bool, "false", "also report distance to the nearest bound"},
       },
       cmd_uq},
      {"verify", "pixel-wise and neighborhood metrics with bootstrap intervals",
       {
           {"data_dir", KeyType::Path, "", "archive root"},
           {"pred_dirs", KeyType::String, "", "comma-separated rollout directories (one unit each)"},
           {"leads", KeyType::IntList, "1", "leads to verify"},
           {"source", KeyType::String, "model", "model or hrrr (the raw forecast)"},
           {"region", KeyType::String, "CONUS", "threshold table row"},
           {"region_mask", KeyType::Bool, "false", "score only pixels labeled with 'region'"},
           {"thresholds_csv", KeyType::Path, "", "threshold table (default: built-in table)"},
           {"percentiles", KeyType::IntList, "50,90", "threshold percentiles"},
           {"neighborhoods", KeyType::IntList, "27,5", "FSS window sizes"},
           {"exclude_zero_categorical", KeyType::Bool, "true", "drop zero-truth pixels from POD/CSI"},
           {"n_boot", KeyType::Integer, "1000", "bootstrap replicates"},
           {"level", KeyType::Number, "0.95", "interval level"},
           {"seed", KeyType::Seed, "0", "bootstrap seed"},
       },
       cmd_verify},
      {"spectra", "power spectra, coherence and intensity histograms",
       {
           {"pred", KeyType::Path, "", "predicted field"},
           {"truth", KeyType::Path, "", "truth field"},
           {"window", KeyType::String, "none", "power spectrum window: none or hann"},
           {"segment", KeyType::Integer, "32", "coherence segment edge"},
           {"overlap", KeyType::Number, "0.5", "segment overlap"},
           {"coherence_window", KeyType::String, "hann", "segment window"},
           {"detrend", KeyType::Bool, "true", "remove each segment's mean"},
           {"squared", KeyType::Bool, "false", "report magnitude-squared coherence"},
           {"hist_edges", KeyType::NumberList, "0,0.1,0.5,1,2,5,10,20,50,100", "histogram edges, mm/h"},
           {"exclude_zero", KeyType::Bool, "true", "leave dry pixels out of the histograms"},
       },
       cmd_spectra},
      {"mosaic", "split a field into overlapping tiles or merge tiles back",
       {
           {"mode", KeyType::String, "merge", "split or merge"},
           {"input", KeyType::Path, "", "field to split"},
           {"tile_size", KeyType::Integer, "512", "tile edge"},
           {"overlap", KeyType::Integer, "50", "overlap between neighbours"},
           {"tiles_dir", KeyType::Path, "", "directory with tiles.csv to merge"},
           {"reference", KeyType::Path, "", "grid whose geometry the mosaic takes"},
       },
       cmd_mosaic},
      {"weights", "dump the intensity weight curve",
       {
           {"points", KeyType::Integer, "1001", "samples"},
           {"y_min", KeyType::Number, "0", ""},
           {"y_max", KeyType::Number, "1", ""},
       },
       cmd_weights},
  };
}

void apply_thread_env() {
  const char* env = std::getenv("RESDIFF_THREADS");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1 || n > 1024) throw_config("cli", std::string("RESDIFF_THREADS must be 1..1024, got '") + env + "'");
  set_thread_count(static_cast<int>(n));
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  const auto table = command_table();
  CLI::App app{"Residual diffusion precipitation correction and verification"};
  app.name("resdiff");
  app.require_subcommand(1);

  struct Parsed {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out;
  };
  std::vector<Parsed> parsed(table.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < table.size(); ++i) {
    auto* sub = app.add_subcommand(table[i].name, table[i].summary);
    sub->add_option("-c,--config", parsed[i].config_path, "key = value config file");
    sub->add_option("-s,--set", parsed[i].sets, "override one key (key=value)");
    sub->add_option("-o,--out", parsed[i].out, "output directory")->required();
    sub->footer(RunConfig(table[i].schema).help_text());
    subs.push_back(sub);
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    const auto& cmd = table[i];
    try {
      apply_thread_env();
      RunConfig cfg(cmd.schema);
      if (!parsed[i].config_path.empty()) cfg.load_file(parsed[i].config_path);
      for (const auto& s : parsed[i].sets) cfg.set_assignment(s);
      Manifest m(cmd.name, parsed[i].out);
      m.set_config(cfg.to_json(), hex64(cfg.hash()));
      cmd.run(cfg, m);
      m.finish();
      return 0;
    } catch (const ConfigError& e) {
      std::cerr << "resdiff " << cmd.name << ": config error: " << e.what() << '\n';
      return 2;
    } catch (const DataError& e) {
      std::cerr << "resdiff " << cmd.name << ": data error: " << e.what() << '\n';
      return 3;
    } catch (const NumericError& e) {
      std::cerr << "resdiff " << cmd.name << ": numeric failure: " << e.what() << '\n';
      return 4;
    } catch (const std::exception& e) {
      std::cerr << "resdiff " << cmd.name << ": data error: " << e.what() << '\n';
      return 3;
    }
  }
  return 1;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_main(args);
}

}  // namespace resdiff::cli
