#include "resdiff/rollout.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "resdiff/error.hpp"
#include "resdiff/residual.hpp"

namespace resdiff {

namespace {

using std::chrono::hours;

std::string lead_name(int lead) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "f%02d", lead);
  return buf;
}

const GridField& lead_field(const RolloutState& s, int lead) {
  const auto it = s.hrrr.find(lead);
  if (it == s.hrrr.end()) throw_data("rollout", "missing HRRR lead " + lead_name(lead));
  return it->second;
}

GridField min_max_scaled(GridField f) {
  const auto [lo, hi] = std::minmax_element(f.values.begin(), f.values.end());
  const double lo_v = *lo;
  const double span = *hi - *lo;
  for (auto& v : f.values) v = span > 0.0 ? (v - lo_v) / span : 0.0;
  return f;
}

void require_geometry(const GridGeometry& g, const GridField& f, const std::string& what) {
  if (!(f.geom == g)) throw_data("rollout", "geometry mismatch for " + what);
}

}  // namespace

std::string_view to_string(ConfigKind k) {
  switch (k) {
    case ConfigKind::DataDriven: return "data_driven";
    case ConfigKind::HrrrCorrective: return "hrrr_corrective";
    case ConfigKind::Hybrid: return "hybrid";
  }
  return "?";
}

ConfigKind config_kind_from_string(std::string_view s) {
  for (auto k : {ConfigKind::DataDriven, ConfigKind::HrrrCorrective, ConfigKind::Hybrid}) {
    if (to_string(k) == s) return k;
  }
  throw_config("rollout", "unknown configuration kind '" + std::string(s) + "'");
}

std::string_view to_string(DualPairing p) {
  return p == DualPairing::SameLeadDual ? "same_lead_dual" : "next_lead_pair";
}

DualPairing dual_pairing_from_string(std::string_view s) {
  if (s == "same_lead_dual") return DualPairing::SameLeadDual;
  if (s == "next_lead_pair") return DualPairing::NextLeadPair;
  throw_config("rollout", "unknown dual pairing '" + std::string(s) + "'");
}

std::vector<std::string> ChannelStack::names() const {
  std::vector<std::string> out;
  for (const auto& c : channels) out.push_back(c.name);
  return out;
}

FeatureMap ChannelStack::to_features() const {
  if (channels.empty()) throw_data("rollout", "empty channel stack");
  const auto& g = channels.front().field.geom;
  FeatureMap fm = FeatureMap::zeros(static_cast<int>(channels.size()), g.ny, g.nx);
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const auto& f = channels[c].field;
    auto plane = fm.plane(static_cast<int>(c));
    for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = f.missing[i] ? 0.0 : f.values[i];
  }
  return fm;
}

std::vector<std::uint8_t> ChannelStack::missing_union() const {
  std::vector<std::uint8_t> m(channels.empty() ? 0 : channels.front().field.size(), 0);
  for (const auto& c : channels) {
    for (std::size_t i = 0; i < m.size(); ++i) m[i] |= c.field.missing[i];
  }
  return m;
}

AuxPlanes make_aux_planes(const GridGeometry& geom) {
  GridField lat = GridField::zeros(geom, Variable::Auxiliary, UtcHour{});
  GridField lon = lat;
  for (int r = 0; r < geom.ny; ++r) {
    for (int c = 0; c < geom.nx; ++c) {
      lat.at(r, c) = geom.north_km(r) / kKmPerDegLat;
      lon.at(r, c) = geom.east_km(c) / km_per_deg_lon();
    }
  }
  return {min_max_scaled(std::move(lat)), min_max_scaled(std::move(lon))};
}

std::vector<GridField> temporal_planes(const GridGeometry& geom, UtcHour t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const auto jan1 = sys_days{ymd.year() / January / 1};
  const auto next_jan1 = sys_days{(ymd.year() + years{1}) / January / 1};
  const double doy = static_cast<double>((day - jan1).count());
  const double year_len = static_cast<double>((next_jan1 - jan1).count());
  const double hod = static_cast<double>((t - day).count());
  const double two_pi = 2.0 * std::numbers::pi;
  const double values[4] = {std::sin(two_pi * hod / 24.0), std::cos(two_pi * hod / 24.0),
                            std::sin(two_pi * doy / year_len), std::cos(two_pi * doy / year_len)};
  std::vector<GridField> planes;
  for (double v : values) {
    GridField f = GridField::zeros(geom, Variable::Auxiliary, t);
    std::fill(f.values.begin(), f.values.end(), v);
    planes.push_back(std::move(f));
  }
  return planes;
}

std::vector<int> required_leads(ConfigKind kind, DualPairing pairing, int step) {
  switch (kind) {
    case ConfigKind::DataDriven: return {};
    case ConfigKind::Hybrid: return {step, step + 1};
    case ConfigKind::HrrrCorrective:
      if (step == 1 || pairing == DualPairing::NextLeadPair) return {step, step + 1};
      return {step};
  }
  return {};
}

RolloutState init_state(ConfigKind kind, RolloutInputs inputs, AuxPlanes aux, NormSet norms, DualPairing pairing) {
  RolloutState s;
  s.kind = kind;
  s.pairing = pairing;
  s.norms = norms;
  s.aux = std::move(aux);
  const GridGeometry geom = s.aux.latitude.geom;
  require_geometry(geom, s.aux.longitude, "longitude plane");

  const bool uses_mrms = kind != ConfigKind::HrrrCorrective;
  const bool uses_hrrr = kind != ConfigKind::DataDriven;

  if (uses_mrms) {
    if (inputs.mrms_lags.size() != 3) throw_data("rollout", "missing channel: need MRMS at t-2, t-1, t");
    for (std::size_t i = 0; i < 3; ++i) {
      require_geometry(geom, inputs.mrms_lags[i], "MRMS lag");
      if (i > 0 && inputs.mrms_lags[i].valid_time - inputs.mrms_lags[i - 1].valid_time != hours{1}) {
        throw_data("rollout", "MRMS lags are not consecutive hours");
      }
    }
    s.init_time = inputs.mrms_lags.back().valid_time;
    s.last_rainfall = inputs.mrms_lags.back();
  }
  if (uses_hrrr) {
    for (int lead : {1, 2}) {
      if (!inputs.hrrr.contains(lead)) throw_data("rollout", "missing channel: HRRR " + lead_name(lead) + "(t)");
    }
    const UtcHour t = inputs.hrrr.at(1).valid_time - hours{1};
    if (uses_mrms && t != s.init_time) throw_data("rollout", "HRRR cycle does not start at MRMS(t)");
    s.init_time = t;
    for (const auto& [lead, f] : inputs.hrrr) {
      require_geometry(geom, f, "HRRR " + lead_name(lead));
      if (f.valid_time != t + hours{lead}) throw_data("rollout", "HRRR " + lead_name(lead) + " has the wrong valid time");
    }
  }
  if (kind == ConfigKind::HrrrCorrective) {
    if (inputs.hrrr_prior_f01.size() != 3) {
      throw_data("rollout", "missing channel: need HRRR f01 from cycles t-3, t-2, t-1");
    }
    for (std::size_t i = 0; i < 3; ++i) {
      require_geometry(geom, inputs.hrrr_prior_f01[i], "prior-cycle f01");
      if (inputs.hrrr_prior_f01[i].valid_time != s.init_time - hours{2 - static_cast<int>(i)}) {
        throw_data("rollout", "prior-cycle f01 fields have the wrong valid times");
      }
    }
  }
  s.mrms_lags = std::move(inputs.mrms_lags);
  s.hrrr = std::move(inputs.hrrr);
  s.hrrr_prior_f01 = std::move(inputs.hrrr_prior_f01);
  s.step = 1;
  return s;
}

ChannelStack current_stack(const RolloutState& s) {
  ChannelStack stack;
  const int k = s.step;
  auto add = [&](std::string name, GridField f) { stack.channels.push_back({std::move(name), std::move(f)}); };

  if (s.kind != ConfigKind::HrrrCorrective) {
    static const char* lag_names[3] = {"mrms(t-2)", "mrms(t-1)", "mrms(t)"};
    for (std::size_t i = 0; i < 3; ++i) add(lag_names[i], zscore(s.mrms_lags[i], s.norms.mrms));
  }
  if (s.kind == ConfigKind::Hybrid) {
    add("hrrr_" + lead_name(k), zscore(lead_field(s, k), s.norms.hrrr));
    add("hrrr_" + lead_name(k + 1), zscore(lead_field(s, k + 1), s.norms.hrrr));
  }
  if (s.kind == ConfigKind::HrrrCorrective) {
    static const char* prior_names[3] = {"hrrr_f01(t-3)", "hrrr_f01(t-2)", "hrrr_f01(t-1)"};
    for (std::size_t i = 0; i < 3; ++i) add(prior_names[i], zscore(s.hrrr_prior_f01[i], s.norms.hrrr));
    add("hrrr_" + lead_name(k), zscore(lead_field(s, k), s.norms.hrrr));
    const int raw_lead = (k == 1 || s.pairing == DualPairing::NextLeadPair) ? k + 1 : k;
    add("hrrr_" + lead_name(raw_lead) + ":raw", lead_field(s, raw_lead));
  }
  add("latitude", s.aux.latitude);
  add("longitude", s.aux.longitude);
  static const char* time_names[4] = {"sin_hour", "cos_hour", "sin_doy", "cos_doy"};
  auto planes = temporal_planes(s.aux.latitude.geom, s.init_time + hours{k - 1});
  for (std::size_t i = 0; i < 4; ++i) add(time_names[i], std::move(planes[i]));
  return stack;
}

GridField step(RolloutState& s, const Denoiser& denoiser, const SigmaSchedule& sched, Rng& rng) {
  if (s.step > kMaxHorizon) throw_data("rollout", "rollout already reached the 12-hour horizon");
  const ChannelStack stack = current_stack(s);
  const FeatureMap sample = heun_sample(denoiser, stack.to_features(), sched, rng);

  const UtcHour valid = s.init_time + hours{s.step};
  GridField z = GridField::zeros(s.aux.latitude.geom, Variable::Standardized, valid);
  std::copy(sample.data.begin(), sample.data.end(), z.values.begin());
  const auto holes = stack.missing_union();
  for (std::size_t i = 0; i < holes.size(); ++i) {
    if (holes[i]) z.set_missing(i);
  }
  const GridField residual = inverse_zscore(z, s.norms.residual, Variable::Residual);

  const GridField& base = s.kind == ConfigKind::DataDriven ? s.last_rainfall : lead_field(s, s.step);
  GridField prediction = reconstruct(base, residual);
  s.unclamped.push_back(reconstruct_unclamped(base, residual));

  if (s.kind != ConfigKind::HrrrCorrective) {
    s.mrms_lags.erase(s.mrms_lags.begin());
    s.mrms_lags.push_back(prediction);
  }
  s.last_rainfall = prediction;
  s.predictions.push_back(prediction);
  s.residuals.push_back(residual);
  ++s.step;
  return prediction;
}

std::vector<GridField> run(RolloutState& s, const Denoiser& denoiser, const SigmaSchedule& sched, int horizon,
                           Rng& rng) {
  if (horizon < 1 || s.step - 1 + horizon > kMaxHorizon) throw_data("rollout", "horizon must keep within 1..12");
  for (int k = s.step; k < s.step + horizon; ++k) {
    for (int lead : required_leads(s.kind, s.pairing, k)) lead_field(s, lead);
  }
  std::vector<GridField> out;
  for (int i = 0; i < horizon; ++i) out.push_back(step(s, denoiser, sched, rng));
  return out;
}

GridField training_target(const RolloutState& s, const GridField& truth_next) {
  if (s.step != 1) throw_data("rollout", "training targets are defined at step 1");
  if (s.kind == ConfigKind::DataDriven) return make_delta_target(truth_next, s.mrms_lags.back());
  return make_error_target(truth_next, lead_field(s, 1));
}

TrainingExample make_training_example(const RolloutState& s, const GridField& truth_next) {
  const ChannelStack stack = current_stack(s);
  const GridField target = training_target(s, truth_next);
  const GridField z = zscore(target, s.norms.residual);
  TrainingExample ex;
  ex.cond = stack.to_features();
  ex.clean = FeatureMap::zeros(1, z.geom.ny, z.geom.nx);
  ex.valid.assign(z.size(), 1);
  const auto holes = stack.missing_union();
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z.missing[i] || holes[i]) {
      ex.valid[i] = 0;
    } else {
      ex.clean.data[i] = z.values[i];
    }
  }
  return ex;
}

}  // namespace resdiff
