#include "archive.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "resdiff/error.hpp"
#include "run_config.hpp"

namespace resdiff::cli {

namespace {

constexpr const char* kVersion = "resdiff 1.0.0";

}  // namespace

std::string compact_time(UtcHour t) {
  const std::string iso = format_utc_hour(t);  // YYYY-MM-DDTHH:00:00Z
  return iso.substr(0, 4) + iso.substr(5, 2) + iso.substr(8, 2) + "T" + iso.substr(11, 2);
}

fs::path mrms_path(const fs::path& root, UtcHour valid) { return root / "mrms" / (compact_time(valid) + ".grdf"); }

fs::path hrrr_path(const fs::path& root, UtcHour cycle, int lead) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_f%02d", lead);
  return root / "hrrr" / (compact_time(cycle) + buf + ".grdf");
}

fs::path ari_path(const fs::path& root) { return root / "static" / "ari.grdf"; }
fs::path regions_grid_path(const fs::path& root) { return root / "static" / "regions.grdf"; }
fs::path regions_csv_path(const fs::path& root) { return root / "static" / "regions.csv"; }

GridField load_grid(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw_data("archive", "missing " + what + " (" + path.string() + ")");
  return read_grid(path);
}

RolloutInputs load_rollout_inputs(const fs::path& root, ConfigKind kind, UtcHour t, int max_lead) {
  using std::chrono::hours;
  RolloutInputs in;
  if (kind != ConfigKind::HrrrCorrective) {
    for (int lag = 2; lag >= 0; --lag) {
      in.mrms_lags.push_back(load_grid(mrms_path(root, t - hours{lag}), "channel MRMS(t-" + std::to_string(lag) + ")"));
    }
  }
  if (kind != ConfigKind::DataDriven) {
    for (int lead = 0; lead <= max_lead + 1; ++lead) {
      const auto p = hrrr_path(root, t, lead);
      if (lead == 1 || lead == 2 || fs::exists(p)) in.hrrr.emplace(lead, load_grid(p, "channel HRRR lead " + std::to_string(lead)));
    }
  }
  if (kind == ConfigKind::HrrrCorrective) {
    for (int back = 3; back >= 1; --back) {
      in.hrrr_prior_f01.push_back(
          load_grid(hrrr_path(root, t - hours{back}, 1), "channel HRRR f01 of cycle t-" + std::to_string(back)));
    }
  }
  return in;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("archive", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string file_hash(const fs::path& path) { return hex64(fnv1a64(read_file(path))); }

Manifest::Manifest(std::string command, const fs::path& out_dir) : command_(std::move(command)), out_dir_(out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir_, ec);
  if (ec) throw_data("archive", "cannot create output directory " + out_dir_.string());
}

void Manifest::set_config(const nlohmann::json& config, const std::string& config_hash) {
  config_ = config;
  config_hash_ = config_hash;
}

void Manifest::add_input(const fs::path& path) {
  const std::string key = path.generic_string();
  for (const auto& [p, h] : inputs_) {
    if (p == key) return;
  }
  inputs_.emplace_back(key, file_hash(path));
}

void Manifest::add_output(const fs::path& relative) {
  const std::string key = relative.generic_string();
  for (const auto& o : outputs_) {
    if (o == key) throw_data("archive", "output written twice: " + key);
  }
  outputs_.push_back(key);
}

void Manifest::write_text(const fs::path& relative, const std::string& text) {
  const auto full = out_dir_ / relative;
  fs::create_directories(full.parent_path());
  std::ofstream out(full, std::ios::binary | std::ios::trunc);
  if (!out) throw_data("archive", "cannot write " + full.string());
  out << text;
  add_output(relative);
}

void Manifest::write_grid(const fs::path& relative, const GridField& field) {
  const auto full = out_dir_ / relative;
  fs::create_directories(full.parent_path());
  resdiff::write_grid(field, full);
  add_output(relative);
}

void Manifest::finish() const {
  nlohmann::json j;
  j["command"] = command_;
  j["version"] = kVersion;
  j["config_hash"] = config_hash_;
  if (config_.contains("seed")) j["seed"] = config_["seed"];
  j["config"] = config_;
  j["inputs"] = nlohmann::json::array();
  for (const auto& [p, h] : inputs_) j["inputs"].push_back({{"path", p}, {"fnv1a64", h}});
  j["outputs"] = outputs_;
  j["notes"] = notes_;
  std::ofstream out(out_dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw_data("archive", "cannot write manifest in " + out_dir_.string());
  out << j.dump(2) << '\n';
}

}  // namespace resdiff::cli
