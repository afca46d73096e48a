#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "resdiff/grid.hpp"
#include "resdiff/rollout.hpp"

namespace resdiff::cli {

namespace fs = std::filesystem;

/// Directory layout shared by every command:
///   mrms/YYYYMMDDTHH.grdf              observation valid at that hour
///   hrrr/YYYYMMDDTHH_fLL.grdf          forecast of the cycle initialized then
///   static/ari.grdf, static/regions.grdf, static/regions.csv
std::string compact_time(UtcHour t);
fs::path mrms_path(const fs::path& root, UtcHour valid);
fs::path hrrr_path(const fs::path& root, UtcHour cycle, int lead);
fs::path ari_path(const fs::path& root);
fs::path regions_grid_path(const fs::path& root);
fs::path regions_csv_path(const fs::path& root);

/// Reads a grid, turning a missing file into a DataError naming `what`.
GridField load_grid(const fs::path& path, const std::string& what);

/// Inputs for a rollout of `kind` initialized at t, reading forecast leads
/// 0..max_lead + 1 where present (lead 0 and leads beyond the first two are
/// optional here; the rollout reports any it ends up needing).
RolloutInputs load_rollout_inputs(const fs::path& root, ConfigKind kind, UtcHour t, int max_lead);

/// Run manifest: command, config, seeds, hashed inputs, produced outputs.
class Manifest {
public:
  Manifest(std::string command, const fs::path& out_dir);

  void set_config(const nlohmann::json& config, const std::string& config_hash);
  void add_input(const fs::path& path);
  /// Writes text to out_dir/relative and records it.
  void write_text(const fs::path& relative, const std::string& text);
  void write_grid(const fs::path& relative, const GridField& field);
  /// Records a file the caller has already written below out_dir.
  void add_output(const fs::path& relative);
  nlohmann::json& notes() { return notes_; }
  [[nodiscard]] const fs::path& out_dir() const { return out_dir_; }

  void finish() const;

private:
  std::string command_;
  fs::path out_dir_;
  nlohmann::json config_;
  std::string config_hash_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::string> outputs_;
  nlohmann::json notes_ = nlohmann::json::object();
};

std::string read_file(const fs::path& path);
std::string file_hash(const fs::path& path);

}  // namespace resdiff::cli
