#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "resdiff/grid.hpp"

namespace resdiff::cli {

enum class KeyType { String, Path, Number, Integer, Bool, NumberList, IntList, Time, Seed };

struct KeySpec {
  std::string name;
  KeyType type = KeyType::String;
  std::string default_value;
  std::string help;
};

/// Plain-text key = value configuration checked against a per-command
/// schema. '#' starts a comment; blank lines are ignored. Unknown keys and
/// values that do not parse as the declared type are ConfigErrors.
class RunConfig {
public:
  explicit RunConfig(std::vector<KeySpec> schema);

  void load_file(const std::filesystem::path& path);
  void parse(std::string_view text, std::string_view origin = "<config>");
  void set(const std::string& key, const std::string& value);
  /// "key=value" as given on the command line.
  void set_assignment(const std::string& assignment);

  [[nodiscard]] const std::string& str(const std::string& key) const;
  [[nodiscard]] double num(const std::string& key) const;
  [[nodiscard]] int integer(const std::string& key) const;
  [[nodiscard]] bool flag(const std::string& key) const;
  [[nodiscard]] std::uint64_t seed(const std::string& key) const;
  [[nodiscard]] std::vector<double> nums(const std::string& key) const;
  [[nodiscard]] std::vector<int> ints(const std::string& key) const;
  [[nodiscard]] std::vector<std::string> strs(const std::string& key) const;
  [[nodiscard]] UtcHour time(const std::string& key) const;

  [[nodiscard]] const std::vector<KeySpec>& schema() const { return schema_; }
  /// Every key with its effective value, sorted by name.
  [[nodiscard]] std::string canonical() const;
  [[nodiscard]] std::uint64_t hash() const;
  [[nodiscard]] nlohmann::json to_json() const;
  [[nodiscard]] std::string help_text() const;

private:
  const KeySpec& spec(const std::string& key) const;
  std::vector<KeySpec> schema_;
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace resdiff::cli
