#include "run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "resdiff/error.hpp"

namespace resdiff::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == s.size();
}

template <typename T>
bool parse_integral(const std::string& s, T& out) {
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return !s.empty() && ec == std::errc{} && ptr == end;
}

std::string_view type_name(KeyType t) {
  switch (t) {
    case KeyType::String: return "string";
    case KeyType::Path: return "path";
    case KeyType::Number: return "number";
    case KeyType::Integer: return "integer";
    case KeyType::Bool: return "bool";
    case KeyType::NumberList: return "number list";
    case KeyType::IntList: return "integer list";
    case KeyType::Time: return "UTC hour";
    case KeyType::Seed: return "seed";
  }
  return "?";
}

void check_value(const KeySpec& spec, const std::string& v) {
  auto bad = [&] {
    throw_config("config", "key '" + spec.name + "' expects a " + std::string(type_name(spec.type)) + ", got '" + v +
                               "'");
  };
  double d = 0.0;
  long long i = 0;
  std::uint64_t u = 0;
  switch (spec.type) {
    case KeyType::String:
    case KeyType::Path: return;
    case KeyType::Number:
      if (!parse_double(v, d)) bad();
      return;
    case KeyType::Integer:
      if (!parse_integral(v, i)) bad();
      return;
    case KeyType::Seed:
      if (!parse_integral(v, u)) bad();
      return;
    case KeyType::Bool:
      if (v != "true" && v != "false") bad();
      return;
    case KeyType::NumberList:
      for (const auto& item : split_list(v)) {
        if (!parse_double(item, d)) bad();
      }
      return;
    case KeyType::IntList:
      for (const auto& item : split_list(v)) {
        if (!parse_integral(item, i)) bad();
      }
      return;
    case KeyType::Time:
      try {
        (void)parse_utc_hour(v);
      } catch (const std::exception&) {
        bad();
      }
      return;
  }
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

RunConfig::RunConfig(std::vector<KeySpec> schema) : schema_(std::move(schema)) {
  for (const auto& k : schema_) {
    if (!k.default_value.empty()) check_value(k, k.default_value);
    values_[k.name] = k.default_value;
  }
}

const KeySpec& RunConfig::spec(const std::string& key) const {
  for (const auto& k : schema_) {
    if (k.name == key) return k;
  }
  throw_config("config", "unknown key '" + key + "'");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& k = spec(key);
  const std::string v = trim(value);
  check_value(k, v);
  values_[key] = v;
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw_config("config", "expected key=value, got '" + assignment + "'");
  set(trim(std::string_view(assignment).substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::parse(std::string_view text, std::string_view origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw_config("config", std::string(origin) + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    set(trim(std::string_view(line).substr(0, eq)), line.substr(eq + 1));
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_config("config", "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  parse(ss.str(), path.string());
}

const std::string& RunConfig::str(const std::string& key) const {
  (void)spec(key);
  return values_.at(key);
}

double RunConfig::num(const std::string& key) const {
  double d = 0.0;
  if (!parse_double(str(key), d)) throw_config("config", "key '" + key + "' is not set");
  return d;
}

int RunConfig::integer(const std::string& key) const {
  int i = 0;
  if (!parse_integral(str(key), i)) throw_config("config", "key '" + key + "' is not a valid integer");
  return i;
}

bool RunConfig::flag(const std::string& key) const { return str(key) == "true"; }

std::uint64_t RunConfig::seed(const std::string& key) const {
  std::uint64_t u = 0;
  if (!parse_integral(str(key), u)) throw_config("config", "key '" + key + "' is not set");
  return u;
}

std::vector<double> RunConfig::nums(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(str(key))) {
    double d = 0.0;
    parse_double(item, d);
    out.push_back(d);
  }
  return out;
}

std::vector<int> RunConfig::ints(const std::string& key) const {
  std::vector<int> out;
  for (const auto& item : split_list(str(key))) {
    int i = 0;
    if (!parse_integral(item, i)) throw_config("config", "key '" + key + "' has an out-of-range integer");
    out.push_back(i);
  }
  return out;
}

std::vector<std::string> RunConfig::strs(const std::string& key) const { return split_list(str(key)); }

UtcHour RunConfig::time(const std::string& key) const {
  const auto& v = str(key);
  if (v.empty()) throw_config("config", "key '" + key + "' is not set");
  return parse_utc_hour(v);
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t RunConfig::hash() const { return fnv1a64(canonical()); }

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : values_) j[k] = v;
  return j;
}

std::string RunConfig::help_text() const {
  std::string out = "Config keys (file lines or --set key=value):\n";
  for (const auto& k : schema_) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "  %-24s", k.name.c_str());
    out += buf;
    out += k.help;
    out += " [" + std::string(type_name(k.type));
    if (!k.default_value.empty()) out += ", default " + k.default_value;
    out += "]\n";
  }
  return out;
}

}  // namespace resdiff::cli
