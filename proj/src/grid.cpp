#include "resdiff/grid.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "resdiff/error.hpp"

namespace resdiff {

static_assert(std::endian::native == std::endian::little, "grid files are little-endian");

namespace {

constexpr std::array<char, 4> kGridMagic{'G', 'R', 'D', 'F'};
constexpr std::uint32_t kGridVersion = 1;

void append_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

std::uint32_t read_u32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v;
  std::memcpy(&v, bytes.data() + offset, 4);
  return v;
}

}  // namespace

// --- time ------------------------------------------------------------------

UtcHour make_utc_hour(int year, unsigned month, unsigned day, int hour) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok() || hour < 0 || hour > 23) throw_data("grid", "invalid calendar time");
  return time_point_cast<hours>(sys_days{ymd}) + hours{hour};
}

std::string format_utc_hour(UtcHour t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const auto hour = (t - day).count();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:00:00Z", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(hour));
  return buf;
}

UtcHour parse_utc_hour(std::string_view iso) {
  int y = 0, h = 0, mi = 0, s = 0;
  unsigned mo = 0, d = 0;
  const std::string str(iso);
  char z = 0;
  if (std::sscanf(str.c_str(), "%d-%u-%uT%d:%d:%d%c", &y, &mo, &d, &h, &mi, &s, &z) != 7 || z != 'Z' || mi != 0 ||
      s != 0) {
    throw_data("grid", "valid_time is not an hour-precision ISO-8601 UTC string: '" + str + "'");
  }
  return make_utc_hour(y, mo, d, h);
}

double km_per_deg_lon() {
  return kKmPerDegLat * std::cos(kStandardParallelDeg * std::numbers::pi / 180.0);
}

// --- variables ---------------------------------------------------------------

std::string_view to_string(Variable v) {
  switch (v) {
    case Variable::Rainfall: return "rainfall";
    case Variable::Residual: return "residual";
    case Variable::Standardized: return "zscore";
    case Variable::Threshold: return "ari";
    case Variable::Auxiliary: return "aux";
    case Variable::Region: return "region";
  }
  return "?";
}

Variable variable_from_string(std::string_view s) {
  for (auto v : {Variable::Rainfall, Variable::Residual, Variable::Standardized, Variable::Threshold,
                 Variable::Auxiliary, Variable::Region}) {
    if (to_string(v) == s) return v;
  }
  throw_data("grid", "unknown variable tag '" + std::string(s) + "'");
}

std::string_view default_units(Variable v) {
  switch (v) {
    case Variable::Rainfall:
    case Variable::Residual:
    case Variable::Threshold: return "mm/h";
    case Variable::Region: return "code";
    default: return "1";
  }
}

// --- geometry ----------------------------------------------------------------

double GridGeometry::north_km(double row) const { return lat0 * kKmPerDegLat - row * dy_km; }

double GridGeometry::east_km(double col) const { return lon0 * km_per_deg_lon() + col * dx_km; }

void GridGeometry::validate() const {
  if (ny < 1 || nx < 1) throw_data("grid", "geometry needs ny >= 1 and nx >= 1");
  if (!(dx_km > 0.0) || !(dy_km > 0.0)) throw_data("grid", "pixel spacing must be positive");
  if (!std::isfinite(lat0) || !std::isfinite(lon0)) throw_data("grid", "non-finite origin");
}

// --- field -------------------------------------------------------------------

GridField GridField::zeros(const GridGeometry& g, Variable v, UtcHour t) {
  g.validate();
  GridField f;
  f.geom = g;
  f.variable = v;
  f.units = std::string(default_units(v));
  f.valid_time = t;
  f.values.assign(g.size(), 0.0);
  f.missing.assign(g.size(), 0);
  return f;
}

GridField GridField::like(Variable v) const { return zeros(geom, v, valid_time); }

void GridField::set_missing(std::size_t i) {
  missing[i] = 1;
  values[i] = std::numeric_limits<double>::quiet_NaN();
}

std::size_t GridField::missing_count() const {
  return static_cast<std::size_t>(std::count(missing.begin(), missing.end(), std::uint8_t{1}));
}

void GridField::validate() const {
  geom.validate();
  if (values.size() != geom.size() || missing.size() != geom.size()) {
    throw_data("grid", "value/mask length does not match ny*nx");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (missing[i]) continue;
    if (!std::isfinite(values[i])) throw_data("grid", "non-finite value at pixel " + std::to_string(i));
    if (variable == Variable::Rainfall && values[i] < 0.0) {
      throw_data("grid", "negative rainfall at pixel " + std::to_string(i));
    }
  }
}

bool same_content(const GridField& a, const GridField& b) {
  if (!(a.geom == b.geom) || a.variable != b.variable || a.units != b.units || a.valid_time != b.valid_time ||
      a.missing != b.missing || a.values.size() != b.values.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (a.missing[i]) continue;
    if (std::bit_cast<std::uint64_t>(a.values[i]) != std::bit_cast<std::uint64_t>(b.values[i])) return false;
  }
  return true;
}

void require_same_geometry(const GridField& a, const GridField& b, std::string_view context) {
  if (!(a.geom == b.geom)) throw_data(std::string(context), "geometry mismatch");
}

// --- file format -------------------------------------------------------------

std::string encode_grid(const GridField& field) {
  field.validate();
  const nlohmann::json header = {
      {"ny", field.geom.ny},
      {"nx", field.geom.nx},
      {"lat0", field.geom.lat0},
      {"lon0", field.geom.lon0},
      {"dx_km", field.geom.dx_km},
      {"dy_km", field.geom.dy_km},
      {"variable", std::string(to_string(field.variable))},
      {"units", field.units},
      {"valid_time", format_utc_hour(field.valid_time)},
  };
  const std::string text = header.dump();

  std::string out;
  out.reserve(12 + text.size() + 4 * field.size());
  out.append(kGridMagic.data(), kGridMagic.size());
  append_u32(out, kGridVersion);
  append_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (std::size_t i = 0; i < field.size(); ++i) {
    const float v = field.missing[i] ? std::numeric_limits<float>::quiet_NaN() : static_cast<float>(field.values[i]);
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.append(buf, 4);
  }
  return out;
}

GridField decode_grid(std::string_view bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kGridMagic.data(), 4) != 0) {
    throw_data("grid", "malformed header: missing GRDF magic");
  }
  const auto version = read_u32(bytes, 4);
  if (version != kGridVersion) throw_data("grid", "unknown format version " + std::to_string(version));
  const auto header_len = read_u32(bytes, 8);
  if (bytes.size() - 12 < header_len) throw_data("grid", "malformed header: truncated JSON header");

  GridField f;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(12, header_len));
    f.geom.ny = header.at("ny").get<int>();
    f.geom.nx = header.at("nx").get<int>();
    f.geom.lat0 = header.at("lat0").get<double>();
    f.geom.lon0 = header.at("lon0").get<double>();
    f.geom.dx_km = header.at("dx_km").get<double>();
    f.geom.dy_km = header.at("dy_km").get<double>();
    f.variable = variable_from_string(header.at("variable").get<std::string>());
    f.units = header.at("units").get<std::string>();
    f.valid_time = parse_utc_hour(header.at("valid_time").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw_data("grid", std::string("malformed header: ") + e.what());
  }
  f.geom.validate();

  const std::size_t payload = bytes.size() - 12 - header_len;
  if (payload != 4 * f.geom.size()) {
    throw_data("grid", "shape mismatch: header declares " + std::to_string(f.geom.ny) + "x" +
                           std::to_string(f.geom.nx) + " but payload holds " + std::to_string(payload / 4) +
                           " values");
  }
  f.values.resize(f.geom.size());
  f.missing.assign(f.geom.size(), 0);
  const char* p = bytes.data() + 12 + header_len;
  for (std::size_t i = 0; i < f.size(); ++i) {
    float v;
    std::memcpy(&v, p + 4 * i, 4);
    if (std::isnan(v)) {
      f.set_missing(i);
    } else {
      f.values[i] = static_cast<double>(v);
    }
  }
  f.validate();
  return f;
}

GridField read_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("grid", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_grid(ss.str());
  } catch (const DataError& e) {
    throw DataError(std::string(e.what()) + " (" + path.string() + ")");
  }
}

void write_grid(const GridField& field, const std::filesystem::path& path) {
  const std::string bytes = encode_grid(field);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data("grid", "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw_data("grid", "write failed for " + path.string());
}

// --- normalization -----------------------------------------------------------

NormStats compute_stats(std::span<const GridField> fields, double std_floor) {
  // Welford accumulation over every non-missing pixel.
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  for (const auto& f : fields) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (f.missing[i]) continue;
      ++n;
      const double delta = f.values[i] - mean;
      mean += delta / static_cast<double>(n);
      m2 += delta * (f.values[i] - mean);
    }
  }
  if (n == 0) throw_data("grid", "compute_stats: no non-missing pixels in input");
  const double sd = std::sqrt(m2 / static_cast<double>(n));
  return {mean, std::max(sd, std_floor)};
}

GridField zscore(const GridField& field, const NormStats& stats) {
  if (!(stats.std > 0.0)) throw_data("grid", "zscore: std must be positive");
  GridField out = field;
  out.variable = Variable::Standardized;
  out.units = std::string(default_units(Variable::Standardized));
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out.missing[i]) out.values[i] = (field.values[i] - stats.mean) / stats.std;
  }
  return out;
}

GridField inverse_zscore(const GridField& field, const NormStats& stats, Variable target) {
  if (!(stats.std > 0.0)) throw_data("grid", "inverse_zscore: std must be positive");
  GridField out = field;
  out.variable = target;
  out.units = std::string(default_units(target));
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.missing[i]) continue;
    double v = field.values[i] * stats.std + stats.mean;
    if (target == Variable::Rainfall) v = std::max(v, 0.0);
    out.values[i] = v;
  }
  return out;
}

// --- regridding --------------------------------------------------------------

GridField bilinear_regrid(const GridField& src, const GridGeometry& target) {
  src.validate();
  target.validate();
  GridField out = GridField::zeros(target, src.variable, src.valid_time);
  out.units = src.units;

  constexpr double kEdgeTol = 1e-9;
  const double row_offset = (src.geom.north_km(0) - target.north_km(0)) / src.geom.dy_km;
  const double col_offset = (target.east_km(0) - src.geom.east_km(0)) / src.geom.dx_km;
  const double row_step = target.dy_km / src.geom.dy_km;
  const double col_step = target.dx_km / src.geom.dx_km;

  auto locate = [&](double pos, int n, const char* axis) {
    if (pos < -kEdgeTol || pos > (n - 1) + kEdgeTol) {
      throw_data("grid", std::string("bilinear_regrid: target outside source extent along ") + axis);
    }
    pos = std::clamp(pos, 0.0, static_cast<double>(n - 1));
    int i0 = static_cast<int>(std::floor(pos));
    if (n == 1) return std::pair{0, 0.0};
    if (i0 >= n - 1) i0 = n - 2;
    return std::pair{i0, pos - i0};
  };

  for (int r = 0; r < target.ny; ++r) {
    const auto [r0, fy] = locate(row_offset + r * row_step, src.geom.ny, "rows");
    for (int c = 0; c < target.nx; ++c) {
      const auto [c0, fx] = locate(col_offset + c * col_step, src.geom.nx, "columns");
      const std::array<double, 4> w{(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx};
      const std::array<std::pair<int, int>, 4> at{
          std::pair{r0, c0}, std::pair{r0, c0 + 1}, std::pair{r0 + 1, c0}, std::pair{r0 + 1, c0 + 1}};
      double acc = 0.0;
      bool miss = false;
      for (int k = 0; k < 4; ++k) {
        if (w[k] == 0.0) continue;
        const auto idx = src.geom.index(at[k].first, at[k].second);
        if (src.missing[idx]) {
          miss = true;
          break;
        }
        acc += w[k] * src.values[idx];
      }
      const auto o = target.index(r, c);
      if (miss) {
        out.set_missing(o);
      } else {
        out.values[o] = (src.variable == Variable::Rainfall) ? std::max(acc, 0.0) : acc;
      }
    }
  }
  return out;
}

// --- tiles -------------------------------------------------------------------

bool TileSpec::inside(const GridGeometry& g) const {
  return size >= 1 && row0 >= 0 && col0 >= 0 && row0 + size <= g.ny && col0 + size <= g.nx;
}

GridGeometry tile_geometry(const GridGeometry& parent, const TileSpec& tile) {
  GridGeometry g = parent;
  g.ny = tile.size;
  g.nx = tile.size;
  g.lat0 = parent.lat0 - tile.row0 * parent.dy_km / kKmPerDegLat;
  g.lon0 = parent.lon0 + tile.col0 * parent.dx_km / km_per_deg_lon();
  return g;
}

GridField extract_tile(const GridField& field, const TileSpec& tile) {
  if (!tile.inside(field.geom)) {
    throw_data("grid", "extract_tile: tile at (" + std::to_string(tile.row0) + "," + std::to_string(tile.col0) +
                           ") size " + std::to_string(tile.size) + " is out of bounds");
  }
  GridField out = GridField::zeros(tile_geometry(field.geom, tile), field.variable, field.valid_time);
  out.units = field.units;
  for (int r = 0; r < tile.size; ++r) {
    for (int c = 0; c < tile.size; ++c) {
      const auto s = field.geom.index(tile.row0 + r, tile.col0 + c);
      const auto d = out.geom.index(r, c);
      out.values[d] = field.values[s];
      out.missing[d] = field.missing[s];
    }
  }
  return out;
}

std::vector<TileSpec> layout_tiles(const GridGeometry& domain, int size, int overlap) {
  domain.validate();
  if (size < 1 || overlap < 0 || overlap >= size) throw_data("grid", "layout_tiles: need 0 <= overlap < size");
  if (size > domain.ny || size > domain.nx) throw_data("grid", "layout_tiles: tile larger than domain");
  auto starts = [&](int n) {
    std::vector<int> s;
    const int stride = size - overlap;
    for (int p = 0;; p += stride) {
      if (p + size >= n) {
        s.push_back(n - size);
        break;
      }
      s.push_back(p);
    }
    return s;
  };
  std::vector<TileSpec> tiles;
  for (int r : starts(domain.ny)) {
    for (int c : starts(domain.nx)) tiles.push_back(TileSpec{r, c, size, {}, {}});
  }
  return tiles;
}

GridField mosaic(std::span<const std::pair<TileSpec, GridField>> tiles, const GridGeometry& target) {
  target.validate();
  if (tiles.empty()) throw_data("grid", "mosaic: no tiles");

  struct Contribution {
    std::size_t pixel;
    double value;
  };
  std::vector<Contribution> contributions;
  std::vector<std::uint32_t> coverage(target.size(), 0);

  for (const auto& [spec, field] : tiles) {
    if (!spec.inside(target)) throw_data("grid", "mosaic: tile outside target grid");
    if (field.geom.ny != spec.size || field.geom.nx != spec.size) {
      throw_data("grid", "mosaic: tile field shape does not match its TileSpec");
    }
    for (int r = 0; r < spec.size; ++r) {
      for (int c = 0; c < spec.size; ++c) {
        const auto pixel = target.index(spec.row0 + r, spec.col0 + c);
        ++coverage[pixel];
        const auto s = field.geom.index(r, c);
        if (!field.missing[s]) contributions.push_back({pixel, field.values[s]});
      }
    }
  }
  for (std::size_t i = 0; i < coverage.size(); ++i) {
    if (coverage[i] == 0) {
      throw_data("grid", "mosaic: pixel (" + std::to_string(i / target.nx) + "," + std::to_string(i % target.nx) +
                             ") is not covered by any tile");
    }
  }

  std::sort(contributions.begin(), contributions.end(), [](const Contribution& a, const Contribution& b) {
    return a.pixel != b.pixel ? a.pixel < b.pixel : a.value < b.value;
  });

  const auto& first = tiles.front().second;
  GridField out = GridField::zeros(target, first.variable, first.valid_time);
  out.units = first.units;
  std::vector<std::uint8_t> seen(target.size(), 0);
  for (std::size_t k = 0; k < contributions.size();) {
    const auto pixel = contributions[k].pixel;
    double sum = 0.0;
    std::size_t count = 0;
    for (; k < contributions.size() && contributions[k].pixel == pixel; ++k) {
      sum += contributions[k].value;
      ++count;
    }
    out.values[pixel] = sum / static_cast<double>(count);
    seen[pixel] = 1;
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) out.set_missing(i);
  }
  return out;
}

}  // namespace resdiff
