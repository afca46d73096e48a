#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "archive.hpp"
#include "commands.hpp"
#include "resdiff/residual.hpp"
#include "test_util.hpp"

using namespace resdiff;
namespace fs = std::filesystem;

namespace {

int run(const std::string& cmd, const fs::path& out, const std::vector<std::string>& sets) {
  std::vector<std::string> args{cmd, "-o", out.string()};
  for (const auto& s : sets) {
    args.push_back("-s");
    args.push_back(s);
  }
  return cli::cli_main(args);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A 64 x 64 world with small storms, so that tiles and thresholds see a mix
// of wet and dry pixels.
const std::vector<std::string> kSmallWorld = {"ny=64",           "nx=64",         "radius_min_km=3",
                                              "radius_max_km=8", "init_count=2", "max_lead=12"};

fs::path small_world() {
  static const fs::path dir = [] {
    const auto d = testutil::temp_dir("cli_world");
    REQUIRE(run("synth", d, kSmallWorld) == 0);
    return d;
  }();
  return dir;
}

std::string data_dir() { return "data_dir=" + small_world().string(); }

}  // namespace

TEST_CASE("exit codes") {
  const auto out = testutil::temp_dir("cli_codes");
  CHECK(cli::cli_main({}) == 2);
  CHECK(cli::cli_main({"nonsense"}) == 2);
  CHECK(run("weights", out, {"bogus_key=1"}) == 2);
  CHECK(run("weights", out, {"points=many"}) == 2);
  CHECK(run("weights", out, {"points=1"}) == 2);
  CHECK(run("rollout", out / "r", {data_dir(), "init_time=2024-03-01T03", "denoiser=zero"}) == 2);
  CHECK(run("uq", out / "u", {data_dir(), "rollout_dir=" + (out / "missing").string()}) == 3);
  CHECK(run("spectra", out / "s", {"pred=" + (out / "none.grdf").string(), "truth=x"}) == 3);
  CHECK(run("weights", out, {}) == 0);
  CHECK(cli::cli_main({"weights", "--help"}) == 0);

  setenv("RESDIFF_THREADS", "0", 1);
  CHECK(run("weights", out, {}) == 2);
  setenv("RESDIFF_THREADS", "3", 1);
  CHECK(run("weights", out, {}) == 0);
  unsetenv("RESDIFF_THREADS");
}

TEST_CASE("weights dump") {
  const auto out = testutil::temp_dir("cli_weights");
  REQUIRE(run("weights", out, {"points=11"}) == 0);
  std::istringstream in(slurp(out / "weights.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "y,w");
  double prev = 0.0;
  int n = 0;
  while (std::getline(in, line)) {
    const double w = std::stod(line.substr(line.find(',') + 1));
    CHECK(w >= prev);
    prev = w;
    ++n;
  }
  CHECK(n == 11);
}

TEST_CASE("verify on a perfect forecast") {
  // Truth copied into a fake rollout directory gives the optimum scores.
  const auto out = testutil::temp_dir("cli_perfect");
  const auto rdir = out / "rollout";
  fs::create_directories(rdir);
  const UtcHour init = make_utc_hour(2024, 3, 1, 3);
  for (int k = 1; k <= 2; ++k) {
    fs::copy_file(cli::mrms_path(small_world(), init + std::chrono::hours{k}),
                  rdir / (std::string("pred_f0") + char('0' + k) + ".grdf"));
  }
  nlohmann::json info{{"init_time", format_utc_hour(init)}, {"horizon", 2}};
  std::ofstream(rdir / "rollout.json") << info.dump();
  REQUIRE(run("verify", out / "v", {data_dir(), "pred_dirs=" + rdir.string(), "leads=1,2", "n_boot=50"}) == 0);
  const auto rows = nlohmann::json::parse(slurp(out / "v" / "metrics.json"));
  REQUIRE(rows.size() > 3);
  for (const auto& r : rows) {
    if (r["value"].is_null()) continue;
    const std::string metric = r["metric"];
    CHECK(r["value"].get<double>() == (metric == "mae" ? 0.0 : 1.0));
  }
}

TEST_CASE("zero-denoiser corrective rollout is the clamped forecast") {
  const auto out = testutil::temp_dir("cli_zero");
  REQUIRE(run("rollout", out, {data_dir(), "init_time=2024-03-01T03:00:00Z", "denoiser=zero", "kind=hrrr_corrective",
                               "horizon=12"}) == 0);
  const UtcHour init = make_utc_hour(2024, 3, 1, 3);
  for (int k = 1; k <= 12; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "pred_f%02d.grdf", k);
    const GridField pred = read_grid(out / name);
    GridField base = read_grid(cli::hrrr_path(small_world(), init, k));
    for (auto& v : base.values) v = std::max(v, 0.0);
    CHECK(pred.values == base.values);
    CHECK(pred.valid_time == init + std::chrono::hours{k});
  }
}

TEST_CASE("reruns are byte-identical and manifests are complete") {
  const auto a = testutil::temp_dir("cli_rerun_a");
  const auto b = testutil::temp_dir("cli_rerun_b");
  const std::vector<std::string> sets{data_dir(), "init_time=2024-03-01T04:00:00Z", "denoiser=zero",
                                      "kind=data_driven", "horizon=4", "seed=5", "write_unclamped=true"};
  REQUIRE(run("rollout", a, sets) == 0);
  REQUIRE(run("rollout", b, sets) == 0);
  std::set<std::string> on_disk;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a).generic_string();
    if (rel != "manifest.json") on_disk.insert(rel);
    CHECK_MESSAGE(slurp(e.path()) == slurp(b / rel), rel);
  }
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  std::set<std::string> listed;
  for (const auto& o : manifest["outputs"]) CHECK(listed.insert(o.get<std::string>()).second);
  CHECK(listed == on_disk);
  CHECK(manifest["seed"] == "5");
  CHECK(manifest["command"] == "rollout");
  CHECK_FALSE(manifest["config_hash"].get<std::string>().empty());

  const auto w = small_world();
  std::set<std::string> synth_files;
  for (const auto& e : fs::recursive_directory_iterator(w)) {
    if (e.is_regular_file() && e.path().filename() != "manifest.json") {
      synth_files.insert(fs::relative(e.path(), w).generic_string());
    }
  }
  std::set<std::string> synth_listed;
  const auto synth_manifest = nlohmann::json::parse(slurp(w / "manifest.json"));
  for (const auto& o : synth_manifest["outputs"]) synth_listed.insert(o.get<std::string>());
  CHECK(synth_listed == synth_files);
}

TEST_CASE("module commands run on the small world") {
  const auto out = testutil::temp_dir("cli_cmds");
  CHECK(run("sample", out / "sample",
            {data_dir(), "start=2024-03-01T00:00:00Z", "end=2024-03-01T06:00:00Z", "tile_size=32",
             "spacing_km=20"}) == 0);
  CHECK(fs::exists(out / "sample" / "tiles.csv"));
  CHECK(run("targets", out / "targets",
            {data_dir(), "start=2024-03-01T03:00:00Z", "end=2024-03-01T04:00:00Z"}) == 0);
  CHECK(fs::exists(out / "targets" / "norms.json"));
  REQUIRE(run("rollout", out / "roll", {data_dir(), "init_time=2024-03-01T03:00:00Z", "denoiser=zero",
                                         "kind=hrrr_corrective", "horizon=3"}) == 0);
  CHECK(run("uq", out / "uq", {data_dir(), "rollout_dir=" + (out / "roll").string(), "leads=1,2"}) == 0);
  CHECK(fs::exists(out / "uq" / "coverage_f02.csv"));
  const auto mrms = cli::mrms_path(small_world(), make_utc_hour(2024, 3, 1, 4)).string();
  CHECK(run("spectra", out / "spec", {"pred=" + (out / "roll" / "pred_f01.grdf").string(), "truth=" + mrms}) == 0);
  CHECK(run("mosaic", out / "split", {"mode=split", "input=" + mrms, "tile_size=32", "overlap=8"}) == 0);
  REQUIRE(run("mosaic", out / "merge",
              {"mode=merge", "tiles_dir=" + (out / "split" / "tiles").string(), "reference=" + mrms}) == 0);
  CHECK(read_grid(out / "merge" / "mosaic.grdf").values == read_grid(mrms).values);
  CHECK(run("regrid", out / "regrid",
            {"input=" + mrms, "ny=15", "nx=15", "lat0=39.9", "lon0=-99.9", "dy_km=3", "dx_km=3"}) == 0);
}

TEST_CASE("golden end-to-end pipeline") {
  // Default 256 x 256 world, seeded, at reduced cost: two initializations,
  // 30 training steps, three-hour rollouts with six sampler steps.
  const auto root = testutil::temp_dir("cli_golden");
  const auto world = root / "world";
  REQUIRE(run("synth", world, {"init_count=2", "max_lead=3"}) == 0);
  const std::string dd = "data_dir=" + world.string();
  REQUIRE(run("train", root / "train",
              {dd, "start=2024-03-01T03:00:00Z", "end=2024-03-01T04:00:00Z", "steps=30", "lr=1e-3", "seed=1",
               "width=8"}) == 0);
  std::string dirs;
  for (const char* t : {"03", "04"}) {
    const auto dir = root / (std::string("roll_") + t);
    REQUIRE(run("rollout", dir,
                {dd, std::string("init_time=2024-03-01T") + t + ":00:00Z",
                 "checkpoint=" + (root / "train" / "checkpoint.denz").string(), "horizon=3", "num_steps=6",
                 "seed=2"}) == 0);
    dirs += (dirs.empty() ? "" : ",") + dir.string();
  }
  REQUIRE(run("verify", root / "verify", {dd, "pred_dirs=" + dirs, "leads=1,2,3", "n_boot=200", "seed=3"}) == 0);
  const std::string got = slurp(root / "verify" / "metrics.csv");
  const fs::path golden = fs::path(RESDIFF_GOLDEN_DIR) / "metrics.csv";
  if (std::getenv("RESDIFF_UPDATE_GOLDEN") != nullptr) {
    std::ofstream(golden, std::ios::binary) << got;
    MESSAGE("golden file rewritten: " << golden.string());
  }
  REQUIRE(fs::exists(golden));
  CHECK(got == slurp(golden));
}
