#include <fstream>
#include <json.hpp>
#include <sstream>

#include "doctest.h"
#include "sfdi/error.hpp"
#include "scenes.hpp"
#include "sfdi/app.hpp"
#include "sfdi/binary_io.hpp"
#include "sfdi/lut.hpp"
#include "sfdi/pipeline.hpp"

using namespace sfdi;
namespace fs = std::filesystem;

namespace {

fs::path write_ini(const fs::path& dir, const std::string& text) {
  const auto p = dir / "run.ini";
  std::ofstream(p) << text;
  return p;
}

nlohmann::json manifest(const fs::path& dir) {
  return nlohmann::json::parse(std::ifstream(dir / "manifest.json"));
}

RunConfig simulate_config(const fs::path& out) {
  RunConfig cfg;
  cfg.mode = "simulate";
  cfg.out = out;
  cfg.seed = 5;
  cfg.channels[0].fx = 0.15;
  cfg.scene.frames = 60;
  cfg.scene.sample = {0.012, 0.7, 660.0};
  ReferenceConfig ref;
  ref.id = "phantom";
  ref.props = {0.01, 0.75, 660.0};
  cfg.references.push_back(ref);
  return cfg;
}

}  // namespace

TEST_CASE("config file parsing") {
  const auto dir = test::scratch_dir("config");
  RunConfig cfg;
  load_config(write_ini(dir, R"(
[run]
mode = process
input = data/sample.sfst
seed = 9

[channel.green]
index = 1
wavelength_nm = 515
spacing_um = 5

[tracker]
phase_tol_deg = 8
policy = closest

[reference.milk]
file = refs/milk.sfst
mu_a = 0.004
mu_s = 1.2
)"),
              cfg);
  CHECK(cfg.mode == "process");
  CHECK(cfg.seed == 9);
  REQUIRE(cfg.inputs.size() == 1);
  CHECK(cfg.inputs[0] == dir / "data/sample.sfst");
  REQUIRE(cfg.channels.size() == 1);
  CHECK(cfg.channels[0].name == "green");
  CHECK(cfg.channels[0].resolved_fx().per_mm() == doctest::Approx(0.194175).epsilon(1e-4));
  CHECK(cfg.tracker.phase_tol_deg == 8.0);
  CHECK(cfg.tracker.policy == SelectionPolicy::closest);
  REQUIRE(cfg.references.size() == 1);
  CHECK(cfg.references[0].id == "milk");
  CHECK(cfg.references[0].file == dir / "refs/milk.sfst");
  CHECK(cfg.references[0].props.mu_s_prime == 1.2);

  RunConfig bad;
  try {
    load_config(write_ini(dir, "[tracker]\nphase_tolerance = 3\n"), bad);
    FAIL("unknown key accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_input);
    CHECK(std::string(e.what()).find("phase_tolerance") != std::string::npos);
  }
  CHECK_THROWS_AS(load_config(write_ini(dir, "[nonsense]\na = 1\n"), bad), Error);
  CHECK_THROWS_AS(load_config(write_ini(dir, "[run]\nseed = many\n"), bad), Error);
  CHECK_THROWS_AS(load_config(dir / "absent.ini", bad), Error);
}

TEST_CASE("--ref argument") {
  const auto r = parse_reference_arg("/data/ref_a.sfst,0.01,0.75,635");
  CHECK(r.id == "ref_a");
  CHECK(r.file == "/data/ref_a.sfst");
  CHECK(r.props.mu_a == 0.01);
  CHECK(r.props.wavelength_nm == 635.0);
  CHECK(r.props_at(635.0).mu_a == 0.01);
  CHECK_THROWS_AS(parse_reference_arg("a.sfst,0.01"), Error);
  CHECK_THROWS_AS(parse_reference_arg("a.sfst,x,0.75"), Error);
}

TEST_CASE("config validation before any work") {
  RunConfig cfg;
  cfg.mode = "process";
  cfg.out = test::scratch_dir("validate") / "out";
  cfg.inputs = {"/nonexistent/sample.sfst"};
  std::ostringstream log;
  CHECK(run(cfg, log) == 2);
  CHECK(log.str().find("reference") != std::string::npos);
  cfg.mode = "transmogrify";
  CHECK(run(cfg, log) == 2);
}

TEST_CASE("simulate is byte-reproducible and process recovers the scene") {
  const auto root = test::scratch_dir("app_runs");
  std::ostringstream log;
  REQUIRE(run(simulate_config(root / "a"), log) == 0);
  REQUIRE(run(simulate_config(root / "b"), log) == 0);
  for (const char* f : {"sample.sfst", "ref_phantom.sfst", "sample_truth.csv", "manifest.json"})
    CHECK(io::read_file(root / "a" / f) == io::read_file(root / "b" / f));
  auto other = simulate_config(root / "c");
  other.seed = 6;
  REQUIRE(run(other, log) == 0);
  CHECK_FALSE(io::read_file(root / "a" / "sample.sfst") == io::read_file(root / "c" / "sample.sfst"));

  for (const char* out : {"p1", "p2"}) {
    auto cfg = simulate_config(root / out);
    cfg.mode = "process";
    cfg.inputs = {root / "a" / "sample.sfst"};
    cfg.references[0].file = root / "a" / "ref_phantom.sfst";
    REQUIRE(run(cfg, log) == 0);
  }
  CHECK(io::read_file(root / "p1" / "map.sfpm") == io::read_file(root / "p2" / "map.sfpm"));
  CHECK(io::read_file(root / "p1" / "manifest.json") == io::read_file(root / "p2" / "manifest.json"));
  const auto map = read_property_map(root / "p1" / "map.sfpm");
  const auto v = test::valid_values(map);
  CHECK(test::median(v.mu_a) == doctest::Approx(0.012).epsilon(0.05));
  CHECK(test::median(v.mu_s) == doctest::Approx(0.7).epsilon(0.03));
  CHECK(map.provenance.references == std::vector<std::string>{"phantom"});
  CHECK(map.provenance.sigma_px == 5.0);

  const auto m = manifest(root / "p1");
  CHECK(m["exit_code"] == 0);
  CHECK(m["mode"] == "process");
  bool listed = false;
  for (const auto& o : m["outputs"]) listed |= o["path"] == "map.sfpm";
  CHECK(listed);
}

TEST_CASE("a failed run keeps partial artifacts and a structured error") {
  const auto root = test::scratch_dir("app_fail");
  std::ostringstream log;
  auto sim = simulate_config(root / "sim");
  sim.scene.random_walk_deg = 0.0;
  sim.scene.linear_deg = 0.0;  // no drift, so no triplet exists
  REQUIRE(run(sim, log) == 0);

  auto cfg = simulate_config(root / "proc");
  cfg.mode = "process";
  cfg.inputs = {root / "sim" / "sample.sfst"};
  cfg.references[0].file = root / "sim" / "ref_phantom.sfst";
  CHECK(run(cfg, log) == 4);
  const auto m = manifest(root / "proc");
  CHECK(m["exit_code"] == 4);
  CHECK(m["error"].is_string());
  for (const auto& o : m["outputs"]) CHECK(o["path"].get<std::string>().ends_with(".partial"));
  CHECK_FALSE(fs::exists(root / "proc" / "map.sfpm"));
}

TEST_CASE("lut mode writes a re-ingestible table") {
  const auto root = test::scratch_dir("app_lut");
  RunConfig cfg;
  cfg.mode = "lut";
  cfg.out = root;
  cfg.channels[0].fx = 0.25;
  cfg.lut.n_mu_a = 16;
  cfg.lut.n_mu_s = 12;
  std::ostringstream log;
  REQUIRE(run(cfg, log) == 0);
  LutSpec spec = cfg.lut;
  spec.fx = SpatialFrequency{0.25};
  CHECK(read_lut(root / "lut.sflu") == build_lut(spec));
  CHECK(fs::exists(root / "lut.csv"));
}

TEST_CASE("clinical mode") {
  const auto root = test::scratch_dir("app_clinical");
  RunConfig cfg;
  load_config(write_ini(root, R"(
[run]
mode = clinical
seed = 3

[clinical]
n_train = 100
n_validation = 100

[class.healthy]
mean_mu_a = 0.010
std_mu_a = 0.003
mean_mu_s = 1.10
std_mu_s = 0.20

[class.scc]
mean_mu_a = 0.020
std_mu_a = 0.005
mean_mu_s = 0.80
std_mu_s = 0.15
)"),
              cfg);
  cfg.out = root / "out";
  std::ostringstream log;
  REQUIRE(run(cfg, log) == 0);
  for (const char* f : {"clinical_baseline.csv", "clinical_baseline.txt", "clinical_device.csv",
                        "clinical_device.txt"})
    CHECK(fs::exists(root / "out" / f));

  RunConfig lonely;
  lonely.mode = "clinical";
  lonely.out = root / "lonely";
  CHECK(run(lonely, log) == 2);
}
