#include "config.hpp"
#include "output.hpp"
#include "run.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace bvflow;
using namespace bvflow::cli;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("bvflow_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << text;
  return p;
}

int run_quiet(const std::string& sub, const fs::path& cfg, std::vector<std::string> overrides) {
  std::ostringstream log;
  return run(sub, cfg.string(), overrides, log);
}

std::map<std::string, std::string> read_manifest(const fs::path& dir) {
  std::map<std::string, std::string> out;
  std::istringstream in(slurp(dir / "MANIFEST"));
  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    REQUIRE(tab != std::string::npos);
    out[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return out;
}

const char* tilted = R"({"model": {"family": "tilted_double_well"}, "domain": {"half_width": 2.0}})";

}  // namespace

TEST_CASE("config keys, overrides and errors") {
  auto cfg = Config::parse(R"({"a": {"b": 2, "list": [1, 2]}, "s": "x"} // trailing comment)",
                           {"a.c=0.5", "a.list.1=7", "name=plain text", "deep.new.key=[1,2,3]"});
  CHECK(cfg.number("a.b") == 2.0);
  CHECK(cfg.number("a.c") == 0.5);
  CHECK(cfg.numbers("a.list") == std::vector<double>{1.0, 7.0});
  CHECK(cfg.string("name", "") == "plain text");
  CHECK(cfg.vector("deep.new.key").size() == 3);
  CHECK(cfg.integer("missing", 4) == 4);
  CHECK_THROWS_AS((void)cfg.number("missing"), InvalidInput);
  CHECK_THROWS_AS((void)cfg.number("s"), InvalidInput);
  CHECK_THROWS_AS((void)cfg.positive("zero", -1.0), InvalidInput);
  CHECK_THROWS_AS(cfg.apply_override("novalue"), InvalidInput);
  CHECK_THROWS_AS(Config::parse("{not json"), InvalidInput);
  CHECK_THROWS_AS(Config::parse("[1, 2]"), InvalidInput);
}

TEST_CASE("models from config") {
  const auto b = build_model(Config::parse(R"({"model": {"family": "quadratic_track", "params": {"a1_1": 2.0}}, "horizon": 3})"));
  CHECK(b.horizon == 3.0);
  CHECK(b.gradient(1.0, Vec::Constant(1, 2.0))[0] == doctest::Approx(0.0));
  const auto p = build_model(Config::parse(
      R"({"model": {"polynomial": {"dim": 1, "shift": 1, "terms": [{"alpha": [2], "coeff": 0.5}], "tilt": [[0, 1]]}}})"));
  CHECK(p.gradient(0.5, Vec::Constant(1, 0.5))[0] == doctest::Approx(0.0));
  CHECK_THROWS_AS(build_model(Config::parse("{}")), InvalidInput);
  CHECK_THROWS_AS(build_model(Config::parse(R"({"model": {"family": "nope"}})")), InvalidInput);
  CHECK(build_domain(Config::parse("{}"), 2).hi[1] == 3.0);
  CHECK_THROWS_AS(build_domain(Config::parse(R"({"domain": {"lo": [0], "hi": [1]}})"), 2), InvalidInput);
}

TEST_CASE("sha256 of known strings") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("validate on all builtins writes a consistent manifest") {
  const auto dir = scratch("validate");
  const auto cfg = write_config(dir, R"({"validate": {"all_builtins": true}})");
  REQUIRE(run_quiet("validate", cfg, {"output_dir=\"" + (dir / "out").string() + "\""}) == ok);
  const auto manifest = read_manifest(dir / "out");
  REQUIRE(manifest.count("validation.csv") == 1);
  for (const auto& [name, hash] : manifest) CHECK(sha256_hex(slurp(dir / "out" / name)) == hash);
  std::istringstream table(slurp(dir / "out" / "validation.csv"));
  const auto rows = csv::read(table);
  REQUIRE(rows.rows.size() == 3);
  for (const auto& r : rows.rows) CHECK(r[rows.column("pass")] == "true");
}

TEST_CASE("config errors exit with 1") {
  const auto dir = scratch("config_errors");
  const auto cfg = write_config(dir, tilted);
  const std::string out = "output_dir=\"" + (dir / "out").string() + "\"";
  CHECK(run_quiet("simulate", cfg, {out, "simulate.u0=[-1]", "simulate.epsilons=[0]"}) == config_error);
  CHECK(fs::exists(dir / "out" / "diagnostic.txt"));
  CHECK(read_manifest(dir / "out").count("diagnostic.txt") == 1);
  CHECK(run_quiet("simulate", cfg, {out, "simulate.u0=[-1]", "simulate.epsilons=[-0.1]"}) == config_error);
  CHECK(run_quiet("simulate", cfg, {out}) == config_error);  // u0 missing
  CHECK(run_quiet("frobnicate", cfg, {out}) == config_error);
  CHECK(run_quiet("simulate", dir / "missing.json", {out}) == config_error);
  CHECK(run_quiet("compare", cfg, {out, "compare.u0=[-1]", "compare.epsilons=[0.001, 0.01]"}) == config_error);
  CHECK(run_quiet("cost", cfg, {out, "cost.points=[[1],[1]]"}) == config_error);
  CHECK(run_quiet("limit", cfg, {out, "limit.u0=[0]"}) == config_error);
}

TEST_CASE("numerical failures exit with 2") {
  const auto dir = scratch("numerical");
  const auto cfg = write_config(dir, tilted);
  const std::string out = "output_dir=\"" + (dir / "out").string() + "\"";
  // The right branch reaches the horizon, so there is no fold to jump from.
  CHECK(run_quiet("jump", cfg, {out, "jump.u0=[1]"}) == numerical_failure);
  const auto diag = slurp(dir / "out" / "diagnostic.txt");
  CHECK(diag.find("exit_code = 2") != std::string::npos);
  // A step budget far too small.
  CHECK(run_quiet("simulate", cfg, {out, "simulate.u0=[-1]", "simulate.max_steps=10"}) == numerical_failure);
}

TEST_CASE("subcommands write their artifacts") {
  const auto dir = scratch("artifacts");
  const auto cfg = write_config(dir, tilted);
  auto out = [&](const std::string& name) { return "output_dir=\"" + (dir / name).string() + "\""; };

  REQUIRE(run_quiet("simulate", cfg, {out("sim"), "simulate.u0=[-1]", "simulate.epsilons=[0.1, 0.05]", "simulate.max_rows=101"}) == ok);
  std::istringstream traj(slurp(dir / "sim" / "trajectory_2.csv"));
  const auto tt = csv::read(traj);
  CHECK(tt.rows.size() <= 102);
  CHECK(tt.rows.back()[0] == "1");

  REQUIRE(run_quiet("branches", cfg, {out("br")}) == ok);
  CHECK(fs::exists(dir / "br" / "critical_points.csv"));
  CHECK(fs::exists(dir / "br" / "branch_3.csv"));

  REQUIRE(run_quiet("jump", cfg, {out("jump"), "jump.u0=[-1]", "jump.probe_dirs=2"}) == ok);
  CHECK(slurp(dir / "jump" / "jump_report.txt").find("transition_clusters = 1") != std::string::npos);

  REQUIRE(run_quiet("cost", cfg, {out("cost"), "cost.points=[[-1],[0],[1]]", "cost.write_witness=true"}) == ok);
  CHECK(fs::exists(dir / "cost" / "witness_0_2.csv"));

  REQUIRE(run_quiet("limit", cfg, {out("limit"), "limit.u0=[-1]"}) == ok);
  CHECK(slurp(dir / "limit" / "bv_summary.txt").find("jump_count = 1") != std::string::npos);
  for (const auto& [name, hash] : read_manifest(dir / "limit")) CHECK(sha256_hex(slurp(dir / "limit" / name)) == hash);
}

TEST_CASE("identical runs produce identical files") {
  const auto dir = scratch("determinism");
  const auto cfg = write_config(dir, tilted);
  for (const char* name : {"a", "b"}) {
    REQUIRE(run_quiet("limit", cfg, {"output_dir=\"" + (dir / name).string() + "\"", "limit.u0=[-1]"}) == ok);
  }
  CHECK(read_manifest(dir / "a") == read_manifest(dir / "b"));
}
