#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "config.hpp"
#include "pks/jko.hpp"

using namespace pks;
using namespace pks::cli;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_run_config(KeyValueConfig::parse(is));
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("pks_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

const char* kSmallRun =
    "grid.n = 32\n"
    "grid.L = 8\n"
    "initial.offset_x = 0.25\n";

}  // namespace

TEST_CASE("config parsing") {
  const RunConfig c = parse("grid.n = 64 # comment\ngrid.L = 10\nfamily.translates = 0, 0.5\n");
  CHECK(c.n == 64);
  CHECK(c.L == 10.0);
  CHECK(c.translates == std::vector<double>{0.0, 0.5});
  CHECK_THROWS_AS(parse("grid.nn = 64\n"), ConfigError);
  CHECK_THROWS_AS(parse("grid.n = 64\ngrid.n = 32\n"), ConfigError);
  CHECK_THROWS_AS(parse("grid.n = 15\n"), ConfigError);
  CHECK_THROWS_AS(parse("grid.L = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse("validate.localization_q = 2\n"), ConfigError);
  for (const std::string& k : known_keys()) CHECK(k.find(' ') == std::string::npos);
}

TEST_CASE("initial data is scaled to the requested mass") {
  RunConfig c = parse(kSmallRun);
  CHECK(make_initial(c).mass() == doctest::Approx(c.mass).epsilon(1e-12));
  c.initial.kind = InitialData::Kind::Mixture;
  CHECK(make_initial(c).mass() == doctest::Approx(c.mass).epsilon(1e-12));
  c.initial.kind = InitialData::Kind::Bump;
  CHECK(make_initial(c).mass() == doctest::Approx(c.mass).epsilon(1e-12));
}

TEST_CASE("simulate rejects a step size at or above the threshold") {
  RunConfig c = parse(kSmallRun);
  c.tau = 1.0;
  std::ostringstream log;
  CHECK(cmd_simulate(c, temp_dir("tau").string(), "", log) == 2);
  CHECK(log.str().find("tau*") != std::string::npos);
}

TEST_CASE("simulate resumes bit for bit") {
  RunConfig c = parse(kSmallRun);
  c.max_steps = 3;
  std::ostringstream log;
  const fs::path a = temp_dir("a"), b = temp_dir("b");
  REQUIRE(cmd_simulate(c, a.string(), "", log) == 0);
  RunConfig half = c;
  half.max_steps = 1;
  REQUIRE(cmd_simulate(half, b.string(), "", log) == 0);
  REQUIRE(cmd_simulate(c, b.string(), (b / "checkpoints").string(), log) == 0);
  for (int k = 1; k <= 3; ++k) {
    const std::string stem = fs::path(checkpoint_stem("checkpoints", k)).filename().string();
    CHECK(slurp(a / "checkpoints" / (stem + ".grid")) == slurp(b / "checkpoints" / (stem + ".grid")));
  }
  CHECK(fs::exists(a / "summary.txt"));
  CHECK(fs::exists(a / "schedule.txt"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("validate over a family") {
  std::ostringstream log;
  RunConfig c = parse("grid.n = 128\ngrid.L = 20\nfamily.translates = 0, 0.25\nfamily.subcritical = true\n");
  const fs::path d = temp_dir("validate");
  CHECK(cmd_validate(c, d.string(), log) == 0);
  CHECK(log.str().find("skip subcritical ccf") != std::string::npos);
  CHECK(fs::exists(d / "validate.csv"));

  RunConfig empty = c;
  empty.translates.clear();
  empty.subcritical = false;
  std::ostringstream log2;
  CHECK(cmd_validate(empty, d.string(), log2) == 1);
  CHECK(log2.str().find("no densities") != std::string::npos);
  fs::remove_all(d);
}

TEST_CASE("transport self-test") {
  RunConfig c = parse("selftest.sizes = 2, 8\nselftest.instances = 5\n");
  std::ostringstream log;
  const fs::path d = temp_dir("ot");
  CHECK(cmd_ot_selftest(c, d.string(), log) == 0);
  CHECK(fs::exists(d / "ot_selftest.csv"));
  fs::remove_all(d);
}

TEST_CASE("steady-state output") {
  RunConfig c = parse("grid.n = 32\ngrid.L = 8\n");
  std::ostringstream log;
  const fs::path d = temp_dir("steady");
  CHECK(cmd_steady_state(c, d.string(), log) == 0);
  CHECK(!fs::is_empty(d));
  fs::remove_all(d);
}
