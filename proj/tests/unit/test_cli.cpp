// Drives the built command-line tool and checks exit codes and outputs.

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(OCORL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ocorl_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

const std::string kQuick = "--set env.name=glucose --set run.episodes=2 --set planner.knots=30";

}  // namespace

TEST_CASE("missing environment is a configuration error") {
  CHECK(run_cli("run --out " + scratch("noenv").string()) == 2);
}

TEST_CASE("unknown keys and bad values are configuration errors") {
  CHECK(run_cli("run --set env.name=glucose --set noise.sdt=1 --out " + scratch("badkey").string()) == 2);
  CHECK(run_cli("run --set env.name=glucose --set noise.std=x --out " + scratch("badval").string()) == 2);
  CHECK(run_cli("run --bogus-flag") == 2);
}

TEST_CASE("sweep with an empty measurement list is a configuration error") {
  CHECK(run_cli("sweep --set env.name=glucose --m , --out " + scratch("sweep").string()) == 2);
}

TEST_CASE("selftest passes") {
  CHECK(run_cli("selftest") == 0);
}

TEST_CASE("repeated runs write identical episode files") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  REQUIRE(run_cli("run " + kQuick + " --set run.seed=3 --out " + a.string()) == 0);
  REQUIRE(run_cli("run " + kQuick + " --set run.seed=3 --out " + b.string()) == 0);
  const std::string ea = slurp(a / "episodes.csv");
  CHECK_FALSE(ea.empty());
  CHECK(ea == slurp(b / "episodes.csv"));
  CHECK(fs::exists(a / "baselines.csv"));
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["config"]["planner.mode"] == "optimistic");
  CHECK(manifest["seeds"][0] == 3);
}

TEST_CASE("planner flag reaches the manifest") {
  const fs::path out = scratch("mean");
  REQUIRE(run_cli("run " + kQuick + " --planner mean --out " + out.string()) == 0);
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["config"]["planner.mode"] == "mean");
}

TEST_CASE("seed environment variable overrides the config") {
  const fs::path out = scratch("envseed");
  const std::string cmd = "OCORL_SEED=11 " + std::string(OCORL_CLI_PATH) + " run " + kQuick + " --out " +
                          out.string() + " >/dev/null 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["seeds"][0] == 11);
}

TEST_CASE("multiple seeds go to separate directories") {
  const fs::path out = scratch("seeds");
  REQUIRE(run_cli("run " + kQuick + " --seeds 0,1 --out " + out.string()) == 0);
  CHECK(fs::exists(out / "seed_0" / "episodes.csv"));
  CHECK(fs::exists(out / "seed_1" / "episodes.csv"));
  CHECK(fs::exists(out / "manifest.json"));
}

TEST_CASE("configuration errors name the field") {
  const fs::path log = scratch("msg_log");
  const std::string cmd = std::string(OCORL_CLI_PATH) + " run --out " + scratch("msg").string() + " > " +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 2);
  CHECK(slurp(log).find("env.name") != std::string::npos);
}

TEST_CASE("pendulum reruns are byte-identical") {
  const fs::path a = scratch("pend_a"), b = scratch("pend_b");
  const std::string args = "run --set env.name=pendulum --set run.episodes=2 --set run.seed=0 --out ";
  REQUIRE(run_cli(args + a.string()) == 0);
  REQUIRE(run_cli(args + b.string()) == 0);
  CHECK(slurp(a / "episodes.csv") == slurp(b / "episodes.csv"));
}

TEST_CASE("a single-m sweep matches a plain run") {
  const fs::path s = scratch("one_m_sweep"), r = scratch("one_m_run");
  REQUIRE(run_cli("sweep " + kQuick + " --m 4 --strategies equidistant --seeds 0 --out " + s.string()) == 0);
  REQUIRE(run_cli("run " + kQuick + " --set run.measurements=4 --set run.seed=0 --out " + r.string()) == 0);
  std::istringstream sweep(slurp(s / "sweep.csv"));
  std::string header, row;
  std::getline(sweep, header);
  std::getline(sweep, row);
  // m,strategy,median_final_cost,seeds
  std::vector<std::string> cols;
  std::stringstream rs(row);
  for (std::string c; std::getline(rs, c, ',');) cols.push_back(c);
  REQUIRE(cols.size() == 4);

  std::istringstream episodes(slurp(r / "episodes.csv"));
  std::string line, last;
  while (std::getline(episodes, line))
    if (!line.empty()) last = line;
  std::stringstream ls(last);
  std::string episode, cost;
  std::getline(ls, episode, ',');
  std::getline(ls, cost, ',');
  CHECK(cols[2] == cost);
}
