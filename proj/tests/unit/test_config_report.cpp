#include "ocorl/config.hpp"
#include "ocorl/report.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <sstream>

using namespace ocorl;

TEST_CASE("config text parsing") {
  const ConfigMap m = parse_config_text("# header\nenv.name = pendulum  # trailing\n\n  noise.std=0.2\n");
  CHECK(m.size() == 2);
  CHECK(m.at("env.name") == "pendulum");
  CHECK(m.at("noise.std") == "0.2");
  CHECK_THROWS_AS(parse_config_text("just words\n"), ConfigError);
  CHECK_THROWS_AS(load_config_file("/nonexistent/ocorl.cfg"), ConfigError);
}

TEST_CASE("config map to experiment") {
  ConfigMap m{{"env.name", "cart_pole"}, {"mss.strategy", "max_dist"}, {"planner.mode", "mean"},
              {"run.seed", "12"}, {"mpc.enabled", "off"}, {"env.T", "2.5"}};
  const ExperimentConfig cfg = config_from_map(m);
  CHECK(cfg.env_name == "cart_pole");
  CHECK(cfg.strategy == Strategy::max_dist);
  CHECK(cfg.planner == PlannerMode::mean);
  CHECK(cfg.seed == 12);
  CHECK_FALSE(cfg.use_mpc);
  CHECK(*cfg.horizon == 2.5);
}

TEST_CASE("config errors name the key") {
  auto field_of = [](const ConfigMap& m) {
    try {
      config_from_map(m);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of({{"env.name", "pendulum"}, {"noise.sdt", "1"}}) == "noise.sdt");
  CHECK(field_of({{"env.name", "pendulum"}, {"noise.std", "abc"}}) == "noise.std");
  CHECK(field_of({{"env.name", "pendulum"}, {"mss.strategy", "random"}}) == "mss.strategy");
  CHECK(field_of({{"env.name", "pendulum"}, {"run.episodes", "-1"}}) == "run.episodes");
  CHECK(field_of({{"noise.std", "0.1"}}) == "env.name");
}

TEST_CASE("overrides") {
  ConfigMap m;
  apply_override(m, "run.seed = 3");
  CHECK(m.at("run.seed") == "3");
  CHECK_THROWS_AS(apply_override(m, "novalue"), ConfigError);
  ::setenv("OCORL_SEED", "77", 1);
  apply_env_overrides(m);
  ::unsetenv("OCORL_SEED");
  CHECK(m.at("run.seed") == "77");
}

TEST_CASE("canonical form round-trips and hashes stably") {
  ConfigMap m{{"env.name", "glucose"}, {"gp.lengthscale", "0.3"}, {"noise.std", "0.01"}};
  const ExperimentConfig cfg = config_from_map(m);
  const ConfigMap canon = config_to_map(cfg);
  const ExperimentConfig again = config_from_map(canon);
  CHECK(config_to_map(again) == canon);
  CHECK(config_hash(cfg) == config_hash(again));
  CHECK(config_hash(cfg).size() == 16);
  ExperimentConfig other = cfg;
  other.seed = 1;
  CHECK(config_hash(other) != config_hash(cfg));
}

TEST_CASE("value formatting") {
  CHECK(format_value(0.1) == "0.1");
  CHECK(format_value(1.0 / 3.0) == "0.333333333");
  CHECK(format_value(20.0) == "20");
}

TEST_CASE("episode csv rows") {
  RunResult run;
  run.cfg.seed = 5;
  EpisodeRecord a, b;
  a.n = 1;
  a.cost_true = 3.0;
  a.regret = 1.0;
  a.complexity_inc = 0.5;
  a.measurement_times = {0.1, 0.2};
  a.dataset_size = 2;
  a.planner_cost = 2.5;
  a.planner_converged = true;
  b = a;
  b.n = 2;
  b.regret = -0.25;
  b.dataset_size = 4;
  run.records = {a, b};
  std::ostringstream out;
  write_episodes_csv(out, run);
  CHECK(out.str() == std::string(kEpisodesHeader) + "\n" +
                         "1,3,1,1,1,0.5,2,2,2.5,1,5\n"
                         "2,3,-0.25,0,1,1,2,4,2.5,1,5\n");
}

TEST_CASE("baselines csv and manifest") {
  RunResult run;
  run.env_name = "cancer";
  run.baselines.continuous.cost = 1.5;
  run.baselines.continuous.plan.converged = true;
  run.baselines.zoh.cost = 2.0;
  std::ostringstream out;
  write_baselines_csv(out, run);
  CHECK(out.str() == "env,method,cost,converged\ncancer,cont_oc,1.5,1\ncancer,zoh,2,0\n");

  ManifestEntry e;
  e.config_hash = "0123456789abcdef";
  e.config = {{"env.name", "cancer"}};
  e.seeds = {1, 2};
  e.output_dir = "out";
  e.files = {"out/episodes.csv"};
  const auto j = nlohmann::json::parse(manifest_json(e));
  CHECK(j["tool_version"] == kToolVersion);
  CHECK(j["config_hash"] == "0123456789abcdef");
  CHECK(j["seeds"].size() == 2);
  CHECK(j["config"]["env.name"] == "cancer");
}

TEST_CASE("summary statistics") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(mean({1.0, 2.0, 3.0}) == 2.0);
  CHECK(stddev({1.0}) == 0.0);
  CHECK(stddev({1.0, 3.0}) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("sweep rejects an empty measurement list") {
  ExperimentConfig cfg;
  cfg.env_name = "glucose";
  CHECK_THROWS_AS(run_sweep(cfg, {}, {Strategy::equidistant}, {0}, 1), ConfigError);
}

TEST_CASE("parallel runs match serial runs") {
  ExperimentConfig cfg;
  cfg.env_name = "glucose";
  cfg.episodes = 2;
  cfg.knots = 30;
  std::vector<ExperimentConfig> configs(3, cfg);
  configs[1].seed = 1;
  configs[2].seed = 2;
  const auto par = run_many(configs, 3);
  const auto ser = run_many(configs, 1);
  REQUIRE(par.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(par[i].cfg.seed == configs[i].seed);
    CHECK(par[i].records.back().cost_true == ser[i].records.back().cost_true);
  }
}
