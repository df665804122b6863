// Command-line runner: single runs, measurement-count sweeps, baseline tables.

#include "ocorl/config.hpp"
#include "ocorl/ocorl_loop.hpp"
#include "ocorl/report.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace ocorl;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = "out";
  std::string seeds;
  int jobs = 1;
  std::string planner;
};

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text, std::uint64_t fallback) {
  if (text.empty()) return {fallback};
  std::vector<std::uint64_t> out;
  for (const std::string& s : split_csv(text)) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("--seeds", "bad seed '" + s + "'");
    }
  }
  if (out.empty()) throw ConfigError("--seeds", "empty seed list");
  return out;
}

ExperimentConfig load(const CommonOptions& opt, bool require_env = true) {
  ConfigMap map;
  if (!opt.config_path.empty()) map = load_config_file(opt.config_path);
  for (const std::string& o : opt.overrides) apply_override(map, o);
  if (!opt.planner.empty()) map["planner.mode"] = opt.planner;
  apply_env_overrides(map);
  if (!require_env && map.find("env.name") == map.end()) map["env.name"] = "pendulum";
  return config_from_map(map);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

ManifestEntry manifest_for(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                           const fs::path& dir, std::vector<std::string> files) {
  ManifestEntry m;
  m.config_hash = config_hash(cfg);
  m.config = config_to_map(cfg);
  m.seeds = seeds;
  m.output_dir = dir.string();
  m.files = std::move(files);
  return m;
}

int cmd_run(const CommonOptions& opt) {
  const ExperimentConfig base = load(opt);
  const std::vector<std::uint64_t> seeds = parse_seeds(opt.seeds, base.seed);
  const fs::path root(opt.out_dir);
  fs::create_directories(root);
  std::vector<std::string> files;
  for (std::uint64_t seed : seeds) {
    ExperimentConfig cfg = base;
    cfg.seed = seed;
    const fs::path dir = seeds.size() == 1 ? root : root / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    const EnvSpec env = build_env(cfg);
    const Baselines baselines = compute_baselines(env, env.M, cfg.steps_per_unit);

    std::ofstream episodes(dir / "episodes.csv");
    if (!episodes) throw std::runtime_error("cannot write " + (dir / "episodes.csv").string());
    EpisodeCsvWriter writer(episodes, seed);
    RunResult run;
    run.env_name = env.name;
    run.baselines = baselines;
    {
      std::ofstream b(dir / "baselines.csv");
      write_baselines_csv(b, run);
    }
    files.push_back((dir / "episodes.csv").string());
    files.push_back((dir / "baselines.csv").string());
    run = run_experiment(cfg, &baselines, [&](const EpisodeRecord& r) {
      writer.add(r);
      std::cerr << env.name << " seed " << seed << " episode " << r.n << " cost " << format_value(r.cost_true)
                << '\n';
    });
    write_text(dir / "manifest.json", manifest_json(manifest_for(cfg, {seed}, dir, {files.end()[-2], files.back()})));
    std::cout << env.name << " seed " << seed << ": final cost " << format_value(run.records.back().cost_true)
              << " (cont_oc " << format_value(baselines.continuous.cost) << ", zoh "
              << format_value(baselines.zoh.cost) << ")\n";
  }
  if (seeds.size() > 1) write_text(root / "manifest.json", manifest_json(manifest_for(base, seeds, root, files)));
  return 0;
}

int cmd_sweep(const CommonOptions& opt, const std::string& m_text, const std::string& strategy_text) {
  const ExperimentConfig base = load(opt);
  const std::vector<std::uint64_t> seeds = parse_seeds(opt.seeds, base.seed);
  std::vector<int> m_values;
  for (const std::string& s : split_csv(m_text)) {
    try {
      m_values.push_back(std::stoi(s));
    } catch (const std::exception&) {
      throw ConfigError("--m", "bad measurement count '" + s + "'");
    }
  }
  if (m_values.empty()) throw ConfigError("--m", "empty measurement list");
  std::vector<Strategy> strategies;
  for (const std::string& s : split_csv(strategy_text)) {
    try {
      strategies.push_back(parse_strategy(s));
    } catch (const std::exception& e) {
      throw ConfigError("--strategies", e.what());
    }
  }
  if (strategies.empty()) strategies = {Strategy::max_det, Strategy::max_dist, Strategy::equidistant};

  const fs::path root(opt.out_dir);
  fs::create_directories(root);
  std::vector<RunResult> runs;
  const std::vector<SweepRow> rows = run_sweep(base, m_values, strategies, seeds, opt.jobs, &runs);
  std::vector<std::string> files;
  for (const RunResult& run : runs) {
    const fs::path dir = root / ("m" + std::to_string(run.cfg.measurements) + "_" + to_string(run.cfg.strategy) +
                                 "_seed" + std::to_string(run.cfg.seed));
    fs::create_directories(dir);
    std::ofstream e(dir / "episodes.csv");
    write_episodes_csv(e, run);
    std::ofstream b(dir / "baselines.csv");
    write_baselines_csv(b, run);
    files.push_back((dir / "episodes.csv").string());
    files.push_back((dir / "baselines.csv").string());
  }
  std::ofstream sweep(root / "sweep.csv");
  write_sweep_csv(sweep, rows);
  files.push_back((root / "sweep.csv").string());
  write_text(root / "manifest.json", manifest_json(manifest_for(base, seeds, root, files)));
  write_sweep_csv(std::cout, rows);
  return 0;
}

int cmd_table1(const CommonOptions& opt, const std::string& env_text) {
  const ExperimentConfig base = load(opt, false);
  const std::vector<std::uint64_t> seeds = parse_seeds(opt.seeds.empty() ? "0,1,2,3,4" : opt.seeds, base.seed);
  std::vector<std::string> envs = split_csv(env_text);
  if (envs.empty()) envs = env_names();
  for (const std::string& e : envs) {
    ExperimentConfig probe = base;
    probe.env_name = e;
    probe.validate();
  }
  const fs::path root(opt.out_dir);
  fs::create_directories(root);
  const std::vector<Table1Row> rows = run_table1(base, envs, seeds, opt.jobs);
  std::ofstream table(root / "table1.csv");
  write_table1(table, rows);
  write_text(root / "manifest.json", manifest_json(manifest_for(base, seeds, root, {(root / "table1.csv").string()})));
  write_table1(std::cout, rows);
  return 0;
}

/// Quick self-consistency checks; the full oracle suites live in the test tree.
int cmd_selftest() {
  int failures = 0;
  auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "  " << detail << '\n';
    if (!ok) ++failures;
  };

  {
    const VectorField grow = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) { return Eigen::VectorXd(x); };
    auto err = [&](int steps) {
      IntegratorConfig cfg;
      cfg.steps = steps;
      const Trajectory t = integrate(grow, Eigen::VectorXd::Ones(1), ControlSignal::constant(Eigen::VectorXd::Zero(1)),
                                     1.0, cfg);
      return std::abs(t.states.back()(0) - std::exp(1.0));
    };
    const double order = std::log2(err(20) / err(40));
    report("rk4_order", std::abs(order - 4.0) < 0.2, "order " + format_value(order));
  }
  {
    AdaptiveConfig cfg;
    cfg.lipschitz = {1.5, 1.0, 2.0, 1.0};
    cfg.beta_n = 2.0;
    cfg.T = 10.0;
    const double d = delta_solve(cfg);
    const double residual = std::abs(d * 2.0 * gamma_rate(cfg, d) - 1.0);
    report("delta_residual", residual < 1e-9, "residual " + format_value(residual));
  }
  {
    const KernelSpec k = kernel_for_box(KernelKind::rbf, 1.0, 1.0, -Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(2));
    GPDataset data(2, 1, 0.1);
    const GPPosterior prior = gp_fit(data, k);
    const double var = prior.variance(Eigen::VectorXd::Zero(2));
    data.append(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(1));
    const GPPosterior post = gp_fit(data, k);
    report("gp_variance_shrinks", post.variance(Eigen::VectorXd::Zero(2)) < var && std::abs(var - 1.0) < 1e-12,
           "prior " + format_value(var) + ", posterior " + format_value(post.variance(Eigen::VectorXd::Zero(2))));
  }
  {
    CostSpec cost;
    cost.Q = Eigen::MatrixXd::Identity(1, 1);
    cost.R = Eigen::MatrixXd::Identity(1, 1);
    cost.x_target = Eigen::VectorXd::Zero(1);
    cost.u_target = Eigen::VectorXd::Zero(1);
    const VectorField f = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u) { return Eigen::VectorXd(u - x); };
    const OpenLoopPlan plan = ilqr_solve(make_problem(f, cost, Eigen::VectorXd::Zero(1), 1.0, 20), ILQRConfig{});
    report("ilqr_fixed_point", plan.final_cost < 1e-10, "cost " + format_value(plan.final_cost));
  }
  return failures == 0 ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-time model-based RL experiment runner"};
  app.require_subcommand(1);
  CommonOptions opt;
  std::string m_text, strategy_text, env_text;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config_path, "Config file (key = value lines)");
    cmd->add_option("--set", opt.overrides, "Override KEY=VALUE (repeatable)");
    cmd->add_option("--out", opt.out_dir, "Output directory");
    cmd->add_option("--seeds", opt.seeds, "Comma-separated seed list");
    cmd->add_option("--jobs", opt.jobs, "Parallel runs")->check(CLI::PositiveNumber);
    cmd->add_option("--planner", opt.planner, "Shorthand for planner.mode");
  };
  CLI::App* run = app.add_subcommand("run", "Single experiment");
  add_common(run);
  CLI::App* sweep = app.add_subcommand("sweep", "Measurement-count sweep");
  add_common(sweep);
  sweep->add_option("--m", m_text, "Comma-separated measurement counts")->required();
  sweep->add_option("--strategies", strategy_text, "Comma-separated strategies");
  CLI::App* table = app.add_subcommand("table1", "Baselines and learned costs per environment");
  add_common(table);
  table->add_option("--envs", env_text, "Comma-separated environments (default: all)");
  app.add_subcommand("selftest", "Quick numerical self-checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(opt);
    if (sweep->parsed()) return cmd_sweep(opt, m_text, strategy_text);
    if (table->parsed()) return cmd_table1(opt, env_text);
    return cmd_selftest();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
