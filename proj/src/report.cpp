#include "ocorl/report.hpp"

#include "ocorl/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace ocorl {

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

EpisodeCsvWriter::EpisodeCsvWriter(std::ostream& out, std::uint64_t seed) : out_(out), seed_(seed) {
  out_ << kEpisodesHeader << '\n';
  out_.flush();
}

void EpisodeCsvWriter::add(const EpisodeRecord& r) {
  const double clipped = std::max(r.regret, 0.0);
  regret_cum_ += clipped;
  complexity_cum_ += r.complexity_inc;
  out_ << r.n << ',' << format_value(r.cost_true) << ',' << format_value(r.regret) << ','
       << format_value(clipped) << ',' << format_value(regret_cum_) << ','
       << format_value(complexity_cum_) << ',' << r.measurement_times.size() << ',' << r.dataset_size
       << ',' << format_value(r.planner_cost) << ',' << (r.planner_converged ? 1 : 0) << ',' << seed_
       << '\n';
  out_.flush();
}

void write_episodes_csv(std::ostream& out, const RunResult& run) {
  EpisodeCsvWriter writer(out, run.cfg.seed);
  for (const EpisodeRecord& r : run.records) writer.add(r);
}

void write_baselines_csv(std::ostream& out, const RunResult& run) {
  out << "env,method,cost,converged\n";
  out << run.env_name << ",cont_oc," << format_value(run.baselines.continuous.cost) << ','
      << (run.baselines.continuous.plan.converged ? 1 : 0) << '\n';
  out << run.env_name << ",zoh," << format_value(run.baselines.zoh.cost) << ','
      << (run.baselines.zoh.plan.converged ? 1 : 0) << '\n';
}

std::string manifest_json(const ManifestEntry& entry) {
  nlohmann::ordered_json j;
  j["tool_version"] = kToolVersion;
  j["config_hash"] = entry.config_hash;
  j["config"] = entry.config;
  j["seeds"] = entry.seeds;
  j["output_dir"] = entry.output_dir;
  j["files"] = entry.files;
  return j.dump(2) + "\n";
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mean(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("mean of an empty sample");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double stddev(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

namespace {

template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, std::max<std::size_t>(count, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

std::string baseline_key(const ExperimentConfig& cfg, const EnvSpec& env) {
  return env.name + "|" + format_value(env.T) + "|" + std::to_string(env.M) + "|" +
         std::to_string(cfg.steps_per_unit) + "|" + std::to_string(cfg.synthetic.seed);
}

}  // namespace

std::vector<RunResult> run_many(const std::vector<ExperimentConfig>& configs, int jobs,
                                const std::function<void(const RunResult&)>& on_done) {
  std::map<std::string, Baselines> cache;
  std::vector<std::string> keys;
  std::vector<std::pair<std::string, std::size_t>> pending;  // key, first config index
  for (std::size_t i = 0; i < configs.size(); ++i) {
    configs[i].validate();
    const EnvSpec env = build_env(configs[i]);
    keys.push_back(baseline_key(configs[i], env));
    if (cache.emplace(keys.back(), Baselines{}).second) pending.emplace_back(keys.back(), i);
  }
  parallel_for(pending.size(), jobs, [&](std::size_t p) {
    const ExperimentConfig& cfg = configs[pending[p].second];
    const EnvSpec env = build_env(cfg);
    Baselines b = compute_baselines(env, env.M, cfg.steps_per_unit);
    cache.at(pending[p].first) = std::move(b);  // map nodes are stable; each key written once
  });

  std::vector<RunResult> results(configs.size());
  std::mutex done_mutex;
  parallel_for(configs.size(), jobs, [&](std::size_t i) {
    results[i] = run_experiment(configs[i], &cache.at(keys[i]));
    if (on_done) {
      std::lock_guard<std::mutex> lock(done_mutex);
      on_done(results[i]);
    }
  });
  return results;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const std::vector<int>& m_values,
                                const std::vector<Strategy>& strategies,
                                const std::vector<std::uint64_t>& seeds, int jobs,
                                std::vector<RunResult>* runs) {
  if (m_values.empty()) throw ConfigError("m_values", "empty measurement list");
  if (seeds.empty()) throw ConfigError("--seeds", "empty seed list");
  for (int m : m_values)
    if (m < 1) throw ConfigError("m_values", "every m must be >= 1");

  std::vector<ExperimentConfig> configs;
  for (int m : m_values)
    for (Strategy s : strategies)
      for (std::uint64_t seed : seeds) {
        ExperimentConfig cfg = base;
        cfg.measurements = m;
        cfg.strategy = s;
        cfg.seed = seed;
        configs.push_back(cfg);
      }
  std::vector<RunResult> results = run_many(configs, jobs);

  std::vector<SweepRow> rows;
  std::size_t idx = 0;
  for (int m : m_values)
    for (Strategy s : strategies) {
      SweepRow row;
      row.m = m;
      row.strategy = s;
      for (std::size_t k = 0; k < seeds.size(); ++k, ++idx)
        row.final_costs.push_back(results[idx].records.back().cost_true);
      row.median_final_cost = median(row.final_costs);
      rows.push_back(std::move(row));
    }
  if (runs) *runs = std::move(results);
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "m,strategy,median_final_cost,seeds\n";
  for (const SweepRow& r : rows)
    out << r.m << ',' << to_string(r.strategy) << ',' << format_value(r.median_final_cost) << ','
        << r.final_costs.size() << '\n';
}

std::vector<Table1Row> run_table1(const ExperimentConfig& base, const std::vector<std::string>& envs,
                                  const std::vector<std::uint64_t>& seeds, int jobs) {
  if (envs.empty()) throw ConfigError("envs", "empty environment list");
  if (seeds.empty()) throw ConfigError("--seeds", "empty seed list");
  std::vector<ExperimentConfig> configs;
  for (const std::string& env : envs)
    for (Strategy s : table1_strategies())
      for (std::uint64_t seed : seeds) {
        ExperimentConfig cfg = base;
        cfg.env_name = env;
        cfg.strategy = s;
        cfg.seed = seed;
        configs.push_back(cfg);
      }
  const std::vector<RunResult> results = run_many(configs, jobs);

  std::vector<Table1Row> rows;
  std::size_t idx = 0;
  for (const std::string& env : envs) {
    Table1Row row;
    row.env = env;
    row.cont_oc = results[idx].baselines.continuous.cost;
    row.zoh = results[idx].baselines.zoh.cost;
    for (Strategy s : table1_strategies()) {
      std::vector<double> finals;
      for (std::size_t k = 0; k < seeds.size(); ++k, ++idx) finals.push_back(results[idx].records.back().cost_true);
      row.learned[s] = {mean(finals), stddev(finals)};
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_table1(std::ostream& out, const std::vector<Table1Row>& rows) {
  out << "env,cont_oc,zoh";
  for (Strategy s : table1_strategies()) out << ',' << to_string(s) << ',' << to_string(s) << "_std";
  out << '\n';
  for (const Table1Row& r : rows) {
    out << r.env << ',' << format_value(r.cont_oc) << ',' << format_value(r.zoh);
    for (Strategy s : table1_strategies()) {
      const Table1Cell& c = r.learned.at(s);
      out << ',' << format_value(c.mean) << ',' << format_value(c.std);
    }
    out << '\n';
  }
}

}  // namespace ocorl
