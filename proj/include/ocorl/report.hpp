#pragma once

#include "ocorl/ocorl_loop.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace ocorl {

/// Decimal with 9 significant digits.
std::string format_value(double v);

inline constexpr const char* kEpisodesHeader =
    "episode,cost_true,regret_raw,regret_clipped,R_cum,I_cum,n_measurements,dataset_size,"
    "planner_cost,planner_converged,seed";

/// Streams rows as episodes finish, so a failed run keeps its completed rows.
class EpisodeCsvWriter {
 public:
  EpisodeCsvWriter(std::ostream& out, std::uint64_t seed);
  void add(const EpisodeRecord& record);

 private:
  std::ostream& out_;
  std::uint64_t seed_;
  double regret_cum_ = 0.0;
  double complexity_cum_ = 0.0;
};

void write_episodes_csv(std::ostream& out, const RunResult& run);
void write_baselines_csv(std::ostream& out, const RunResult& run);

struct ManifestEntry {
  std::string config_hash;
  std::map<std::string, std::string> config;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;
  std::vector<std::string> files;
};

std::string manifest_json(const ManifestEntry& entry);
inline constexpr const char* kToolVersion = "0.1.0";

double median(std::vector<double> values);
double mean(const std::vector<double>& values);
/// Sample standard deviation; 0 for fewer than two values.
double stddev(const std::vector<double>& values);

/// Runs configs on `jobs` worker threads; results come back in input order.
/// Baselines are shared between runs with the same env, horizon and M.
std::vector<RunResult> run_many(const std::vector<ExperimentConfig>& configs, int jobs,
                                const std::function<void(const RunResult&)>& on_done = {});

struct SweepRow {
  int m = 0;
  Strategy strategy = Strategy::equidistant;
  std::vector<double> final_costs;  // one per seed
  double median_final_cost = 0.0;
};

std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const std::vector<int>& m_values,
                                const std::vector<Strategy>& strategies,
                                const std::vector<std::uint64_t>& seeds, int jobs,
                                std::vector<RunResult>* runs = nullptr);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

struct Table1Cell {
  double mean = 0.0;
  double std = 0.0;
};

struct Table1Row {
  std::string env;
  double cont_oc = 0.0;
  double zoh = 0.0;
  std::map<Strategy, Table1Cell> learned;  // final cost over seeds
};

inline const std::vector<Strategy>& table1_strategies() {
  static const std::vector<Strategy> s{Strategy::max_dist, Strategy::max_det, Strategy::equidistant};
  return s;
}

std::vector<Table1Row> run_table1(const ExperimentConfig& base, const std::vector<std::string>& envs,
                                  const std::vector<std::uint64_t>& seeds, int jobs);
void write_table1(std::ostream& out, const std::vector<Table1Row>& rows);

}  // namespace ocorl
