#pragma once

#include "ocorl/envs.hpp"
#include "ocorl/kernel_gp.hpp"
#include "ocorl/mss.hpp"
#include "ocorl/ode_sim.hpp"
#include "ocorl/traj_opt.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ocorl {

enum class PlannerMode { optimistic, mean };

PlannerMode parse_planner_mode(const std::string& name);
std::string to_string(PlannerMode mode);

/// Observation noise below this is not passed to the GP fit; it keeps the
/// Gram system well conditioned when data are noiseless.
inline constexpr double kGpNoiseFloor = 1e-3;

/// First-episode exploration: control std as a fraction of the box half-width.
inline constexpr double kExplorationScale = 0.5;

struct ExperimentConfig {
  std::string env_name;
  Strategy strategy = Strategy::equidistant;
  PlannerMode planner = PlannerMode::optimistic;
  KernelKind kernel = KernelKind::rbf;
  double lengthscale = 1.0;  // relative to the env's normalization box
  double signal_variance = 1.0;
  CalibrationSchedule calibration;
  double noise_std = 0.005;
  int episodes = 0;      // 0 uses the env default
  int measurements = 0;  // 0 uses the env default
  // Equidistant only: m_n = n instead of a fixed M.
  bool growing_measurements = false;
  int adaptive_max_measurements = 50;
  std::uint64_t seed = 0;
  int knots = kPlanKnots;
  int steps_per_unit = kDefaultStepsPerUnit;
  bool use_mpc = true;
  int mpc_max_iters = 5;
  int planner_max_iters = 100;
  std::optional<double> horizon;      // overrides env T
  std::optional<double> mpc_horizon;  // overrides env T_mpc
  // gp_prior env: draw of the true dynamics.
  SyntheticEnvOptions synthetic;
  // Logs the hallucinated-vs-true deviation bound each episode.
  bool check_deviation = false;
  bool keep_trajectories = false;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Env selected by the config, with horizon and count overrides applied.
EnvSpec build_env(const ExperimentConfig& cfg);

struct EpisodeRecord {
  int n = 0;
  double cost_true = 0.0;
  double regret = 0.0;
  double complexity_inc = 0.0;
  std::vector<double> measurement_times;
  std::size_t dataset_size = 0;
  double planner_cost = 0.0;
  bool planner_converged = false;
  double mean_planner_cost = 0.0;
  double beta = 0.0;
  int mpc_solves = 0;
  int mpc_nonconverged = 0;
  // Deviation check (only when enabled): knots where the bound failed.
  int deviation_violations = 0;
  int deviation_knots = 0;
  std::optional<Trajectory> rollout;
  std::optional<OpenLoopPlan> plan;
};

struct Baselines {
  BaselineResult continuous;
  BaselineResult zoh;
};

Baselines compute_baselines(const EnvSpec& env, int M, int steps_per_unit = kDefaultStepsPerUnit);

struct RunState {
  ExperimentConfig cfg;
  EnvSpec env;
  KernelSpec kernel;
  GPDataset data;
  std::shared_ptr<const GPPosterior> post;
  std::optional<OpenLoopPlan> last_mean_plan;
  std::optional<OpenLoopPlan> last_plan;
  double baseline_cost = 0.0;
  Eigen::MatrixXd gamma_grid;  // Sobol points for the theoretical β
  std::vector<std::size_t> dataset_sizes;
};

RunState init_run(const ExperimentConfig& cfg, const EnvSpec& env, double baseline_cost);

/// Plans, executes on the true system, measures and refits. Deterministic given the seed.
EpisodeRecord run_episode(RunState& state, int n);

struct BoundCheck {
  double regret = 0.0;  // clipped R_N
  double bound = 0.0;
  bool holds = true;
};

struct RunResult {
  ExperimentConfig cfg;
  std::string env_name;
  Baselines baselines;
  std::vector<EpisodeRecord> records;
  std::vector<double> regret_cum_clipped;
  std::vector<double> regret_cum_raw;
  std::vector<double> complexity_cum;
  std::vector<BoundCheck> bound_chain;
  double exponent = 0.0;
};

/// Runs N episodes. Baselines are computed unless supplied (they do not depend on the seed).
/// `on_episode` sees each record as soon as it is complete.
RunResult run_experiment(const ExperimentConfig& cfg, const Baselines* baselines = nullptr,
                         const std::function<void(const EpisodeRecord&)>& on_episode = {});

struct RegretSeries {
  std::vector<double> clipped;
  std::vector<double> raw;
};

RegretSeries cumulative_regret(std::span<const double> regrets);
RegretSeries cumulative_regret(std::span<const EpisodeRecord> records);

std::vector<double> model_complexity(std::span<const EpisodeRecord> records);

/// Least-squares slope of log R_N against log N over the second half of the
/// episodes. Returns 0 when fewer than two positive values are available.
double sublinearity_exponent(std::span<const double> R);

/// 2 β_N L_c (1 + L_π) T^{3/2} e^{L_f (1 + L_π) T} sqrt(N I_N).
double regret_bound(const LipschitzConstants& L, double beta_N, double T, int N, double I_N);

enum class RngPurpose : std::uint64_t { noise = 1, init = 2 };

/// Independent stream per (seed, episode, purpose).
std::mt19937_64 rng_stream(std::uint64_t seed, int episode, RngPurpose purpose);

/// Squared uncertainty norm ‖σ(z)‖² = d_x σ²(z) along a trajectory.
std::vector<double> uncertainty_profile(const GPPosterior& post, const Trajectory& traj);

/// Trapezoid of a sampled profile over its time grid.
double trapezoid(std::span<const double> times, std::span<const double> values);

}  // namespace ocorl
