#include "ocorl/ocorl_loop.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ocorl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

PlannerMode parse_planner_mode(const std::string& name) {
  if (name == "optimistic") return PlannerMode::optimistic;
  if (name == "mean") return PlannerMode::mean;
  throw std::invalid_argument("unknown planner mode '" + name + "'");
}

std::string to_string(PlannerMode mode) {
  return mode == PlannerMode::optimistic ? "optimistic" : "mean";
}

void ExperimentConfig::validate() const {
  if (env_name.empty()) throw ConfigError("env.name", "missing environment name");
  if (env_name != "gp_prior") {
    const auto& names = env_names();
    if (std::find(names.begin(), names.end(), env_name) == names.end())
      throw ConfigError("env.name", "unknown environment '" + env_name + "'");
  }
  if (episodes < 0) throw ConfigError("run.episodes", "must be >= 0 (0 uses the env default)");
  if (measurements < 0) throw ConfigError("run.measurements", "must be >= 0 (0 uses the env default)");
  if (!(noise_std >= 0.0)) throw ConfigError("noise.std", "must be >= 0");
  if (!(lengthscale > 0.0)) throw ConfigError("gp.lengthscale", "must be positive");
  if (!(signal_variance > 0.0)) throw ConfigError("gp.signal_variance", "must be positive");
  if (!(calibration.beta >= 0.0)) throw ConfigError("calibration.beta", "must be >= 0");
  if (!(calibration.delta > 0.0 && calibration.delta <= 1.0))
    throw ConfigError("calibration.delta", "must lie in (0, 1]");
  if (!(calibration.rkhs_bound >= 0.0)) throw ConfigError("calibration.B", "must be >= 0");
  if (knots < 2) throw ConfigError("planner.knots", "must be >= 2");
  if (steps_per_unit < 1) throw ConfigError("sim.steps_per_unit", "must be >= 1");
  if (mpc_max_iters < 1) throw ConfigError("mpc.max_iters", "must be >= 1");
  if (planner_max_iters < 1) throw ConfigError("planner.max_iters", "must be >= 1");
  if (adaptive_max_measurements < 1) throw ConfigError("mss.max_measurements", "must be >= 1");
  if (horizon && !(*horizon > 0.0)) throw ConfigError("env.T", "must be positive");
  if (mpc_horizon && !(*mpc_horizon > 0.0)) throw ConfigError("env.T_mpc", "must be positive");
  if (synthetic.features < 1) throw ConfigError("synthetic.features", "must be >= 1");
  if (!(synthetic.T > 0.0)) throw ConfigError("synthetic.T", "must be positive");
}

EnvSpec build_env(const ExperimentConfig& cfg) {
  EnvSpec env;
  if (cfg.env_name == "gp_prior") {
    SyntheticEnvOptions opt = cfg.synthetic;
    if (cfg.horizon) opt.T = *cfg.horizon;
    env = make_gp_prior_env(opt);
  } else {
    env = make_env(cfg.env_name);
  }
  if (cfg.horizon) env.T = *cfg.horizon;
  if (cfg.mpc_horizon) env.T_mpc = *cfg.mpc_horizon;
  if (cfg.episodes > 0) env.N = cfg.episodes;
  if (cfg.measurements > 0) env.M = cfg.measurements;
  env.validate();
  return env;
}

std::mt19937_64 rng_stream(std::uint64_t seed, int episode, RngPurpose purpose) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(seed);
  h = mix(h ^ static_cast<std::uint64_t>(episode));
  h = mix(h ^ static_cast<std::uint64_t>(purpose));
  return std::mt19937_64(h);
}

double trapezoid(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size()) throw std::invalid_argument("trapezoid: size mismatch");
  double total = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i)
    total += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
  return total;
}

namespace {

Vec join(const Vec& x, const Vec& u) {
  Vec z(x.size() + u.size());
  z << x, u;
  return z;
}

double sq_sigma_norm(const GPPosterior& post, const Vec& z) {
  return post.output_dim() * post.variance(z);
}

}  // namespace

std::vector<double> uncertainty_profile(const GPPosterior& post, const Trajectory& traj) {
  std::vector<double> out;
  out.reserve(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i)
    out.push_back(sq_sigma_norm(post, join(traj.states[i], traj.controls[i])));
  return out;
}

Baselines compute_baselines(const EnvSpec& env, int M, int steps_per_unit) {
  ILQRConfig cfg;
  Baselines b;
  b.continuous = continuous_oc_baseline(env, cfg, steps_per_unit);
  // Seeding the hold problem with the continuous solution avoids poor local optima.
  b.zoh = zoh_baseline(env, std::max(2, M), cfg, steps_per_unit, &b.continuous.plan);
  const BaselineResult cold = zoh_baseline(env, std::max(2, M), cfg, steps_per_unit);
  if (cold.cost < b.zoh.cost) b.zoh = cold;
  return b;
}

RunState init_run(const ExperimentConfig& cfg, const EnvSpec& env, double baseline_cost) {
  RunState s;
  s.cfg = cfg;
  s.env = env;
  s.kernel = kernel_for_box(cfg.kernel, cfg.lengthscale, cfg.signal_variance, env.input_lower,
                            env.input_upper);
  const double gp_noise = std::max(cfg.noise_std, kGpNoiseFloor);
  s.data = GPDataset(env.input_dim(), env.d_x, gp_noise);
  s.post = std::make_shared<const GPPosterior>(gp_fit(s.data, s.kernel));
  s.cfg.calibration.noise_std = gp_noise;
  s.cfg.calibration.output_dim = env.d_x;
  s.baseline_cost = baseline_cost;
  if (cfg.calibration.mode == CalibrationMode::theoretical)
    s.gamma_grid = sobol_grid(env.input_lower, env.input_upper, 256);
  return s;
}

namespace {

struct FineGrid {
  int per_interval = 1;
  int steps = 1;
  double h = 0.0;
};

FineGrid fine_grid(const EnvSpec& env, int knots, int steps_per_unit) {
  FineGrid g;
  const double target = steps_per_unit * env.T / (knots - 1);
  g.per_interval = std::max(1, static_cast<int>(std::ceil(target - 1e-9)));
  g.steps = g.per_interval * (knots - 1);
  g.h = env.T / g.steps;
  return g;
}

/// True-system rollout, one held control per plan interval (MPC or open loop).
Trajectory execute(const RunState& s, const OpenLoopPlan& plan, const FineGrid& grid, bool use_mpc,
                   int& mpc_solves, int& mpc_nonconverged) {
  const EnvSpec& env = s.env;
  ILQRConfig mpc_cfg;
  mpc_cfg.max_iters = s.cfg.mpc_max_iters;
  MpcTracker tracker(mpc_cfg);
  const VectorField model = mean_field(s.post, env.d_x);

  Trajectory traj;
  traj.times.reserve(static_cast<std::size_t>(grid.steps) + 1);
  Vec x = env.x0;
  const int intervals = static_cast<int>(plan.times.size()) - 1;
  for (int k = 0; k < intervals; ++k) {
    const Vec u = use_mpc ? tracker.control(plan, model, x, plan.times[static_cast<std::size_t>(k)], env.T_mpc)
                          : plan.controls[static_cast<std::size_t>(k)];
    for (int j = 0; j < grid.per_interval; ++j) {
      const int i = k * grid.per_interval + j;
      traj.times.push_back(i * grid.h);
      traj.states.push_back(x);
      traj.controls.push_back(u);
      x = rk4_step(env.dynamics, x, u, grid.h);
      if (!x.allFinite()) throw IntegrationError("episode rollout diverged", (i + 1) * grid.h);
    }
  }
  traj.times.push_back(env.T);
  traj.states.push_back(x);
  traj.controls.push_back(traj.controls.back());
  mpc_solves = tracker.solves();
  mpc_nonconverged = tracker.nonconverged();
  return traj;
}

struct Sample {
  Vec x;
  Vec u;
};

/// State and held control at an arbitrary time of a uniform-grid rollout.
Sample sample_at(const EnvSpec& env, const Trajectory& traj, const FineGrid& grid, double t) {
  const int last = grid.steps;
  int j = static_cast<int>(std::floor(t / grid.h + 1e-9));
  j = std::clamp(j, 0, last);
  const double offset = t - j * grid.h;
  const auto idx = static_cast<std::size_t>(j);
  if (j == last || std::abs(offset) <= 1e-9 * std::max(1.0, env.T))
    return {traj.states[idx], traj.controls[idx]};
  return {rk4_step(env.dynamics, traj.states[idx], traj.controls[idx], offset), traj.controls[idx]};
}

std::vector<Vec> padded_decision(const OpenLoopPlan& plan, int width) {
  std::vector<Vec> out;
  out.reserve(plan.decision.size());
  for (const Vec& d : plan.decision) {
    Vec v = Vec::Zero(width);
    const auto len = std::min<Eigen::Index>(d.size(), width);
    v.head(len) = d.head(len);
    out.push_back(std::move(v));
  }
  return out;
}

MeasurementPlan adaptive_plan(const RunState& s, const OpenLoopPlan& plan, const Trajectory& rollout,
                              const FineGrid& grid, double beta_n) {
  const EnvSpec& env = s.env;
  AdaptiveConfig acfg{env.lipschitz, std::max(beta_n, 1e-12), env.T};
  double delta = delta_solve(acfg);
  int m = adaptive_measurement_count(delta, env.T);
  if (m > s.cfg.adaptive_max_measurements) {
    m = s.cfg.adaptive_max_measurements;
    delta = env.T / m;
  }

  const int width = env.d_u + env.d_x;
  const VectorField field = hallucinated_field(s.post, beta_n, env.d_x, env.d_u);
  const std::vector<Vec> decision = padded_decision(plan, width);
  std::vector<BucketProfile> buckets;
  for (int i = 0; i < m; ++i) {
    const double t0 = i * delta;
    const double t1 = std::min((i + 1) * delta, env.T);
    if (!(t1 > t0)) break;
    // Re-hallucinate from the measured true state at the bucket start.
    std::vector<double> shifted;
    for (std::size_t k = 0; k + 1 < plan.times.size(); ++k) shifted.push_back(plan.times[k] - t0);
    const auto control = ControlSignal::zero_order_hold(std::move(shifted), decision);
    IntegratorConfig icfg;
    icfg.steps = std::max(2, static_cast<int>(std::ceil(s.cfg.steps_per_unit * (t1 - t0) - 1e-9)));
    const Vec x_start = sample_at(env, rollout, grid, t0).x;
    const Trajectory hall = integrate(field, x_start, control, t1 - t0, icfg);
    BucketProfile b;
    for (std::size_t k = 0; k < hall.size(); ++k) {
      b.times.push_back(std::min(t0 + hall.times[k], env.T));
      b.sigma_norm.push_back(
          std::sqrt(sq_sigma_norm(*s.post, join(hall.states[k], hall.controls[k].head(env.d_u)))));
    }
    buckets.push_back(std::move(b));
  }
  return adaptive_receding_times(std::span<const BucketProfile>(buckets), delta, env.T);
}

MeasurementPlan select_times(const RunState& s, int n, const OpenLoopPlan& plan,
                             const Trajectory& rollout, const std::vector<double>& sq_profile,
                             const FineGrid& grid, double beta_n) {
  const EnvSpec& env = s.env;
  switch (s.cfg.strategy) {
    case Strategy::equidistant:
      return equidistant_times(env.T, s.cfg.growing_measurements ? n : env.M);
    case Strategy::oracle:
      return oracle_select(rollout.times, sq_profile);
    case Strategy::adaptive:
      return adaptive_plan(s, plan, rollout, grid, beta_n);
    case Strategy::max_det:
    case Strategy::max_dist: {
      Mat points(static_cast<Eigen::Index>(plan.times.size()), env.input_dim());
      for (std::size_t k = 0; k < plan.times.size(); ++k)
        points.row(static_cast<Eigen::Index>(k)) = join(plan.states[k], plan.controls[k]).transpose();
      const int M = std::min<int>(env.M, static_cast<int>(plan.times.size()));
      return s.cfg.strategy == Strategy::max_det ? greedy_max_det(*s.post, plan.times, points, M).plan
                                                 : greedy_max_dist(*s.post, plan.times, points, M).plan;
    }
  }
  throw std::logic_error("unhandled measurement strategy");
}

/// Plan grid with Gaussian controls held per knot, scaled to the control box.
OpenLoopPlan exploration_plan(const RunState& s, const OpenLoopPlan& plan, int n) {
  const EnvSpec& env = s.env;
  std::mt19937_64 rng = rng_stream(s.cfg.seed, n, RngPurpose::init);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Vec half = 0.5 * (env.input_upper - env.input_lower).tail(env.d_u);
  const Vec center = 0.5 * (env.input_upper + env.input_lower).tail(env.d_u);
  OpenLoopPlan out = plan;
  for (std::size_t k = 0; k < out.controls.size(); ++k) {
    if (k + 1 < out.controls.size()) {
      Vec u(env.d_u);
      for (int i = 0; i < env.d_u; ++i) u(i) = center(i) + kExplorationScale * half(i) * gauss(rng);
      out.controls[k] = u;
    } else {
      out.controls[k] = out.controls[k - 1];
    }
  }
  return out;
}

double current_beta(const RunState& s, int n) {
  const CalibrationSchedule& cal = s.cfg.calibration;
  if (cal.mode == CalibrationMode::constant) return beta(cal, n, 0.0);
  const int picks = std::min<int>(static_cast<int>(s.data.size()), static_cast<int>(s.gamma_grid.rows()));
  const double gamma = picks > 0 ? greedy_gamma_estimate(s.kernel, s.gamma_grid, picks, cal.noise_std) : 0.0;
  return beta(cal, n, gamma);
}

/// Knots where ‖x̂(t) − x(t)‖ exceeds 2β e^{L_f(1+L_π)t} ∫₀ᵗ ‖σ(ẑ(s))‖ ds.
void deviation_check(const RunState& s, const OpenLoopPlan& plan, const FineGrid& grid, double beta_n,
                     EpisodeRecord& rec) {
  const EnvSpec& env = s.env;
  int solves = 0, nonconv = 0;
  const Trajectory open_loop = execute(s, plan, grid, false, solves, nonconv);
  const double growth = env.lipschitz.dynamics * (1.0 + env.lipschitz.policy);
  double integral = 0.0;
  double prev_sigma = 0.0;
  rec.deviation_violations = 0;
  rec.deviation_knots = static_cast<int>(plan.times.size());
  for (std::size_t k = 0; k < plan.times.size(); ++k) {
    const double t = plan.times[k];
    const Vec ctrl = plan.controls[k];
    const double sigma = std::sqrt(sq_sigma_norm(*s.post, join(plan.states[k], ctrl)));
    if (k > 0) integral += 0.5 * (t - plan.times[k - 1]) * (sigma + prev_sigma);
    prev_sigma = sigma;
    const double bound = 2.0 * beta_n * std::exp(growth * t) * integral;
    const double dev = (plan.states[k] - open_loop.states[k * static_cast<std::size_t>(grid.per_interval)]).norm();
    if (dev > bound + 1e-6) ++rec.deviation_violations;
  }
}

}  // namespace

EpisodeRecord run_episode(RunState& s, int n) {
  const EnvSpec& env = s.env;
  EpisodeRecord rec;
  rec.n = n;
  const double beta_n = current_beta(s, n);
  rec.beta = beta_n;

  ILQRConfig pcfg;
  pcfg.max_iters = s.cfg.planner_max_iters;
  const OCProblem mean_p = mean_problem(s.post, env, s.cfg.knots);
  OpenLoopPlan mean_plan = ilqr_solve(mean_p, pcfg, s.last_mean_plan ? &*s.last_mean_plan : nullptr);
  rec.mean_planner_cost = mean_plan.final_cost;

  OpenLoopPlan plan;
  if (s.cfg.planner == PlannerMode::optimistic && beta_n > 0.0) {
    // Starting from the mean plan with zero hallucination makes the optimistic
    // cost no larger than the mean-model cost.
    plan = ilqr_solve(hallucinated_problem(s.post, beta_n, env, s.cfg.knots), pcfg, &mean_plan);
  } else {
    plan = mean_plan;
  }
  rec.planner_cost = plan.final_cost;
  rec.planner_converged = plan.converged;

  const FineGrid grid = fine_grid(env, s.cfg.knots, s.cfg.steps_per_unit);
  Trajectory rollout;
  if (s.data.empty()) {
    // The prior says nothing about control authority, so any plan executes as
    // u = 0 and every measurement lands on one point. Explore instead.
    rollout = execute(s, exploration_plan(s, plan, n), grid, false, rec.mpc_solves, rec.mpc_nonconverged);
  } else {
    rollout = execute(s, plan, grid, s.cfg.use_mpc, rec.mpc_solves, rec.mpc_nonconverged);
  }
  rec.cost_true = running_cost(rollout, env.cost);
  rec.regret = rec.cost_true - s.baseline_cost;

  const std::vector<double> sq_profile = uncertainty_profile(*s.post, rollout);
  rec.complexity_inc = trapezoid(rollout.times, sq_profile);

  if (s.cfg.check_deviation) deviation_check(s, plan, grid, beta_n, rec);

  const MeasurementPlan mplan = select_times(s, n, plan, rollout, sq_profile, grid, beta_n);
  mplan.check(env.T);
  rec.measurement_times = mplan.times;

  std::mt19937_64 rng = rng_stream(s.cfg.seed, n, RngPurpose::noise);
  for (double t : mplan.times) {
    const Sample smp = sample_at(env, rollout, grid, t);
    const Vec y = observe_derivative(env.dynamics, smp.x, smp.u, s.cfg.noise_std, rng);
    s.data.append(join(smp.x, smp.u), y);
  }
  s.post = std::make_shared<const GPPosterior>(gp_fit(s.data, s.kernel));
  rec.dataset_size = s.data.size();
  s.dataset_sizes.push_back(rec.dataset_size);

  if (s.cfg.keep_trajectories) {
    rec.rollout = std::move(rollout);
    rec.plan = plan;
  }
  s.last_mean_plan = std::move(mean_plan);
  s.last_plan = std::move(plan);
  return rec;
}

RegretSeries cumulative_regret(std::span<const double> regrets) {
  RegretSeries out;
  double clipped = 0.0, raw = 0.0;
  for (double r : regrets) {
    clipped += std::max(r, 0.0);
    raw += r;
    out.clipped.push_back(clipped);
    out.raw.push_back(raw);
  }
  return out;
}

RegretSeries cumulative_regret(std::span<const EpisodeRecord> records) {
  std::vector<double> r;
  r.reserve(records.size());
  for (const EpisodeRecord& rec : records) r.push_back(rec.regret);
  return cumulative_regret(std::span<const double>(r));
}

std::vector<double> model_complexity(std::span<const EpisodeRecord> records) {
  std::vector<double> out;
  double total = 0.0;
  for (const EpisodeRecord& rec : records) {
    total += rec.complexity_inc;
    out.push_back(total);
  }
  return out;
}

double sublinearity_exponent(std::span<const double> R) {
  const std::size_t N = R.size();
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int count = 0;
  for (std::size_t i = N / 2; i < N; ++i) {
    if (!(R[i] > 0.0)) continue;
    const double x = std::log(static_cast<double>(i + 1));
    const double y = std::log(R[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  if (count < 2) return 0.0;
  const double denom = count * sxx - sx * sx;
  if (!(std::abs(denom) > 0.0)) return 0.0;
  return (count * sxy - sx * sy) / denom;
}

double regret_bound(const LipschitzConstants& L, double beta_N, double T, int N, double I_N) {
  return 2.0 * beta_N * L.cost * (1.0 + L.policy) * std::pow(T, 1.5) *
         std::exp(L.dynamics * (1.0 + L.policy) * T) * std::sqrt(N * std::max(I_N, 0.0));
}

RunResult run_experiment(const ExperimentConfig& cfg, const Baselines* baselines,
                         const std::function<void(const EpisodeRecord&)>& on_episode) {
  cfg.validate();
  const EnvSpec env = build_env(cfg);
  RunResult result;
  result.cfg = cfg;
  result.env_name = env.name;
  result.baselines = baselines ? *baselines : compute_baselines(env, env.M, cfg.steps_per_unit);

  RunState state = init_run(cfg, env, result.baselines.continuous.cost);
  for (int n = 1; n <= env.N; ++n) {
    result.records.push_back(run_episode(state, n));
    if (on_episode) on_episode(result.records.back());
  }

  const RegretSeries R = cumulative_regret(std::span<const EpisodeRecord>(result.records));
  result.regret_cum_clipped = R.clipped;
  result.regret_cum_raw = R.raw;
  result.complexity_cum = model_complexity(std::span<const EpisodeRecord>(result.records));
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    BoundCheck b;
    b.regret = R.clipped[i];
    b.bound = regret_bound(env.lipschitz, result.records[i].beta, env.T, static_cast<int>(i + 1),
                           result.complexity_cum[i]);
    b.holds = b.regret <= b.bound;
    result.bound_chain.push_back(b);
  }
  result.exponent = sublinearity_exponent(R.clipped);
  return result;
}

}  // namespace ocorl
