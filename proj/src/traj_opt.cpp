#include "ocorl/traj_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ocorl {

const Eigen::VectorXd& OCProblem::state_ref(int k) const {
  return x_ref.size() == 1 ? x_ref.front() : x_ref[static_cast<std::size_t>(k)];
}

const Eigen::VectorXd& OCProblem::control_ref(int k) const {
  return u_ref.size() == 1 ? u_ref.front() : u_ref[static_cast<std::size_t>(k)];
}

void OCProblem::validate() const {
  if (knots < 2) throw std::invalid_argument("OCProblem: knots must be >= 2");
  if (!(T > 0.0)) throw std::invalid_argument("OCProblem: T must be positive");
  if (substeps < 1) throw std::invalid_argument("OCProblem: substeps must be >= 1");
  if (!dynamics) throw std::invalid_argument("OCProblem: missing dynamics");
  const int nx = state_dim();
  if (Q.rows() != nx || Q.cols() != nx) throw std::invalid_argument("OCProblem: Q dimension mismatch");
  if (R.rows() != control_dim || R.cols() != control_dim)
    throw std::invalid_argument("OCProblem: R dimension mismatch");
  if (!(x_ref.size() == 1 || static_cast<int>(x_ref.size()) == knots))
    throw std::invalid_argument("OCProblem: x_ref must have 1 or `knots` entries");
  if (!(u_ref.size() == 1 || static_cast<int>(u_ref.size()) == knots - 1))
    throw std::invalid_argument("OCProblem: u_ref must have 1 or `knots - 1` entries");
  if (physical_control_dim < 1 || physical_control_dim > control_dim)
    throw std::invalid_argument("OCProblem: bad physical_control_dim");
}

OCProblem make_problem(const VectorField& dynamics, const CostSpec& cost, const Eigen::VectorXd& x0,
                       double T, int knots) {
  OCProblem p;
  p.dynamics = dynamics;
  p.Q = cost.Q;
  p.R = cost.R;
  p.x_ref = {cost.x_target};
  p.u_ref = {cost.u_target};
  p.x0 = x0;
  p.T = T;
  p.knots = knots;
  p.control_dim = static_cast<int>(cost.R.rows());
  p.physical_control_dim = p.control_dim;
  p.validate();
  return p;
}

std::vector<double> ILQRConfig::default_alphas() {
  std::vector<double> a;
  for (int i = 0; i <= 10; ++i) a.push_back(std::ldexp(1.0, -i));
  return a;
}

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Grid {
  double h = 0.0;  // sub-step length
  int total = 0;   // number of sub-steps over the horizon

  double weight(int g) const { return (g == 0 || g == total) ? 0.5 * h : h; }
};

Grid make_grid(const OCProblem& p) {
  Grid g;
  g.total = p.intervals() * p.substeps;
  g.h = p.T / g.total;
  return g;
}

double state_term(const OCProblem& p, int k, const Vec& x) {
  const Vec d = x - p.state_ref(k);
  return d.dot(p.Q * d);
}

double control_term(const OCProblem& p, int k, const Vec& u) {
  const Vec d = u - p.control_ref(k);
  return d.dot(p.R * d);
}

/// Rolls the stage forward; returns the end state and accumulates the stage objective.
Vec step_stage(const OCProblem& p, const Grid& grid, int k, const Vec& x, const Vec& u, double& cost) {
  Vec xs = x;
  for (int j = 0; j < p.substeps; ++j) {
    cost += grid.weight(k * p.substeps + j) * state_term(p, k, xs);
    xs = rk4_step(p.dynamics, xs, u, grid.h);
  }
  cost += p.substeps * grid.h * control_term(p, k, u);
  return xs;
}

double terminal_cost(const OCProblem& p, const Grid& grid, const Vec& x) {
  return grid.weight(grid.total) * state_term(p, p.knots - 1, x);
}

struct Rollout {
  std::vector<Vec> states;
  std::vector<Vec> controls;
  double cost = 0.0;
  bool finite = true;
};

template <typename Policy>
Rollout forward(const OCProblem& p, const Grid& grid, Policy&& policy) {
  Rollout r;
  r.states.reserve(static_cast<std::size_t>(p.knots));
  r.controls.reserve(static_cast<std::size_t>(p.intervals()));
  Vec x = p.x0;
  r.states.push_back(x);
  for (int k = 0; k < p.intervals(); ++k) {
    Vec u = policy(k, x);
    x = step_stage(p, grid, k, x, u, r.cost);
    r.controls.push_back(std::move(u));
    if (!x.allFinite() || !std::isfinite(r.cost)) {
      r.finite = false;
      r.cost = std::numeric_limits<double>::infinity();
      return r;
    }
    r.states.push_back(x);
  }
  r.cost += terminal_cost(p, grid, x);
  if (!std::isfinite(r.cost)) {
    r.finite = false;
    r.cost = std::numeric_limits<double>::infinity();
  }
  return r;
}

struct StageModel {
  Mat A, B;              // end-state sensitivities
  Vec lx, lu;            // stage objective gradient
  Mat lxx, luu, lux;     // Gauss-Newton Hessian (exact for one sub-step)
};

StageModel linearize(const OCProblem& p, const Grid& grid, const ILQRConfig& cfg, int k, const Vec& x,
                     const Vec& u) {
  const int nx = p.state_dim();
  const int nu = p.control_dim;
  const int nz = nx + nu;
  const int s = p.substeps;

  // sens[j] = ∂x_{k,j+1}/∂(x_k, u_k) by central differences over the whole hold.
  std::vector<Mat> sens(static_cast<std::size_t>(s), Mat(nx, nz));
  std::vector<Vec> plus(static_cast<std::size_t>(s)), minus(static_cast<std::size_t>(s));
  Vec nominal_path;
  for (int c = 0; c < nz; ++c) {
    const double base = c < nx ? x(c) : u(c - nx);
    const double eps = cfg.fd_eps * (1.0 + std::abs(base));
    for (int sign = -1; sign <= 1; sign += 2) {
      Vec xs = x, us = u;
      if (c < nx) xs(c) += sign * eps;
      else us(c - nx) += sign * eps;
      auto& out = sign > 0 ? plus : minus;
      for (int j = 0; j < s; ++j) {
        xs = rk4_step(p.dynamics, xs, us, grid.h);
        out[static_cast<std::size_t>(j)] = xs;
      }
    }
    for (int j = 0; j < s; ++j)
      sens[static_cast<std::size_t>(j)].col(c) =
          (plus[static_cast<std::size_t>(j)] - minus[static_cast<std::size_t>(j)]) / (2.0 * eps);
  }

  StageModel m;
  m.A = sens.back().leftCols(nx);
  m.B = sens.back().rightCols(nu);

  const Vec& r = p.state_ref(k);
  const double w0 = grid.weight(k * s);
  const double hold = s * grid.h;
  m.lx = 2.0 * w0 * p.Q * (x - r);
  m.lxx = 2.0 * w0 * p.Q;
  m.lu = 2.0 * hold * p.R * (u - p.control_ref(k));
  m.luu = 2.0 * hold * p.R;
  m.lux = Mat::Zero(nu, nx);
  if (s > 1) {
    // Interior sub-states of the hold contribute through their sensitivities.
    Vec xs = x;
    for (int j = 1; j < s; ++j) {
      xs = rk4_step(p.dynamics, xs, u, grid.h);
      const Mat& J = sens[static_cast<std::size_t>(j - 1)];
      const double w = grid.weight(k * s + j);
      const Vec g = 2.0 * w * p.Q * (xs - r);
      const Mat H = 2.0 * w * p.Q;
      const auto Jx = J.leftCols(nx);
      const auto Ju = J.rightCols(nu);
      m.lx += Jx.transpose() * g;
      m.lu += Ju.transpose() * g;
      m.lxx += Jx.transpose() * H * Jx;
      m.luu += Ju.transpose() * H * Ju;
      m.lux += Ju.transpose() * H * Jx;
    }
  }
  return m;
}

std::vector<Vec> initial_controls(const OCProblem& p, const OpenLoopPlan* warm) {
  const int n = p.intervals();
  std::vector<Vec> u(static_cast<std::size_t>(n), Vec::Zero(p.control_dim));
  if (warm == nullptr || warm->decision.empty()) return u;
  const auto w = static_cast<long>(warm->decision.size());
  for (int k = 0; k < n; ++k) {
    const long idx = std::min<long>(w - 1, static_cast<long>(k) * w / n);
    const Vec& src = warm->decision[static_cast<std::size_t>(idx)];
    const auto len = std::min<Eigen::Index>(src.size(), p.control_dim);
    u[static_cast<std::size_t>(k)].head(len) = src.head(len);
  }
  return u;
}

OpenLoopPlan solve_from(const OCProblem& p, const ILQRConfig& cfg, std::vector<Vec> init) {
  p.validate();
  const Grid grid = make_grid(p);
  const int nx = p.state_dim();
  const int nu = p.control_dim;
  const int n = p.intervals();

  Rollout cur = forward(p, grid, [&](int k, const Vec&) { return init[static_cast<std::size_t>(k)]; });
  if (!cur.finite) {
    // Fall back to zero controls when the warm start diverges.
    cur = forward(p, grid, [&](int, const Vec&) { return Vec(Vec::Zero(nu)); });
    if (!cur.finite) throw IntegrationError("ilqr_solve: initial rollout is not finite", 0.0);
  }

  OpenLoopPlan plan;
  plan.cost_history.push_back(cur.cost);
  std::vector<Vec> kff(static_cast<std::size_t>(n));
  std::vector<Mat> kfb(static_cast<std::size_t>(n));
  std::vector<StageModel> models(static_cast<std::size_t>(n));
  double mu = cfg.reg_init;
  bool relinearize = true;

  int iter = 0;
  for (; iter < cfg.max_iters; ++iter) {
    if (relinearize) {
      for (int k = 0; k < n; ++k)
        models[static_cast<std::size_t>(k)] =
            linearize(p, grid, cfg, k, cur.states[static_cast<std::size_t>(k)],
                      cur.controls[static_cast<std::size_t>(k)]);
      relinearize = false;
    }

    // Backward pass with Levenberg-Marquardt damping on Q_uu.
    bool backward_ok = true;
    double dv_lin = 0.0, dv_quad = 0.0;
    {
      const Vec& xT = cur.states.back();
      Vec vx = 2.0 * grid.weight(grid.total) * p.Q * (xT - p.state_ref(p.knots - 1));
      Mat vxx = 2.0 * grid.weight(grid.total) * p.Q;
      for (int k = n - 1; k >= 0; --k) {
        const StageModel& m = models[static_cast<std::size_t>(k)];
        const Vec qx = m.lx + m.A.transpose() * vx;
        const Vec qu = m.lu + m.B.transpose() * vx;
        const Mat qxx = m.lxx + m.A.transpose() * vxx * m.A;
        const Mat quu = m.luu + m.B.transpose() * vxx * m.B;
        const Mat qux = m.lux + m.B.transpose() * vxx * m.A;
        Mat quu_reg = quu;
        quu_reg.diagonal().array() += mu;
        Eigen::LLT<Mat> llt(quu_reg);
        if (llt.info() != Eigen::Success) {
          backward_ok = false;
          break;
        }
        Vec kk = -llt.solve(qu);
        Mat kK = -llt.solve(qux);
        vx = qx + kK.transpose() * quu * kk + kK.transpose() * qu + qux.transpose() * kk;
        vxx = qxx + kK.transpose() * quu * kK + kK.transpose() * qux + qux.transpose() * kK;
        vxx = 0.5 * (vxx + vxx.transpose());
        dv_lin += kk.dot(qu);
        dv_quad += 0.5 * kk.dot(quu * kk);
        kff[static_cast<std::size_t>(k)] = std::move(kk);
        kfb[static_cast<std::size_t>(k)] = std::move(kK);
      }
    }
    if (!backward_ok) {
      mu *= cfg.reg_factor;
      if (mu > cfg.reg_max) break;
      continue;
    }

    bool accepted = false;
    for (double alpha : cfg.line_search_alphas) {
      Rollout trial = forward(p, grid, [&](int k, const Vec& x) {
        const auto i = static_cast<std::size_t>(k);
        return Vec(cur.controls[i] + alpha * kff[i] + kfb[i] * (x - cur.states[i]));
      });
      if (trial.finite && trial.cost < cur.cost) {
        const double decrease = cur.cost - trial.cost;
        const double scale = std::max(std::abs(cur.cost), 1e-300);
        cur = std::move(trial);
        plan.cost_history.push_back(cur.cost);
        accepted = true;
        relinearize = true;
        mu = std::max(cfg.reg_init, mu / cfg.reg_factor);
        if (decrease / scale < cfg.cost_tol) plan.converged = true;
        break;
      }
    }
    if (plan.converged) {
      ++iter;
      break;
    }
    if (!accepted) {
      const double expected = -(dv_lin + dv_quad);
      if (expected <= cfg.cost_tol * std::max(std::abs(cur.cost), 1e-300)) {
        plan.converged = true;
        ++iter;
        break;
      }
      mu *= cfg.reg_factor;
      if (mu > cfg.reg_max) break;
    }
  }

  plan.iterations = iter;
  plan.final_cost = cur.cost;
  plan.states = std::move(cur.states);
  plan.decision = std::move(cur.controls);
  const double h = p.interval();
  const int npu = p.physical_control_dim;
  const bool optimistic = nu > npu;
  for (int k = 0; k < p.knots; ++k) {
    plan.times.push_back(k == p.knots - 1 ? p.T : k * h);
    const Vec& d = plan.decision[static_cast<std::size_t>(std::min(k, n - 1))];
    plan.controls.push_back(d.head(npu));
    if (optimistic) plan.hallucination.push_back(d.tail(nu - npu).array().tanh().matrix());
  }
  (void)nx;
  return plan;
}

}  // namespace

OpenLoopPlan ilqr_solve(const OCProblem& problem, const ILQRConfig& cfg, const OpenLoopPlan* warm_start) {
  problem.validate();
  return solve_from(problem, cfg, initial_controls(problem, warm_start));
}

double evaluate_controls(const OCProblem& problem, const std::vector<Eigen::VectorXd>& controls) {
  problem.validate();
  if (static_cast<int>(controls.size()) != problem.intervals())
    throw std::invalid_argument("evaluate_controls: need one control per interval");
  const Grid grid = make_grid(problem);
  return forward(problem, grid, [&](int k, const Vec&) { return controls[static_cast<std::size_t>(k)]; })
      .cost;
}

VectorField mean_field(std::shared_ptr<const GPPosterior> post, int d_x) {
  return [post, d_x](const Vec& x, const Vec& u) {
    Vec z(d_x + u.size());
    z << x, u;
    return post->mean(z);
  };
}

VectorField hallucinated_field(std::shared_ptr<const GPPosterior> post, double beta_n, int d_x,
                               int d_u) {
  return [post, beta_n, d_x, d_u](const Vec& x, const Vec& v) {
    Vec z(d_x + d_u);
    z << x, v.head(d_u);
    const Prediction pred = post->predict(z);
    return Vec(pred.mean + beta_n * pred.std.cwiseProduct(v.tail(d_x).array().tanh().matrix()));
  };
}

OCProblem mean_problem(std::shared_ptr<const GPPosterior> post, const EnvSpec& env, int knots) {
  return make_problem(mean_field(std::move(post), env.d_x), env.cost, env.x0, env.T, knots);
}

OCProblem hallucinated_problem(std::shared_ptr<const GPPosterior> post, double beta_n,
                               const EnvSpec& env, int knots) {
  if (!(beta_n >= 0.0)) throw std::invalid_argument("hallucinated_problem: beta_n must be >= 0");
  OCProblem p;
  p.dynamics = hallucinated_field(std::move(post), beta_n, env.d_x, env.d_u);
  p.Q = env.cost.Q;
  const int nv = env.d_u + env.d_x;
  p.R = Mat::Zero(nv, nv);
  p.R.topLeftCorner(env.d_u, env.d_u) = env.cost.R;
  Vec u_ref = Vec::Zero(nv);
  u_ref.head(env.d_u) = env.cost.u_target;
  p.x_ref = {env.cost.x_target};
  p.u_ref = {u_ref};
  p.x0 = env.x0;
  p.T = env.T;
  p.knots = knots;
  p.control_dim = nv;
  p.physical_control_dim = env.d_u;
  p.validate();
  return p;
}

void MpcTracker::reset() {
  warm_.clear();
  last_knot_ = -1;
}

Eigen::VectorXd MpcTracker::control(const OpenLoopPlan& plan, const VectorField& model,
                                    const Eigen::VectorXd& x_now, double t_now, double T_mpc) {
  const int K = static_cast<int>(plan.times.size());
  if (K < 2) throw std::invalid_argument("mpc_track: plan needs at least two knots");
  const double h = plan.times[1] - plan.times[0];
  const int k = static_cast<int>(std::lround(t_now / h));
  if (k < 0 || k >= K || std::abs(plan.times[static_cast<std::size_t>(k)] - t_now) > 1e-9 * std::max(1.0, plan.times.back()))
    throw std::invalid_argument("mpc_track: t_now is not on the plan grid");
  const int H = std::min(static_cast<int>(std::lround(T_mpc / h)) + 1, K - k);
  if (H < 2) return plan.controls[static_cast<std::size_t>(k)];

  const int nx = static_cast<int>(x_now.size());
  const int nu = static_cast<int>(plan.controls.front().size());
  OCProblem p;
  p.dynamics = model;
  p.Q = Mat::Identity(nx, nx);
  p.R = Mat::Identity(nu, nu);
  p.x_ref.assign(plan.states.begin() + k, plan.states.begin() + k + H);
  p.u_ref.assign(plan.controls.begin() + k, plan.controls.begin() + k + H - 1);
  p.x0 = x_now;
  p.T = (H - 1) * h;
  p.knots = H;
  p.control_dim = nu;
  p.physical_control_dim = nu;

  std::vector<Vec> init(p.u_ref.begin(), p.u_ref.end());
  if (last_knot_ >= 0 && k > last_knot_) {
    const auto shift = static_cast<std::size_t>(k - last_knot_);
    for (std::size_t i = 0; i + shift < warm_.size() && i < init.size(); ++i) init[i] = warm_[i + shift];
  }
  const OpenLoopPlan sol = solve_from(p, cfg_, std::move(init));
  ++solves_;
  if (!sol.converged) ++nonconverged_;
  warm_ = sol.decision;
  last_knot_ = k;
  return sol.decision.front();
}

Eigen::VectorXd mpc_track(const OpenLoopPlan& plan, const VectorField& model,
                          const Eigen::VectorXd& x_now, double t_now, double T_mpc,
                          const ILQRConfig& cfg) {
  MpcTracker tracker(cfg);
  return tracker.control(plan, model, x_now, t_now, T_mpc);
}

Eigen::VectorXd zoh_transition(const VectorField& field, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u, double duration, int substeps) {
  if (substeps < 1) throw std::invalid_argument("zoh_transition: substeps must be >= 1");
  Vec xs = x;
  const double h = duration / substeps;
  for (int j = 0; j < substeps; ++j) xs = rk4_step(field, xs, u, h);
  return xs;
}

namespace {

BaselineResult finish_baseline(const EnvSpec& env, OpenLoopPlan plan, int steps) {
  BaselineResult out;
  std::vector<double> hold_times(plan.times.begin(), plan.times.end() - 1);
  auto signal = ControlSignal::zero_order_hold(hold_times, plan.decision);
  IntegratorConfig icfg;
  icfg.steps = steps;
  out.rollout = integrate(env.dynamics, env.x0, signal, env.T, icfg);
  out.cost = running_cost(out.rollout, env.cost);
  out.plan = std::move(plan);
  return out;
}

int sim_steps(double T, int steps_per_unit) {
  return std::max(1, static_cast<int>(std::lround(steps_per_unit * T)));
}

}  // namespace

BaselineResult continuous_oc_baseline(const EnvSpec& env, const ILQRConfig& cfg, int steps_per_unit) {
  const int steps = sim_steps(env.T, steps_per_unit);
  const OpenLoopPlan coarse =
      ilqr_solve(make_problem(env.dynamics, env.cost, env.x0, env.T, std::min(kPlanKnots, steps + 1)), cfg);
  OpenLoopPlan fine =
      ilqr_solve(make_problem(env.dynamics, env.cost, env.x0, env.T, steps + 1), cfg, &coarse);
  return finish_baseline(env, std::move(fine), steps);
}

BaselineResult zoh_baseline(const EnvSpec& env, int M, const ILQRConfig& cfg, int steps_per_unit,
                            const OpenLoopPlan* warm_start) {
  if (M < 2) throw std::invalid_argument("zoh_baseline: M must be >= 2");
  const int holds = M - 1;
  const int substeps =
      std::max(1, static_cast<int>(std::ceil(steps_per_unit * env.T / static_cast<double>(holds))));
  OCProblem p = make_problem(env.dynamics, env.cost, env.x0, env.T, M);
  p.substeps = substeps;
  OpenLoopPlan plan = ilqr_solve(p, cfg, warm_start);
  return finish_baseline(env, std::move(plan), holds * substeps);
}

}  // namespace ocorl
