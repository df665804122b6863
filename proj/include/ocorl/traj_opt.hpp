#pragma once

#include "ocorl/envs.hpp"
#include "ocorl/kernel_gp.hpp"
#include "ocorl/ode_sim.hpp"

#include <Eigen/Dense>

#include <memory>
#include <vector>

namespace ocorl {

/// Quadratic-cost optimal control problem on a uniform knot grid.
///
/// Each knot interval is integrated with `substeps` RK4 steps under a held
/// control. The objective is the trapezoidal rule over the sub-step grid for
/// the state term plus the exact integral of the held control term:
///   Σ_g w_g (x_g − r)ᵀQ(x_g − r) + Σ_k Δ (u_k − r_u)ᵀR(u_k − r_u).
struct OCProblem {
  VectorField dynamics;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  std::vector<Eigen::VectorXd> x_ref;  // one entry, or one per knot
  std::vector<Eigen::VectorXd> u_ref;  // one entry, or one per interval
  Eigen::VectorXd x0;
  double T = 1.0;
  int knots = 100;
  int control_dim = 1;
  int substeps = 1;
  // Leading entries of the control that are physical inputs; the rest is hallucination.
  int physical_control_dim = 1;

  int state_dim() const { return static_cast<int>(x0.size()); }
  int intervals() const { return knots - 1; }
  double interval() const { return T / (knots - 1); }
  const Eigen::VectorXd& state_ref(int k) const;
  const Eigen::VectorXd& control_ref(int k) const;
  void validate() const;
};

OCProblem make_problem(const VectorField& dynamics, const CostSpec& cost, const Eigen::VectorXd& x0,
                       double T, int knots);

struct ILQRConfig {
  int max_iters = 100;
  double cost_tol = 1e-6;
  double reg_init = 1e-6;
  double reg_max = 1e6;
  double reg_factor = 10.0;
  std::vector<double> line_search_alphas = default_alphas();
  double fd_eps = 1e-5;

  static std::vector<double> default_alphas();
};

/// Default planning resolution.
inline constexpr int kPlanKnots = 100;

struct OpenLoopPlan {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  // Physical controls per knot; the last knot repeats the final interval's value.
  std::vector<Eigen::VectorXd> controls;
  // tanh-squashed hallucination per knot, empty for non-optimistic problems.
  std::vector<Eigen::VectorXd> hallucination;
  // Raw decision variables per interval (u, η̃), used for warm starts.
  std::vector<Eigen::VectorXd> decision;
  bool converged = false;
  double final_cost = 0.0;
  int iterations = 0;
  // Objective after the initial rollout and after every accepted step.
  std::vector<double> cost_history;
};

/// Solves the problem from zero controls, or from `warm_start->decision`
/// (resampled to this knot count and padded/truncated to this control size).
OpenLoopPlan ilqr_solve(const OCProblem& problem, const ILQRConfig& cfg,
                        const OpenLoopPlan* warm_start = nullptr);

/// Objective of a given control sequence (one entry per interval).
double evaluate_controls(const OCProblem& problem, const std::vector<Eigen::VectorXd>& controls);

/// Mean-model problem for the learned dynamics μ_n.
OCProblem mean_problem(std::shared_ptr<const GPPosterior> post, const EnvSpec& env,
                       int knots = kPlanKnots);

/// Optimistic problem over (u, η̃): ẋ = μ_n(z) + β_n σ_n(z) ⊙ tanh(η̃), cost on u only.
OCProblem hallucinated_problem(std::shared_ptr<const GPPosterior> post, double beta_n,
                               const EnvSpec& env, int knots = kPlanKnots);

/// (u, η̃) dynamics of the optimistic problem as a plain field.
VectorField hallucinated_field(std::shared_ptr<const GPPosterior> post, double beta_n, int d_x,
                               int d_u);
VectorField mean_field(std::shared_ptr<const GPPosterior> post, int d_x);

/// Receding-horizon tracker of an open-loop plan. Keeps the previous solution
/// for a one-knot shifted warm start.
class MpcTracker {
 public:
  explicit MpcTracker(ILQRConfig cfg) : cfg_(std::move(cfg)) {}

  /// `t_now` must lie on the plan's knot grid (within 1e−9 of a knot).
  Eigen::VectorXd control(const OpenLoopPlan& plan, const VectorField& model,
                          const Eigen::VectorXd& x_now, double t_now, double T_mpc);

  int nonconverged() const { return nonconverged_; }
  int solves() const { return solves_; }
  void reset();

 private:
  ILQRConfig cfg_;
  std::vector<Eigen::VectorXd> warm_;
  int last_knot_ = -1;
  int nonconverged_ = 0;
  int solves_ = 0;
};

Eigen::VectorXd mpc_track(const OpenLoopPlan& plan, const VectorField& model,
                          const Eigen::VectorXd& x_now, double t_now, double T_mpc,
                          const ILQRConfig& cfg);

struct BaselineResult {
  OpenLoopPlan plan;
  Trajectory rollout;  // true-system rollout on the simulation grid
  double cost = 0.0;   // running_cost of `rollout`
};

/// iLQR on the true dynamics with one knot per simulation step.
BaselineResult continuous_oc_baseline(const EnvSpec& env, const ILQRConfig& cfg,
                                      int steps_per_unit = kDefaultStepsPerUnit);

/// Discrete OC with M−1 held controls on the true dynamics; each hold is
/// integrated with RK4 sub-steps and the continuous cost is optimized.
BaselineResult zoh_baseline(const EnvSpec& env, int M, const ILQRConfig& cfg,
                            int steps_per_unit = kDefaultStepsPerUnit,
                            const OpenLoopPlan* warm_start = nullptr);

/// State after holding u for `duration` with `substeps` RK4 steps.
Eigen::VectorXd zoh_transition(const VectorField& field, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u, double duration, int substeps);

}  // namespace ocorl
