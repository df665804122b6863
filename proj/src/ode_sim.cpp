#include "ocorl/ode_sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ocorl {

ControlSignal ControlSignal::callable(std::function<Eigen::VectorXd(double)> fn) {
  ControlSignal s;
  s.fn_ = std::move(fn);
  return s;
}

ControlSignal ControlSignal::constant(const Eigen::VectorXd& u) {
  return zero_order_hold({0.0}, {u});
}

ControlSignal ControlSignal::zero_order_hold(std::vector<double> times,
                                             std::vector<Eigen::VectorXd> values) {
  if (times.empty() || times.size() != values.size())
    throw std::invalid_argument("zero_order_hold: times and values must be nonempty and aligned");
  if (!std::is_sorted(times.begin(), times.end()))
    throw std::invalid_argument("zero_order_hold: times must be sorted");
  ControlSignal s;
  s.times_ = std::move(times);
  s.values_ = std::move(values);
  return s;
}

namespace {

// Hold switches closer than this to t count as reached; absorbs grid round-off.
double switch_tolerance(double t) { return 1e-9 * std::max(1.0, std::abs(t)); }

}  // namespace

Eigen::VectorXd ControlSignal::operator()(double t) const {
  if (fn_) return fn_(t);
  const auto it = std::upper_bound(times_.begin(), times_.end(), t + switch_tolerance(t));
  const auto idx = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
  return values_[idx];
}

Eigen::VectorXd ControlSignal::left_limit(double t) const {
  if (fn_) return fn_(t);
  const auto it = std::lower_bound(times_.begin(), times_.end(), t - switch_tolerance(t));
  const auto idx = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
  return values_[idx];
}

void Trajectory::check(double horizon) const {
  if (times.empty() || times.size() != states.size() || times.size() != controls.size())
    throw std::logic_error("trajectory: times/states/controls lengths differ");
  if (times.front() != 0.0) throw std::logic_error("trajectory: first time is not 0");
  if (std::abs(times.back() - horizon) > 1e-9 * std::max(1.0, horizon))
    throw std::logic_error("trajectory: last time is not the horizon");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw std::logic_error("trajectory: times not strictly increasing");
}

double CostSpec::operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  const Eigen::VectorXd dx = x - x_target;
  const Eigen::VectorXd du = u - u_target;
  return dx.dot(Q * dx) + du.dot(R * du);
}

void CostSpec::validate() const {
  if (Q.rows() != Q.cols() || R.rows() != R.cols() || x_target.size() != Q.rows() ||
      u_target.size() != R.rows())
    throw std::invalid_argument("cost: inconsistent dimensions");
  if (!Q.isApprox(Q.transpose()) || !R.isApprox(R.transpose()))
    throw std::invalid_argument("cost: Q and R must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eq(Q), er(R);
  if (eq.eigenvalues().minCoeff() < -1e-12 || er.eigenvalues().minCoeff() < -1e-12)
    throw std::invalid_argument("cost: Q and R must be positive semidefinite");
}

Eigen::VectorXd rk4_step(const VectorField& field, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                         double h) {
  const Eigen::VectorXd k1 = field(x, u);
  const Eigen::VectorXd k2 = field(x + 0.5 * h * k1, u);
  const Eigen::VectorXd k3 = field(x + 0.5 * h * k2, u);
  const Eigen::VectorXd k4 = field(x + h * k3, u);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory integrate(const VectorField& field, const Eigen::VectorXd& x0, const ControlSignal& control,
                     double horizon, const IntegratorConfig& cfg) {
  if (!(horizon > 0.0)) throw std::invalid_argument("integrate: horizon must be positive");
  if (cfg.steps < 1) throw std::invalid_argument("integrate: steps must be >= 1");
  const double h = horizon / cfg.steps;

  Trajectory traj;
  traj.times.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  traj.states.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  traj.controls.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  traj.controls.push_back(control(0.0));

  Eigen::VectorXd x = x0;
  for (int i = 0; i < cfg.steps; ++i) {
    const double t = i * h;
    const Eigen::VectorXd u0 = control(t);
    const Eigen::VectorXd um = control(t + 0.5 * h);
    const Eigen::VectorXd u1 = control.left_limit(t + h);
    const Eigen::VectorXd k1 = field(x, u0);
    const Eigen::VectorXd k2 = field(x + 0.5 * h * k1, um);
    const Eigen::VectorXd k3 = field(x + 0.5 * h * k2, um);
    const Eigen::VectorXd k4 = field(x + h * k3, u1);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double t_next = (i + 1 == cfg.steps) ? horizon : (i + 1) * h;
    if (!x.allFinite()) {
      std::ostringstream msg;
      msg << "integrate: non-finite state at t = " << t_next;
      throw IntegrationError(msg.str(), t_next);
    }
    traj.times.push_back(t_next);
    traj.states.push_back(x);
    traj.controls.push_back(control(t_next));
  }
  return traj;
}

double running_cost(const Trajectory& traj, const CostSpec& cost) {
  double total = 0.0;
  double prev = cost(traj.states[0], traj.controls[0]);
  for (std::size_t i = 1; i < traj.size(); ++i) {
    const double cur = cost(traj.states[i], traj.controls[i]);
    total += 0.5 * (traj.times[i] - traj.times[i - 1]) * (prev + cur);
    prev = cur;
  }
  return total;
}

Eigen::VectorXd observe_derivative(const VectorField& field, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& u, double sigma, std::mt19937_64& rng) {
  if (sigma < 0.0) throw std::invalid_argument("observe_derivative: sigma must be >= 0");
  Eigen::VectorXd y = field(x, u);
  if (sigma == 0.0) return y;
  std::normal_distribution<double> noise(0.0, sigma);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += noise(rng);
  return y;
}

}  // namespace ocorl
