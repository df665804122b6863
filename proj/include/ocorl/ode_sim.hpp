#pragma once

#include <Eigen/Dense>

#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

namespace ocorl {

/// Right-hand side (x, u) -> ẋ.
using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double time) : std::runtime_error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// A control signal is either a closed-form function of time or a
/// zero-order hold over its own knot grid.
class ControlSignal {
 public:
  static ControlSignal callable(std::function<Eigen::VectorXd(double)> fn);
  static ControlSignal constant(const Eigen::VectorXd& u);
  /// values[i] is held on [times[i], times[i+1]); the last value extends to +inf.
  static ControlSignal zero_order_hold(std::vector<double> times, std::vector<Eigen::VectorXd> values);

  Eigen::VectorXd operator()(double t) const;
  /// Value in effect just before t (differs from operator() only at hold switches).
  Eigen::VectorXd left_limit(double t) const;

 private:
  std::function<Eigen::VectorXd(double)> fn_;
  std::vector<double> times_;
  std::vector<Eigen::VectorXd> values_;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> controls;

  std::size_t size() const { return times.size(); }
  /// Throws std::logic_error when the length or endpoint invariants fail.
  void check(double horizon) const;
};

enum class IntegratorMethod { rk4 };

struct IntegratorConfig {
  IntegratorMethod method = IntegratorMethod::rk4;
  int steps = 200;
};

/// Default knot density of the simulation grid.
inline constexpr int kDefaultStepsPerUnit = 200;

struct CostSpec {
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  Eigen::VectorXd x_target;
  Eigen::VectorXd u_target;

  double operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
  void validate() const;
};

/// One classical RK4 step of length h under a control held constant.
Eigen::VectorXd rk4_step(const VectorField& field, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                         double h);

Trajectory integrate(const VectorField& field, const Eigen::VectorXd& x0, const ControlSignal& control,
                     double horizon, const IntegratorConfig& cfg);

/// Trapezoidal quadrature of the running cost over the trajectory grid.
double running_cost(const Trajectory& traj, const CostSpec& cost);

Eigen::VectorXd observe_derivative(const VectorField& field, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& u, double sigma, std::mt19937_64& rng);

}  // namespace ocorl
