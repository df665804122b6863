#include "ocorl/envs.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace ocorl {

namespace {

std::atomic<long> g_cancer_clamps{0};

constexpr double kPi = std::numbers::pi;

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

CostSpec quadratic_cost(int d_x, int d_u, const Eigen::VectorXd& x_target) {
  CostSpec c;
  c.Q = Eigen::MatrixXd::Identity(d_x, d_x);
  c.R = Eigen::MatrixXd::Identity(d_u, d_u);
  c.x_target = x_target;
  c.u_target = Eigen::VectorXd::Zero(d_u);
  return c;
}

EnvSpec cancer() {
  EnvSpec e;
  e.name = "cancer";
  e.d_x = 1;
  e.d_u = 1;
  constexpr double r = 0.3, delta = 0.45;
  e.dynamics = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    double s = x(0);
    if (s < 1e-6) {
      g_cancer_clamps.fetch_add(1, std::memory_order_relaxed);
      s = 1e-6;
    }
    Eigen::VectorXd dx(1);
    dx(0) = r * s * std::log(1.0 / s) - delta * u(0) * s;
    return dx;
  };
  e.x0 = vec({0.975});
  e.T = 20.0;
  e.cost = quadratic_cost(1, 1, vec({0.54}));
  e.N = 20;
  e.M = 10;
  e.T_mpc = 5.0;
  e.input_lower = vec({0.3, -0.5});
  e.input_upper = vec({1.1, 1.5});
  return e;
}

EnvSpec glucose() {
  EnvSpec e;
  e.name = "glucose";
  e.d_x = 2;
  e.d_u = 1;
  constexpr double a = 1.0, b = 1.0, c = 1.0;
  e.dynamics = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    Eigen::VectorXd dx(2);
    dx(0) = -a * x(0) - b * x(1);
    dx(1) = -c * x(1) + u(0);
    return dx;
  };
  e.x0 = vec({0.75, 0.0});
  e.T = 0.45;
  e.cost = quadratic_cost(2, 1, vec({0.47, 0.33}));
  e.N = 20;
  e.M = 10;
  e.T_mpc = 0.2;
  e.input_lower = vec({0.0, -0.5, -3.0});
  e.input_upper = vec({1.0, 0.5, 3.0});
  return e;
}

EnvSpec pendulum() {
  EnvSpec e;
  e.name = "pendulum";
  e.d_x = 2;
  e.d_u = 1;
  constexpr double g = 9.81, l = 5.0;
  e.dynamics = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    Eigen::VectorXd dx(2);
    dx(0) = x(1);
    dx(1) = g / l * std::sin(x(0)) + u(0);
    return dx;
  };
  // Hanging at rest; the upright target is x = 0.
  e.x0 = vec({kPi, 0.0});
  e.T = 10.0;
  e.cost = quadratic_cost(2, 1, vec({0.0, 0.0}));
  e.N = 20;
  e.M = 10;
  e.T_mpc = 6.0;
  e.input_lower = vec({-1.0, -3.0, -4.0});
  e.input_upper = vec({4.5, 3.0, 4.0});
  return e;
}

EnvSpec mountain_car() {
  EnvSpec e;
  e.name = "mountain_car";
  e.d_x = 2;
  e.d_u = 1;
  e.dynamics = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    Eigen::VectorXd dx(2);
    dx(0) = 10.0 * x(1);
    dx(1) = 3.5 * u(0) - 2.5 * std::cos(3.0 * x(0));
    return dx;
  };
  // Valley bottom of the cos(3 x₀) potential.
  e.x0 = vec({-kPi / 6.0, 0.0});
  e.T = 1.0;
  e.cost = quadratic_cost(2, 1, vec({kPi / 6.0, 0.0}));
  e.N = 40;
  e.M = 10;
  e.T_mpc = 1.0;
  e.input_lower = vec({-1.2, -0.5, -3.0});
  e.input_upper = vec({1.2, 0.5, 3.0});
  return e;
}

EnvSpec cart_pole() {
  EnvSpec e;
  e.name = "cart_pole";
  e.d_x = 4;
  e.d_u = 1;
  constexpr double m_cart = 1.0, m_pole = 0.1, l = 0.5, g = 9.81;
  // State (p, θ, ṗ, θ̇) with θ = 0 upright.
  e.dynamics = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    const double s = std::sin(x(1)), c = std::cos(x(1));
    const double w = x(3);
    const double denom = m_cart + m_pole * s * s;
    Eigen::VectorXd dx(4);
    dx(0) = x(2);
    dx(1) = w;
    dx(2) = (-l * m_pole * s * w * w + u(0) + m_pole * g * c * s) / denom;
    dx(3) = ((m_cart + m_pole) * g * s + u(0) * c - l * m_pole * c * s * w * w) / (l * denom);
    return dx;
  };
  e.x0 = vec({0.0, kPi, 0.0, 0.0});
  e.T = 10.0;
  e.cost = quadratic_cost(4, 1, Eigen::VectorXd::Zero(4));
  e.N = 40;
  e.M = 10;
  e.T_mpc = 5.0;
  e.input_lower = vec({-3.0, -1.5, -5.0, -10.0, -10.0});
  e.input_upper = vec({3.0, 4.5, 5.0, 10.0, 10.0});
  return e;
}

Eigen::VectorXd uniform_in_box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                               std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd z(lo.size());
  for (Eigen::Index i = 0; i < lo.size(); ++i) z(i) = lo(i) + unit(rng) * (hi(i) - lo(i));
  return z;
}

}  // namespace

void EnvSpec::validate() const {
  if (d_x < 1 || d_u < 1) throw std::invalid_argument("env " + name + ": bad dimensions");
  if (x0.size() != d_x) throw std::invalid_argument("env " + name + ": x0 dimension mismatch");
  if (!(T > 0.0) || !(T_mpc > 0.0)) throw std::invalid_argument("env " + name + ": horizons must be positive");
  if (N < 1 || M < 1) throw std::invalid_argument("env " + name + ": N and M must be >= 1");
  if (input_lower.size() != input_dim() || input_upper.size() != input_dim() ||
      ((input_upper - input_lower).array() <= 0.0).any())
    throw std::invalid_argument("env " + name + ": bad normalization box");
  if (cost.Q.rows() != d_x || cost.R.rows() != d_u)
    throw std::invalid_argument("env " + name + ": cost dimension mismatch");
  cost.validate();
}

const std::vector<std::string>& env_names() {
  static const std::vector<std::string> names{"cancer", "glucose", "pendulum", "mountain_car",
                                              "cart_pole"};
  return names;
}

EnvSpec make_env(const std::string& name) {
  EnvSpec e;
  if (name == "cancer") e = cancer();
  else if (name == "glucose") e = glucose();
  else if (name == "pendulum") e = pendulum();
  else if (name == "mountain_car") e = mountain_car();
  else if (name == "cart_pole") e = cart_pole();
  else throw std::invalid_argument("unknown environment '" + name + "'");
  e.validate();
  estimate_lipschitz(e);
  return e;
}

EnvSpec make_gp_prior_env(const SyntheticEnvOptions& options) {
  static constexpr int d_x = 2, d_u = 1, d_z = d_x + d_u;
  EnvSpec e;
  e.name = "gp_prior";
  e.d_x = d_x;
  e.d_u = d_u;
  e.input_lower = Eigen::VectorXd::Constant(d_z, -1.0);
  e.input_upper = Eigen::VectorXd::Constant(d_z, 1.0);

  // f_j(z) = sqrt(2 s / D) Σ w_ij cos(ω_i·z / l + b_i) approximates a draw from GP(0, s·rbf(l)).
  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  const int D = options.features;
  Eigen::MatrixXd omega(D, d_z);
  Eigen::VectorXd offset(D);
  Eigen::MatrixXd weights(d_x, D);
  for (int i = 0; i < D; ++i) {
    for (int k = 0; k < d_z; ++k) omega(i, k) = gauss(rng) / options.lengthscale;
    offset(i) = phase(rng);
  }
  for (int j = 0; j < d_x; ++j)
    for (int i = 0; i < D; ++i) weights(j, i) = gauss(rng);
  weights *= std::sqrt(2.0 * options.signal_variance / D);

  e.dynamics = [omega, offset, weights](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    Eigen::VectorXd z(d_z);
    z << x, u;
    const Eigen::VectorXd features = ((omega * z) + offset).array().cos().matrix();
    return Eigen::VectorXd(weights * features);
  };
  e.x0 = Eigen::VectorXd::Zero(d_x);
  e.T = options.T;
  e.cost = quadratic_cost(d_x, d_u, Eigen::VectorXd::Constant(d_x, 0.5));
  e.N = 32;
  e.M = 5;
  e.T_mpc = options.T;
  e.validate();
  estimate_lipschitz(e, 2000, options.lengthscale, options.signal_variance);
  return e;
}

void estimate_lipschitz(EnvSpec& env, int samples, double normalized_lengthscale,
                        double signal_variance) {
  std::mt19937_64 rng(0x5eedULL);
  const int dz = env.input_dim();
  double max_f = 0.0, max_c = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Eigen::VectorXd z = uniform_in_box(env.input_lower, env.input_upper, rng);
    Eigen::MatrixXd jac(env.d_x, dz);
    Eigen::VectorXd grad_c(dz);
    for (int k = 0; k < dz; ++k) {
      const double eps = 1e-6 * (1.0 + std::abs(z(k)));
      Eigen::VectorXd zp = z, zm = z;
      zp(k) += eps;
      zm(k) -= eps;
      const auto xp = zp.head(env.d_x), up = zp.tail(env.d_u);
      const auto xm = zm.head(env.d_x), um = zm.tail(env.d_u);
      jac.col(k) = (env.dynamics(xp, up) - env.dynamics(xm, um)) / (2.0 * eps);
      grad_c(k) = (env.cost(xp, up) - env.cost(xm, um)) / (2.0 * eps);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
    max_f = std::max(max_f, svd.singularValues()(0));
    max_c = std::max(max_c, grad_c.norm());
  }
  env.lipschitz.dynamics = max_f;
  env.lipschitz.cost = max_c;
  const double min_halfwidth = (0.5 * (env.input_upper - env.input_lower)).minCoeff();
  env.lipschitz.sigma = std::sqrt(signal_variance) / (normalized_lengthscale * min_halfwidth);
}

long cancer_clamp_count() { return g_cancer_clamps.load(std::memory_order_relaxed); }

}  // namespace ocorl
