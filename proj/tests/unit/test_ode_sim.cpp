#include "ocorl/envs.hpp"
#include "ocorl/ode_sim.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace ocorl;

namespace {

double growth_error(int steps) {
  const VectorField f = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) { return x; };
  const Trajectory tr = integrate(f, Eigen::VectorXd::Ones(1), ControlSignal::constant(Eigen::VectorXd::Zero(1)),
                                  1.0, {IntegratorMethod::rk4, steps});
  return std::abs(tr.states.back()(0) - std::exp(1.0));
}

}  // namespace

TEST_CASE("rk4 converges at fourth order on exponential growth") {
  const double order = std::log2(growth_error(20) / growth_error(40));
  CHECK(order == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("trajectory grid invariants") {
  const EnvSpec env = make_env("pendulum");
  const Trajectory tr = integrate(env.dynamics, env.x0, ControlSignal::constant(Eigen::VectorXd::Zero(1)), 3.0,
                                  {IntegratorMethod::rk4, 7});
  CHECK(tr.size() == 8);
  CHECK_NOTHROW(tr.check(3.0));
  CHECK(tr.times.back() == 3.0);
  CHECK_THROWS_AS(tr.check(2.0), std::logic_error);
  CHECK_THROWS_AS(integrate(env.dynamics, env.x0, ControlSignal::constant(Eigen::VectorXd::Zero(1)), 0.0, {}),
                  std::invalid_argument);
}

TEST_CASE("zero-order hold switches exactly at knots") {
  const ControlSignal s = ControlSignal::zero_order_hold(
      {0.0, 1.0, 2.0}, {Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 2.0),
                        Eigen::VectorXd::Constant(1, 3.0)});
  CHECK(s(0.5)(0) == 1.0);
  CHECK(s(1.0)(0) == 2.0);
  CHECK(s.left_limit(1.0)(0) == 1.0);
  CHECK(s(7.0)(0) == 3.0);
  CHECK_THROWS_AS(ControlSignal::zero_order_hold({1.0, 0.0}, {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)}),
                  std::invalid_argument);
}

TEST_CASE("held controls on a linear system match the matrix exponential") {
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 0.0, 1.0, -2.0, -0.3;
  B << 0.0, 1.0;
  const VectorField f = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& u) -> Eigen::VectorXd {
    return A * x + B * u;
  };
  const ControlSignal s = ControlSignal::zero_order_hold(
      {0.0, 0.5, 1.0, 1.5}, {Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, -2.0),
                             Eigen::VectorXd::Constant(1, 0.5), Eigen::VectorXd::Constant(1, 0.0)});
  const Eigen::Vector2d x0(1.0, 0.0);
  const Trajectory tr = integrate(f, x0, s, 2.0, {IntegratorMethod::rk4, 400});
  Eigen::VectorXd x = x0;
  const double us[] = {1.0, -2.0, 0.5, 0.0};
  for (double u : us) x = oracle::zoh_exact(A, B, x, Eigen::VectorXd::Constant(1, u), 0.5);
  CHECK((tr.states.back() - x).norm() < 1e-9);
}

TEST_CASE("pendulum energy is conserved") {
  const EnvSpec env = make_env("pendulum");
  const double gl = 9.81 / 5.0;
  auto energy = [&](const Eigen::VectorXd& x) { return 0.5 * x(1) * x(1) + gl * std::cos(x(0)); };
  const Eigen::Vector2d x0(2.0, 0.5);
  const Trajectory tr = integrate(env.dynamics, x0, ControlSignal::constant(Eigen::VectorXd::Zero(1)), 10.0,
                                  {IntegratorMethod::rk4, 2000});
  CHECK(std::abs(energy(tr.states.back()) - energy(x0)) < 1e-6);
}

TEST_CASE("running cost is a trapezoid of the quadratic") {
  CostSpec c;
  c.Q = Eigen::MatrixXd::Identity(1, 1);
  c.R = Eigen::MatrixXd::Identity(1, 1) * 2.0;
  c.x_target = Eigen::VectorXd::Zero(1);
  c.u_target = Eigen::VectorXd::Zero(1);
  Trajectory tr;
  tr.times = {0.0, 1.0, 3.0};
  tr.states = {Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 2.0),
               Eigen::VectorXd::Constant(1, 0.0)};
  tr.controls = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Zero(1)};
  // knot costs 1, 6, 0
  CHECK(running_cost(tr, c) == doctest::Approx(0.5 * (1 + 6) + 1.0 * (6 + 0)));
}

TEST_CASE("cost validation rejects indefinite weights") {
  CostSpec c;
  c.Q = Eigen::MatrixXd::Identity(2, 2);
  c.Q(1, 1) = -1.0;
  c.R = Eigen::MatrixXd::Identity(1, 1);
  c.x_target = Eigen::VectorXd::Zero(2);
  c.u_target = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("blow-up raises an integration error with its time") {
  const VectorField f = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) -> Eigen::VectorXd {
    return x.array().square().matrix();
  };
  try {
    integrate(f, Eigen::VectorXd::Ones(1), ControlSignal::constant(Eigen::VectorXd::Zero(1)), 5.0,
              {IntegratorMethod::rk4, 50});
    FAIL("expected an integration error");
  } catch (const IntegrationError& e) {
    CHECK(e.time() > 0.9);
    CHECK(e.time() <= 5.0);
  }
}

TEST_CASE("noisy derivative observations") {
  const VectorField f = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u) -> Eigen::VectorXd {
    return x + u;
  };
  std::mt19937_64 rng(1);
  const Eigen::Vector2d x(1.0, 2.0), u(0.5, 0.5);
  CHECK(observe_derivative(f, x, u, 0.0, rng) == Eigen::Vector2d(1.5, 2.5));
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double e = observe_derivative(f, x, u, 0.3, rng)(0) - 1.5;
    sum += e;
    sq += e * e;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::sqrt(sq / n) == doctest::Approx(0.3).epsilon(0.03));
  CHECK_THROWS_AS(observe_derivative(f, x, u, -1.0, rng), std::invalid_argument);
}

TEST_CASE("zero field keeps the state") {
  const VectorField f = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) -> Eigen::VectorXd {
    return Eigen::VectorXd::Zero(x.size());
  };
  const Trajectory tr = integrate(f, Eigen::Vector2d(1, 2), ControlSignal::constant(Eigen::VectorXd::Zero(1)), 5.0,
                                  {IntegratorMethod::rk4, 50});
  for (const auto& x : tr.states) CHECK(x == Eigen::Vector2d(1, 2));
}

TEST_CASE("exponential growth at one hundred steps") {
  CHECK(growth_error(100) < 1e-8);
}

TEST_CASE("running cost reference cases") {
  CostSpec c;
  c.Q = Eigen::MatrixXd::Identity(2, 2);
  c.R = Eigen::MatrixXd::Zero(1, 1);
  c.x_target = Eigen::Vector2d(1.0, -1.0);
  c.u_target = Eigen::VectorXd::Constant(1, 0.5);
  Trajectory on_target;
  for (int i = 0; i <= 10; ++i) {
    on_target.times.push_back(0.3 * i);
    on_target.states.push_back(c.x_target);
    on_target.controls.push_back(c.u_target);
  }
  CHECK(running_cost(on_target, c) == 0.0);
  Trajectory offset = on_target;
  const Eigen::Vector2d d(0.5, 2.0);
  for (auto& x : offset.states) x += d;
  CHECK(running_cost(offset, c) == doctest::Approx(d.squaredNorm() * 3.0).epsilon(1e-14));
}

TEST_CASE("trapezoid error shrinks at second order") {
  CostSpec c;
  c.Q = Eigen::MatrixXd::Identity(1, 1);
  c.R = Eigen::MatrixXd::Zero(1, 1);
  c.x_target = Eigen::VectorXd::Zero(1);
  c.u_target = Eigen::VectorXd::Zero(1);
  // state x(t) = t on [0, 1]: integrand t², exact integral 1/3
  auto err = [&](int n) {
    Trajectory tr;
    for (int i = 0; i <= n; ++i) {
      tr.times.push_back(static_cast<double>(i) / n);
      tr.states.push_back(Eigen::VectorXd::Constant(1, static_cast<double>(i) / n));
      tr.controls.push_back(Eigen::VectorXd::Zero(1));
    }
    return std::abs(running_cost(tr, c) - 1.0 / 3.0);
  };
  const double slope = std::log(err(10) / err(80)) / std::log(8.0);
  CHECK(slope == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("noisy observations are reproducible and unbiased") {
  const EnvSpec env = make_env("pendulum");
  const Eigen::Vector2d x(0.4, -0.2);
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.3);
  std::mt19937_64 a(7), b(7);
  CHECK(observe_derivative(env.dynamics, x, u, 0.2, a) == observe_derivative(env.dynamics, x, u, 0.2, b));
  const Eigen::VectorXd f = env.dynamics(x, u);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(2);
  const int n = 10000;
  for (int i = 0; i < n; ++i) sum += observe_derivative(env.dynamics, x, u, 0.2, a);
  CHECK(((sum / n) - f).cwiseAbs().maxCoeff() < 4.0 * 0.2 / 100.0);
}
