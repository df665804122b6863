#include "ocorl/mss.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace ocorl;

namespace {

struct RandomGrid {
  GPPosterior post;
  std::vector<double> times;
  Eigen::MatrixXd points;
};

RandomGrid random_grid(std::mt19937_64& rng, int g) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  KernelSpec spec;
  spec.lengthscales = Eigen::VectorXd::Constant(3, 0.8);
  GPDataset data(3, 2, 0.1);
  for (int i = 0; i < 3; ++i) data.append(Eigen::Vector3d(u(rng), u(rng), u(rng)), Eigen::Vector2d(u(rng), u(rng)));
  RandomGrid out{gp_fit(data, spec), {}, Eigen::MatrixXd(g, 3)};
  for (int i = 0; i < g; ++i) {
    out.times.push_back(0.1 * (i + 1));
    out.points.row(i) = Eigen::RowVector3d(u(rng), u(rng), u(rng));
  }
  return out;
}

}  // namespace

TEST_CASE("strategy names round-trip") {
  for (Strategy s : {Strategy::equidistant, Strategy::oracle, Strategy::adaptive, Strategy::max_det,
                     Strategy::max_dist})
    CHECK(parse_strategy(to_string(s)) == s);
  CHECK_THROWS_AS(parse_strategy("random"), std::invalid_argument);
}

TEST_CASE("equidistant times are bucket midpoints") {
  const MeasurementPlan p = equidistant_times(2.0, 4);
  REQUIRE(p.times.size() == 4);
  CHECK(p.times[0] == doctest::Approx(0.25));
  CHECK(p.times[3] == doctest::Approx(1.75));
  CHECK_NOTHROW(p.check(2.0));
  CHECK_THROWS_AS(equidistant_times(1.0, 0), std::invalid_argument);
}

TEST_CASE("plan checks") {
  MeasurementPlan p;
  p.times = {0.2, 0.2};
  CHECK_THROWS_AS(p.check(1.0), std::logic_error);
  p.times = {0.2, 1.5};
  CHECK_THROWS_AS(p.check(1.0), std::logic_error);
}

TEST_CASE("oracle picks the earliest maximum") {
  const std::vector<double> t{0.0, 0.5, 1.0, 1.5};
  const std::vector<double> s{1.0, 3.0, 3.0, 2.0};
  const MeasurementPlan p = oracle_select(t, s);
  REQUIRE(p.times.size() == 1);
  CHECK(p.times[0] == 0.5);
}

TEST_CASE("delta solves its fixed point") {
  AdaptiveConfig c;
  c.lipschitz = {2.0, 1.0, 0.7, 1.0};
  c.beta_n = 1.5;
  c.T = 10.0;
  const double d = delta_solve(c);
  CHECK(std::abs(d * 2.0 * gamma_rate(c, d) - 1.0) < 1e-9);
}

TEST_CASE("delta has a closed form without drift") {
  AdaptiveConfig c;
  c.lipschitz = {0.0, 1.0, 0.5, 1.0};
  c.beta_n = 2.0;
  c.T = 10.0;
  // Γ = 2·2·0.5·2 = 4, so Δ = 1/8
  CHECK(delta_solve(c) == 0.125);
  CHECK(adaptive_measurement_count(0.125, 10.0) == 80);
}

TEST_CASE("delta is capped at the horizon") {
  AdaptiveConfig c;
  c.lipschitz = {0.1, 1.0, 0.01, 1.0};
  c.beta_n = 0.1;
  c.T = 1.0;
  CHECK(delta_solve(c) == 1.0);
  CHECK(adaptive_measurement_count(1.0, 1.0) == 1);
  c.beta_n = 0.0;
  CHECK_THROWS_AS(delta_solve(c), std::invalid_argument);
}

TEST_CASE("receding selection takes one later point per bucket") {
  std::vector<BucketProfile> buckets(3);
  buckets[0] = {{0.0, 0.1, 0.2}, {1.0, 5.0, 2.0}};
  // the best value lies before the previous pick and is skipped
  buckets[1] = {{0.05, 0.3, 0.4}, {9.0, 1.0, 1.0}};
  buckets[2] = {{0.4, 0.5, 0.6}, {1.0, 2.0, 3.0}};
  const MeasurementPlan p = adaptive_receding_times(buckets, 0.2, 0.6);
  REQUIRE(p.times.size() == 3);
  CHECK(p.times[0] == 0.1);
  CHECK(p.times[1] == 0.3);
  CHECK(p.times[2] == 0.6);
  CHECK_NOTHROW(p.check(0.6));
}

TEST_CASE("greedy selections match their dense oracles") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const RandomGrid grid = random_grid(rng, 6);
    const Eigen::MatrixXd cov = grid.post.post_cov_matrix(grid.points);
    for (int M = 1; M <= 3; ++M) {
      const GreedySelection det = greedy_max_det(grid.post, grid.times, grid.points, M);
      const GreedySelection dist = greedy_max_dist(grid.post, grid.times, grid.points, M);
      CHECK(det.order == oracle::greedy_max_det_dense(cov, M, kVarianceFloor));
      CHECK(dist.order == oracle::greedy_max_dist_dense(cov, M, kVarianceFloor));
      CHECK(det.plan.times.size() == static_cast<std::size_t>(M));
      CHECK_NOTHROW(det.plan.check(1.0));
    }
  }
}

TEST_CASE("max-det gains are the log conditional variances") {
  std::mt19937_64 rng(4);
  const RandomGrid grid = random_grid(rng, 8);
  const GreedySelection det = greedy_max_det(grid.post, grid.times, grid.points, 4);
  const Eigen::MatrixXd cov = grid.post.post_cov_matrix(grid.points);
  Eigen::MatrixXd sub(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) sub(i, j) = cov(det.order[static_cast<std::size_t>(i)], det.order[static_cast<std::size_t>(j)]);
  double total = 0.0;
  for (double g : det.gains) total += g;
  CHECK(total == doctest::Approx(oracle::logdet_eigen(sub)).epsilon(1e-8));
}

TEST_CASE("a certain grid falls back to the earliest points") {
  KernelSpec spec;
  spec.lengthscales = Eigen::VectorXd::Constant(1, 0.5);
  GPDataset data(1, 1, 1e-6);
  data.append(Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Zero(1));
  const GPPosterior post = gp_fit(data, spec);
  const Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(4, 1);
  const std::vector<double> t{0.1, 0.2, 0.3, 0.4};
  const GreedySelection det = greedy_max_det(post, t, pts, 2);
  CHECK(det.order == std::vector<int>{0, 1});
  CHECK_THROWS_AS(greedy_max_det(post, t, pts, 5), std::invalid_argument);
}

TEST_CASE("kernel distance is a pseudometric") {
  std::mt19937_64 rng(6);
  const RandomGrid grid = random_grid(rng, 6);
  const Eigen::MatrixXd d = kernel_distance_matrix(grid.post.post_cov_matrix(grid.points));
  for (int i = 0; i < 6; ++i) {
    CHECK(d(i, i) == 0.0);
    for (int j = 0; j < 6; ++j) {
      CHECK(d(i, j) == doctest::Approx(d(j, i)));
      for (int k = 0; k < 6; ++k) CHECK(d(i, k) <= d(i, j) + d(j, k) + 1e-12);
    }
  }
}

TEST_CASE("equidistant reference schedules") {
  const MeasurementPlan p = equidistant_times(10.0, 5);
  const std::vector<double> expected{1, 3, 5, 7, 9};
  REQUIRE(p.times.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(p.times[i] == doctest::Approx(expected[i]));
  CHECK(equidistant_times(3.0, 1).times == std::vector<double>{1.5});
  const MeasurementPlan q = equidistant_times(2.7, 9);
  for (std::size_t i = 1; i < q.times.size(); ++i) CHECK(q.times[i] - q.times[i - 1] == doctest::Approx(0.3));
}

TEST_CASE("oracle selection cases") {
  std::vector<double> t;
  for (int i = 0; i <= 20; ++i) t.push_back(0.1 * i);
  CHECK(oracle_select(t, std::vector<double>(21, 2.0)).times[0] == 0.0);
  std::vector<double> bump;
  for (double ti : t) bump.push_back(-std::pow(ti - 1.3, 2));
  CHECK(oracle_select(t, bump).times[0] == doctest::Approx(1.3));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s;
    for (std::size_t i = 0; i < t.size(); ++i) s.push_back(u(rng));
    std::size_t best = 0;
    for (std::size_t i = 1; i < s.size(); ++i)
      if (s[i] > s[best]) best = i;
    CHECK(oracle_select(t, s).times[0] == t[best]);
  }
}

TEST_CASE("delta reference value and monotonicity in beta") {
  AdaptiveConfig c;
  c.lipschitz = {0.0, 0.0, 1.0, 1.0};
  c.beta_n = 1.0;
  c.T = 10.0;
  CHECK(gamma_rate(c, 0.0) == 2.0);
  CHECK(gamma_rate(c, 3.0) == 2.0);
  CHECK(delta_solve(c) == 0.25);
  c.lipschitz.dynamics = 1.5;
  double prev = 1e9;
  for (double b : {1.0, 2.0, 4.0}) {
    c.beta_n = b;
    const double d = delta_solve(c);
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("receding selection reference cases") {
  const double delta = 0.5;
  std::vector<BucketProfile> flat{{{0.0, 0.25, 0.5}, {1.0, 1.0, 1.0}}};
  CHECK(adaptive_receding_times(flat, delta, 0.5).times == std::vector<double>{0.0});

  std::vector<BucketProfile> peaked;
  for (int b = 0; b < 4; ++b) {
    BucketProfile p;
    for (int i = 0; i <= 5; ++i) {
      p.times.push_back(delta * b + 0.1 * i);
      p.sigma_norm.push_back(static_cast<double>(i));
    }
    peaked.push_back(p);
  }
  const MeasurementPlan p = adaptive_receding_times(peaked, delta, 2.0);
  REQUIRE(p.times.size() == 4);
  for (int b = 0; b < 4; ++b) CHECK(p.times[static_cast<std::size_t>(b)] == doctest::Approx(delta * (b + 1)));

  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<BucketProfile> random;
  for (int b = 0; b < 5; ++b) {
    BucketProfile q;
    for (int i = 1; i <= 8; ++i) {
      q.times.push_back(0.2 * b + 0.025 * i);
      q.sigma_norm.push_back(u(rng));
    }
    random.push_back(q);
  }
  const MeasurementPlan r = adaptive_receding_times(random, 0.2, 1.0);
  REQUIRE(r.times.size() == 5);
  for (std::size_t b = 0; b < 5; ++b) {
    const auto& q = random[b];
    std::size_t best = 0;
    for (std::size_t i = 1; i < q.sigma_norm.size(); ++i)
      if (q.sigma_norm[i] > q.sigma_norm[best]) best = i;
    CHECK(r.times[b] == q.times[best]);
  }
}

TEST_CASE("first greedy pick is the largest posterior variance") {
  std::mt19937_64 rng(31);
  const RandomGrid grid = random_grid(rng, 10);
  int best = 0;
  for (int i = 1; i < 10; ++i)
    if (grid.post.variance(grid.points.row(i).transpose()) > grid.post.variance(grid.points.row(best).transpose()))
      best = i;
  CHECK(greedy_max_det(grid.post, grid.times, grid.points, 1).order == std::vector<int>{best});
  CHECK(greedy_max_dist(grid.post, grid.times, grid.points, 1).order == std::vector<int>{best});
}

TEST_CASE("duplicates are not picked while distinct candidates remain") {
  std::mt19937_64 rng(44);
  RandomGrid grid = random_grid(rng, 6);
  grid.points.row(1) = grid.points.row(0);
  grid.points.row(3) = grid.points.row(2);
  const GreedySelection det = greedy_max_det(grid.post, grid.times, grid.points, 4);
  std::vector<int> sorted = det.order;
  std::sort(sorted.begin(), sorted.end());
  const bool both01 = std::count(sorted.begin(), sorted.end(), 0) + std::count(sorted.begin(), sorted.end(), 1) == 2;
  const bool both23 = std::count(sorted.begin(), sorted.end(), 2) + std::count(sorted.begin(), sorted.end(), 3) == 2;
  CHECK_FALSE(both01);
  CHECK_FALSE(both23);
}
