#include "ocorl/mss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ocorl {

Strategy parse_strategy(const std::string& name) {
  if (name == "equidistant") return Strategy::equidistant;
  if (name == "oracle") return Strategy::oracle;
  if (name == "adaptive") return Strategy::adaptive;
  if (name == "max_det") return Strategy::max_det;
  if (name == "max_dist") return Strategy::max_dist;
  throw std::invalid_argument("unknown measurement strategy '" + name + "'");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::equidistant: return "equidistant";
    case Strategy::oracle: return "oracle";
    case Strategy::adaptive: return "adaptive";
    case Strategy::max_det: return "max_det";
    case Strategy::max_dist: return "max_dist";
  }
  return "?";
}

void MeasurementPlan::check(double T) const {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0 || times[i] > T * (1.0 + 1e-12))
      throw std::logic_error("measurement plan: time outside [0, T]");
    if (i > 0 && !(times[i] > times[i - 1]))
      throw std::logic_error("measurement plan: times not strictly increasing");
  }
}

MeasurementPlan equidistant_times(double T, int m) {
  if (m < 1) throw std::invalid_argument("equidistant_times: m must be >= 1");
  MeasurementPlan plan;
  plan.strategy = Strategy::equidistant;
  plan.source = MeasurementSource::schedule;
  for (int i = 1; i <= m; ++i) plan.times.push_back((i - 0.5) * T / m);
  return plan;
}

MeasurementPlan oracle_select(std::span<const double> times, std::span<const double> sq_uncertainty) {
  if (times.empty() || times.size() != sq_uncertainty.size())
    throw std::invalid_argument("oracle_select: need a nonempty, aligned uncertainty profile");
  std::size_t best = 0;
  for (std::size_t i = 1; i < times.size(); ++i)
    if (sq_uncertainty[i] > sq_uncertainty[best]) best = i;
  MeasurementPlan plan;
  plan.strategy = Strategy::oracle;
  plan.source = MeasurementSource::true_trajectory;
  plan.times = {times[best]};
  return plan;
}

double gamma_rate(const AdaptiveConfig& cfg, double delta) {
  const auto& L = cfg.lipschitz;
  return 2.0 * cfg.beta_n * L.sigma * (1.0 + L.policy) *
         std::exp(L.dynamics * (1.0 + L.policy) * delta);
}

double delta_solve(const AdaptiveConfig& cfg) {
  const auto& L = cfg.lipschitz;
  if (!(cfg.beta_n > 0.0 && L.sigma > 0.0 && L.policy >= 0.0 && L.dynamics >= 0.0 && cfg.T > 0.0))
    throw std::invalid_argument("delta_solve: constants must be positive");
  if (L.dynamics == 0.0) return std::min(cfg.T, 1.0 / (2.0 * gamma_rate(cfg, 0.0)));

  auto residual = [&](double d) { return 2.0 * d * gamma_rate(cfg, d) - 1.0; };
  if (residual(cfg.T) <= 0.0) return cfg.T;
  double lo = 0.0, hi = cfg.T;
  for (int i = 0; i < 2000; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (residual(mid) < 0.0) lo = mid;
    else hi = mid;
  }
  return std::abs(residual(lo)) <= std::abs(residual(hi)) ? lo : hi;
}

int adaptive_measurement_count(double delta, double T) {
  if (!(delta > 0.0)) throw std::invalid_argument("adaptive_measurement_count: delta must be positive");
  // Guard against T/Δ landing a hair above an integer.
  return std::max(1, static_cast<int>(std::ceil(T / delta - 1e-9)));
}

MeasurementPlan adaptive_receding_times(std::span<const BucketProfile> buckets, double delta, double T) {
  if (!(delta > 0.0)) throw std::invalid_argument("adaptive_receding_times: delta must be positive");
  MeasurementPlan plan;
  plan.strategy = Strategy::adaptive;
  plan.source = MeasurementSource::hallucinated_trajectory;
  double previous = -1.0;
  for (const BucketProfile& b : buckets) {
    if (b.times.size() != b.sigma_norm.size())
      throw std::invalid_argument("adaptive_receding_times: misaligned bucket profile");
    long best = -1;
    for (std::size_t i = 0; i < b.times.size(); ++i) {
      if (!(b.times[i] > previous) || b.times[i] > T) continue;
      if (best < 0 || b.sigma_norm[i] > b.sigma_norm[static_cast<std::size_t>(best)])
        best = static_cast<long>(i);
    }
    if (best < 0) continue;
    previous = b.times[static_cast<std::size_t>(best)];
    plan.times.push_back(previous);
  }
  return plan;
}

MeasurementPlan adaptive_receding_times(const GPPosterior& post, std::span<const Trajectory> buckets,
                                        double delta, double T) {
  std::vector<BucketProfile> profiles;
  profiles.reserve(buckets.size());
  for (const Trajectory& traj : buckets) {
    BucketProfile p;
    p.times = traj.times;
    for (std::size_t i = 0; i < traj.size(); ++i) {
      Eigen::VectorXd z(traj.states[i].size() + traj.controls[i].size());
      z << traj.states[i], traj.controls[i];
      p.sigma_norm.push_back(std::sqrt(post.output_dim() * post.variance(z)));
    }
    profiles.push_back(std::move(p));
  }
  return adaptive_receding_times(std::span<const BucketProfile>(profiles), delta, T);
}

Eigen::MatrixXd kernel_distance_matrix(const Eigen::MatrixXd& post_cov) {
  const Eigen::Index g = post_cov.rows();
  const Eigen::VectorXd diag = post_cov.diagonal().cwiseMax(kVarianceFloor);
  Eigen::MatrixXd d(g, g);
  for (Eigen::Index j = 0; j < g; ++j)
    for (Eigen::Index i = 0; i < g; ++i)
      d(i, j) = i == j ? 0.0 : std::sqrt(std::max(diag(i) + diag(j) - 2.0 * post_cov(i, j), 0.0));
  return d;
}

namespace {

void check_grid(std::span<const double> times, const Eigen::MatrixXd& points, int M) {
  if (static_cast<Eigen::Index>(times.size()) != points.rows())
    throw std::invalid_argument("greedy selection: times and points differ in length");
  if (M < 1) throw std::invalid_argument("greedy selection: M must be >= 1");
  if (M > static_cast<int>(times.size()))
    throw std::invalid_argument("greedy selection: grid has fewer than M candidates");
}

Eigen::Index seed_index(const Eigen::VectorXd& diag) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < diag.size(); ++i)
    if (diag(i) > diag(best)) best = i;
  return best;
}

MeasurementPlan sorted_plan(std::span<const double> times, const std::vector<int>& order,
                            Strategy strategy) {
  MeasurementPlan plan;
  plan.strategy = strategy;
  plan.source = MeasurementSource::hallucinated_trajectory;
  for (int i : order) plan.times.push_back(times[static_cast<std::size_t>(i)]);
  std::sort(plan.times.begin(), plan.times.end());
  return plan;
}

}  // namespace

GreedySelection greedy_max_det(const GPPosterior& post, std::span<const double> times,
                               const Eigen::MatrixXd& points, int M) {
  check_grid(times, points, M);
  const Eigen::MatrixXd cov = post.post_cov_matrix(points);
  const Eigen::Index g = cov.rows();
  Eigen::VectorXd var = cov.diagonal().cwiseMax(kVarianceFloor);
  std::vector<bool> taken(static_cast<std::size_t>(g), false);
  // Rows of `basis` are pivoted Cholesky columns: var(i) is the Schur complement of i given the picks.
  Eigen::MatrixXd basis(M, g);

  GreedySelection out;
  for (int step = 0; step < M; ++step) {
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < g; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      if (best < 0 || var(i) > var(best)) best = i;
    }
    const double pivot = std::max(var(best), kVarianceFloor);
    out.order.push_back(static_cast<int>(best));
    out.gains.push_back(std::log(pivot));
    taken[static_cast<std::size_t>(best)] = true;

    Eigen::VectorXd col = cov.col(best);
    for (int j = 0; j < step; ++j) col -= basis(j, best) * basis.row(j).transpose();
    col /= std::sqrt(pivot);
    basis.row(step) = col.transpose();
    var = (var.array() - col.array().square()).cwiseMax(kVarianceFloor);
  }
  out.plan = sorted_plan(times, out.order, Strategy::max_det);
  return out;
}

GreedySelection greedy_max_dist(const GPPosterior& post, std::span<const double> times,
                                const Eigen::MatrixXd& points, int M) {
  check_grid(times, points, M);
  const Eigen::MatrixXd cov = post.post_cov_matrix(points);
  const Eigen::MatrixXd dist = kernel_distance_matrix(cov);
  const Eigen::Index g = cov.rows();
  std::vector<bool> taken(static_cast<std::size_t>(g), false);

  GreedySelection out;
  const Eigen::Index seed = seed_index(cov.diagonal().cwiseMax(kVarianceFloor));
  out.order.push_back(static_cast<int>(seed));
  out.gains.push_back(std::sqrt(std::max(cov(seed, seed), kVarianceFloor)));
  taken[static_cast<std::size_t>(seed)] = true;
  Eigen::VectorXd nearest = dist.col(seed);

  for (int step = 1; step < M; ++step) {
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < g; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      if (best < 0 || nearest(i) > nearest(best)) best = i;
    }
    out.order.push_back(static_cast<int>(best));
    out.gains.push_back(nearest(best));
    taken[static_cast<std::size_t>(best)] = true;
    nearest = nearest.cwiseMin(dist.col(best));
  }
  out.plan = sorted_plan(times, out.order, Strategy::max_dist);
  return out;
}

}  // namespace ocorl
