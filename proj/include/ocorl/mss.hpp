#pragma once

#include "ocorl/envs.hpp"
#include "ocorl/kernel_gp.hpp"
#include "ocorl/ode_sim.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace ocorl {

enum class Strategy { equidistant, oracle, adaptive, max_det, max_dist };

Strategy parse_strategy(const std::string& name);
std::string to_string(Strategy s);

enum class MeasurementSource { schedule, hallucinated_trajectory, true_trajectory };

struct MeasurementPlan {
  std::vector<double> times;
  Strategy strategy = Strategy::equidistant;
  MeasurementSource source = MeasurementSource::schedule;

  /// Throws std::logic_error unless times are strictly increasing inside [0, T].
  void check(double T) const;
};

/// Bucket midpoints (i − ½) T/m, i = 1..m.
MeasurementPlan equidistant_times(double T, int m);

/// Time of the largest squared uncertainty norm; earliest on ties.
MeasurementPlan oracle_select(std::span<const double> times, std::span<const double> sq_uncertainty);

struct AdaptiveConfig {
  LipschitzConstants lipschitz;
  double beta_n = 1.0;
  double T = 1.0;
};

/// Γ_n(Δ) = 2 β_n L_σ (1 + L_π) exp(L_f (1 + L_π) Δ).
double gamma_rate(const AdaptiveConfig& cfg, double delta);

/// Solves Δ = 1/(2 Γ_n(Δ)) on (0, T]; returns T when the root lies beyond it.
double delta_solve(const AdaptiveConfig& cfg);

/// m_n = ceil(T / Δ_n).
int adaptive_measurement_count(double delta, double T);

struct BucketProfile {
  std::vector<double> times;
  std::vector<double> sigma_norm;  // ‖σ_{n−1}(ẑ(t))‖ along the bucket's hallucinated trajectory
};

/// One time per bucket at the largest uncertainty norm (earliest on ties,
/// always later than the previous bucket's pick).
MeasurementPlan adaptive_receding_times(std::span<const BucketProfile> buckets, double delta, double T);

/// Same selection with the norms computed from the posterior along
/// per-bucket (state, control) trajectories.
MeasurementPlan adaptive_receding_times(const GPPosterior& post, std::span<const Trajectory> buckets,
                                        double delta, double T);

struct GreedySelection {
  MeasurementPlan plan;
  std::vector<int> order;      // grid indices in pick order
  std::vector<double> gains;   // max-det: log conditional variance; max-dist: min distance
};

/// `points` holds ẑ(t) per grid time, one row each; `times` is sorted.
GreedySelection greedy_max_det(const GPPosterior& post, std::span<const double> times,
                               const Eigen::MatrixXd& points, int M);
GreedySelection greedy_max_dist(const GPPosterior& post, std::span<const double> times,
                                const Eigen::MatrixXd& points, int M);

/// Pseudometric d_n(t, t′) on the grid from a posterior covariance matrix.
Eigen::MatrixXd kernel_distance_matrix(const Eigen::MatrixXd& post_cov);

/// Lower bound applied to posterior variances before determinants and distances.
inline constexpr double kVarianceFloor = 1e-12;

}  // namespace ocorl
