#pragma once

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ocorl {

enum class KernelKind { rbf, linear, matern52 };

KernelKind parse_kernel_kind(const std::string& name);
std::string to_string(KernelKind kind);

/// Stationary kernels are evaluated on raw inputs with per-dimension
/// lengthscales. Normalizing an input box to [-1, 1] with unit lengthscales is
/// the same as setting the raw lengthscale to the box half-width, which is
/// what `kernel_for_box` does.
struct KernelSpec {
  KernelKind kind = KernelKind::rbf;
  Eigen::VectorXd lengthscales;
  double signal_variance = 1.0;

  int input_dim() const { return static_cast<int>(lengthscales.size()); }
  void validate() const;
};

KernelSpec kernel_for_box(KernelKind kind, double normalized_lengthscale, double signal_variance,
                          const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& z, const Eigen::VectorXd& z2);

/// Gram matrix between the rows of `a` and the rows of `b`.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b);

struct GPDataset {
  int input_dim = 0;
  int output_dim = 0;
  double noise_std = 0.1;
  std::vector<Eigen::VectorXd> inputs;
  std::vector<Eigen::VectorXd> targets;

  GPDataset() = default;
  GPDataset(int input_dim, int output_dim, double noise_std);

  std::size_t size() const { return inputs.size(); }
  bool empty() const { return inputs.empty(); }
  void append(const Eigen::VectorXd& z, const Eigen::VectorXd& y);
};

struct Prediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
};

class GPFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Zero-mean GP posterior with one scalar kernel shared by every output
/// dimension. Immutable after `gp_fit`.
class GPPosterior {
 public:
  const KernelSpec& kernel() const { return kernel_; }
  int input_dim() const { return kernel_.input_dim(); }
  int output_dim() const { return output_dim_; }
  std::size_t num_points() const { return static_cast<std::size_t>(inputs_.rows()); }
  double noise_std() const { return noise_std_; }
  double jitter_used() const { return jitter_; }

  /// Training inputs, one row per point.
  const Eigen::MatrixXd& inputs() const { return inputs_; }
  const Eigen::MatrixXd& targets() const { return targets_; }
  /// Lower factor L with L Lᵀ = K + (σ² + jitter) I.
  const Eigen::MatrixXd& chol_factor() const { return chol_; }
  /// (K + (σ² + jitter) I)⁻¹ Y, one column per output dimension.
  const Eigen::MatrixXd& alpha() const { return alpha_; }

  Prediction predict(const Eigen::VectorXd& z) const;
  Eigen::VectorXd mean(const Eigen::VectorXd& z) const;
  /// Scalar posterior variance σ_n²(z), identical for all outputs.
  double variance(const Eigen::VectorXd& z) const;
  double post_cov(const Eigen::VectorXd& z, const Eigen::VectorXd& z2) const;
  /// Posterior covariance matrix among the rows of `points`.
  Eigen::MatrixXd post_cov_matrix(const Eigen::MatrixXd& points) const;

 private:
  friend GPPosterior gp_fit(const GPDataset& dataset, const KernelSpec& kernel);

  Eigen::VectorXd cross_kernel(const Eigen::VectorXd& z) const;

  KernelSpec kernel_;
  int output_dim_ = 0;
  double noise_std_ = 0.0;
  double jitter_ = 0.0;
  Eigen::MatrixXd inputs_;
  Eigen::MatrixXd targets_;
  Eigen::MatrixXd chol_;
  Eigen::MatrixXd alpha_;
};

GPPosterior gp_fit(const GPDataset& dataset, const KernelSpec& kernel);

inline Prediction gp_predict(const GPPosterior& post, const Eigen::VectorXd& z) {
  return post.predict(z);
}

inline double gp_post_cov(const GPPosterior& post, const Eigen::VectorXd& z,
                          const Eigen::VectorXd& z2) {
  return post.post_cov(z, z2);
}

enum class CalibrationMode { constant, theoretical };

struct CalibrationSchedule {
  CalibrationMode mode = CalibrationMode::constant;
  double beta = 2.0;
  // theoretical mode: β_n = B + σ sqrt(2 (γ_n + log(d_x / δ)))
  double rkhs_bound = 1.0;
  double delta = 0.1;
  double noise_std = 0.1;
  int output_dim = 1;
};

double beta(const CalibrationSchedule& schedule, int n, double gamma_n);

/// ½ log det(I + σ⁻² K) over the rows of `points`.
double info_gain(const KernelSpec& kernel, const Eigen::MatrixXd& points, double sigma);

struct GreedyGammaResult {
  double gamma = 0.0;
  std::vector<int> selected;
  std::vector<double> increments;
};

GreedyGammaResult greedy_gamma_trace(const KernelSpec& kernel, const Eigen::MatrixXd& grid, int n,
                                     double sigma);

inline double greedy_gamma_estimate(const KernelSpec& kernel, const Eigen::MatrixXd& grid, int n,
                                    double sigma) {
  return greedy_gamma_trace(kernel, grid, n, sigma).gamma;
}

/// `count` Sobol points scaled to the box [lower, upper], one per row.
Eigen::MatrixXd sobol_grid(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, int count);

}  // namespace ocorl
