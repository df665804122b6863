#include "ocorl/kernel_gp.hpp"

#include <boost/random/sobol.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace ocorl {

KernelKind parse_kernel_kind(const std::string& name) {
  if (name == "rbf") return KernelKind::rbf;
  if (name == "linear") return KernelKind::linear;
  if (name == "matern52") return KernelKind::matern52;
  throw std::invalid_argument("unknown kernel kind '" + name + "'");
}

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::rbf: return "rbf";
    case KernelKind::linear: return "linear";
    case KernelKind::matern52: return "matern52";
  }
  return "?";
}

void KernelSpec::validate() const {
  if (lengthscales.size() == 0) throw std::invalid_argument("kernel: empty lengthscale vector");
  if ((lengthscales.array() <= 0.0).any())
    throw std::invalid_argument("kernel: lengthscales must be strictly positive");
  if (!(signal_variance > 0.0))
    throw std::invalid_argument("kernel: signal_variance must be strictly positive");
}

KernelSpec kernel_for_box(KernelKind kind, double normalized_lengthscale, double signal_variance,
                          const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  if (lower.size() != upper.size()) throw std::invalid_argument("kernel_for_box: bound sizes differ");
  KernelSpec spec;
  spec.kind = kind;
  spec.signal_variance = signal_variance;
  spec.lengthscales = 0.5 * (upper - lower) * normalized_lengthscale;
  spec.validate();
  return spec;
}

namespace {

double scaled_sqdist(const KernelSpec& spec, const Eigen::VectorXd& z, const Eigen::VectorXd& z2) {
  return ((z - z2).array() / spec.lengthscales.array()).square().sum();
}

double kernel_from_sqdist(const KernelSpec& spec, double r2) {
  switch (spec.kind) {
    case KernelKind::rbf: return spec.signal_variance * std::exp(-0.5 * r2);
    case KernelKind::matern52: {
      const double r = std::sqrt(r2);
      const double s5r = std::sqrt(5.0) * r;
      return spec.signal_variance * (1.0 + s5r + 5.0 * r2 / 3.0) * std::exp(-s5r);
    }
    case KernelKind::linear: break;
  }
  return 0.0;
}

void check_dim(const KernelSpec& spec, Eigen::Index n) {
  if (n != spec.lengthscales.size())
    throw std::invalid_argument("kernel: input has dimension " + std::to_string(n) + ", expected " +
                                std::to_string(spec.lengthscales.size()));
}

}  // namespace

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& z, const Eigen::VectorXd& z2) {
  check_dim(spec, z.size());
  check_dim(spec, z2.size());
  if (spec.kind == KernelKind::linear) {
    return spec.signal_variance *
           (z.array() * z2.array() / spec.lengthscales.array().square()).sum();
  }
  return kernel_from_sqdist(spec, scaled_sqdist(spec, z, z2));
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b) {
  if (a.rows() > 0) check_dim(spec, a.cols());
  if (b.rows() > 0) check_dim(spec, b.cols());
  Eigen::MatrixXd k(a.rows(), b.rows());
  if (spec.kind == KernelKind::linear) {
    const Eigen::VectorXd w = spec.lengthscales.array().square().inverse();
    return spec.signal_variance * (a * w.asDiagonal() * b.transpose());
  }
  const Eigen::ArrayXd inv_l = spec.lengthscales.array().inverse();
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double r2 = ((a.row(i) - b.row(j)).array().transpose() * inv_l).square().sum();
      k(i, j) = kernel_from_sqdist(spec, r2);
    }
  }
  return k;
}

GPDataset::GPDataset(int in_dim, int out_dim, double noise)
    : input_dim(in_dim), output_dim(out_dim), noise_std(noise) {}

void GPDataset::append(const Eigen::VectorXd& z, const Eigen::VectorXd& y) {
  if (z.size() != input_dim || y.size() != output_dim)
    throw std::invalid_argument("GPDataset::append: dimension mismatch");
  inputs.push_back(z);
  targets.push_back(y);
}

GPPosterior gp_fit(const GPDataset& dataset, const KernelSpec& kernel) {
  kernel.validate();
  if (dataset.input_dim != kernel.input_dim())
    throw std::invalid_argument("gp_fit: dataset input_dim does not match kernel");
  if (!(dataset.noise_std > 0.0)) throw std::invalid_argument("gp_fit: noise_std must be positive");
  if (dataset.inputs.size() != dataset.targets.size())
    throw std::invalid_argument("gp_fit: inputs and targets differ in length");

  GPPosterior post;
  post.kernel_ = kernel;
  post.output_dim_ = dataset.output_dim;
  post.noise_std_ = dataset.noise_std;

  const auto n = static_cast<Eigen::Index>(dataset.size());
  post.inputs_.resize(n, dataset.input_dim);
  post.targets_.resize(n, dataset.output_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    post.inputs_.row(i) = dataset.inputs[static_cast<std::size_t>(i)].transpose();
    post.targets_.row(i) = dataset.targets[static_cast<std::size_t>(i)].transpose();
  }
  if (n == 0) {
    post.alpha_.resize(0, dataset.output_dim);
    return post;
  }

  const Eigen::MatrixXd gram = kernel_matrix(kernel, post.inputs_, post.inputs_);
  const double noise_var = dataset.noise_std * dataset.noise_std;
  const double max_jitter = 1e-4 * kernel.signal_variance;
  for (double jitter = 1e-10 * kernel.signal_variance; jitter <= max_jitter * (1.0 + 1e-12);
       jitter *= 10.0) {
    Eigen::MatrixXd system = gram;
    system.diagonal().array() += noise_var + jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(system);
    if (llt.info() == Eigen::Success) {
      post.jitter_ = jitter;
      post.chol_ = llt.matrixL();
      post.alpha_ = llt.solve(post.targets_);
      return post;
    }
  }
  throw GPFitError("gp_fit: Cholesky failed for " + std::to_string(n) +
                   " points even with jitter " + std::to_string(max_jitter) +
                   " (kernel matrix is numerically singular)");
}

Eigen::VectorXd GPPosterior::cross_kernel(const Eigen::VectorXd& z) const {
  check_dim(kernel_, z.size());
  const Eigen::Index n = inputs_.rows();
  Eigen::VectorXd k(n);
  if (kernel_.kind == KernelKind::linear) {
    const Eigen::VectorXd w = kernel_.lengthscales.array().square().inverse();
    return kernel_.signal_variance * (inputs_ * w.asDiagonal() * z);
  }
  const Eigen::ArrayXd inv_l = kernel_.lengthscales.array().inverse();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r2 = ((inputs_.row(i).transpose() - z).array() * inv_l).square().sum();
    k(i) = kernel_from_sqdist(kernel_, r2);
  }
  return k;
}

Eigen::VectorXd GPPosterior::mean(const Eigen::VectorXd& z) const {
  if (inputs_.rows() == 0) {
    check_dim(kernel_, z.size());
    return Eigen::VectorXd::Zero(output_dim_);
  }
  return alpha_.transpose() * cross_kernel(z);
}

double GPPosterior::variance(const Eigen::VectorXd& z) const {
  const double prior = kernel_eval(kernel_, z, z);
  if (inputs_.rows() == 0) return std::max(prior, 0.0);
  const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(cross_kernel(z));
  return std::max(prior - v.squaredNorm(), 0.0);
}

Prediction GPPosterior::predict(const Eigen::VectorXd& z) const {
  Prediction p;
  const double prior = kernel_eval(kernel_, z, z);
  if (inputs_.rows() == 0) {
    p.mean = Eigen::VectorXd::Zero(output_dim_);
    p.std = Eigen::VectorXd::Constant(output_dim_, std::sqrt(std::max(prior, 0.0)));
    return p;
  }
  const Eigen::VectorXd k = cross_kernel(z);
  p.mean = alpha_.transpose() * k;
  const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(k);
  p.std = Eigen::VectorXd::Constant(output_dim_, std::sqrt(std::max(prior - v.squaredNorm(), 0.0)));
  return p;
}

double GPPosterior::post_cov(const Eigen::VectorXd& z, const Eigen::VectorXd& z2) const {
  const double prior = kernel_eval(kernel_, z, z2);
  if (inputs_.rows() == 0) return prior;
  const auto lower = chol_.triangularView<Eigen::Lower>();
  const Eigen::VectorXd v1 = lower.solve(cross_kernel(z));
  const Eigen::VectorXd v2 = lower.solve(cross_kernel(z2));
  return prior - v1.dot(v2);
}

Eigen::MatrixXd GPPosterior::post_cov_matrix(const Eigen::MatrixXd& points) const {
  Eigen::MatrixXd cov = kernel_matrix(kernel_, points, points);
  if (inputs_.rows() == 0) return cov;
  const Eigen::MatrixXd cross = kernel_matrix(kernel_, inputs_, points);
  const Eigen::MatrixXd v = chol_.triangularView<Eigen::Lower>().solve(cross);
  cov.noalias() -= v.transpose() * v;
  return cov;
}

double beta(const CalibrationSchedule& schedule, int n, double gamma_n) {
  if (n < 0) throw std::invalid_argument("beta: negative episode index");
  if (gamma_n < 0.0) throw std::invalid_argument("beta: negative information gain");
  if (schedule.mode == CalibrationMode::constant) {
    if (!(schedule.beta >= 0.0)) throw std::invalid_argument("beta: constant β must be >= 0");
    return schedule.beta;
  }
  if (!(schedule.delta > 0.0 && schedule.delta <= 1.0))
    throw std::invalid_argument("beta: δ must lie in (0, 1]");
  const double log_term = std::log(static_cast<double>(schedule.output_dim) / schedule.delta);
  return schedule.rkhs_bound +
         schedule.noise_std * std::sqrt(2.0 * std::max(gamma_n + log_term, 0.0));
}

double info_gain(const KernelSpec& kernel, const Eigen::MatrixXd& points, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("info_gain: sigma must be positive");
  if (points.rows() == 0) return 0.0;
  Eigen::MatrixXd m = kernel_matrix(kernel, points, points) / (sigma * sigma);
  m.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw GPFitError("info_gain: I + K/σ² not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  return l.diagonal().array().log().sum();
}

GreedyGammaResult greedy_gamma_trace(const KernelSpec& kernel, const Eigen::MatrixXd& grid, int n,
                                     double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("greedy_gamma_estimate: sigma must be positive");
  if (n < 0 || n > grid.rows())
    throw std::invalid_argument("greedy_gamma_estimate: n exceeds the candidate grid");
  GreedyGammaResult out;
  if (n == 0) return out;

  const Eigen::Index g = grid.rows();
  const double noise_var = sigma * sigma;
  Eigen::VectorXd var(g);
  for (Eigen::Index i = 0; i < g; ++i) var(i) = kernel_eval(kernel, grid.row(i), grid.row(i));
  // Rows of `basis` are the incremental Cholesky columns of K + σ²I restricted to the picks.
  Eigen::MatrixXd basis(n, g);
  std::vector<bool> taken(static_cast<std::size_t>(g), false);
  for (int step = 0; step < n; ++step) {
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < g; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      if (best < 0 || var(i) > var(best)) best = i;
    }
    const double v = std::max(var(best), 0.0);
    out.selected.push_back(static_cast<int>(best));
    out.increments.push_back(0.5 * std::log1p(v / noise_var));
    out.gamma += out.increments.back();
    taken[static_cast<std::size_t>(best)] = true;

    Eigen::VectorXd col = kernel_matrix(kernel, grid, grid.row(best)).col(0);
    for (int j = 0; j < step; ++j) col -= basis(j, best) * basis.row(j).transpose();
    col /= std::sqrt(v + noise_var);
    basis.row(step) = col.transpose();
    var.array() -= col.array().square();
  }
  return out;
}

Eigen::MatrixXd sobol_grid(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, int count) {
  if (lower.size() != upper.size() || lower.size() == 0)
    throw std::invalid_argument("sobol_grid: bad bounds");
  const auto dim = static_cast<std::size_t>(lower.size());
  boost::random::sobol gen(dim);
  const double scale = static_cast<double>(gen.max()) + 1.0;
  Eigen::MatrixXd out(count, lower.size());
  for (int i = 0; i < count; ++i) {
    for (Eigen::Index d = 0; d < lower.size(); ++d) {
      const double u = static_cast<double>(gen()) / scale;
      out(i, d) = lower(d) + u * (upper(d) - lower(d));
    }
  }
  return out;
}

}  // namespace ocorl
