#pragma once

#include "ocorl/ode_sim.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace ocorl {

struct LipschitzConstants {
  double dynamics = 1.0;  // L_f
  double policy = 1.0;    // L_π
  double sigma = 1.0;     // L_σ
  double cost = 1.0;      // L_c
};

struct EnvSpec {
  std::string name;
  int d_x = 0;
  int d_u = 0;
  VectorField dynamics;
  Eigen::VectorXd x0;
  double T = 1.0;
  CostSpec cost;
  int N = 1;
  int M = 1;
  double T_mpc = 1.0;
  // Normalization box over z = (x, u); kernel lengthscales are expressed relative to it.
  Eigen::VectorXd input_lower;
  Eigen::VectorXd input_upper;
  LipschitzConstants lipschitz;

  int input_dim() const { return d_x + d_u; }
  void validate() const;
};

/// Names accepted by make_env.
const std::vector<std::string>& env_names();

/// Builds a registered benchmark. Throws std::invalid_argument for unknown names.
EnvSpec make_env(const std::string& name);

/// Two-state, one-control system whose dynamics are a draw from an RBF GP
/// prior (random Fourier features) over the normalized input box.
struct SyntheticEnvOptions {
  std::uint64_t seed = 0;
  int features = 2000;
  double lengthscale = 1.0;
  double signal_variance = 1.0;
  double T = 1.0;
};

EnvSpec make_gp_prior_env(const SyntheticEnvOptions& options);

/// Max spectral norm of ∂f/∂z and of ∇c over `samples` uniform draws from the
/// input box. L_σ is taken from an RBF kernel with the given normalized
/// lengthscale and signal variance; L_π is left at its current value.
void estimate_lipschitz(EnvSpec& env, int samples = 2000, double normalized_lengthscale = 1.0,
                        double signal_variance = 1.0);

/// Number of times the cancer model clamped its state at the log floor.
long cancer_clamp_count();

}  // namespace ocorl
