#pragma once

#include "factorlab/linalg.hpp"
#include "factorlab/panel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

namespace factorlab {

/// Law of the per-series coefficients beta_i and rho_eps_i.
enum class Law {
  TwoPoint,           // +-magnitude with equal probability
  ContinuousUniform,  // uniform on [-magnitude, magnitude]
};

/// Cross-sectionally correlated MA innovations over a neighbourhood of
/// half-width H (Bai-Ng style).
struct Model1Params {
  int H = 10;
  double beta_magnitude = 0.15;
  bool truncate = false;  // hard boundaries instead of circular wrap
};

/// Innovations with r additional weak spikes supported on the first
/// floor(varrho * n) series.
struct Model2Params {
  double varrho = 1.0;
  double delta_max = 20.0;
  double delta_min = 10.0;
};

/// iid Gaussian panel whose idiosyncratic covariance is
/// Delta_n v v^T + sigma2 I with a sparse unit vector v.
struct SparseSpikeParams {
  double alpha = 0.5;
  double nu = 0.8;
  double sigma2 = 1.0;
  std::optional<double> delta_n;  // overrides n^nu when set
};

using ModelParams = std::variant<Model1Params, Model2Params, SparseSpikeParams>;

struct SimConfig {
  Index n = 200;
  Index T = 500;
  int r = 5;
  double phi = 1.0;
  double rho_f = 0.5;
  ModelParams model = Model1Params{};
  std::uint64_t seed = 0;
  Law beta_law = Law::TwoPoint;
  Law rho_eps_law = Law::TwoPoint;
  double rho_eps_magnitude = 0.2;
  // Factor innovations default to variance 1/(1 - rho^2); this switches to
  // 1 - rho^2 so that every factor has unit stationary variance.
  bool unit_factor_variance = false;

  /// Throws InvalidInput on any violated constraint.
  void validate() const;
  std::string model_name() const;
  /// AR coefficient of factor j (0-based): rho_f - 0.05 j.
  double factor_ar(int j) const { return rho_f - 0.05 * j; }
};

struct SimulatedPanel {
  Eigen::MatrixXd x;         // T x n
  Eigen::MatrixXd chi;       // T x n
  Eigen::MatrixXd eps;       // T x n
  Eigen::MatrixXd loadings;  // n x r
  Eigen::MatrixXd factors;   // T x r
  Eigen::VectorXd rho_eps;   // n
  Eigen::VectorXd beta;      // n (Model 1 only)
  Eigen::MatrixXd spike_directions;  // Model 2: V (n x r); sparse spike: v (n x 1)
  Eigen::VectorXd spike_strengths;   // Model 2: Delta diagonal; sparse spike: Delta_n
  SimConfig config;

  PanelData panel() const { return PanelData{x, {}, {}}; }
};

Eigen::MatrixXd gen_factors(const SimConfig& config);
SimulatedPanel gen_model1(const SimConfig& config);
SimulatedPanel gen_model2(const SimConfig& config);
SimulatedPanel gen_sparse_spike(const SimConfig& config);

/// Dispatches on config.model.
SimulatedPanel simulate(const SimConfig& config);

/// r values equally spaced from hi down to lo.
Eigen::VectorXd equidistant_spikes(int r, double hi, double lo);

/// V Delta V^T + I for Model 2.
SymMatrix model2_innovation_covariance(const Eigen::MatrixXd& directions,
                                       const Eigen::VectorXd& strengths);

/// Delta_n v v^T + sigma2 I for the sparse-spike model.
SymMatrix sparse_spike_idio_covariance(const SimulatedPanel& panel);

}  // namespace factorlab
