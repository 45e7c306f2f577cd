#pragma once

#include "factorlab/estimators.hpp"
#include "factorlab/factor_number.hpp"
#include "factorlab/linalg.hpp"
#include "factorlab/panel.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace factorlab {

enum class CovarianceKind { EFM, POET };

struct CovarianceEstimate {
  explicit CovarianceEstimate(SymMatrix s) : sigma(std::move(s)) {}

  SymMatrix sigma;
  CovarianceKind kind = CovarianceKind::EFM;
  EstimatorSpec spec;     // EFM: estimator used; POET: PC with spec.r_hat
  int r_hat = 0;
  double poet_c = 0.0;    // POET threshold constant actually used
  double omega_T = 0.0;   // POET rate 1/sqrt(n) + sqrt(log n / T)
  int window = -1;
  std::vector<std::string> warnings;
};

/// Common/idiosyncratic split of a (centered) window used by both covariance
/// estimators. r_hat = 0 gives chi = 0.
struct WindowDecomposition {
  Eigen::MatrixXd chi;
  Eigen::MatrixXd eps;
  FactorFit fit;  // unset when r_hat = 0
};

/// Subtracts column means.
Eigen::MatrixXd center_columns(const Eigen::MatrixXd& x);

/// Blockwise fits without an explicit partition use block size
/// ceil(log^2 T), the convention of the portfolio exercise.
WindowDecomposition decompose_window(const Eigen::MatrixXd& window, const EstimatorSpec& spec);

/// T^-1 chi^T chi + diag(T^-1 eps^T eps) on the column-centered window (or
/// the raw window when center is false). spec.r_hat = 0 is allowed.
CovarianceEstimate efm_covariance(const Eigen::MatrixXd& window, const EstimatorSpec& spec,
                                  bool center = true);

struct PoetOptions {
  std::optional<double> constant;  // nullopt: cross-validated over the grid
  std::vector<double> grid{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  double min_eigenvalue = 1e-8;
};

/// Residual covariance s_ij, entrywise variance theta_ij and rate omega_T.
struct PoetResidual {
  Eigen::MatrixXd s;
  Eigen::MatrixXd theta;
  double omega_T = 0.0;
};

PoetResidual poet_residual(const Eigen::MatrixXd& eps);

/// Keeps off-diagonal s_ij iff |s_ij| >= C omega_T sqrt(theta_ij); the
/// diagonal is untouched. C may be +infinity.
Eigen::MatrixXd poet_threshold(const PoetResidual& residual, double C);

/// Throws PoetInfeasible when no grid constant yields a thresholded residual
/// covariance with minimum eigenvalue above options.min_eigenvalue.
CovarianceEstimate poet_covariance(const Eigen::MatrixXd& window, int r_hat,
                                   const PoetOptions& options = {}, bool center = true);

enum class WeightRule {
  Argmin,   // Sigma^-1 1 / (1^T Sigma^-1 1)
  Literal,  // Sigma 1 / (1^T Sigma 1)
};

struct MinVarianceWeights {
  Eigen::VectorXd weights;
  bool ridge_applied = false;
};

/// On SingularMatrix a ridge of 1e-8 trace/n (1e-8 if the trace is 0) is
/// added once before retrying.
MinVarianceWeights min_variance_weights(const SymMatrix& sigma,
                                        WeightRule rule = WeightRule::Argmin);

struct BacktestMethod {
  std::string label;
  CovarianceKind kind = CovarianceKind::EFM;
  EstimatorSpec spec;                               // r_hat used unless selector set
  std::optional<FactorNumberMethod> r_estimator;    // per-window r_hat
  PoetOptions poet;
};

/// Parses "efm-pc", "efm-bsh", "poet", ... into a method with the given r_hat.
BacktestMethod parse_backtest_method(const std::string& name, int r_hat);

struct BacktestOptions {
  Index window = 253;
  Index step = 21;
  bool center = true;
  WeightRule weight_rule = WeightRule::Argmin;
  int threads = 1;
};

struct WindowResult {
  int k = 0;              // 0-based window index
  IndexRange estimation;  // rows used for the covariance
  IndexRange evaluation;  // out-of-sample rows
  Eigen::VectorXd weights;
  std::vector<double> returns;
  double tau = 0.0;
  double mu = 0.0;
  double sigma2 = 0.0;
  int r_hat = 0;
  double poet_c = 0.0;
  bool ridge_applied = false;
  bool skipped_in_sr = false;  // sigma_k = 0
  std::string error;           // non-empty when the window failed
};

struct BacktestReport {
  BacktestMethod method;
  Index window = 0;
  Index step = 0;
  int M = 0;
  std::vector<WindowResult> windows;
  bool excluded = false;  // some window failed; summary metrics unset
  double tau = 0.0;
  double sigma2 = 0.0;
  double sharpe = 0.0;  // +infinity when every window has zero variance
  std::vector<std::string> warnings;
};

/// ceil((T - window) / step).
int window_count(Index T, Index window, Index step);

/// Runs every method over the rolling windows. Requires T > window.
std::vector<BacktestReport> rolling_backtest(const PanelData& returns,
                                             const std::vector<BacktestMethod>& methods,
                                             const BacktestOptions& options = {});

}  // namespace factorlab
