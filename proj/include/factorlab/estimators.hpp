#pragma once

#include "factorlab/blocking.hpp"
#include "factorlab/linalg.hpp"
#include "factorlab/panel.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace factorlab {

enum class EstimatorMethod { PC, Scaled, Capped, Shrunk };

std::string to_string(EstimatorMethod method);
/// Accepts "pc", "scaled"/"sc", "capped"/"cp", "shrunk"/"sh".
EstimatorMethod parse_estimator_method(const std::string& name);

/// How the scaling factor nu_j enters each principal-component term.
enum class ScaledWeighting {
  Quadratic,  // both loading and projection scaled: nu_j^-2 per term
  Linear,     // single min{1, .} factor: nu_j^-1 per term
};

struct EstimatorSpec {
  EstimatorMethod method = EstimatorMethod::PC;
  bool blockwise = false;
  int r_hat = 1;
  std::optional<double> c_w;            // nullopt: 1.1 sqrt(n) max_i |w_i1|
  std::optional<BlockPartition> block;  // nullopt: block size floor(log^2 T)
  ScaledWeighting scaled_weighting = ScaledWeighting::Quadratic;

  void validate() const;
  /// Short tag such as "pc", "bsc".
  std::string tag() const;
};

/// Per-eigenvector record; fields not relevant to the method keep defaults.
struct EigenvectorDiagnostic {
  int j = 0;                  // 1-based
  double eigenvalue = 0.0;
  double max_coordinate = 0.0;  // max_i |w_ij| before modification
  double nu = 1.0;              // Scaled
  int cap_count = 0;            // Capped
  double shrink_weight = 1.0;   // Shrunk
  double norm_after = 1.0;      // ||modified w_j||
};

struct BlockFitDiagnostics {
  IndexRange rows;
  EigenSystem eigen;  // leading r_hat pairs of the leave-out covariance
  std::vector<EigenvectorDiagnostic> eigenvectors;
};

struct FactorFit {
  Eigen::MatrixXd chi_hat;  // T x n
  Eigen::MatrixXd eps_hat;  // x - chi_hat
  EstimatorSpec spec;
  double c_w = 0.0;  // effective constant for Scaled/Capped, 0 otherwise
  std::vector<EigenvectorDiagnostic> diagnostics;  // full-sample fits
  std::vector<BlockFitDiagnostics> blocks;         // blockwise fits
  std::vector<std::string> warnings;
};

/// The n x r matrices (loading, direction) such that chi_t = loading
/// direction^T x_t, together with per-column diagnostics.
struct ModifiedEigenvectors {
  Eigen::MatrixXd loading;
  Eigen::MatrixXd direction;
  std::vector<EigenvectorDiagnostic> diagnostics;
};

double default_cw(const Eigen::VectorXd& leading_eigenvector, Index n);

struct ScaledEigenvectors {
  Eigen::MatrixXd vectors;
  Eigen::VectorXd nu;
};

/// nu_j = max{1, sqrt(n)/c_w max_i |w_ij|}; column j divided by nu_j.
ScaledEigenvectors scale_eigenvectors(const Eigen::MatrixXd& w, double c_w, Index n);

struct CappedEigenvectors {
  Eigen::MatrixXd vectors;
  std::vector<int> cap_counts;
};

/// Entries clipped to +-c_w/sqrt(n); columns are not renormalized.
CappedEigenvectors cap_eigenvectors(const Eigen::MatrixXd& w, double c_w, Index n);

/// sqrt(mu_j / mu_1) for j = 1..r_hat.
Eigen::VectorXd shrink_weights(const Eigen::VectorXd& eigenvalues, int r_hat);

/// Applies the method's modification to the leading r_hat eigenpairs.
/// c_w is used for Scaled and Capped only.
ModifiedEigenvectors modify_eigenvectors(const EigenSystem& eigen, const EstimatorSpec& spec,
                                         double c_w);

FactorFit pc_estimate(const PanelData& panel, int r_hat);
FactorFit scaled_pc_estimate(const PanelData& panel, int r_hat,
                             std::optional<double> c_w = std::nullopt);
FactorFit capped_pc_estimate(const PanelData& panel, int r_hat,
                             std::optional<double> c_w = std::nullopt);
FactorFit shrunk_pc_estimate(const PanelData& panel, int r_hat);
FactorFit blockwise_estimate(const PanelData& panel, const EstimatorSpec& spec);

/// Full-sample or blockwise according to spec.blockwise.
FactorFit estimate(const PanelData& panel, const EstimatorSpec& spec);

/// Full-sample fit from a precomputed leading spectrum (>= r_hat pairs).
FactorFit estimate_from_spectrum(const Eigen::MatrixXd& x, const EigenSystem& leading,
                                 const EstimatorSpec& spec);

/// Leading spectra of every leave-out covariance of a partition.
std::vector<EigenSystem> block_spectra(const Eigen::MatrixXd& x, const BlockPartition& partition,
                                       Index k);

/// Blockwise fit from precomputed block spectra (>= r_hat pairs each).
FactorFit blockwise_from_spectra(const Eigen::MatrixXd& x, const BlockPartition& partition,
                                 const std::vector<EigenSystem>& spectra,
                                 const EstimatorSpec& spec);

/// Partition used when spec.block is unset: block size floor(log^2 T).
BlockPartition resolve_partition(const EstimatorSpec& spec, Index T);

struct CwSelection {
  double c_star = 0.0;
  std::vector<double> grid;    // c_w values tried
  std::vector<double> errors;  // max_i T^-1 sum_t (chi_bsc - x)^2
};

/// {0.8, 0.9, ..., 1.5}.
std::vector<double> default_cw_multipliers();

/// Selects c_w for the blockwise scaled estimator over multiplier * sqrt(n)
/// max_i |w_i1| by minimising the worst per-series in-sample residual. The
/// partition defaults to five blocks.
CwSelection cw_cross_validate(const PanelData& panel, int r_hat,
                              std::span<const double> multipliers,
                              std::optional<BlockPartition> partition = std::nullopt);

}  // namespace factorlab
