#pragma once

#include "factorlab/estimators.hpp"
#include "factorlab/factor_number.hpp"
#include "factorlab/simulation.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace factorlab {

/// Raw squared-error numerators of a fit against the true common component.
struct RawErrors {
  double avg = 0.0;  // n^-1 sum_i sum_t (chi_hat - chi)^2
  double max = 0.0;  // max_i sum_t (chi_hat - chi)^2
};

struct OracleDenominators {
  double avg = 0.0;
  double max = 0.0;
};

struct RelativeErrors {
  double err_avg = 0.0;
  double err_max = 0.0;
};

RawErrors raw_errors(const Eigen::MatrixXd& chi_hat, const Eigen::MatrixXd& chi_true);

/// Throws DegenerateOracle when either denominator is not positive.
RelativeErrors relative_errors(const Eigen::MatrixXd& chi_hat, const Eigen::MatrixXd& chi_true,
                               const OracleDenominators& denominators);
RelativeErrors relative_errors(const RawErrors& raw, const OracleDenominators& denominators);

/// Mean of 1/nu_j over 2 <= j <= r and over r < j <= r_hat. Blockwise fits
/// average over every (block, j) pair. Empty groups are nullopt.
struct LocalisationSummary {
  std::optional<double> within;  // 2 <= j <= r
  std::optional<double> beyond;  // r < j <= r_hat
};

/// Requires a Scaled fit.
LocalisationSummary localisation_diagnostic(const FactorFit& fit, int true_r);

/// How r_hat is chosen in each replication.
struct RSelector {
  enum class Kind { BaiNgIC, AhnHorensteinGR, Fixed, TruePlus };
  Kind kind = Kind::BaiNgIC;
  int k = 0;  // Fixed: r_hat = k; TruePlus: r_hat = r + k

  static RSelector bai_ng() { return {Kind::BaiNgIC, 0}; }
  static RSelector ahn_horenstein() { return {Kind::AhnHorensteinGR, 0}; }
  static RSelector fixed(int k) { return {Kind::Fixed, k}; }
  static RSelector true_plus(int m) { return {Kind::TruePlus, m}; }

  /// "bn", "ah", "fixed:K" or "true+M".
  std::string label() const;
  static RSelector parse(const std::string& text);
};

/// One column of the study. With use_true_r the spec's r_hat is replaced by
/// the true r; otherwise by the selected r_hat.
struct StudyMethod {
  std::string label;
  EstimatorSpec spec;
  bool use_true_r = false;
};

/// PC with the true number of factors.
StudyMethod oracle_method();

/// Standard method set: pc, capped, scaled, shrunk, optionally blockwise.
std::vector<StudyMethod> standard_methods(bool blockwise);

struct McStudyConfig {
  SimConfig base;  // model and fixed parameters
  std::vector<Index> n_grid;
  std::vector<Index> T_grid;
  std::vector<double> phi_grid;
  std::vector<double> varrho_grid;  // Model 2 only; ignored otherwise
  std::vector<StudyMethod> methods;
  RSelector r_selector;
  std::optional<int> r_max;  // default floor(sqrt(min(n, T)))
  int replications = 100;
  std::uint64_t base_seed = 0;
  int threads = 1;
  double max_failure_fraction = 0.1;

  void validate() const;
};

/// Cartesian product of the grids, n fastest-varying last: for each n, T,
/// phi, varrho in that nesting order.
std::vector<SimConfig> expand_settings(const McStudyConfig& config);

struct MethodSummary {
  StudyMethod method;
  std::vector<double> raw_avg;  // per successful replication
  std::vector<double> raw_max;
  std::vector<double> err_avg;
  std::vector<double> err_max;
  double mean_err_avg = 0.0;
  double sd_err_avg = 0.0;
  double mean_err_max = 0.0;
  double sd_err_max = 0.0;
  // Scaled methods only: replication means of the localisation groups.
  std::optional<double> localisation_within;
  std::optional<double> localisation_beyond;
};

struct SettingReport {
  SimConfig sim;
  int attempted = 0;
  int failed = 0;
  std::vector<std::string> failures;
  std::vector<int> r_hat;            // per successful replication
  std::map<int, int> r_hat_counts;
  OracleDenominators denominators;
  std::vector<MethodSummary> methods;  // oracle first, then config order
};

struct McReport {
  McStudyConfig config;
  std::vector<SettingReport> settings;
  int total_failures = 0;
};

/// Called after each finished setting with (setting index, setting count).
using StudyProgress = std::function<void(std::size_t, std::size_t)>;

/// Runs every setting and replication. Replication (s, k) simulates with
/// seed derive_seed(base_seed, {s, k}); results are assembled by index so
/// the report does not depend on the thread count. Throws StudyFailed when
/// more than max_failure_fraction of a setting's replications fail.
McReport run_study(const McStudyConfig& config, const StudyProgress& progress = {});

/// Pairwise summation.
double pairwise_sum(const std::vector<double>& values);
double mean(const std::vector<double>& values);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_sd(const std::vector<double>& values);
double median(std::vector<double> values);

}  // namespace factorlab
