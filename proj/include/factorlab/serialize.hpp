#pragma once

#include "factorlab/estimators.hpp"
#include "factorlab/evaluation.hpp"
#include "factorlab/factor_number.hpp"
#include "factorlab/portfolio.hpp"
#include "factorlab/simulation.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace factorlab {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Finite values as numbers; +-infinity as the strings "inf"/"-inf"; NaN as null.
Json number_or_sentinel(double value);

Json matrix_json(const Eigen::MatrixXd& m);  // array of rows
Json vector_json(const Eigen::VectorXd& v);

std::string to_string(Law law);
Law parse_law(const std::string& name);

Json sim_config_json(const SimConfig& config);

/// x, chi, eps, loadings, factors and the model coefficients.
Json simulated_bundle_json(const SimulatedPanel& panel);

Json factor_number_json(const FactorNumberResult& result);
Json estimator_spec_json(const EstimatorSpec& spec);
Json fit_diagnostics_json(const FactorFit& fit);

Json mc_report_json(const McReport& report);

/// Long format: model,n,T,phi,varrho,method,blockwise,metric,mean,sd,replications.
std::string mc_report_csv(const McReport& report);

Json backtest_json(const std::vector<BacktestReport>& reports);

/// One row per (method, window): method,window,<series...>.
std::string backtest_weights_csv(const std::vector<BacktestReport>& reports,
                                 const std::vector<std::string>& series_names);

}  // namespace factorlab
