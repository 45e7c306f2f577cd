#include "factorlab/serialize.hpp"

#include "factorlab/csv.hpp"
#include "factorlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace factorlab {

Json number_or_sentinel(double value) {
  if (std::isnan(value)) return nullptr;
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return value;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Index t = 0; t < m.rows(); ++t) {
    Json row = Json::array();
    for (Index i = 0; i < m.cols(); ++i) row.push_back(number_or_sentinel(m(t, i)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(number_or_sentinel(v[i]));
  return out;
}

std::string to_string(Law law) {
  return law == Law::TwoPoint ? "two-point" : "uniform";
}

Law parse_law(const std::string& name) {
  if (name == "two-point" || name == "twopoint") return Law::TwoPoint;
  if (name == "uniform" || name == "continuous-uniform") return Law::ContinuousUniform;
  throw InvalidInput("unknown law '" + name + "' (expected two-point or uniform)");
}

Json sim_config_json(const SimConfig& c) {
  Json j;
  j["model"] = c.model_name();
  j["n"] = c.n;
  j["T"] = c.T;
  j["r"] = c.r;
  j["phi"] = c.phi;
  j["rho_f"] = c.rho_f;
  j["seed"] = c.seed;
  j["beta_law"] = to_string(c.beta_law);
  j["rho_eps_law"] = to_string(c.rho_eps_law);
  j["rho_eps"] = c.rho_eps_magnitude;
  j["unit_factor_variance"] = c.unit_factor_variance;
  if (const auto* m1 = std::get_if<Model1Params>(&c.model)) {
    j["H"] = m1->H;
    j["beta"] = m1->beta_magnitude;
    j["truncate"] = m1->truncate;
  } else if (const auto* m2 = std::get_if<Model2Params>(&c.model)) {
    j["varrho"] = m2->varrho;
    j["delta_max"] = m2->delta_max;
    j["delta_min"] = m2->delta_min;
  } else if (const auto* sp = std::get_if<SparseSpikeParams>(&c.model)) {
    j["alpha"] = sp->alpha;
    j["nu"] = sp->nu;
    j["sigma2"] = sp->sigma2;
    j["delta_n"] = sp->delta_n ? Json(*sp->delta_n) : Json(nullptr);
  }
  return j;
}

Json simulated_bundle_json(const SimulatedPanel& p) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = sim_config_json(p.config);
  j["x"] = matrix_json(p.x);
  j["chi"] = matrix_json(p.chi);
  j["eps"] = matrix_json(p.eps);
  j["loadings"] = matrix_json(p.loadings);
  j["factors"] = matrix_json(p.factors);
  j["rho_eps"] = vector_json(p.rho_eps);
  if (p.beta.size() > 0) j["beta"] = vector_json(p.beta);
  if (p.spike_directions.size() > 0) {
    j["spike_directions"] = matrix_json(p.spike_directions);
    j["spike_strengths"] = vector_json(p.spike_strengths);
  }
  return j;
}

Json factor_number_json(const FactorNumberResult& r) {
  Json j;
  j["method"] = to_string(r.method);
  j["r_hat"] = r.r_hat;
  j["r_max"] = r.r_max;
  Json crit = Json::array();
  for (double v : r.criterion) crit.push_back(number_or_sentinel(v));
  j["criterion"] = std::move(crit);
  return j;
}

Json estimator_spec_json(const EstimatorSpec& s) {
  Json j;
  j["method"] = to_string(s.method);
  j["tag"] = s.tag();
  j["blockwise"] = s.blockwise;
  j["r_hat"] = s.r_hat;
  j["c_w"] = s.c_w ? Json(*s.c_w) : Json("default");
  j["scaled_weighting"] = s.scaled_weighting == ScaledWeighting::Quadratic ? "quadratic" : "linear";
  if (s.block) {
    j["block_size"] = s.block->block_size;
    j["block_count"] = s.block->block_count();
  }
  return j;
}

namespace {

Json eigenvector_json(const EigenvectorDiagnostic& d, EstimatorMethod method) {
  Json j;
  j["j"] = d.j;
  j["eigenvalue"] = d.eigenvalue;
  j["max_coordinate"] = d.max_coordinate;
  switch (method) {
    case EstimatorMethod::Scaled: j["nu"] = d.nu; break;
    case EstimatorMethod::Capped: j["cap_count"] = d.cap_count; break;
    case EstimatorMethod::Shrunk: j["shrink_weight"] = d.shrink_weight; break;
    case EstimatorMethod::PC: break;
  }
  j["norm_after"] = d.norm_after;
  return j;
}

Json per_method_arrays(const std::vector<EigenvectorDiagnostic>& ds, EstimatorMethod method) {
  Json j;
  Json values = Json::array();
  for (const auto& d : ds) {
    switch (method) {
      case EstimatorMethod::Scaled: values.push_back(d.nu); break;
      case EstimatorMethod::Capped: values.push_back(d.cap_count); break;
      case EstimatorMethod::Shrunk: values.push_back(d.shrink_weight); break;
      case EstimatorMethod::PC: values.push_back(d.max_coordinate); break;
    }
  }
  return values;
}

const char* array_key(EstimatorMethod method) {
  switch (method) {
    case EstimatorMethod::Scaled: return "nu";
    case EstimatorMethod::Capped: return "cap_counts";
    case EstimatorMethod::Shrunk: return "shrink_weights";
    case EstimatorMethod::PC: return "max_coordinates";
  }
  return "values";
}

}  // namespace

Json fit_diagnostics_json(const FactorFit& fit) {
  const EstimatorMethod method = fit.spec.method;
  Json j;
  j["spec"] = estimator_spec_json(fit.spec);
  j["r_hat"] = fit.spec.r_hat;
  j["c_w"] = fit.c_w;
  if (!fit.spec.blockwise) {
    j[array_key(method)] = per_method_arrays(fit.diagnostics, method);
    Json ev = Json::array();
    for (const auto& d : fit.diagnostics) ev.push_back(eigenvector_json(d, method));
    j["eigenvectors"] = std::move(ev);
  } else {
    Json blocks = Json::array();
    for (std::size_t l = 0; l < fit.blocks.size(); ++l) {
      const auto& b = fit.blocks[l];
      Json bj;
      bj["block"] = l;
      bj["rows"] = {b.rows.begin, b.rows.end};
      bj[array_key(method)] = per_method_arrays(b.eigenvectors, method);
      Json ev = Json::array();
      for (const auto& d : b.eigenvectors) ev.push_back(eigenvector_json(d, method));
      bj["eigenvectors"] = std::move(ev);
      blocks.push_back(std::move(bj));
    }
    j["blocks"] = std::move(blocks);
  }
  j["warnings"] = fit.warnings;
  return j;
}

namespace {

Json optional_number(const std::optional<double>& v) {
  return v ? number_or_sentinel(*v) : Json(nullptr);
}

Json samples_json(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(number_or_sentinel(x));
  return out;
}

}  // namespace

Json mc_report_json(const McReport& report) {
  const McStudyConfig& c = report.config;
  Json j;
  j["schema_version"] = kSchemaVersion;
  Json cfg;
  cfg["base"] = sim_config_json(c.base);
  cfg["n"] = c.n_grid;
  cfg["T"] = c.T_grid;
  cfg["phi"] = c.phi_grid;
  cfg["varrho"] = c.varrho_grid;
  cfg["r_selector"] = c.r_selector.label();
  cfg["r_max"] = c.r_max ? Json(*c.r_max) : Json("default");
  cfg["replications"] = c.replications;
  cfg["base_seed"] = c.base_seed;
  cfg["threads"] = c.threads;
  Json methods = Json::array();
  for (const auto& m : c.methods) {
    methods.push_back({{"label", m.label},
                       {"spec", estimator_spec_json(m.spec)},
                       {"use_true_r", m.use_true_r}});
  }
  cfg["methods"] = std::move(methods);
  j["study"] = std::move(cfg);
  j["total_failures"] = report.total_failures;

  Json settings = Json::array();
  for (const auto& s : report.settings) {
    Json sj;
    sj["sim"] = sim_config_json(s.sim);
    sj["attempted"] = s.attempted;
    sj["failed"] = s.failed;
    sj["failures"] = s.failures;
    sj["denominators"] = {{"avg", s.denominators.avg}, {"max", s.denominators.max}};
    Json counts = Json::object();
    for (const auto& [r, count] : s.r_hat_counts) counts[std::to_string(r)] = count;
    sj["r_hat_counts"] = std::move(counts);
    sj["r_hat"] = s.r_hat;
    Json ms = Json::array();
    for (const auto& m : s.methods) {
      Json mj;
      mj["label"] = m.method.label;
      mj["method"] = to_string(m.method.spec.method);
      mj["blockwise"] = m.method.spec.blockwise;
      mj["use_true_r"] = m.method.use_true_r;
      mj["err_avg"] = {{"mean", number_or_sentinel(m.mean_err_avg)},
                       {"sd", number_or_sentinel(m.sd_err_avg)},
                       {"samples", samples_json(m.err_avg)}};
      mj["err_max"] = {{"mean", number_or_sentinel(m.mean_err_max)},
                       {"sd", number_or_sentinel(m.sd_err_max)},
                       {"samples", samples_json(m.err_max)}};
      if (m.method.spec.method == EstimatorMethod::Scaled) {
        mj["localisation"] = {{"within", optional_number(m.localisation_within)},
                              {"beyond", optional_number(m.localisation_beyond)}};
      }
      ms.push_back(std::move(mj));
    }
    sj["methods"] = std::move(ms);
    settings.push_back(std::move(sj));
  }
  j["settings"] = std::move(settings);
  return j;
}

std::string mc_report_csv(const McReport& report) {
  std::ostringstream out;
  out << "model,n,T,phi,varrho,method,blockwise,metric,mean,sd,replications\n";
  // The oracle always runs (it supplies the denominators) but is listed only
  // when it was requested explicitly.
  const bool oracle_requested =
      std::any_of(report.config.methods.begin(), report.config.methods.end(),
                  [](const StudyMethod& m) { return m.label == "oracle"; });
  for (const auto& s : report.settings) {
    const auto* m2 = std::get_if<Model2Params>(&s.sim.model);
    const std::string varrho = m2 ? format_double(m2->varrho) : "";
    const int reps = static_cast<int>(s.r_hat.size());
    for (const auto& m : s.methods) {
      if (m.method.label == "oracle" && !oracle_requested) continue;
      const auto row = [&](const char* metric, double mean_v, double sd_v) {
        out << s.sim.model_name() << ',' << s.sim.n << ',' << s.sim.T << ','
            << format_double(s.sim.phi) << ',' << varrho << ',' << m.method.label << ','
            << (m.method.spec.blockwise ? "true" : "false") << ',' << metric << ','
            << format_double(mean_v) << ',' << format_double(sd_v) << ',' << reps << '\n';
      };
      row("err_avg", m.mean_err_avg, m.sd_err_avg);
      row("err_max", m.mean_err_max, m.sd_err_max);
    }
  }
  return out.str();
}

Json backtest_json(const std::vector<BacktestReport>& reports) {
  Json methods = Json::object();
  for (const auto& r : reports) {
    Json mj;
    mj["kind"] = r.method.kind == CovarianceKind::EFM ? "efm" : "poet";
    mj["spec"] = estimator_spec_json(r.method.spec);
    if (r.method.r_estimator) mj["r_estimator"] = to_string(*r.method.r_estimator);
    if (r.method.kind == CovarianceKind::POET) {
      mj["poet_constant"] =
          r.method.poet.constant ? Json(*r.method.poet.constant) : Json("cross-validated");
    }
    mj["window"] = r.window;
    mj["step"] = r.step;
    mj["M"] = r.M;
    mj["excluded"] = r.excluded;
    mj["tau"] = number_or_sentinel(r.tau);
    mj["sigma2"] = number_or_sentinel(r.sigma2);
    mj["SR"] = number_or_sentinel(r.sharpe);
    Json windows = Json::array();
    for (const auto& w : r.windows) {
      Json wj;
      wj["k"] = w.k;
      wj["estimation_rows"] = {w.estimation.begin, w.estimation.end};
      wj["evaluation_rows"] = {w.evaluation.begin, w.evaluation.end};
      if (!w.error.empty()) {
        wj["error"] = w.error;
      } else {
        wj["r_hat"] = w.r_hat;
        if (r.method.kind == CovarianceKind::POET) wj["poet_c"] = w.poet_c;
        wj["tau"] = w.tau;
        wj["mu"] = w.mu;
        wj["sigma2"] = w.sigma2;
        wj["ridge_applied"] = w.ridge_applied;
        wj["skipped_in_sr"] = w.skipped_in_sr;
        wj["weights"] = vector_json(w.weights);
        wj["returns"] = samples_json(w.returns);
      }
      windows.push_back(std::move(wj));
    }
    mj["per_window"] = std::move(windows);
    mj["warnings"] = r.warnings;
    methods[r.method.label] = std::move(mj);
  }
  return methods;
}

std::string backtest_weights_csv(const std::vector<BacktestReport>& reports,
                                 const std::vector<std::string>& series_names) {
  std::ostringstream out;
  out << "method,window";
  Index n = 0;
  for (const auto& r : reports) {
    for (const auto& w : r.windows) n = std::max<Index>(n, w.weights.size());
  }
  for (Index i = 0; i < n; ++i) {
    out << ',';
    if (static_cast<Index>(series_names.size()) == n) {
      out << series_names[static_cast<std::size_t>(i)];
    } else {
      out << "s" << i + 1;
    }
  }
  out << '\n';
  for (const auto& r : reports) {
    for (const auto& w : r.windows) {
      if (w.weights.size() == 0) continue;
      out << r.method.label << ',' << w.k;
      for (Index i = 0; i < w.weights.size(); ++i) out << ',' << format_double(w.weights[i]);
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace factorlab
