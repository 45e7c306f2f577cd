#include "factorlab/evaluation.hpp"

#include "factorlab/errors.hpp"
#include "factorlab/parallel.hpp"
#include "factorlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace factorlab {

RawErrors raw_errors(const Eigen::MatrixXd& chi_hat, const Eigen::MatrixXd& chi_true) {
  if (chi_hat.rows() != chi_true.rows() || chi_hat.cols() != chi_true.cols()) {
    throw InvalidInput("raw_errors: shape mismatch");
  }
  if (chi_hat.size() == 0) throw InvalidInput("raw_errors: empty matrices");
  const Eigen::RowVectorXd per_series = (chi_hat - chi_true).colwise().squaredNorm();
  return {per_series.sum() / static_cast<double>(chi_hat.cols()), per_series.maxCoeff()};
}

RelativeErrors relative_errors(const RawErrors& raw, const OracleDenominators& d) {
  if (!(d.avg > 0.0) || !(d.max > 0.0)) {
    throw DegenerateOracle("oracle error denominator is not positive");
  }
  return {raw.avg / d.avg, raw.max / d.max};
}

RelativeErrors relative_errors(const Eigen::MatrixXd& chi_hat, const Eigen::MatrixXd& chi_true,
                               const OracleDenominators& d) {
  if (!(d.avg > 0.0) || !(d.max > 0.0)) {
    throw DegenerateOracle("oracle error denominator is not positive");
  }
  return relative_errors(raw_errors(chi_hat, chi_true), d);
}

LocalisationSummary localisation_diagnostic(const FactorFit& fit, int true_r) {
  if (fit.spec.method != EstimatorMethod::Scaled) {
    throw InvalidInput("localisation diagnostic requires a scaled fit");
  }
  if (true_r < 1) throw InvalidInput("true r must be >= 1");

  double within = 0.0, beyond = 0.0;
  int n_within = 0, n_beyond = 0;
  auto add = [&](const std::vector<EigenvectorDiagnostic>& ds) {
    for (const auto& d : ds) {
      if (d.j >= 2 && d.j <= true_r) {
        within += 1.0 / d.nu;
        ++n_within;
      } else if (d.j > true_r) {
        beyond += 1.0 / d.nu;
        ++n_beyond;
      }
    }
  };
  if (fit.spec.blockwise) {
    for (const auto& b : fit.blocks) add(b.eigenvectors);
  } else {
    add(fit.diagnostics);
  }

  LocalisationSummary out;
  if (n_within > 0) out.within = within / n_within;
  if (n_beyond > 0) out.beyond = beyond / n_beyond;
  return out;
}

std::string RSelector::label() const {
  switch (kind) {
    case Kind::BaiNgIC: return "bn";
    case Kind::AhnHorensteinGR: return "ah";
    case Kind::Fixed: return "fixed:" + std::to_string(k);
    case Kind::TruePlus: return "true+" + std::to_string(k);
  }
  return "bn";
}

RSelector RSelector::parse(const std::string& text) {
  if (text == "bn" || text == "auto-bn" || text == "bai-ng") return bai_ng();
  if (text == "ah" || text == "auto-ah" || text == "ahn-horenstein") return ahn_horenstein();
  auto number = [&](const std::string& digits) {
    std::size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(digits, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != digits.size() || value < 0) {
      throw InvalidInput("invalid r selector '" + text + "'");
    }
    return value;
  };
  if (text.rfind("fixed:", 0) == 0) {
    const int k = number(text.substr(6));
    if (k < 1) throw InvalidInput("fixed r must be >= 1");
    return fixed(k);
  }
  if (text == "true") return true_plus(0);
  if (text.rfind("true+", 0) == 0) return true_plus(number(text.substr(5)));
  throw InvalidInput("invalid r selector '" + text +
                     "' (expected bn, ah, fixed:K, true or true+M)");
}

StudyMethod oracle_method() {
  StudyMethod m;
  m.label = "oracle";
  m.spec.method = EstimatorMethod::PC;
  m.use_true_r = true;
  return m;
}

std::vector<StudyMethod> standard_methods(bool blockwise) {
  std::vector<StudyMethod> out;
  for (auto method : {EstimatorMethod::PC, EstimatorMethod::Capped, EstimatorMethod::Scaled,
                      EstimatorMethod::Shrunk}) {
    StudyMethod m;
    m.spec.method = method;
    m.spec.blockwise = blockwise;
    m.label = m.spec.tag();
    out.push_back(m);
  }
  return out;
}

void McStudyConfig::validate() const {
  if (replications < 1) throw InvalidInput("replications must be >= 1");
  if (n_grid.empty() || T_grid.empty() || phi_grid.empty()) {
    throw InvalidInput("n, T and phi grids must be non-empty");
  }
  if (std::holds_alternative<Model2Params>(base.model) && varrho_grid.empty()) {
    throw InvalidInput("varrho grid must be non-empty for model2");
  }
  if (r_max && *r_max < 1) throw InvalidInput("r_max must be >= 1");
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0)) {
    throw InvalidInput("max_failure_fraction must lie in [0, 1]");
  }
  if ((r_selector.kind == RSelector::Kind::Fixed && r_selector.k < 1) ||
      (r_selector.kind == RSelector::Kind::TruePlus && r_selector.k < 0)) {
    throw InvalidInput("invalid r selector parameter");
  }
  for (const auto& m : methods) {
    if (m.label.empty()) throw InvalidInput("study methods need a label");
    if (m.spec.c_w && !(*m.spec.c_w > 0.0)) throw InvalidInput("c_w must be positive");
  }
  for (const auto& s : expand_settings(*this)) s.validate();
}

std::vector<SimConfig> expand_settings(const McStudyConfig& config) {
  const bool model2 = std::holds_alternative<Model2Params>(config.base.model);
  const std::vector<double> varrhos =
      model2 ? config.varrho_grid : std::vector<double>{std::nan("")};
  std::vector<SimConfig> out;
  for (Index n : config.n_grid) {
    for (Index T : config.T_grid) {
      for (double phi : config.phi_grid) {
        for (double varrho : varrhos) {
          SimConfig s = config.base;
          s.n = n;
          s.T = T;
          s.phi = phi;
          if (model2) std::get<Model2Params>(s.model).varrho = varrho;
          out.push_back(s);
        }
      }
    }
  }
  return out;
}

double pairwise_sum(const std::vector<double>& values) {
  auto rec = [&](auto&& self, std::size_t lo, std::size_t hi) -> double {
    if (hi - lo <= 8) {
      double s = 0.0;
      for (std::size_t i = lo; i < hi; ++i) s += values[i];
      return s;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    return self(self, lo, mid) + self(self, mid, hi);
  };
  return rec(rec, 0, values.size());
}

double mean(const std::vector<double>& values) {
  if (values.empty()) return std::nan("");
  return pairwise_sum(values) / static_cast<double>(values.size());
}

double sample_sd(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - m) * (values[i] - m);
  return std::sqrt(pairwise_sum(sq) / static_cast<double>(values.size() - 1));
}

double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size() / 2;
  return values.size() % 2 == 1 ? values[h] : 0.5 * (values[h - 1] + values[h]);
}

namespace {

struct Replication {
  bool ok = false;
  std::string error;
  int r_hat = 0;
  std::vector<RawErrors> raw;
  std::vector<LocalisationSummary> localisation;
};

int select_r(const RSelector& sel, const CovarianceSpectrum& spectrum, Index n, Index T, int r,
             int r_max) {
  switch (sel.kind) {
    case RSelector::Kind::Fixed: return sel.k;
    case RSelector::Kind::TruePlus: return r + sel.k;
    case RSelector::Kind::BaiNgIC: {
      const auto& v = spectrum.leading.values;
      return ic_bai_ng(SpectrumView{{v.data(), static_cast<std::size_t>(v.size())}, spectrum.trace},
                       n, T, r_max)
          .r_hat;
    }
    case RSelector::Kind::AhnHorensteinGR: {
      const auto& v = spectrum.leading.values;
      return gr_ahn_horenstein(
                 SpectrumView{{v.data(), static_cast<std::size_t>(v.size())}, spectrum.trace}, n,
                 T, r_max)
          .r_hat;
    }
  }
  return r;
}

bool needs_spectrum_selector(const RSelector& sel) {
  return sel.kind == RSelector::Kind::BaiNgIC || sel.kind == RSelector::Kind::AhnHorensteinGR;
}

Replication run_replication(const SimConfig& sim, const std::vector<StudyMethod>& methods,
                            const McStudyConfig& config) {
  Replication out;
  const SimulatedPanel panel = simulate(sim);
  const Eigen::MatrixXd& x = panel.x;
  const Index n = sim.n, T = sim.T;
  const Index rank_bound = std::min(n, T);
  const int r_max = config.r_max.value_or(default_r_max(n, T));

  Index k_full = sim.r;
  if (needs_spectrum_selector(config.r_selector)) k_full = std::max<Index>(k_full, r_max + 1);
  if (k_full > n) throw InvalidInput("r_max + 1 exceeds n");

  CovarianceSpectrum spectrum = covariance_spectrum(x, k_full);
  out.r_hat = select_r(config.r_selector, spectrum, n, T, sim.r, r_max);
  if (out.r_hat < 1 || out.r_hat > rank_bound) {
    throw InvalidInput("selected r_hat=" + std::to_string(out.r_hat) + " outside [1, min(n, T)]");
  }
  if (out.r_hat > spectrum.leading.size()) spectrum = covariance_spectrum(x, out.r_hat);

  const int block_k = std::max(out.r_hat, sim.r);
  std::map<Index, std::pair<BlockPartition, std::vector<EigenSystem>>> blocks;

  for (const auto& m : methods) {
    EstimatorSpec spec = m.spec;
    spec.r_hat = m.use_true_r ? sim.r : out.r_hat;
    FactorFit fit;
    if (spec.blockwise) {
      BlockPartition partition = resolve_partition(spec, T);
      auto it = blocks.find(partition.block_size);
      if (it == blocks.end()) {
        auto spectra = block_spectra(x, partition, block_k);
        it = blocks.emplace(partition.block_size,
                            std::make_pair(std::move(partition), std::move(spectra)))
                 .first;
      }
      fit = blockwise_from_spectra(x, it->second.first, it->second.second, spec);
    } else {
      fit = estimate_from_spectrum(x, spectrum.leading, spec);
    }
    out.raw.push_back(raw_errors(fit.chi_hat, panel.chi));
    out.localisation.push_back(spec.method == EstimatorMethod::Scaled
                                   ? localisation_diagnostic(fit, sim.r)
                                   : LocalisationSummary{});
  }
  out.ok = true;
  return out;
}

}  // namespace

McReport run_study(const McStudyConfig& config, const StudyProgress& progress) {
  config.validate();
  std::vector<StudyMethod> methods{oracle_method()};
  for (const auto& m : config.methods) {
    if (m.label != "oracle") methods.push_back(m);
  }

  McReport report;
  report.config = config;
  const auto settings = expand_settings(config);
  const auto reps = static_cast<std::size_t>(config.replications);

  for (std::size_t s = 0; s < settings.size(); ++s) {
    std::vector<Replication> results(reps);
    parallel_for(reps, config.threads, [&](std::size_t k) {
      SimConfig sim = settings[s];
      sim.seed = derive_seed(config.base_seed, {s, k});
      try {
        results[k] = run_replication(sim, methods, config);
      } catch (const Error& e) {
        results[k].ok = false;
        results[k].error = "replication " + std::to_string(k) + ": " + e.what();
      }
    });

    SettingReport sr;
    sr.sim = settings[s];
    sr.sim.seed = config.base_seed;
    sr.attempted = config.replications;
    for (const auto& res : results) {
      if (!res.ok) {
        ++sr.failed;
        sr.failures.push_back(res.error);
      }
    }
    report.total_failures += sr.failed;
    if (sr.failed > config.max_failure_fraction * config.replications || sr.failed == sr.attempted) {
      throw StudyFailed("setting " + std::to_string(s) + ": " + std::to_string(sr.failed) + " of " +
                        std::to_string(sr.attempted) + " replications failed" +
                        (sr.failures.empty() ? "" : "; first: " + sr.failures.front()));
    }

    sr.methods.resize(methods.size());
    for (std::size_t m = 0; m < methods.size(); ++m) sr.methods[m].method = methods[m];
    std::vector<std::vector<double>> within(methods.size()), beyond(methods.size());
    for (const auto& res : results) {
      if (!res.ok) continue;
      sr.r_hat.push_back(res.r_hat);
      ++sr.r_hat_counts[res.r_hat];
      for (std::size_t m = 0; m < methods.size(); ++m) {
        sr.methods[m].raw_avg.push_back(res.raw[m].avg);
        sr.methods[m].raw_max.push_back(res.raw[m].max);
        if (res.localisation[m].within) within[m].push_back(*res.localisation[m].within);
        if (res.localisation[m].beyond) beyond[m].push_back(*res.localisation[m].beyond);
      }
    }

    sr.denominators = {mean(sr.methods[0].raw_avg), mean(sr.methods[0].raw_max)};
    for (std::size_t m = 0; m < methods.size(); ++m) {
      auto& ms = sr.methods[m];
      for (std::size_t k = 0; k < ms.raw_avg.size(); ++k) {
        const RelativeErrors rel = relative_errors({ms.raw_avg[k], ms.raw_max[k]}, sr.denominators);
        ms.err_avg.push_back(rel.err_avg);
        ms.err_max.push_back(rel.err_max);
      }
      ms.mean_err_avg = mean(ms.err_avg);
      ms.sd_err_avg = sample_sd(ms.err_avg);
      ms.mean_err_max = mean(ms.err_max);
      ms.sd_err_max = sample_sd(ms.err_max);
      if (!within[m].empty()) ms.localisation_within = mean(within[m]);
      if (!beyond[m].empty()) ms.localisation_beyond = mean(beyond[m]);
    }
    report.settings.push_back(std::move(sr));
    if (progress) progress(s + 1, settings.size());
  }
  return report;
}

}  // namespace factorlab
