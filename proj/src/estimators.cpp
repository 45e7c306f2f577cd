#include "factorlab/estimators.hpp"

#include "factorlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace factorlab {

std::string to_string(EstimatorMethod method) {
  switch (method) {
    case EstimatorMethod::PC: return "pc";
    case EstimatorMethod::Scaled: return "scaled";
    case EstimatorMethod::Capped: return "capped";
    case EstimatorMethod::Shrunk: return "shrunk";
  }
  return "pc";
}

EstimatorMethod parse_estimator_method(const std::string& name) {
  if (name == "pc") return EstimatorMethod::PC;
  if (name == "scaled" || name == "sc") return EstimatorMethod::Scaled;
  if (name == "capped" || name == "cp") return EstimatorMethod::Capped;
  if (name == "shrunk" || name == "sh" || name == "shrinkage") return EstimatorMethod::Shrunk;
  throw InvalidInput("unknown estimator method '" + name + "'");
}

void EstimatorSpec::validate() const {
  if (r_hat < 1) throw InvalidInput("r_hat must be >= 1");
  if (c_w && !(*c_w > 0.0 && std::isfinite(*c_w))) throw InvalidInput("c_w must be positive");
}

std::string EstimatorSpec::tag() const {
  static const char* kTags[] = {"pc", "sc", "cp", "sh"};
  return (blockwise ? "b" : "") + std::string(kTags[static_cast<int>(method)]);
}

double default_cw(const Eigen::VectorXd& leading_eigenvector, Index n) {
  const double top = leading_eigenvector.cwiseAbs().maxCoeff();
  if (!(top > 0.0)) throw InvalidInput("default_cw: leading eigenvector is zero");
  return 1.1 * std::sqrt(static_cast<double>(n)) * top;
}

ScaledEigenvectors scale_eigenvectors(const Eigen::MatrixXd& w, double c_w, Index n) {
  if (!(c_w > 0.0)) throw InvalidInput("c_w must be positive");
  const double root_n = std::sqrt(static_cast<double>(n));
  ScaledEigenvectors out{w, Eigen::VectorXd::Ones(w.cols())};
  for (Index j = 0; j < w.cols(); ++j) {
    const double nu = std::max(1.0, root_n / c_w * w.col(j).cwiseAbs().maxCoeff());
    out.nu[j] = nu;
    if (nu != 1.0) out.vectors.col(j) /= nu;
  }
  return out;
}

CappedEigenvectors cap_eigenvectors(const Eigen::MatrixXd& w, double c_w, Index n) {
  if (!(c_w > 0.0)) throw InvalidInput("c_w must be positive");
  const double bound = c_w / std::sqrt(static_cast<double>(n));
  CappedEigenvectors out{w, std::vector<int>(static_cast<std::size_t>(w.cols()), 0)};
  for (Index j = 0; j < w.cols(); ++j) {
    for (Index i = 0; i < w.rows(); ++i) {
      const double value = w(i, j);
      if (std::abs(value) > bound) {
        out.vectors(i, j) = value > 0.0 ? bound : -bound;
        ++out.cap_counts[static_cast<std::size_t>(j)];
      }
    }
  }
  return out;
}

Eigen::VectorXd shrink_weights(const Eigen::VectorXd& eigenvalues, int r_hat) {
  if (r_hat < 1 || r_hat > eigenvalues.size()) throw InvalidInput("r_hat out of range");
  const double top = eigenvalues[0];
  if (!(top > 0.0)) {
    throw DegenerateSpectrum("leading eigenvalue is not positive; shrinkage undefined", 1);
  }
  Eigen::VectorXd s(r_hat);
  s[0] = 1.0;
  for (int j = 1; j < r_hat; ++j) s[j] = std::sqrt(std::max(eigenvalues[j], 0.0) / top);
  return s;
}

ModifiedEigenvectors modify_eigenvectors(const EigenSystem& eigen, const EstimatorSpec& spec,
                                         double c_w) {
  const int r = spec.r_hat;
  if (r < 1 || r > eigen.size()) {
    throw InvalidInput("r_hat=" + std::to_string(r) + " exceeds the " +
                       std::to_string(eigen.size()) + " available eigenpairs");
  }
  const Index n = eigen.vectors.rows();
  const Eigen::MatrixXd w = eigen.vectors.leftCols(r);

  ModifiedEigenvectors out;
  out.diagnostics.resize(static_cast<std::size_t>(r));
  for (int j = 0; j < r; ++j) {
    auto& d = out.diagnostics[static_cast<std::size_t>(j)];
    d.j = j + 1;
    d.eigenvalue = eigen.values[j];
    d.max_coordinate = w.col(j).cwiseAbs().maxCoeff();
  }

  switch (spec.method) {
    case EstimatorMethod::PC:
      out.loading = w;
      out.direction = w;
      break;
    case EstimatorMethod::Scaled: {
      ScaledEigenvectors scaled = scale_eigenvectors(w, c_w, n);
      for (int j = 0; j < r; ++j) out.diagnostics[static_cast<std::size_t>(j)].nu = scaled.nu[j];
      out.loading = scaled.vectors;
      out.direction = spec.scaled_weighting == ScaledWeighting::Quadratic ? scaled.vectors : w;
      break;
    }
    case EstimatorMethod::Capped: {
      CappedEigenvectors capped = cap_eigenvectors(w, c_w, n);
      for (int j = 0; j < r; ++j) {
        out.diagnostics[static_cast<std::size_t>(j)].cap_count =
            capped.cap_counts[static_cast<std::size_t>(j)];
      }
      out.loading = capped.vectors;
      out.direction = capped.vectors;
      break;
    }
    case EstimatorMethod::Shrunk: {
      const Eigen::VectorXd s = shrink_weights(eigen.values, r);
      for (int j = 0; j < r; ++j) out.diagnostics[static_cast<std::size_t>(j)].shrink_weight = s[j];
      out.loading = w * s.asDiagonal();
      out.direction = w;
      break;
    }
  }
  for (int j = 0; j < r; ++j) {
    out.diagnostics[static_cast<std::size_t>(j)].norm_after = out.loading.col(j).norm();
  }
  return out;
}

namespace {

bool uses_cw(EstimatorMethod m) {
  return m == EstimatorMethod::Scaled || m == EstimatorMethod::Capped;
}

void warn_rank_deficient(const Eigen::VectorXd& values, int r, std::vector<std::string>& warnings,
                         const std::string& where) {
  for (int j = 0; j < r; ++j) {
    if (values[j] == 0.0) {
      warnings.push_back(where + "r_hat=" + std::to_string(r) +
                         " exceeds the covariance rank; eigenvalue " + std::to_string(j + 1) +
                         " is zero");
      return;
    }
  }
}

void check_r_hat(const PanelData& panel, int r_hat) {
  const Index bound = std::min(panel.series(), panel.periods());
  if (r_hat < 1 || r_hat > bound) {
    throw InvalidInput("r_hat=" + std::to_string(r_hat) + " outside [1, min(n, T)=" +
                       std::to_string(bound) + "]");
  }
}

}  // namespace

FactorFit estimate_from_spectrum(const Eigen::MatrixXd& x, const EigenSystem& leading,
                                 const EstimatorSpec& spec) {
  spec.validate();
  FactorFit fit;
  fit.spec = spec;
  fit.spec.blockwise = false;
  if (uses_cw(spec.method)) {
    fit.c_w = spec.c_w ? *spec.c_w : default_cw(leading.vectors.col(0), x.cols());
  }
  warn_rank_deficient(leading.values, spec.r_hat, fit.warnings, "");
  const ModifiedEigenvectors mod = modify_eigenvectors(leading, spec, fit.c_w);
  fit.diagnostics = mod.diagnostics;
  fit.chi_hat = (x * mod.direction) * mod.loading.transpose();
  fit.eps_hat = x - fit.chi_hat;
  return fit;
}

FactorFit pc_estimate(const PanelData& panel, int r_hat) {
  EstimatorSpec spec;
  spec.method = EstimatorMethod::PC;
  spec.r_hat = r_hat;
  return estimate(panel, spec);
}

FactorFit scaled_pc_estimate(const PanelData& panel, int r_hat, std::optional<double> c_w) {
  EstimatorSpec spec;
  spec.method = EstimatorMethod::Scaled;
  spec.r_hat = r_hat;
  spec.c_w = c_w;
  return estimate(panel, spec);
}

FactorFit capped_pc_estimate(const PanelData& panel, int r_hat, std::optional<double> c_w) {
  EstimatorSpec spec;
  spec.method = EstimatorMethod::Capped;
  spec.r_hat = r_hat;
  spec.c_w = c_w;
  return estimate(panel, spec);
}

FactorFit shrunk_pc_estimate(const PanelData& panel, int r_hat) {
  EstimatorSpec spec;
  spec.method = EstimatorMethod::Shrunk;
  spec.r_hat = r_hat;
  return estimate(panel, spec);
}

BlockPartition resolve_partition(const EstimatorSpec& spec, Index T) {
  if (spec.block) {
    if (spec.block->T != T) throw InvalidInput("block partition length does not match the panel");
    return *spec.block;
  }
  return make_partition(T, default_block_size(T));
}

std::vector<EigenSystem> block_spectra(const Eigen::MatrixXd& x, const BlockPartition& partition,
                                       Index k) {
  std::vector<EigenSystem> out;
  out.reserve(partition.blocks.size());
  for (const auto& rows : partition.leave_out) {
    out.push_back(covariance_spectrum(x, rows, k).leading);
  }
  return out;
}

FactorFit blockwise_from_spectra(const Eigen::MatrixXd& x, const BlockPartition& partition,
                                 const std::vector<EigenSystem>& spectra,
                                 const EstimatorSpec& spec) {
  spec.validate();
  if (spectra.size() != partition.blocks.size()) {
    throw InvalidInput("one spectrum per block is required");
  }
  FactorFit fit;
  fit.spec = spec;
  fit.spec.blockwise = true;
  fit.spec.block = partition;
  if (uses_cw(spec.method)) {
    if (spec.c_w) {
      fit.c_w = *spec.c_w;
    } else {
      for (const auto& es : spectra) fit.c_w = std::max(fit.c_w, default_cw(es.vectors.col(0), x.cols()));
    }
  }

  fit.chi_hat.resize(x.rows(), x.cols());
  fit.blocks.reserve(spectra.size());
  for (std::size_t l = 0; l < spectra.size(); ++l) {
    const IndexRange rows = partition.blocks[l];
    const EigenSystem& es = spectra[l];
    warn_rank_deficient(es.values, spec.r_hat, fit.warnings,
                        "block " + std::to_string(l + 1) + ": ");
    const ModifiedEigenvectors mod = modify_eigenvectors(es, spec, fit.c_w);
    const auto block_rows = x.middleRows(rows.begin, rows.size());
    fit.chi_hat.middleRows(rows.begin, rows.size()) =
        (block_rows * mod.direction) * mod.loading.transpose();
    fit.blocks.push_back({rows, es.leading(spec.r_hat), mod.diagnostics});
  }
  fit.eps_hat = x - fit.chi_hat;
  return fit;
}

FactorFit blockwise_estimate(const PanelData& panel, const EstimatorSpec& spec) {
  spec.validate();
  check_r_hat(panel, spec.r_hat);
  const BlockPartition partition = resolve_partition(spec, panel.periods());
  const auto spectra = block_spectra(panel.values, partition, spec.r_hat);
  return blockwise_from_spectra(panel.values, partition, spectra, spec);
}

FactorFit estimate(const PanelData& panel, const EstimatorSpec& spec) {
  spec.validate();
  if (spec.blockwise) return blockwise_estimate(panel, spec);
  check_r_hat(panel, spec.r_hat);
  const CovarianceSpectrum spectrum = covariance_spectrum(panel.values, spec.r_hat);
  return estimate_from_spectrum(panel.values, spectrum.leading, spec);
}

std::vector<double> default_cw_multipliers() {
  std::vector<double> out;
  for (int k = 8; k <= 15; ++k) out.push_back(k / 10.0);
  return out;
}

CwSelection cw_cross_validate(const PanelData& panel, int r_hat,
                              std::span<const double> multipliers,
                              std::optional<BlockPartition> partition) {
  if (multipliers.empty()) throw InvalidInput("c_w grid must be non-empty");
  check_r_hat(panel, r_hat);
  const Eigen::MatrixXd& x = panel.values;
  const BlockPartition blocks = partition ? *partition : make_partition_by_count(x.rows(), 5);
  const CovarianceSpectrum full = covariance_spectrum(x, 1);
  const double base = std::sqrt(static_cast<double>(x.cols())) *
                      full.leading.vectors.col(0).cwiseAbs().maxCoeff();
  const auto spectra = block_spectra(x, blocks, r_hat);

  CwSelection out;
  EstimatorSpec spec;
  spec.method = EstimatorMethod::Scaled;
  spec.blockwise = true;
  spec.r_hat = r_hat;
  spec.block = blocks;
  const double T = static_cast<double>(x.rows());
  for (double m : multipliers) {
    spec.c_w = m * base;
    const FactorFit fit = blockwise_from_spectra(x, blocks, spectra, spec);
    const double err = fit.eps_hat.colwise().squaredNorm().maxCoeff() / T;
    out.grid.push_back(*spec.c_w);
    out.errors.push_back(err);
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < out.grid.size(); ++k) {
    if (out.errors[k] < out.errors[best] ||
        (out.errors[k] == out.errors[best] && out.grid[k] < out.grid[best])) {
      best = k;
    }
  }
  out.c_star = out.grid[best];
  return out;
}

}  // namespace factorlab
