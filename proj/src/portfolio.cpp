#include "factorlab/portfolio.hpp"

#include "factorlab/errors.hpp"
#include "factorlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace factorlab {

Eigen::MatrixXd center_columns(const Eigen::MatrixXd& x) {
  if (x.rows() == 0) return x;
  const Eigen::RowVectorXd mu = x.colwise().mean();
  return x.rowwise() - mu;
}

namespace {

void check_window(const Eigen::MatrixXd& window) {
  if (window.rows() < 2) throw InvalidInput("covariance window needs at least 2 rows");
  if (window.cols() < 1) throw InvalidInput("covariance window has no series");
  if (!window.allFinite()) throw InvalidInput("covariance window contains non-finite values");
}

SymMatrix factor_part(const Eigen::MatrixXd& chi) {
  const double T = static_cast<double>(chi.rows());
  return SymMatrix((chi.transpose() * chi) / T);
}

}  // namespace

WindowDecomposition decompose_window(const Eigen::MatrixXd& window, const EstimatorSpec& spec) {
  check_window(window);
  WindowDecomposition out;
  if (spec.r_hat == 0) {
    out.chi = Eigen::MatrixXd::Zero(window.rows(), window.cols());
    out.eps = window;
    return out;
  }
  EstimatorSpec s = spec;
  if (s.blockwise && !s.block) {
    s.block = make_partition(window.rows(), default_block_size(window.rows(), BlockRounding::Ceil));
  }
  out.fit = estimate(PanelData{window, {}, {}}, s);
  out.chi = out.fit.chi_hat;
  out.eps = out.fit.eps_hat;
  return out;
}

CovarianceEstimate efm_covariance(const Eigen::MatrixXd& window, const EstimatorSpec& spec,
                                  bool center) {
  if (spec.r_hat < 0) throw InvalidInput("r_hat must be >= 0");
  check_window(window);
  const Eigen::MatrixXd x = center ? center_columns(window) : window;
  const WindowDecomposition d = decompose_window(x, spec);
  const double T = static_cast<double>(x.rows());

  Eigen::MatrixXd sigma = factor_part(d.chi).values();
  const Eigen::VectorXd idio = d.eps.colwise().squaredNorm().transpose() / T;
  sigma.diagonal() += idio;

  CovarianceEstimate out(SymMatrix{sigma});
  out.kind = CovarianceKind::EFM;
  out.spec = spec;
  out.r_hat = spec.r_hat;
  out.warnings = d.fit.warnings;
  return out;
}

PoetResidual poet_residual(const Eigen::MatrixXd& eps) {
  const Index T = eps.rows(), n = eps.cols();
  if (T < 2 || n < 1) throw InvalidInput("poet residual needs at least 2 rows");
  const double td = static_cast<double>(T);
  PoetResidual out;
  out.s = SymMatrix((eps.transpose() * eps) / td).values();
  out.theta = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      const double s = out.s(i, j);
      double acc = 0.0;
      for (Index t = 0; t < T; ++t) {
        const double d = eps(t, i) * eps(t, j) - s;
        acc += d * d;
      }
      out.theta(i, j) = out.theta(j, i) = acc / td;
    }
  }
  const double nd = static_cast<double>(n);
  out.omega_T = 1.0 / std::sqrt(nd) + std::sqrt(std::log(nd) / td);
  return out;
}

Eigen::MatrixXd poet_threshold(const PoetResidual& residual, double C) {
  if (!(C >= 0.0)) throw InvalidInput("POET constant must be non-negative");
  Eigen::MatrixXd out = residual.s;
  const Index n = out.rows();
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double bound = C == 0.0 ? 0.0 : C * residual.omega_T * std::sqrt(residual.theta(i, j));
      if (!(std::abs(out(i, j)) >= bound)) out(i, j) = 0.0;
    }
  }
  return out;
}

CovarianceEstimate poet_covariance(const Eigen::MatrixXd& window, int r_hat,
                                   const PoetOptions& options, bool center) {
  if (r_hat < 0) throw InvalidInput("r_hat must be >= 0");
  check_window(window);
  const Eigen::MatrixXd x = center ? center_columns(window) : window;
  EstimatorSpec spec;
  spec.method = EstimatorMethod::PC;
  spec.r_hat = r_hat;
  const WindowDecomposition d = decompose_window(x, spec);
  const PoetResidual residual = poet_residual(d.eps);
  const Eigen::MatrixXd common = factor_part(d.chi).values();

  double chosen = 0.0;
  Eigen::MatrixXd thresholded;
  if (options.constant) {
    chosen = *options.constant;
    thresholded = poet_threshold(residual, chosen);
  } else {
    if (options.grid.empty()) throw InvalidInput("POET grid must be non-empty");
    std::vector<double> grid = options.grid;
    std::sort(grid.begin(), grid.end());
    bool found = false;
    for (double C : grid) {
      Eigen::MatrixXd candidate = poet_threshold(residual, C);
      const EigenSystem es = sym_eigen(SymMatrix(candidate));
      if (es.values[es.size() - 1] > options.min_eigenvalue) {
        chosen = C;
        thresholded = std::move(candidate);
        found = true;
        break;
      }
    }
    if (!found) {
      throw PoetInfeasible("no POET constant on the grid gives a positive definite residual "
                           "covariance");
    }
  }

  CovarianceEstimate out(SymMatrix{common + thresholded});
  out.kind = CovarianceKind::POET;
  out.spec = spec;
  out.r_hat = r_hat;
  out.poet_c = chosen;
  out.omega_T = residual.omega_T;
  out.warnings = d.fit.warnings;
  return out;
}

namespace {

Eigen::VectorXd argmin_weights(const SymMatrix& sigma) {
  const Eigen::MatrixXd inv = invert_spd(sigma).values();
  const Eigen::VectorXd raw = inv.rowwise().sum();
  const double total = raw.sum();
  if (!(std::abs(total) > 0.0) || !std::isfinite(total)) {
    throw SingularMatrix("1^T Sigma^-1 1 is not a usable normalizer");
  }
  return raw / total;
}

}  // namespace

MinVarianceWeights min_variance_weights(const SymMatrix& sigma, WeightRule rule) {
  MinVarianceWeights out;
  if (rule == WeightRule::Literal) {
    const Eigen::VectorXd raw = sigma.values().rowwise().sum();
    const double total = raw.sum();
    if (!(std::abs(total) > 0.0)) throw SingularMatrix("1^T Sigma 1 is zero");
    out.weights = raw / total;
    return out;
  }
  try {
    out.weights = argmin_weights(sigma);
  } catch (const SingularMatrix&) {
    const double n = static_cast<double>(sigma.dim());
    const double trace = sigma.values().trace();
    const double ridge = trace > 0.0 ? 1e-8 * trace / n : 1e-8;
    Eigen::MatrixXd a = sigma.values();
    a.diagonal().array() += ridge;
    out.weights = argmin_weights(SymMatrix(a));
    out.ridge_applied = true;
  }
  return out;
}

BacktestMethod parse_backtest_method(const std::string& name, int r_hat) {
  BacktestMethod m;
  m.label = name;
  m.spec.r_hat = r_hat;
  if (name == "poet") {
    m.kind = CovarianceKind::POET;
    m.spec.method = EstimatorMethod::PC;
    return m;
  }
  if (name.rfind("efm-", 0) != 0) {
    throw InvalidInput("unknown backtest method '" + name + "' (expected efm-<pc|cp|sc|sh>, "
                       "efm-b<pc|cp|sc|sh> or poet)");
  }
  std::string tag = name.substr(4);
  if (!tag.empty() && tag[0] == 'b' && tag != "b") {
    m.spec.blockwise = true;
    tag = tag.substr(1);
  }
  m.spec.method = parse_estimator_method(tag);
  return m;
}

int window_count(Index T, Index window, Index step) {
  if (window < 2 || step < 1) throw InvalidInput("window must be >= 2 and step >= 1");
  if (T <= window) {
    throw InvalidInput("T=" + std::to_string(T) + " must exceed the window length " +
                       std::to_string(window));
  }
  return static_cast<int>((T - window + step - 1) / step);
}

namespace {

int window_r_hat(const BacktestMethod& method, const Eigen::MatrixXd& x) {
  if (!method.r_estimator) return method.spec.r_hat;
  const Index n = x.cols(), T = x.rows();
  const int r_max = default_r_max(n, T);
  const Index k = std::min<Index>(r_max + 1, n);
  const CovarianceSpectrum spec = covariance_spectrum(x, k);
  const SpectrumView view{{spec.leading.values.data(), static_cast<std::size_t>(k)}, spec.trace};
  if (*method.r_estimator == FactorNumberMethod::BaiNgIC) {
    return ic_bai_ng(view, n, T, std::min<int>(r_max, static_cast<int>(k))).r_hat;
  }
  return gr_ahn_horenstein(view, n, T, std::min<int>(r_max, static_cast<int>(k) - 1)).r_hat;
}

WindowResult run_window(const BacktestMethod& method, const Eigen::MatrixXd& x, int k,
                        const BacktestOptions& options) {
  const Index T = x.rows();
  WindowResult w;
  w.k = k;
  w.estimation = {options.step * k, options.step * k + options.window};
  w.evaluation = {options.window + options.step * k,
                  options.window + std::min<Index>(options.step * (k + 1), T - options.window)};
  try {
    const Eigen::MatrixXd est = x.middleRows(w.estimation.begin, w.estimation.size());
    const Eigen::MatrixXd fit_rows = options.center ? center_columns(est) : est;
    w.r_hat = window_r_hat(method, fit_rows);

    CovarianceEstimate cov = [&] {
      if (method.kind == CovarianceKind::POET) {
        return poet_covariance(est, w.r_hat, method.poet, options.center);
      }
      EstimatorSpec spec = method.spec;
      spec.r_hat = w.r_hat;
      return efm_covariance(est, spec, options.center);
    }();
    cov.window = k;
    w.poet_c = cov.poet_c;

    const MinVarianceWeights mv = min_variance_weights(cov.sigma, options.weight_rule);
    w.weights = mv.weights;
    w.ridge_applied = mv.ridge_applied;
  } catch (const Error& e) {
    w.error = e.what();
    return w;
  }

  const Eigen::VectorXd realized = x.middleRows(w.evaluation.begin, w.evaluation.size()) * w.weights;
  w.returns.assign(realized.data(), realized.data() + realized.size());
  const double len = static_cast<double>(w.returns.size());
  for (double r : w.returns) w.tau += r;
  w.mu = w.tau / len;
  const bool constant =
      std::all_of(w.returns.begin(), w.returns.end(), [&](double r) { return r == w.returns[0]; });
  if (!constant) {
    double ss = 0.0;
    for (double r : w.returns) ss += (r - w.mu) * (r - w.mu);
    w.sigma2 = ss / len;
  }
  w.skipped_in_sr = !(w.sigma2 > 0.0);
  return w;
}

}  // namespace

std::vector<BacktestReport> rolling_backtest(const PanelData& returns,
                                             const std::vector<BacktestMethod>& methods,
                                             const BacktestOptions& options) {
  const Eigen::MatrixXd& x = returns.values;
  if (!x.allFinite()) throw InvalidInput("returns contain non-finite values");
  if (methods.empty()) throw InvalidInput("no backtest methods given");
  const Index T = x.rows();
  const int M = window_count(T, options.window, options.step);

  std::vector<BacktestReport> reports(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) {
    reports[m].method = methods[m];
    reports[m].window = options.window;
    reports[m].step = options.step;
    reports[m].M = M;
    reports[m].windows.resize(static_cast<std::size_t>(M));
  }
  const std::size_t jobs = methods.size() * static_cast<std::size_t>(M);
  parallel_for(jobs, options.threads, [&](std::size_t job) {
    const std::size_t m = job / static_cast<std::size_t>(M);
    const int k = static_cast<int>(job % static_cast<std::size_t>(M));
    reports[m].windows[static_cast<std::size_t>(k)] = run_window(methods[m], x, k, options);
  });

  const double oos = static_cast<double>(T - options.window);
  for (auto& rep : reports) {
    for (const auto& w : rep.windows) {
      if (!w.error.empty()) {
        rep.excluded = true;
        rep.warnings.push_back("window " + std::to_string(w.k) + ": " + w.error);
      } else if (w.ridge_applied) {
        rep.warnings.push_back("window " + std::to_string(w.k) + ": ridge added to singular "
                               "covariance");
      }
    }
    if (rep.excluded) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      rep.tau = rep.sigma2 = rep.sharpe = nan;
      rep.warnings.push_back("method excluded from the summary");
      continue;
    }
    double pooled = 0.0, ratio_sum = 0.0;
    int used = 0;
    for (const auto& w : rep.windows) {
      rep.tau += w.tau;
      if (w.sigma2 > 0.0) {
        for (double r : w.returns) pooled += (r - w.mu) * (r - w.mu);
      }
      if (w.skipped_in_sr) {
        rep.warnings.push_back("window " + std::to_string(w.k) +
                               ": zero out-of-sample variance, skipped in SR");
      } else {
        ratio_sum += w.tau / std::sqrt(w.sigma2);
        ++used;
      }
    }
    rep.sigma2 = pooled / oos;
    rep.sharpe = used > 0 ? ratio_sum / used : std::numeric_limits<double>::infinity();
  }
  return reports;
}

}  // namespace factorlab
