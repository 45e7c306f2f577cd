#include "factorlab/errors.hpp"
#include "factorlab/portfolio.hpp"
#include "factorlab/rng.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

using namespace factorlab;

namespace {

Eigen::MatrixXd random_matrix(Index rows, Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

// Returns with a couple of common factors and heterogeneous noise.
Eigen::MatrixXd factor_returns(Index T, Index n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd out(T, n);
  Eigen::MatrixXd loadings = random_matrix(2, n, seed + 1000);
  for (Index t = 0; t < T; ++t) {
    const double f1 = rng.normal(), f2 = 0.5 * rng.normal();
    for (Index i = 0; i < n; ++i) {
      const double scale = 0.5 + 0.1 * static_cast<double>(i % 5);
      out(t, i) = 0.01 * (loadings(0, i) * f1 + loadings(1, i) * f2 + scale * rng.normal());
    }
  }
  return out;
}

EstimatorSpec pc_spec(int r) {
  EstimatorSpec s;
  s.method = EstimatorMethod::PC;
  s.r_hat = r;
  return s;
}

}  // namespace

TEST(Efm, ZeroFactorsGivesDiagonalVariances) {
  const Eigen::MatrixXd x = random_matrix(40, 6, 1);
  const CovarianceEstimate c = efm_covariance(x, pc_spec(0));
  const Eigen::MatrixXd xc = center_columns(x);
  for (Index i = 0; i < 6; ++i) {
    for (Index j = 0; j < 6; ++j) {
      const double expected = i == j ? xc.col(i).squaredNorm() / 40.0 : 0.0;
      EXPECT_NEAR(c.sigma.values()(i, j), expected, 1e-14);
    }
  }
}

TEST(Efm, FullRankEqualsSampleCovariance) {
  const Eigen::MatrixXd x = random_matrix(40, 6, 2);
  const CovarianceEstimate c = efm_covariance(x, pc_spec(6));
  const Eigen::MatrixXd s = sample_covariance(x, true).values();
  EXPECT_LT((c.sigma.values() - s).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Efm, MatchesBruteForceAssembly) {
  const Eigen::MatrixXd x = factor_returns(50, 10, 3);
  const oracle::Mat expected = oracle::window_covariance(oracle::from_eigen(x), 2, 'p', -1.0);
  const CovarianceEstimate c = efm_covariance(x, pc_spec(2));
  EXPECT_LT((c.sigma.values() - oracle::to_eigen(expected)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_TRUE(c.sigma.values().isApprox(c.sigma.values().transpose(), 0.0));
}

TEST(Efm, ShrunkAndScaledMatchBruteForce) {
  const Eigen::MatrixXd x = factor_returns(60, 8, 4);
  for (char kind : {'s', 'h'}) {
    EstimatorSpec spec = pc_spec(3);
    spec.method = kind == 's' ? EstimatorMethod::Scaled : EstimatorMethod::Shrunk;
    const CovarianceEstimate c = efm_covariance(x, spec);
    const oracle::Mat expected = oracle::window_covariance(oracle::from_eigen(x), 3, kind, -1.0);
    EXPECT_LT((c.sigma.values() - oracle::to_eigen(expected)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Poet, InfiniteConstantEqualsEfm) {
  const Eigen::MatrixXd x = factor_returns(60, 8, 5);
  PoetOptions o;
  o.constant = std::numeric_limits<double>::infinity();
  const CovarianceEstimate p = poet_covariance(x, 2, o);
  const CovarianceEstimate e = efm_covariance(x, pc_spec(2));
  EXPECT_LT((p.sigma.values() - e.sigma.values()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Poet, ZeroConstantKeepsResidualCovariance) {
  const Eigen::MatrixXd eps = random_matrix(30, 5, 6);
  const PoetResidual r = poet_residual(eps);
  EXPECT_EQ(poet_threshold(r, 0.0), r.s);
  EXPECT_NEAR(r.omega_T, 1.0 / std::sqrt(5.0) + std::sqrt(std::log(5.0) / 30.0), 1e-15);
}

TEST(Poet, ThresholdRuleEntrywise) {
  // Residuals with a planted correlated pair (0, 1) and otherwise independent.
  Eigen::MatrixXd eps = random_matrix(200, 6, 7);
  eps.col(1) = 0.9 * eps.col(0) + 0.3 * eps.col(1);
  const PoetResidual r = poet_residual(eps);
  for (double C : {0.5, 1.0, 2.0}) {
    const Eigen::MatrixXd t = poet_threshold(r, C);
    for (Index i = 0; i < 6; ++i) {
      EXPECT_EQ(t(i, i), r.s(i, i));
      for (Index j = 0; j < 6; ++j) {
        if (i == j) continue;
        double theta = 0.0;
        for (Index k = 0; k < 200; ++k) {
          const double d = eps(k, i) * eps(k, j) - r.s(i, j);
          theta += d * d;
        }
        theta /= 200.0;
        const bool keep = std::abs(r.s(i, j)) >= C * r.omega_T * std::sqrt(theta);
        EXPECT_EQ(t(i, j), keep ? r.s(i, j) : 0.0);
      }
    }
    if (C <= 1.0) {
      EXPECT_NE(t(0, 1), 0.0);
    }
  }
}

TEST(Poet, EntriesBetweenZeroAndRaw) {
  const Eigen::MatrixXd eps = random_matrix(80, 7, 8);
  const PoetResidual r = poet_residual(eps);
  double previous_kept = 1e9;
  for (double C : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    const Eigen::MatrixXd t = poet_threshold(r, C);
    double kept = 0;
    for (Index i = 0; i < 7; ++i)
      for (Index j = 0; j < 7; ++j) {
        EXPECT_TRUE(t(i, j) == 0.0 || t(i, j) == r.s(i, j));
        if (t(i, j) != 0.0) ++kept;
      }
    EXPECT_LE(kept, previous_kept);
    previous_kept = kept;
  }
}

TEST(Poet, CrossValidatedConstantIsFirstFeasible) {
  const Eigen::MatrixXd x = factor_returns(60, 12, 9);
  const CovarianceEstimate p = poet_covariance(x, 2);
  const std::vector<double> grid{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  PoetOptions fixed;
  for (double C : grid) {
    fixed.constant = C;
    const CovarianceEstimate candidate = poet_covariance(x, 2, fixed);
    const WindowDecomposition d = decompose_window(center_columns(x), pc_spec(2));
    const EigenSystem es = sym_eigen(SymMatrix(poet_threshold(poet_residual(d.eps), C)));
    if (es.values[es.size() - 1] > 1e-8) {
      EXPECT_EQ(p.poet_c, C);
      EXPECT_EQ(p.sigma.values(), candidate.sigma.values());
      break;
    }
  }
}

TEST(Weights, IdentityGivesEqualWeights) {
  const MinVarianceWeights w = min_variance_weights(SymMatrix(Eigen::MatrixXd::Identity(4, 4)));
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(w.weights[i], 0.25, 1e-15);
  EXPECT_FALSE(w.ridge_applied);
}

TEST(Weights, DiagonalCase) {
  Eigen::MatrixXd s(2, 2);
  s << 1, 0, 0, 4;
  const MinVarianceWeights w = min_variance_weights(SymMatrix(s));
  EXPECT_NEAR(w.weights[0], 0.8, 1e-15);
  EXPECT_NEAR(w.weights[1], 0.2, 1e-15);
  const MinVarianceWeights lit = min_variance_weights(SymMatrix(s), WeightRule::Literal);
  EXPECT_NEAR(lit.weights[0], 0.2, 1e-15);
}

TEST(Weights, MinimizeVarianceOnTheSimplexPlane) {
  const Eigen::MatrixXd a = random_matrix(30, 6, 10);
  const SymMatrix sigma((a.transpose() * a) / 30.0);
  const Eigen::VectorXd w = min_variance_weights(sigma).weights;
  EXPECT_NEAR(w.sum(), 1.0, 1e-12);
  const double best = w.dot(sigma.values() * w);
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::VectorXd v(6);
    for (Index i = 0; i < 6; ++i) v[i] = rng.normal();
    v /= v.sum();
    EXPECT_GE(v.dot(sigma.values() * v), best - 1e-12);
  }
}

TEST(Weights, SingularFallsBackToRidge) {
  const MinVarianceWeights w = min_variance_weights(SymMatrix(Eigen::MatrixXd::Zero(3, 3)));
  EXPECT_TRUE(w.ridge_applied);
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(w.weights[i], 1.0 / 3.0, 1e-12);
}

TEST(Backtest, WindowCount) {
  EXPECT_EQ(window_count(300, 253, 21), 3);
  EXPECT_EQ(window_count(274, 253, 21), 1);
  EXPECT_EQ(window_count(275, 253, 21), 2);
  EXPECT_THROW(window_count(253, 253, 21), InvalidInput);
}

TEST(Backtest, ConstantReturns) {
  const Index T = 300, W = 253;
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(T, 4, 0.002);
  const auto reports =
      rolling_backtest(PanelData{x, {}, {}}, {parse_backtest_method("efm-pc", 0)}, {});
  ASSERT_EQ(reports.size(), 1u);
  const BacktestReport& r = reports[0];
  EXPECT_FALSE(r.excluded);
  EXPECT_NEAR(r.tau, 0.002 * static_cast<double>(T - W), 1e-12);
  EXPECT_EQ(r.sigma2, 0.0);
  EXPECT_EQ(r.sharpe, std::numeric_limits<double>::infinity());
}

TEST(Backtest, WindowAccounting) {
  const Index T = 300;
  const Eigen::MatrixXd x = factor_returns(T, 8, 12);
  BacktestOptions o;
  o.window = 100;
  o.step = 30;
  const auto reports = rolling_backtest(PanelData{x, {}, {}}, {parse_backtest_method("efm-pc", 2)}, o);
  const BacktestReport& r = reports[0];
  ASSERT_EQ(r.M, 7);
  Index covered = 0;
  for (const auto& w : r.windows) {
    EXPECT_EQ(w.estimation.size(), 100);
    EXPECT_EQ(w.evaluation.begin, w.estimation.end);
    covered += w.evaluation.size();
    EXPECT_EQ(static_cast<Index>(w.returns.size()), w.evaluation.size());
    EXPECT_NEAR(w.weights.sum(), 1.0, 1e-12);
  }
  EXPECT_EQ(covered, T - 100);
  EXPECT_EQ(r.windows.back().evaluation.size(), 20);
  EXPECT_EQ(r.windows.back().evaluation.end, T);

  double tau = 0.0, pooled = 0.0;
  for (const auto& w : r.windows) {
    double s = 0.0;
    for (double v : w.returns) s += v;
    const double mu = s / static_cast<double>(w.returns.size());
    double ss = 0.0;
    for (double v : w.returns) ss += (v - mu) * (v - mu);
    EXPECT_NEAR(w.tau, s, 1e-15);
    EXPECT_NEAR(w.sigma2, ss / static_cast<double>(w.returns.size()), 1e-15);
    tau += s;
    pooled += ss;
  }
  EXPECT_NEAR(r.tau, tau, 1e-14);
  EXPECT_NEAR(r.sigma2, pooled / 200.0, 1e-15);
}

TEST(Backtest, MatchesNaiveImplementation) {
  const Eigen::MatrixXd x = factor_returns(160, 5, 13);
  BacktestOptions o;
  o.window = 60;
  o.step = 25;
  struct Case {
    const char* name;
    char kind;
    double poet_c;
  };
  for (const Case& c : {Case{"efm-pc", 'p', -1.0}, Case{"efm-sc", 's', -1.0},
                        Case{"efm-sh", 'h', -1.0}, Case{"poet", 'p', 1.0}}) {
    BacktestMethod m = parse_backtest_method(c.name, 2);
    if (c.poet_c >= 0) m.poet.constant = c.poet_c;
    const BacktestReport r = rolling_backtest(PanelData{x, {}, {}}, {m}, o)[0];
    const oracle::Backtest expected =
        oracle::backtest(oracle::from_eigen(x), 60, 25, 2, c.kind, c.poet_c);
    ASSERT_EQ(r.windows.size(), expected.weights.size()) << c.name;
    for (std::size_t k = 0; k < r.windows.size(); ++k) {
      for (Index i = 0; i < 5; ++i) {
        EXPECT_NEAR(r.windows[k].weights[i], expected.weights[k][static_cast<std::size_t>(i)],
                    1e-10)
            << c.name;
      }
    }
    EXPECT_NEAR(r.tau, expected.tau, 1e-10) << c.name;
    EXPECT_NEAR(r.sigma2, expected.sigma2, 1e-10) << c.name;
    EXPECT_NEAR(r.sharpe, expected.sharpe, 1e-8 * std::abs(expected.sharpe)) << c.name;
  }
}

TEST(Backtest, SeveralMethodsAndThreads) {
  const Eigen::MatrixXd x = factor_returns(200, 10, 14);
  BacktestOptions o;
  o.window = 120;
  o.step = 20;
  const std::vector<BacktestMethod> ms{parse_backtest_method("efm-pc", 2),
                                       parse_backtest_method("efm-sh", 2),
                                       parse_backtest_method("poet", 2)};
  const auto one = rolling_backtest(PanelData{x, {}, {}}, ms, o);
  o.threads = 3;
  const auto three = rolling_backtest(PanelData{x, {}, {}}, ms, o);
  ASSERT_EQ(one.size(), 3u);
  for (std::size_t m = 0; m < 3; ++m) {
    EXPECT_EQ(one[m].method.label, ms[m].label);
    EXPECT_EQ(one[m].tau, three[m].tau);
    EXPECT_EQ(one[m].sigma2, three[m].sigma2);
    EXPECT_EQ(one[m].sharpe, three[m].sharpe);
    EXPECT_GT(one[m].sigma2, 0.0);
  }
}

TEST(Backtest, MethodParsing) {
  EXPECT_EQ(parse_backtest_method("poet", 3).kind, CovarianceKind::POET);
  const BacktestMethod b = parse_backtest_method("efm-bsh", 4);
  EXPECT_TRUE(b.spec.blockwise);
  EXPECT_EQ(b.spec.method, EstimatorMethod::Shrunk);
  EXPECT_EQ(b.spec.r_hat, 4);
  EXPECT_THROW(parse_backtest_method("garch", 1), InvalidInput);
}

TEST(Backtest, RejectsShortSample) {
  const Eigen::MatrixXd x = random_matrix(50, 3, 15);
  EXPECT_THROW(rolling_backtest(PanelData{x, {}, {}}, {parse_backtest_method("efm-pc", 1)}, {}),
               InvalidInput);
}
