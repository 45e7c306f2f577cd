#include "factorlab/errors.hpp"
#include "factorlab/evaluation.hpp"
#include "factorlab/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
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

McStudyConfig small_study() {
  McStudyConfig c;
  c.base.model = Model1Params{};
  c.n_grid = {40};
  c.T_grid = {60};
  c.phi_grid = {1.0};
  c.methods = standard_methods(false);
  c.r_selector = RSelector::bai_ng();
  c.replications = 6;
  c.base_seed = 99;
  return c;
}

FactorFit fit_with_nu(const std::vector<double>& nu) {
  FactorFit fit;
  fit.spec.method = EstimatorMethod::Scaled;
  fit.spec.r_hat = static_cast<int>(nu.size());
  for (std::size_t j = 0; j < nu.size(); ++j) {
    EigenvectorDiagnostic d;
    d.j = static_cast<int>(j) + 1;
    d.nu = nu[j];
    fit.diagnostics.push_back(d);
  }
  return fit;
}

}  // namespace

TEST(RawErrors, MatchesDoubleLoop) {
  const Eigen::MatrixXd a = random_matrix(7, 5, 1);
  const Eigen::MatrixXd b = random_matrix(7, 5, 2);
  double total = 0.0, worst = 0.0;
  for (Index i = 0; i < 5; ++i) {
    double col = 0.0;
    for (Index t = 0; t < 7; ++t) col += (a(t, i) - b(t, i)) * (a(t, i) - b(t, i));
    total += col;
    worst = std::max(worst, col);
  }
  const RawErrors e = raw_errors(a, b);
  EXPECT_NEAR(e.avg, total / 5.0, 1e-12);
  EXPECT_NEAR(e.max, worst, 1e-12);
  EXPECT_GE(e.max, e.avg);
}

TEST(RelativeErrors, SelfNormalizationAndZero) {
  const Eigen::MatrixXd chi = random_matrix(7, 5, 3);
  const Eigen::MatrixXd fit = random_matrix(7, 5, 4);
  const RawErrors raw = raw_errors(fit, chi);
  const RelativeErrors self = relative_errors(fit, chi, {raw.avg, raw.max});
  EXPECT_EQ(self.err_avg, 1.0);
  EXPECT_EQ(self.err_max, 1.0);
  const RelativeErrors zero = relative_errors(chi, chi, {raw.avg, raw.max});
  EXPECT_EQ(zero.err_avg, 0.0);
  EXPECT_EQ(zero.err_max, 0.0);
  EXPECT_THROW(relative_errors(fit, chi, {0.0, 1.0}), DegenerateOracle);
}

TEST(Localisation, HandBuiltFit) {
  const LocalisationSummary s = localisation_diagnostic(fit_with_nu({1, 1, 1, 1, 1, 4}), 5);
  ASSERT_TRUE(s.within && s.beyond);
  EXPECT_EQ(*s.within, 1.0);
  EXPECT_EQ(*s.beyond, 0.25);
}

TEST(Localisation, AllOnes) {
  const LocalisationSummary s = localisation_diagnostic(fit_with_nu({1, 1, 1, 1, 1, 1, 1}), 5);
  EXPECT_EQ(*s.within, 1.0);
  EXPECT_EQ(*s.beyond, 1.0);
  const LocalisationSummary exact = localisation_diagnostic(fit_with_nu({1, 1, 1, 1, 1}), 5);
  EXPECT_FALSE(exact.beyond.has_value());
}

TEST(Localisation, RequiresScaledFit) {
  FactorFit fit = fit_with_nu({1, 2});
  fit.spec.method = EstimatorMethod::PC;
  EXPECT_THROW(localisation_diagnostic(fit, 1), InvalidInput);
}

TEST(RSelectorParse, Forms) {
  EXPECT_EQ(RSelector::parse("bn").kind, RSelector::Kind::BaiNgIC);
  EXPECT_EQ(RSelector::parse("ah").kind, RSelector::Kind::AhnHorensteinGR);
  const RSelector f = RSelector::parse("fixed:7");
  EXPECT_EQ(f.kind, RSelector::Kind::Fixed);
  EXPECT_EQ(f.k, 7);
  const RSelector t = RSelector::parse("true+5");
  EXPECT_EQ(t.kind, RSelector::Kind::TruePlus);
  EXPECT_EQ(t.k, 5);
  EXPECT_EQ(t.label(), "true+5");
  EXPECT_EQ(RSelector::parse("true").k, 0);
  EXPECT_THROW(RSelector::parse("nope"), InvalidInput);
}

TEST(Statistics, Helpers) {
  EXPECT_EQ(mean({1.0, 2.0, 3.0, 4.0}), 2.5);
  EXPECT_NEAR(sample_sd({1.0, 2.0, 3.0, 4.0}), std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(sample_sd({3.0}), 0.0);
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  std::vector<double> many(1001, 0.1);
  EXPECT_NEAR(pairwise_sum(many), 100.1, 1e-12);
}

TEST(Study, OracleOnlySingleReplication) {
  McStudyConfig c = small_study();
  c.methods = {oracle_method()};
  c.replications = 1;
  const McReport r = run_study(c);
  ASSERT_EQ(r.settings.size(), 1u);
  ASSERT_EQ(r.settings[0].methods.size(), 1u);
  EXPECT_EQ(r.settings[0].methods[0].mean_err_avg, 1.0);
  EXPECT_EQ(r.settings[0].methods[0].mean_err_max, 1.0);
}

TEST(Study, OracleSelfNormalizes) {
  const McReport r = run_study(small_study());
  const MethodSummary& oracle = r.settings[0].methods[0];
  EXPECT_EQ(oracle.method.label, "oracle");
  EXPECT_NEAR(oracle.mean_err_avg, 1.0, 1e-12);
  EXPECT_NEAR(oracle.mean_err_max, 1.0, 1e-12);
  EXPECT_EQ(r.settings[0].methods.size(), 5u);
  int counted = 0;
  for (const auto& [k, v] : r.settings[0].r_hat_counts) counted += v;
  EXPECT_EQ(counted, 6);
}

TEST(Study, ThreadCountInvariance) {
  McStudyConfig c = small_study();
  c.n_grid = {40, 50};
  c.methods = standard_methods(true);
  c.threads = 1;
  const McReport one = run_study(c);
  c.threads = 4;
  const McReport four = run_study(c);
  ASSERT_EQ(one.settings.size(), four.settings.size());
  for (std::size_t s = 0; s < one.settings.size(); ++s) {
    EXPECT_EQ(one.settings[s].r_hat, four.settings[s].r_hat);
    for (std::size_t m = 0; m < one.settings[s].methods.size(); ++m) {
      EXPECT_EQ(one.settings[s].methods[m].raw_avg, four.settings[s].methods[m].raw_avg);
      EXPECT_EQ(one.settings[s].methods[m].raw_max, four.settings[s].methods[m].raw_max);
      EXPECT_EQ(one.settings[s].methods[m].mean_err_avg, four.settings[s].methods[m].mean_err_avg);
    }
  }
}

TEST(Study, FixedTrueRPcCoincidesWithOracle) {
  McStudyConfig c = small_study();
  c.r_selector = RSelector::fixed(5);
  const McReport r = run_study(c);
  const auto& ms = r.settings[0].methods;
  ASSERT_EQ(ms[1].method.label, "pc");
  EXPECT_EQ(ms[1].raw_avg, ms[0].raw_avg);
  EXPECT_EQ(ms[1].raw_max, ms[0].raw_max);
  for (const auto& m : ms) {
    for (std::size_t k = 0; k < m.raw_max.size(); ++k) EXPECT_GE(m.raw_max[k], m.raw_avg[k]);
  }
}

TEST(Study, SettingsExpandInNestedOrder) {
  McStudyConfig c = small_study();
  c.base.model = Model2Params{};
  c.n_grid = {40, 50};
  c.T_grid = {60};
  c.phi_grid = {0.5, 1.0};
  c.varrho_grid = {0.5, 1.0};
  const auto s = expand_settings(c);
  ASSERT_EQ(s.size(), 8u);
  EXPECT_EQ(s[0].n, 40);
  EXPECT_EQ(s[1].n, 40);
  EXPECT_EQ(std::get<Model2Params>(s[1].model).varrho, 1.0);
  EXPECT_EQ(s[2].phi, 1.0);
  EXPECT_EQ(s[4].n, 50);
}

TEST(Study, FailingReplicationsRaiseStudyFailed) {
  McStudyConfig c = small_study();
  c.r_selector = RSelector::fixed(100);  // exceeds min(n, T)
  EXPECT_THROW(run_study(c), StudyFailed);
}

TEST(Study, RejectsInvalidConfig) {
  McStudyConfig c = small_study();
  c.replications = 0;
  EXPECT_THROW(run_study(c), InvalidInput);
  c = small_study();
  c.n_grid.clear();
  EXPECT_THROW(run_study(c), InvalidInput);
}

TEST(Study, ScaledMethodsReportLocalisation) {
  McStudyConfig c = small_study();
  c.r_selector = RSelector::true_plus(2);
  const McReport r = run_study(c);
  for (const auto& m : r.settings[0].methods) {
    const bool scaled = m.method.spec.method == EstimatorMethod::Scaled;
    EXPECT_EQ(m.localisation_within.has_value(), scaled);
    EXPECT_EQ(m.localisation_beyond.has_value(), scaled);
  }
}
