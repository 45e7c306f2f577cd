#include "factorlab/simulation.hpp"

#include "factorlab/errors.hpp"
#include "factorlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace factorlab {

namespace {

// Stream keys; every generator draws from the same stream for the same role
// so that, e.g., gen_model1(c).factors == gen_factors(c).
enum Stream : std::uint64_t {
  kFactors = 1,
  kLoadings = 2,
  kCoefficients = 3,
  kIdiosyncratic = 4,
  kStructure = 5,
};

// Pre-sample length after which |rho|^B is below double resolution, so the
// AR(1) recursion started at zero has reached its stationary law.
int stationary_burn(double max_abs_rho) {
  if (max_abs_rho <= 0.0) return 0;
  const double b = std::ceil(std::log(1e-17) / std::log(max_abs_rho));
  return static_cast<int>(std::clamp(b, 1.0, 5000.0));
}

double draw(Rng& rng, Law law, double magnitude) {
  if (law == Law::TwoPoint) return rng.coin() ? magnitude : -magnitude;
  return rng.uniform(-magnitude, magnitude);
}

Eigen::MatrixXd draw_loadings(const SimConfig& c) {
  Rng rng(c.seed, {kLoadings});
  Eigen::MatrixXd lambda(c.n, c.r);
  for (Index i = 0; i < c.n; ++i) {
    for (int j = 0; j < c.r; ++j) lambda(i, j) = rng.normal();
  }
  return lambda;
}

Eigen::VectorXd draw_rho_eps(const SimConfig& c, Rng& rng) {
  Eigen::VectorXd rho(c.n);
  for (Index i = 0; i < c.n; ++i) rho[i] = draw(rng, c.rho_eps_law, c.rho_eps_magnitude);
  return rho;
}

// Runs eps_t = rho .* eps_{t-1} + v_t, discarding `burn` pre-sample steps.
// `innovation(t, out)` writes v_t for t in [0, burn + T).
template <typename InnovationFn>
Eigen::MatrixXd run_idiosyncratic_ar(const Eigen::VectorXd& rho, Index T, int burn,
                                     InnovationFn&& innovation) {
  const Index n = rho.size();
  Eigen::MatrixXd eps(T, n);
  Eigen::VectorXd state = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v(n);
  for (Index step = 0; step < burn + T; ++step) {
    innovation(v);
    state = rho.cwiseProduct(state) + v;
    if (step >= burn) eps.row(step - burn) = state.transpose();
  }
  return eps;
}

void assemble(SimulatedPanel& out) {
  const SimConfig& c = out.config;
  out.chi = (out.factors * out.loadings.transpose()) / std::sqrt(static_cast<double>(c.r));
  out.x = out.chi + std::sqrt(c.phi) * out.eps;
}

}  // namespace

void SimConfig::validate() const {
  if (r < 1) throw InvalidInput("r must be >= 1");
  if (n < r) throw InvalidInput("n must be >= r");
  if (T < 2) throw InvalidInput("T must be >= 2");
  if (!(phi > 0.0) || !std::isfinite(phi)) throw InvalidInput("phi must be positive");
  for (int j = 0; j < r; ++j) {
    const double rho = factor_ar(j);
    if (!(rho > -1.0 && rho < 1.0)) {
      throw InvalidInput("factor AR coefficient " + std::to_string(rho) + " of factor " +
                         std::to_string(j + 1) + " is outside (-1, 1)");
    }
  }
  if (!(rho_eps_magnitude >= 0.0 && rho_eps_magnitude < 1.0)) {
    throw InvalidInput("rho_eps magnitude must lie in [0, 1)");
  }
  if (const auto* m1 = std::get_if<Model1Params>(&model)) {
    if (m1->H < 0) throw InvalidInput("H must be non-negative");
    if (n <= 2 * static_cast<Index>(m1->H)) throw InvalidInput("Model 1 requires n > 2H");
    if (!std::isfinite(m1->beta_magnitude)) throw InvalidInput("beta must be finite");
  } else if (const auto* m2 = std::get_if<Model2Params>(&model)) {
    if (!(m2->varrho > 0.0 && m2->varrho <= 1.0)) {
      throw InvalidInput("varrho must lie in (0, 1]");
    }
    if (static_cast<Index>(std::floor(m2->varrho * static_cast<double>(n))) < r) {
      throw InvalidInput("Model 2 requires floor(varrho * n) >= r");
    }
    if (!std::isfinite(m2->delta_max) || !std::isfinite(m2->delta_min)) {
      throw InvalidInput("Model 2 spike range must be finite");
    }
  } else if (const auto* sp = std::get_if<SparseSpikeParams>(&model)) {
    if (!(sp->alpha >= 0.0 && sp->alpha < 1.0)) throw InvalidInput("alpha must lie in [0, 1)");
    if (!(sp->nu >= 0.0 && sp->nu < 1.0)) throw InvalidInput("nu must lie in [0, 1)");
    if (!(sp->sigma2 >= 0.0) || !std::isfinite(sp->sigma2)) {
      throw InvalidInput("sigma2 must be finite and non-negative");
    }
    if (sp->delta_n && !(*sp->delta_n >= 0.0 && std::isfinite(*sp->delta_n))) {
      throw InvalidInput("Delta_n override must be finite and non-negative");
    }
  }
}

std::string SimConfig::model_name() const {
  if (std::holds_alternative<Model1Params>(model)) return "model1";
  if (std::holds_alternative<Model2Params>(model)) return "model2";
  return "sparse-spike";
}

Eigen::MatrixXd gen_factors(const SimConfig& c) {
  c.validate();
  Rng rng(c.seed, {kFactors});
  Eigen::MatrixXd f(c.T, c.r);
  for (int j = 0; j < c.r; ++j) {
    const double rho = c.factor_ar(j);
    const double innovation_var = c.unit_factor_variance ? 1.0 - rho * rho
                                                          : 1.0 / (1.0 - rho * rho);
    const double innovation_sd = std::sqrt(innovation_var);
    const double stationary_sd = std::sqrt(innovation_var / (1.0 - rho * rho));
    double state = rng.normal(0.0, stationary_sd);
    f(0, j) = state;
    for (Index t = 1; t < c.T; ++t) {
      state = rho * state + rng.normal(0.0, innovation_sd);
      f(t, j) = state;
    }
  }
  return f;
}

SimulatedPanel gen_model1(const SimConfig& c) {
  c.validate();
  const auto* params = std::get_if<Model1Params>(&c.model);
  if (params == nullptr) throw InvalidInput("gen_model1 called with a non-Model-1 config");

  SimulatedPanel out;
  out.config = c;
  out.factors = gen_factors(c);
  out.loadings = draw_loadings(c);

  Rng coef_rng(c.seed, {kCoefficients});
  out.rho_eps = draw_rho_eps(c, coef_rng);
  out.beta.resize(c.n);
  for (Index i = 0; i < c.n; ++i) out.beta[i] = draw(coef_rng, c.beta_law, params->beta_magnitude);

  const Index n = c.n;
  const Index H = params->H;
  const Eigen::VectorXd e_sd = (1.0 - out.rho_eps.array().square()).sqrt().matrix();
  const Eigen::VectorXd scale =
      (1.0 + 2.0 * static_cast<double>(H) * out.beta.array().square()).rsqrt().matrix();

  Rng rng(c.seed, {kIdiosyncratic});
  Eigen::VectorXd e(n);
  auto innovation = [&](Eigen::VectorXd& v) {
    for (Index i = 0; i < n; ++i) e[i] = rng.normal(0.0, e_sd[i]);
    for (Index i = 0; i < n; ++i) {
      double neighbours = 0.0;
      for (Index l = i - H; l <= i + H; ++l) {
        if (l == i) continue;
        if (params->truncate) {
          if (l >= 0 && l < n) neighbours += e[l];
        } else {
          neighbours += e[((l % n) + n) % n];
        }
      }
      v[i] = scale[i] * (e[i] + out.beta[i] * neighbours);
    }
  };
  out.eps = run_idiosyncratic_ar(out.rho_eps, c.T,
                                 stationary_burn(out.rho_eps.cwiseAbs().maxCoeff()),
                                 innovation);
  assemble(out);
  return out;
}

Eigen::VectorXd equidistant_spikes(int r, double hi, double lo) {
  Eigen::VectorXd d(r);
  for (int j = 0; j < r; ++j) {
    d[j] = r == 1 ? hi : hi - (hi - lo) * static_cast<double>(j) / static_cast<double>(r - 1);
  }
  return d;
}

SymMatrix model2_innovation_covariance(const Eigen::MatrixXd& directions,
                                       const Eigen::VectorXd& strengths) {
  const Index n = directions.rows();
  return SymMatrix(directions * strengths.asDiagonal() * directions.transpose() +
                   Eigen::MatrixXd::Identity(n, n));
}

SimulatedPanel gen_model2(const SimConfig& c) {
  c.validate();
  const auto* params = std::get_if<Model2Params>(&c.model);
  if (params == nullptr) throw InvalidInput("gen_model2 called with a non-Model-2 config");

  SimulatedPanel out;
  out.config = c;
  out.factors = gen_factors(c);
  out.loadings = draw_loadings(c);

  Rng coef_rng(c.seed, {kCoefficients});
  out.rho_eps = draw_rho_eps(c, coef_rng);

  // Left singular vectors of M from the r x r Gram matrix M^T M; rows of M
  // beyond the support are zero, so the same rows of V are exactly zero.
  const Index support = static_cast<Index>(std::floor(params->varrho * static_cast<double>(c.n)));
  Rng structure_rng(c.seed, {kStructure});
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(c.n, c.r);
  for (Index i = 0; i < support; ++i) {
    for (int j = 0; j < c.r; ++j) m(i, j) = structure_rng.normal();
  }
  const EigenSystem right = sym_eigen(SymMatrix(m.transpose() * m));
  Eigen::MatrixXd v(c.n, c.r);
  for (int j = 0; j < c.r; ++j) {
    Eigen::VectorXd col = m * right.vectors.col(j);
    const double norm = col.norm();
    if (!(norm > 0.0)) throw NumericalFailure("Model 2 support matrix is rank deficient");
    v.col(j) = col / norm;
  }
  apply_sign_convention(v);
  out.spike_directions = v;
  out.spike_strengths = equidistant_spikes(c.r, params->delta_max, params->delta_min);

  // Gamma_v^{1/2} = I + V diag(sqrt(1 + Delta) - 1) V^T since V is orthonormal.
  const Eigen::VectorXd root_gain =
      ((1.0 + out.spike_strengths.array()).sqrt() - 1.0).matrix();
  const Eigen::VectorXd e_sd = (1.0 - out.rho_eps.array().square()).sqrt().matrix();

  Rng rng(c.seed, {kIdiosyncratic});
  Eigen::VectorXd e(c.n);
  auto innovation = [&](Eigen::VectorXd& out_v) {
    for (Index i = 0; i < c.n; ++i) e[i] = rng.normal(0.0, e_sd[i]);
    out_v = e + v * root_gain.cwiseProduct(v.transpose() * e);
  };
  out.eps = run_idiosyncratic_ar(out.rho_eps, c.T,
                                 stationary_burn(out.rho_eps.cwiseAbs().maxCoeff()),
                                 innovation);
  assemble(out);
  return out;
}

SimulatedPanel gen_sparse_spike(const SimConfig& c) {
  c.validate();
  const auto* params = std::get_if<SparseSpikeParams>(&c.model);
  if (params == nullptr) throw InvalidInput("gen_sparse_spike called with a non-spike config");

  SimulatedPanel out;
  out.config = c;
  const double n = static_cast<double>(c.n);

  // Sparse unit vector with ceil(n^alpha) equal-magnitude entries spread
  // evenly over 1..n.
  const Index support = std::clamp<Index>(
      static_cast<Index>(std::ceil(std::pow(n, params->alpha) - 1e-9)), 1, c.n);
  Rng structure_rng(c.seed, {kStructure});
  Eigen::VectorXd spike = Eigen::VectorXd::Zero(c.n);
  const double magnitude = 1.0 / std::sqrt(static_cast<double>(support));
  for (Index k = 0; k < support; ++k) {
    const Index i = (k * c.n) / support;
    spike[i] = structure_rng.coin() ? magnitude : -magnitude;
  }

  // Loadings are made orthogonal to the spike so that v^T w_chi,j = 0 while
  // v keeps its sparsity.
  Eigen::MatrixXd lambda = draw_loadings(c);
  lambda -= spike * (spike.transpose() * lambda);
  out.loadings = lambda;

  const double delta = params->delta_n.value_or(std::pow(n, params->nu));
  out.spike_directions = spike;
  out.spike_strengths = Eigen::VectorXd::Constant(1, delta);

  Rng factor_rng(c.seed, {kFactors});
  out.factors.resize(c.T, c.r);
  for (Index t = 0; t < c.T; ++t) {
    for (int j = 0; j < c.r; ++j) out.factors(t, j) = factor_rng.normal();
  }

  Rng rng(c.seed, {kIdiosyncratic});
  const double spike_sd = std::sqrt(delta);
  const double noise_sd = std::sqrt(params->sigma2);
  out.eps.resize(c.T, c.n);
  for (Index t = 0; t < c.T; ++t) {
    const double z = rng.normal();
    for (Index i = 0; i < c.n; ++i) {
      out.eps(t, i) = spike_sd * z * spike[i] + noise_sd * rng.normal();
    }
  }
  out.rho_eps = Eigen::VectorXd::Zero(c.n);
  assemble(out);
  return out;
}

SymMatrix sparse_spike_idio_covariance(const SimulatedPanel& panel) {
  const auto* params = std::get_if<SparseSpikeParams>(&panel.config.model);
  if (params == nullptr || panel.spike_directions.cols() != 1) {
    throw InvalidInput("panel was not generated by the sparse-spike model");
  }
  const Eigen::VectorXd& v = panel.spike_directions.col(0);
  const Index n = v.size();
  return SymMatrix(panel.spike_strengths[0] * v * v.transpose() +
                   params->sigma2 * Eigen::MatrixXd::Identity(n, n));
}

SimulatedPanel simulate(const SimConfig& config) {
  if (std::holds_alternative<Model1Params>(config.model)) return gen_model1(config);
  if (std::holds_alternative<Model2Params>(config.model)) return gen_model2(config);
  return gen_sparse_spike(config);
}

}  // namespace factorlab
