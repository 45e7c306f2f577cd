#include "factorlab/cli.hpp"

#include "factorlab/csv.hpp"
#include "factorlab/errors.hpp"
#include "factorlab/estimators.hpp"
#include "factorlab/evaluation.hpp"
#include "factorlab/factor_number.hpp"
#include "factorlab/parallel.hpp"
#include "factorlab/portfolio.hpp"
#include "factorlab/serialize.hpp"
#include "factorlab/simulation.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

namespace factorlab {

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(text);
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void check_output_prefix(const std::string& prefix) {
  if (prefix.empty()) throw InvalidInput("output prefix must be non-empty");
  const auto parent = std::filesystem::path(prefix).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw IoError("output directory '" + parent.string() + "' does not exist");
  }
}

void write_json(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Config files: a JSON object whose keys are long option names (dashes or
// underscores). Values fill options not given on the command line.

std::vector<std::string> json_values(const std::string& key, const nlohmann::json& v) {
  if (v.is_array()) {
    std::vector<std::string> out;
    for (const auto& e : v) {
      auto inner = json_values(key, e);
      if (inner.size() != 1) throw InvalidInput("config key '" + key + "': nested arrays");
      out.push_back(inner[0]);
    }
    return out;
  }
  if (v.is_string()) return {v.get<std::string>()};
  if (v.is_boolean()) return {v.get<bool>() ? "true" : "false"};
  if (v.is_number_integer() || v.is_number_unsigned()) return {v.dump()};
  if (v.is_number_float()) return {format_double(v.get<double>())};
  throw InvalidInput("config key '" + key + "' has an unsupported value type");
}

void fill_option(CLI::App* app, const std::string& key, const std::vector<std::string>& values) {
  std::string name = key;
  for (auto& ch : name) {
    if (ch == '_') ch = '-';
  }
  if (name == "config" || name == "help") throw InvalidInput("config key '" + key + "' not allowed");
  CLI::Option* opt = app->get_option_no_throw("--" + name);
  if (opt == nullptr) {
    throw InvalidInput("unknown config key '" + key + "' for command '" + app->get_name() + "'");
  }
  if (opt->count() > 0 || values.empty()) return;
  for (const auto& v : values) opt->add_result(v);
  opt->run_callback();
}

void apply_config_file(CLI::App* app, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("config file '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw InvalidInput("config file '" + path + "' must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "schema_version") continue;
    fill_option(app, key, json_values(key, value));
  }
}

// ---------------------------------------------------------------------------
// Option groups.

struct CommonOptions {
  std::string config;
  std::uint64_t seed = 0;
  int threads = 1;
};

void add_common(CLI::App* app, CommonOptions& o, bool with_seed, bool with_threads) {
  app->add_option("--config", o.config, "JSON config file; command-line flags take precedence");
  if (with_seed) {
    app->add_option("--seed", o.seed, "Base seed (falls back to $FACTORLAB_SEED, then 0)");
  }
  if (with_threads) app->add_option("--threads", o.threads, "Worker threads (0: all cores)");
}

// Applies the config file and the seed environment fallback.
void finish_common(CLI::App* app, CommonOptions& o) {
  if (!o.config.empty()) apply_config_file(app, o.config);
  CLI::Option* seed = app->get_option_no_throw("--seed");
  if (seed != nullptr && seed->count() == 0) {
    if (const char* env = std::getenv("FACTORLAB_SEED")) {
      try {
        std::size_t used = 0;
        const std::string s(env);
        o.seed = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
      } catch (const std::exception&) {
        throw InvalidInput(std::string("FACTORLAB_SEED is not an unsigned integer: ") + env);
      }
    }
  }
  if (o.threads < 0) throw InvalidInput("--threads must be >= 0");
  o.threads = resolve_threads(o.threads);
}

Json common_json(const CommonOptions& o, bool with_seed, bool with_threads) {
  Json j;
  if (!o.config.empty()) j["config"] = o.config;
  if (with_seed) j["seed"] = o.seed;
  if (with_threads) j["threads"] = o.threads;
  return j;
}

struct InputOptions {
  std::string input;
  bool header = false;
  bool no_header = false;
  bool date_column = false;
  bool no_date_column = false;
  bool prices = false;
  bool drop_incomplete = false;
  bool center = false;
};

void add_input(CLI::App* app, InputOptions& o, bool center_default) {
  o.center = center_default;
  app->add_option("--input,-i", o.input, "Panel CSV (rows = periods, columns = series)");
  app->add_flag("--header", o.header, "First row is a header (default: detect)");
  app->add_flag("--no-header", o.no_header, "First row is data");
  app->add_flag("--date-column", o.date_column, "First column holds dates (default: detect)");
  app->add_flag("--no-date-column", o.no_date_column, "First column is data");
  app->add_flag("--prices", o.prices, "Input holds prices; convert to log returns");
  app->add_flag("--drop-incomplete-series", o.drop_incomplete,
                "Drop series with missing cells instead of failing");
  if (!center_default) {
    app->add_flag("--center", o.center, "Subtract column means before estimation");
  }
}

PanelData load_input(const InputOptions& o) {
  if (o.input.empty()) throw InvalidInput("--input is required");
  if (o.header && o.no_header) throw InvalidInput("--header and --no-header conflict");
  if (o.date_column && o.no_date_column) {
    throw InvalidInput("--date-column and --no-date-column conflict");
  }
  CsvReadOptions csv;
  if (o.header) csv.header = true;
  if (o.no_header) csv.header = false;
  if (o.date_column) csv.date_column = true;
  if (o.no_date_column) csv.date_column = false;
  csv.prices = o.prices;
  csv.drop_incomplete = o.drop_incomplete;
  return read_panel_csv(o.input, csv);
}

Json input_json(const InputOptions& o, const PanelData& panel) {
  Json j;
  j["input"] = o.input;
  j["prices"] = o.prices;
  j["drop_incomplete_series"] = o.drop_incomplete;
  j["center"] = o.center;
  j["n"] = panel.series();
  j["T"] = panel.periods();
  return j;
}

struct SimOptions {
  std::string model = "model1";
  std::vector<Index> n{200};
  std::vector<Index> T{500};
  int r = 5;
  std::vector<double> phi{1.0};
  double rho_f = 0.5;
  int H = 10;
  double beta = 0.15;
  bool truncate = false;
  std::vector<double> varrho{1.0};
  double delta_max = 20.0;
  double delta_min = 10.0;
  double alpha = 0.5;
  double nu = 0.8;
  double sigma2 = 1.0;
  double delta_n = -1.0;
  std::string beta_law = "two-point";
  std::string rho_eps_law = "two-point";
  double rho_eps = 0.2;
  bool unit_factor_variance = false;
};

void add_sim(CLI::App* app, SimOptions& o, bool grids) {
  app->add_option("--model", o.model, "model1, model2 or sparse-spike");
  const char* grid_note = grids ? " (comma list)" : "";
  app->add_option("--n", o.n, std::string("Cross-section size") + grid_note)->delimiter(',');
  app->add_option("--T", o.T, std::string("Number of periods") + grid_note)->delimiter(',');
  app->add_option("--r", o.r, "True number of factors");
  app->add_option("--phi", o.phi, std::string("Noise-to-signal ratio") + grid_note)->delimiter(',');
  app->add_option("--rho-f", o.rho_f, "Base factor AR coefficient");
  app->add_option("--H", o.H, "Model 1 neighbourhood half-width");
  app->add_option("--beta", o.beta, "Model 1 |beta_i|");
  app->add_flag("--truncate", o.truncate, "Model 1: hard boundaries instead of circular wrap");
  app->add_option("--varrho", o.varrho, std::string("Model 2 support fraction") + grid_note)
      ->delimiter(',');
  app->add_option("--delta-max", o.delta_max, "Model 2 largest spike");
  app->add_option("--delta-min", o.delta_min, "Model 2 smallest spike");
  app->add_option("--alpha", o.alpha, "Sparse spike: support size ceil(n^alpha)");
  app->add_option("--nu", o.nu, "Sparse spike: strength n^nu");
  app->add_option("--sigma2", o.sigma2, "Sparse spike: noise variance");
  app->add_option("--delta-n", o.delta_n, "Sparse spike: explicit strength (negative: n^nu)");
  app->add_option("--beta-law", o.beta_law, "two-point or uniform");
  app->add_option("--rho-eps-law", o.rho_eps_law, "two-point or uniform");
  app->add_option("--rho-eps", o.rho_eps, "|rho_eps_i|");
  app->add_flag("--unit-factor-variance", o.unit_factor_variance,
                "Factor innovations with variance 1 - rho^2");
}

SimConfig sim_config(const SimOptions& o, Index n, Index T, double phi, double varrho,
                     std::uint64_t seed) {
  SimConfig c;
  c.n = n;
  c.T = T;
  c.r = o.r;
  c.phi = phi;
  c.rho_f = o.rho_f;
  c.seed = seed;
  c.beta_law = parse_law(o.beta_law);
  c.rho_eps_law = parse_law(o.rho_eps_law);
  c.rho_eps_magnitude = o.rho_eps;
  c.unit_factor_variance = o.unit_factor_variance;
  if (o.model == "model1") {
    c.model = Model1Params{o.H, o.beta, o.truncate};
  } else if (o.model == "model2") {
    c.model = Model2Params{varrho, o.delta_max, o.delta_min};
  } else if (o.model == "sparse-spike") {
    SparseSpikeParams p;
    p.alpha = o.alpha;
    p.nu = o.nu;
    p.sigma2 = o.sigma2;
    if (o.delta_n >= 0.0) p.delta_n = o.delta_n;
    c.model = p;
  } else {
    throw InvalidInput("unknown model '" + o.model + "' (expected model1, model2, sparse-spike)");
  }
  c.validate();
  return c;
}

Json sim_options_json(const SimOptions& o) {
  Json j;
  j["model"] = o.model;
  j["n"] = o.n;
  j["T"] = o.T;
  j["r"] = o.r;
  j["phi"] = o.phi;
  j["rho_f"] = o.rho_f;
  j["H"] = o.H;
  j["beta"] = o.beta;
  j["truncate"] = o.truncate;
  j["varrho"] = o.varrho;
  j["delta_max"] = o.delta_max;
  j["delta_min"] = o.delta_min;
  j["alpha"] = o.alpha;
  j["nu"] = o.nu;
  j["sigma2"] = o.sigma2;
  j["delta_n"] = o.delta_n;
  j["beta_law"] = o.beta_law;
  j["rho_eps_law"] = o.rho_eps_law;
  j["rho_eps"] = o.rho_eps;
  j["unit_factor_variance"] = o.unit_factor_variance;
  return j;
}

// r given as a positive integer or as auto-bn / auto-ah.
struct RChoice {
  std::optional<int> fixed;
  FactorNumberMethod method = FactorNumberMethod::BaiNgIC;
};

RChoice parse_r(const std::string& text) {
  if (text == "auto-bn" || text == "bn") return {std::nullopt, FactorNumberMethod::BaiNgIC};
  if (text == "auto-ah" || text == "ah") return {std::nullopt, FactorNumberMethod::AhnHorensteinGR};
  std::size_t used = 0;
  int value = 0;
  try {
    value = std::stoi(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || value < 0) {
    throw InvalidInput("--r must be a non-negative integer, auto-bn or auto-ah (got '" + text + "')");
  }
  return {value, FactorNumberMethod::BaiNgIC};
}

FactorNumberResult run_factor_number(const Eigen::MatrixXd& x, FactorNumberMethod method,
                                     int r_max_option) {
  const Index n = x.cols(), T = x.rows();
  int r_max = r_max_option > 0 ? r_max_option : default_r_max(n, T);
  const Index k = std::min<Index>(r_max + 1, n);
  if (method == FactorNumberMethod::AhnHorensteinGR) {
    r_max = std::min<int>(r_max, static_cast<int>(k) - 1);
  } else {
    r_max = std::min<int>(r_max, static_cast<int>(k));
  }
  if (r_max < 1) throw InvalidInput("panel too small to estimate the number of factors");
  const CovarianceSpectrum s = covariance_spectrum(x, k);
  const SpectrumView view{{s.leading.values.data(), static_cast<std::size_t>(k)}, s.trace};
  return method == FactorNumberMethod::BaiNgIC ? ic_bai_ng(view, n, T, r_max)
                                               : gr_ahn_horenstein(view, n, T, r_max);
}

// Estimator tag: optional "b" prefix plus a method name.
EstimatorSpec parse_tag(const std::string& tag) {
  EstimatorSpec s;
  std::string name = tag;
  if (name.size() > 1 && name[0] == 'b') {
    s.blockwise = true;
    name = name.substr(1);
  }
  s.method = parse_estimator_method(name);
  return s;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateCommand {
  CommonOptions common;
  SimOptions sim;
  std::string out = "panel";
  bool header = false;
  CLI::App* app = nullptr;

  void add(CLI::App& root) {
    app = root.add_subcommand("simulate", "Simulate a panel from one of the models");
    add_common(app, common, true, false);
    add_sim(app, sim, false);
    app->add_option("--out,-o", out, "Output prefix: <out>.csv and <out>_truth.json");
    app->add_flag("--header", header, "Write a header row of series names");
  }

  int run(std::ostream& os) {
    finish_common(app, common);
    if (sim.n.size() != 1 || sim.T.size() != 1 || sim.phi.size() != 1 || sim.varrho.size() != 1) {
      throw InvalidInput("simulate takes a single value for n, T, phi and varrho");
    }
    check_output_prefix(out);
    const SimConfig c = sim_config(sim, sim.n[0], sim.T[0], sim.phi[0], sim.varrho[0], common.seed);
    const SimulatedPanel panel = simulate(c);

    std::vector<std::string> names;
    if (header) {
      for (Index i = 0; i < c.n; ++i) names.push_back("s" + std::to_string(i + 1));
    }
    write_matrix_csv(out + ".csv", panel.x, names);
    Json bundle = simulated_bundle_json(panel);
    Json effective = common_json(common, true, false);
    effective.update(sim_options_json(sim));
    effective["out"] = out;
    effective["header"] = header;
    bundle["effective_config"] = std::move(effective);
    write_json(out + "_truth.json", bundle);
    os << "simulated " << c.model_name() << " n=" << c.n << " T=" << c.T << " seed=" << c.seed
       << " -> " << out << ".csv, " << out << "_truth.json\n";
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------
// factor-number

struct FactorNumberCommand {
  CommonOptions common;
  InputOptions input;
  std::string method = "both";
  int r_max = 0;
  std::string out;
  CLI::App* app = nullptr;

  void add(CLI::App& root) {
    app = root.add_subcommand("factor-number", "Estimate the number of factors");
    add_common(app, common, false, false);
    add_input(app, input, false);
    app->add_option("--method", method, "bn, ah or both");
    app->add_option("--r-max", r_max, "Largest candidate (default floor(sqrt(min(n, T))))");
    app->add_option("--out,-o", out, "Output JSON (default: stdout)");
  }

  int run(std::ostream& os) {
    finish_common(app, common);
    if (!out.empty()) check_output_prefix(out);
    std::vector<FactorNumberMethod> methods;
    if (method == "bn" || method == "both") methods.push_back(FactorNumberMethod::BaiNgIC);
    if (method == "ah" || method == "both") methods.push_back(FactorNumberMethod::AhnHorensteinGR);
    if (methods.empty()) throw InvalidInput("--method must be bn, ah or both");
    if (r_max < 0) throw InvalidInput("--r-max must be >= 0");

    PanelData panel = load_input(input);
    if (input.center) panel.values = center_columns(panel.values);

    Json j;
    j["schema_version"] = kSchemaVersion;
    Json effective = common_json(common, false, false);
    effective.update(input_json(input, panel));
    effective["method"] = method;
    effective["r_max"] = r_max;
    j["effective_config"] = std::move(effective);
    Json results = Json::array();
    for (auto m : methods) {
      const FactorNumberResult res = run_factor_number(panel.values, m, r_max);
      os << to_string(m) << " r_hat=" << res.r_hat << " (r_max=" << res.r_max << ")\n";
      results.push_back(factor_number_json(res));
    }
    j["results"] = std::move(results);
    if (out.empty()) {
      os << j.dump(2) << "\n";
    } else {
      write_json(out, j);
    }
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------
// estimate

struct EstimateCommand {
  CommonOptions common;
  InputOptions input;
  std::string method = "pc";
  bool blockwise = false;
  std::string r = "auto-bn";
  int r_max = 0;
  double c_w = 0.0;
  bool cv_cw = false;
  Index block_size = 0;
  std::string scaled_weighting = "quadratic";
  std::string out = "fit";
  CLI::App* app = nullptr;

  void add(CLI::App& root) {
    app = root.add_subcommand("estimate", "Estimate the common component");
    add_common(app, common, false, false);
    add_input(app, input, false);
    app->add_option("--method", method, "pc, scaled, capped, shrunk, a comma list, or all");
    app->add_flag("--blockwise", blockwise, "Blockwise estimation");
    app->add_option("--r", r, "Number of factors: integer, auto-bn or auto-ah");
    app->add_option("--r-max", r_max, "Largest candidate for auto selection");
    app->add_option("--c-w", c_w, "Scaling/capping constant (default 1.1 sqrt(n) max|w_1|)");
    app->add_flag("--cv-cw", cv_cw, "Cross-validate c_w for the scaled estimator");
    app->add_option("--block-size", block_size, "Block size (default floor(log^2 T))");
    app->add_option("--scaled-weighting", scaled_weighting, "quadratic or linear");
    app->add_option("--out,-o", out, "Output prefix");
  }

  int run(std::ostream& os) {
    finish_common(app, common);
    check_output_prefix(out);
    std::vector<EstimatorMethod> methods;
    if (method == "all") {
      methods = {EstimatorMethod::PC, EstimatorMethod::Scaled, EstimatorMethod::Capped,
                 EstimatorMethod::Shrunk};
    } else {
      for (const auto& m : split_list(method)) methods.push_back(parse_estimator_method(m));
    }
    if (methods.empty()) throw InvalidInput("--method is empty");
    if (c_w < 0.0) throw InvalidInput("--c-w must be positive");
    if (block_size < 0) throw InvalidInput("--block-size must be positive");
    if (scaled_weighting != "quadratic" && scaled_weighting != "linear") {
      throw InvalidInput("--scaled-weighting must be quadratic or linear");
    }
    const RChoice choice = parse_r(r);
    if (choice.fixed && *choice.fixed < 1) throw InvalidInput("--r must be >= 1");

    PanelData panel = load_input(input);
    if (input.center) panel.values = center_columns(panel.values);
    const Index T = panel.periods();

    Json diag;
    diag["schema_version"] = kSchemaVersion;
    Json effective = common_json(common, false, false);
    effective.update(input_json(input, panel));
    effective["method"] = method;
    effective["blockwise"] = blockwise;
    effective["r"] = r;
    effective["r_max"] = r_max;
    effective["c_w"] = c_w > 0.0 ? Json(c_w) : Json("default");
    effective["cv_cw"] = cv_cw;
    effective["block_size"] = block_size;
    effective["scaled_weighting"] = scaled_weighting;
    effective["out"] = out;
    diag["effective_config"] = std::move(effective);

    int r_hat = 0;
    if (choice.fixed) {
      r_hat = *choice.fixed;
    } else {
      const FactorNumberResult res = run_factor_number(panel.values, choice.method, r_max);
      r_hat = res.r_hat;
      diag["r_selection"] = factor_number_json(res);
    }
    diag["r_hat"] = r_hat;

    Json fits = Json::object();
    std::vector<std::string> written;
    std::optional<FactorFit> only;
    for (auto m : methods) {
      EstimatorSpec spec;
      spec.method = m;
      spec.blockwise = blockwise;
      spec.r_hat = r_hat;
      if (c_w > 0.0) spec.c_w = c_w;
      if (block_size > 0) spec.block = make_partition(T, block_size);
      spec.scaled_weighting =
          scaled_weighting == "linear" ? ScaledWeighting::Linear : ScaledWeighting::Quadratic;
      Json cv;
      if (cv_cw && m == EstimatorMethod::Scaled && !spec.c_w) {
        const auto grid = default_cw_multipliers();
        const CwSelection sel = cw_cross_validate(panel, r_hat, grid, spec.block);
        spec.c_w = sel.c_star;
        cv = {{"c_star", sel.c_star}, {"grid", sel.grid}, {"errors", sel.errors}};
      }
      FactorFit fit = estimate(panel, spec);
      const std::string tag = spec.tag();
      const std::string chi_path = out + "_chi_" + tag + ".csv";
      const std::string eps_path = out + "_eps_" + tag + ".csv";
      write_matrix_csv(chi_path, fit.chi_hat, header_for(panel), panel.time_labels);
      write_matrix_csv(eps_path, fit.eps_hat, header_for(panel), panel.time_labels);
      written.push_back(chi_path);
      written.push_back(eps_path);
      Json fj = fit_diagnostics_json(fit);
      if (!cv.is_null()) fj["cw_cross_validation"] = std::move(cv);
      fits[tag] = std::move(fj);
      for (const auto& w : fit.warnings) os << "warning (" << tag << "): " << w << "\n";
      if (methods.size() == 1) only = std::move(fit);
    }
    if (only) {
      diag["c_w"] = only->c_w;
      Json nu = Json::array();
      if (!only->spec.blockwise) {
        for (const auto& d : only->diagnostics) nu.push_back(d.nu);
      } else {
        for (const auto& b : only->blocks) {
          Json row = Json::array();
          for (const auto& d : b.eigenvectors) row.push_back(d.nu);
          nu.push_back(std::move(row));
        }
      }
      diag["nu"] = std::move(nu);
    }
    diag["fits"] = std::move(fits);
    write_json(out + "_diagnostics.json", diag);
    os << "r_hat=" << r_hat << "; wrote";
    for (const auto& p : written) os << " " << p;
    os << " " << out << "_diagnostics.json\n";
    return kExitOk;
  }

  static std::vector<std::string> header_for(const PanelData& panel) {
    if (panel.series_names.empty()) return {};
    std::vector<std::string> h;
    if (!panel.time_labels.empty()) h.push_back("date");
    h.insert(h.end(), panel.series_names.begin(), panel.series_names.end());
    return h;
  }
};

// ---------------------------------------------------------------------------
// mc-study

const std::map<std::string, std::map<std::string, std::vector<std::string>>>& presets() {
  static const std::map<std::string, std::map<std::string, std::vector<std::string>>> p{
      {"table-c1-cell",
       {{"model", {"model1"}},
        {"n", {"200"}},
        {"T", {"500"}},
        {"phi", {"1"}},
        {"r-selector", {"bn"}},
        {"methods", {"pc,cp,sc,sh"}},
        {"reps", {"200"}}}},
      {"fig1",
       {{"model", {"model1"}},
        {"n", {"200", "1000"}},
        {"T", {"500"}},
        {"phi", {"1"}},
        {"r-selector", {"bn"}},
        {"methods", {"pc"}},
        {"reps", {"100"}}}},
      {"fig2",
       {{"model", {"model1"}},
        {"n", {"1000"}},
        {"T", {"500"}},
        {"phi", {"1"}},
        {"r-selector", {"bn"}},
        {"methods", {"sc"}},
        {"reps", {"100"}}}},
      {"model2-c1",
       {{"model", {"model2"}},
        {"n", {"200"}},
        {"T", {"500"}},
        {"phi", {"1"}},
        {"varrho", {"0.2"}},
        {"r-selector", {"bn"}},
        {"methods", {"pc,cp,sc,sh"}},
        {"reps", {"100"}}}},
  };
  return p;
}

struct StudyCommand {
  CommonOptions common;
  SimOptions sim;
  std::string selector = "bn";
  std::string methods = "pc,cp,sc,sh";
  int reps = 100;
  int r_max = 0;
  std::string preset;
  std::string out = "study";
  bool quiet = false;
  CLI::App* app = nullptr;

  void add(CLI::App& root) {
    app = root.add_subcommand("mc-study", "Run a Monte Carlo study");
    add_common(app, common, true, true);
    add_sim(app, sim, true);
    app->add_option("--r-selector", selector, "bn, ah, fixed:K, true or true+M");
    app->add_option("--methods", methods,
                    "Comma list of pc, cp, sc, sh (prefix b for blockwise) and oracle");
    app->add_option("--reps", reps, "Replications per setting");
    app->add_option("--r-max", r_max, "Largest candidate for bn/ah (default floor(sqrt(min(n,T))))");
    app->add_option("--preset", preset, "table-c1-cell, fig1, fig2 or model2-c1");
    app->add_option("--out,-o", out, "Output prefix: <out>.csv and <out>.json");
    app->add_flag("--quiet", quiet, "No progress output");
  }

  int run(std::ostream& os, std::ostream& es) {
    finish_common(app, common);
    if (!preset.empty()) {
      const auto it = presets().find(preset);
      if (it == presets().end()) throw InvalidInput("unknown preset '" + preset + "'");
      for (const auto& [key, values] : it->second) fill_option(app, key, values);
    }
    check_output_prefix(out);
    if (r_max < 0) throw InvalidInput("--r-max must be >= 0");

    McStudyConfig cfg;
    cfg.base = sim_config(sim, sim.n[0], sim.T[0], sim.phi[0], sim.varrho[0], common.seed);
    cfg.n_grid = sim.n;
    cfg.T_grid = sim.T;
    cfg.phi_grid = sim.phi;
    cfg.varrho_grid = sim.varrho;
    cfg.r_selector = RSelector::parse(selector);
    if (r_max > 0) cfg.r_max = r_max;
    cfg.replications = reps;
    cfg.base_seed = common.seed;
    cfg.threads = common.threads;
    for (const auto& tag : split_list(methods)) {
      if (tag == "oracle") {
        cfg.methods.push_back(oracle_method());
        continue;
      }
      StudyMethod m;
      m.spec = parse_tag(tag);
      m.label = m.spec.tag();
      cfg.methods.push_back(m);
    }

    const McReport report = run_study(cfg, [&](std::size_t done, std::size_t total) {
      if (!quiet) es << "mc-study: setting " << done << "/" << total << " done\n";
    });

    write_text_file(out + ".csv", mc_report_csv(report));
    Json j = mc_report_json(report);
    Json effective = common_json(common, true, true);
    effective.update(sim_options_json(sim));
    effective["r_selector"] = selector;
    effective["methods"] = methods;
    effective["reps"] = reps;
    effective["r_max"] = r_max;
    effective["preset"] = preset;
    effective["out"] = out;
    j["effective_config"] = std::move(effective);
    write_json(out + ".json", j);

    for (const auto& s : report.settings) {
      os << s.sim.model_name() << " n=" << s.sim.n << " T=" << s.sim.T << " phi=" << s.sim.phi;
      if (const auto* m2 = std::get_if<Model2Params>(&s.sim.model)) os << " varrho=" << m2->varrho;
      os << " reps=" << s.r_hat.size() << "\n";
      for (const auto& m : s.methods) {
        os << "  " << m.method.label << " err_avg=" << format_double(m.mean_err_avg)
           << " err_max=" << format_double(m.mean_err_max) << "\n";
      }
    }
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------
// backtest

struct BacktestCommand {
  CommonOptions common;
  InputOptions input;
  std::string methods = "efm-pc,efm-cp,efm-sc,efm-sh,efm-bpc,efm-bcp,efm-bsc,efm-bsh,poet";
  std::string r = "auto-bn";
  Index window = 253;
  Index step = 21;
  std::string poet_c = "cv";
  std::string weights = "argmin";
  bool no_center = false;
  std::string out = "backtest";
  CLI::App* app = nullptr;

  void add(CLI::App& root) {
    app = root.add_subcommand("backtest", "Rolling minimum-variance portfolio backtest");
    add_common(app, common, false, true);
    add_input(app, input, true);
    app->add_option("--methods", methods, "Comma list of efm-<pc|cp|sc|sh>, efm-b<...>, poet");
    app->add_option("--r", r, "Factors per window: integer, auto-bn or auto-ah");
    app->add_option("--window", window, "Estimation window length");
    app->add_option("--step", step, "Evaluation period length");
    app->add_option("--poet-c", poet_c, "POET threshold constant or cv");
    app->add_option("--weights", weights, "argmin or literal");
    app->add_flag("--no-center", no_center, "Do not demean each window");
    app->add_option("--out,-o", out, "Output prefix: <out>.json and <out>_weights.csv");
  }

  int run(std::ostream& os) {
    finish_common(app, common);
    check_output_prefix(out);
    const RChoice choice = parse_r(r);
    BacktestOptions opts;
    opts.window = window;
    opts.step = step;
    opts.center = !no_center;
    opts.threads = common.threads;
    if (weights == "argmin") {
      opts.weight_rule = WeightRule::Argmin;
    } else if (weights == "literal") {
      opts.weight_rule = WeightRule::Literal;
    } else {
      throw InvalidInput("--weights must be argmin or literal");
    }
    std::optional<double> poet_constant;
    if (poet_c != "cv") {
      std::size_t used = 0;
      try {
        poet_constant = std::stod(poet_c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != poet_c.size() || !(*poet_constant >= 0.0)) {
        throw InvalidInput("--poet-c must be a non-negative number or cv");
      }
    }

    std::vector<BacktestMethod> list;
    for (const auto& name : split_list(methods)) {
      BacktestMethod m = parse_backtest_method(name, choice.fixed.value_or(0));
      if (!choice.fixed) m.r_estimator = choice.method;
      if (choice.fixed && *choice.fixed == 0 && m.kind == CovarianceKind::EFM &&
          m.spec.method != EstimatorMethod::PC) {
        throw InvalidInput("--r 0 is only meaningful for efm-pc and poet");
      }
      m.poet.constant = poet_constant;
      list.push_back(m);
    }
    if (list.empty()) throw InvalidInput("--methods is empty");

    const PanelData panel = load_input(input);
    const auto reports = rolling_backtest(panel, list, opts);

    Json j;
    j["schema_version"] = kSchemaVersion;
    Json effective = common_json(common, false, true);
    effective.update(input_json(input, panel));
    effective["center"] = !no_center;
    effective["methods"] = methods;
    effective["r"] = r;
    effective["window"] = window;
    effective["step"] = step;
    effective["poet_c"] = poet_c;
    effective["weights"] = weights;
    effective["out"] = out;
    j["effective_config"] = std::move(effective);
    j["methods"] = backtest_json(reports);
    write_json(out + ".json", j);
    write_text_file(out + "_weights.csv", backtest_weights_csv(reports, panel.series_names));

    for (const auto& rep : reports) {
      os << rep.method.label << " M=" << rep.M;
      if (rep.excluded) {
        os << " excluded";
      } else {
        os << " tau=" << format_double(rep.tau) << " sigma2=" << format_double(rep.sigma2)
           << " SR=" << format_double(rep.sharpe);
      }
      os << "\n";
    }
    return kExitOk;
  }
};

int report_error(std::ostream& es, const std::string& what, int code) {
  es << "error: " << what << "\n";
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App root{"factorlab: factor-model estimation, simulation and backtesting", "factorlab"};
  root.require_subcommand(1);
  root.set_version_flag("--version", "factorlab 1.0");

  SimulateCommand simulate_cmd;
  FactorNumberCommand factor_number_cmd;
  EstimateCommand estimate_cmd;
  StudyCommand study_cmd;
  BacktestCommand backtest_cmd;
  simulate_cmd.add(root);
  factor_number_cmd.add(root);
  estimate_cmd.add(root);
  study_cmd.add(root);
  backtest_cmd.add(root);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    root.parse(reversed);
  } catch (const CLI::Success& e) {
    root.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    root.exit(e, out, err);
    return kExitConfig;
  }

  try {
    if (simulate_cmd.app->parsed()) return simulate_cmd.run(out);
    if (factor_number_cmd.app->parsed()) return factor_number_cmd.run(out);
    if (estimate_cmd.app->parsed()) return estimate_cmd.run(out);
    if (study_cmd.app->parsed()) return study_cmd.run(out, err);
    if (backtest_cmd.app->parsed()) return backtest_cmd.run(out);
  } catch (const IoError& e) {
    return report_error(err, e.what(), kExitIo);
  } catch (const StudyFailed& e) {
    return report_error(err, e.what(), kExitStudyFailed);
  } catch (const DegenerateSpectrum& e) {
    return report_error(err, std::string(e.what()) + " [q=" + std::to_string(e.q()) + "]",
                        kExitConfig);
  } catch (const CLI::Error& e) {
    return report_error(err, e.what(), kExitConfig);
  } catch (const std::exception& e) {
    return report_error(err, e.what(), kExitConfig);
  }
  return report_error(err, "no command given", kExitConfig);
}

}  // namespace factorlab
