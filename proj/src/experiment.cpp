#include "icl/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "icl/algozoo.hpp"
#include "icl/csv.hpp"
#include "icl/dynsys.hpp"
#include "icl/errors.hpp"
#include "icl/martingale.hpp"
#include "icl/riskeval.hpp"
#include "icl/taskgen.hpp"
#include "icl/tfstab.hpp"

namespace icl {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Schema checks

std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

bool has_type(const json& v, const std::string& type) {
  if (const auto bar = type.find('|'); bar != std::string::npos)
    return has_type(v, type.substr(0, bar)) || has_type(v, type.substr(bar + 1));
  if (type == "uint") return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
  if (type == "number") return v.is_number();
  if (type == "string") return v.is_string();
  if (type == "bool") return v.is_boolean();
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  return false;
}

void check_object(const json& j, const std::string& path, const std::vector<FieldSpec>& fields) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "config" : path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    const auto it = std::find_if(fields.begin(), fields.end(), [&](const FieldSpec& f) { return f.name == key; });
    if (it == fields.end()) throw ConfigError(join_path(path, key), "unknown key");
    if (!has_type(value, it->type)) throw ConfigError(join_path(path, key), "expected " + it->type);
  }
  for (const auto& f : fields)
    if (f.required && !j.contains(f.name)) throw ConfigError(join_path(path, f.name), "missing required field");
}

std::uint64_t get_uint(const json& j, const std::string& key, std::uint64_t fallback) {
  return j.contains(key) ? j.at(key).get<std::uint64_t>() : fallback;
}

double get_num(const json& j, const std::string& key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

std::string get_str(const json& j, const std::string& key, const std::string& fallback) {
  return j.contains(key) ? j.at(key).get<std::string>() : fallback;
}

std::vector<double> get_num_array(const json& j, const std::string& key, const std::string& path,
                                  std::vector<double> fallback) {
  if (!j.contains(key)) return fallback;
  std::vector<double> out;
  for (std::size_t i = 0; i < j.at(key).size(); ++i) {
    const auto& v = j.at(key)[i];
    if (!v.is_number()) throw ConfigError(join_path(path, key) + "[" + std::to_string(i) + "]", "expected number");
    out.push_back(v.get<double>());
  }
  if (out.empty()) throw ConfigError(join_path(path, key), "must not be empty");
  return out;
}

std::vector<std::size_t> get_uint_array(const json& j, const std::string& key, const std::string& path,
                                        std::vector<std::size_t> fallback) {
  if (!j.contains(key)) return fallback;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < j.at(key).size(); ++i) {
    const auto& v = j.at(key)[i];
    if (!has_type(v, "uint")) throw ConfigError(join_path(path, key) + "[" + std::to_string(i) + "]", "expected uint");
    out.push_back(v.get<std::size_t>());
  }
  if (out.empty()) throw ConfigError(join_path(path, key), "must not be empty");
  return out;
}

Eigen::MatrixXd get_matrix(const json& j, const std::string& path) {
  try {
    return matrix_from_json(j);
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
}

template <typename Enum, typename Parse>
Enum parse_choice(const json& j, const std::string& key, const std::string& path, Enum fallback, Parse parse) {
  if (!j.contains(key)) return fallback;
  try {
    return parse(j.at(key).get<std::string>());
  } catch (const InvalidInput& e) {
    throw ConfigError(join_path(path, key), e.what());
  }
}

// ---------------------------------------------------------------------------
// Catalog

const std::vector<FieldSpec> kCommon{
    {"kind", "string", true, "experiment kind"},
    {"seed", "uint", true, "master seed; --seed overrides"},
    {"output", "string", false, "output directory (default: out); --out overrides"},
};

const std::vector<FieldSpec> kLinearDist{
    {"type", "string", true, "linear"},
    {"dim", "uint", true, "input dimension d"},
    {"cov", "string|array", false, "identity | harmonic_square, or a matrix given as an array of rows"},
    {"noise_std", "number", false, "label noise sigma (default 0)"},
    {"law", "string", false, "gaussian | sphere (default gaussian)"},
    {"sparsity", "uint", false, "restrict beta to a random support of this size (0 = dense)"},
};

const std::vector<FieldSpec> kLdsDist{
    {"type", "string", true, "lds"},
    {"state_dim", "uint", true, "state dimension"},
    {"obs_dim", "uint", false, "observation dimension (partial mode)"},
    {"spectral_radius", "number", false, "target spectral radius in (0, 1) (default 0.9)"},
    {"noise_std", "number", false, "process noise sigma (default 1)"},
    {"mode", "string", false, "full | partial (default full)"},
};

const std::vector<FieldSpec> kAlgorithm{
    {"kind", "string", true,
     "constant | running_mean | first_label | ols | ridge | weighted_ridge | empirical_cov_ridge | greedy_mtl | "
     "ar_ls | sparse_erm | ridge_best"},
    {"value", "number", false, "constant: predicted value"},
    {"lambda", "number", false, "ridge: regularization"},
    {"noise_var", "number", false, "weighted_ridge, empirical_cov_ridge: sigma^2"},
    {"prior_cov", "string|array", false,
     "weighted_ridge: identity | identity_over_d | matrix (default: the distribution's covariance)"},
    {"sources", "uint", false, "empirical_cov_ridge, greedy_mtl: source tasks drawn per replica"},
    {"window", "uint", false, "ar_ls: window H"},
    {"sparsity", "uint", false, "sparse_erm: sparsity s"},
    {"grid", "array", false, "ridge_best: lambda grid"},
};

const std::vector<ExperimentKind>& catalog_storage() {
  static const std::vector<ExperimentKind> kinds{
      {"riskcurve",
       "per-prefix Monte-Carlo risk of in-context algorithms",
       {{"distribution", "object", true, "task distribution (linear or lds)"},
        {"algorithms", "array", true, "algorithm objects"},
        {"n", "uint", true, "prompt length; risk reported for m = 0..n-1"},
        {"reps", "uint", true, "Monte-Carlo replicas (>= 30)"},
        {"loss", "string", false, "squared | clipped (default squared)"},
        {"mode", "string", false, "fresh | fixed task per replica (default fresh)"}},
       {"riskcurve.csv"}},
      {"stability",
       "transformer stability certification over a (depth, Gamma, m) grid",
       {{"depths", "array", false, "layer counts (default [1,2,3])"},
        {"gammas", "array", false, "norm budgets (default [0.5,1])"},
        {"ms", "array", false, "prompt lengths (default 2..16)"},
        {"trials_per_cell", "uint", false, "random configs per grid cell (default 12)"},
        {"token_dim", "uint", false, "token dimension (default 4)"},
        {"activation", "string", false, "relu | identity"},
        {"head_norm", "string", false, "per_row | per_example"},
        {"c", "number", false, "output scale (default 1)"},
        {"refine_steps", "uint", false, "coordinate-ascent sweeps per trial (default 8)"}},
       {"stability.csv", "stability_summary.csv"}},
      {"concentration",
       "Doob martingale traces, increment audit and Azuma tails",
       {{"n", "uint", true, "sequence length"},
        {"traces", "uint", true, "number of Doob traces"},
        {"mc_reps", "uint", true, "suffix resamples per trace (>= 100)"},
        {"declared_K", "number", true, "stability constant used by the audit"},
        {"algorithm", "object", false, "algorithm object (default running_mean)"},
        {"labels", "object", false, "uniform label range {lo, hi} (default [0, 1])"},
        {"distribution", "object", false, "linear task distribution instead of uniform labels"},
        {"B", "number", false, "loss bound (default 1)"},
        {"loss", "string", false, "clipped | squared (default clipped)"},
        {"coin_traces", "uint", false, "synthetic +-B/n traces for the tail check (default 10000)"},
        {"t_grid", "array", false, "tail thresholds (default [0.05,0.1,0.2,0.4])"}},
       {"traces.csv", "increments.csv", "tail.csv", "coin_tail.csv"}},
      {"bounds",
       "closed-form generalization bound sweep",
       {{"n", "array", true, "sequence lengths"},
        {"T", "array", true, "task counts"},
        {"M", "array", false, "sequences per task (default [1])"},
        {"L", "number", false, "Lipschitz constant (default 1)"},
        {"B", "number", false, "loss bound (default 1)"},
        {"K", "number", false, "stability constant (default 1)"},
        {"delta", "number", false, "confidence (default 0.05)"},
        {"diam", "number", false, "diameter of the algorithm class (default 1)"},
        {"c", "number", false, "absolute constant (default 1)"},
        {"cover", "object", false, "covering model {dim, scale}"}},
       {"boundsweep.csv"}},
      {"dynsys",
       "exponential-stability certificate and trajectory sensitivity",
       {{"system", "object", true, "{A: matrix} or {state_dim, spectral_radius}"},
        {"rho", "number", true, "contraction rate in (0, 1)"},
        {"trials", "uint", true, "paired rollouts"},
        {"horizon", "uint", true, "steps per rollout"},
        {"C_rho", "number", false, "envelope constant (default 1)"},
        {"noise_std", "number", false, "noise sigma, truncated at 3 sigma (default 1)"},
        {"sensitivity", "object", false, "{window, n, trials, swap_index, declared_K, C_rho_bar, rho_bar, m_min}"}},
       {"certificate.csv", "dynsys_summary.csv", "sensitivity.csv"}},
      {"modelselect",
       "sparse ERM risk tables and adaptive class selection",
       {{"distribution", "object", true, "linear task distribution"},
        {"sparsities", "array", true, "sparsity level per class"},
        {"n", "uint", true, "prompt length"},
        {"reps", "uint", true, "Monte-Carlo replicas"},
        {"approx_error", "array", false, "classes x n offsets (default zeros)"}},
       {"risk_table.csv", "selection.csv"}},
  };
  return kinds;
}

const ExperimentKind& find_kind(const std::string& name) {
  for (const auto& k : catalog_storage())
    if (k.name == name) return k;
  std::string known;
  for (const auto& k : catalog_storage()) known += (known.empty() ? "" : ", ") + k.name;
  throw ConfigError("kind", "unknown experiment kind '" + name + "' (expected one of " + known + ")");
}

// ---------------------------------------------------------------------------
// Parsing helpers

TaskDistribution parse_distribution(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("type")) throw ConfigError(join_path(path, "type"), "missing required field");
  const std::string type = j.at("type").is_string() ? j.at("type").get<std::string>() : "";
  if (type == "linear") {
    check_object(j, path, kLinearDist);
    LinearTaskDistribution d;
    d.dim = static_cast<Eigen::Index>(j.at("dim").get<std::uint64_t>());
    if (d.dim < 1) throw ConfigError(join_path(path, "dim"), "must be >= 1");
    d.noise_std = get_num(j, "noise_std", 0.0);
    if (d.noise_std < 0) throw ConfigError(join_path(path, "noise_std"), "must be >= 0");
    d.law = parse_choice(j, "law", path, BetaLaw::Gaussian, [](const std::string& s) {
      if (s == "gaussian") return BetaLaw::Gaussian;
      if (s == "sphere") return BetaLaw::Sphere;
      throw InvalidInput("expected gaussian or sphere");
    });
    d.sparsity = static_cast<Eigen::Index>(get_uint(j, "sparsity", 0));
    if (j.contains("cov")) {
      const auto& c = j.at("cov");
      if (c.is_string()) {
        const std::string name = c.get<std::string>();
        if (name == "harmonic_square") d.cov = harmonic_square_cov(d.dim);
        else if (name != "identity") throw ConfigError(join_path(path, "cov"), "expected identity or harmonic_square");
      } else if (c.is_array()) {
        d.cov = get_matrix(c, join_path(path, "cov"));
        if (d.cov.rows() != d.dim || d.cov.cols() != d.dim)
          throw ConfigError(join_path(path, "cov"), "must be dim x dim");
      } else {
        throw ConfigError(join_path(path, "cov"), "expected string or array");
      }
    }
    return d;
  }
  if (type == "lds") {
    check_object(j, path, kLdsDist);
    LdsTaskDistribution d;
    d.state_dim = static_cast<Eigen::Index>(j.at("state_dim").get<std::uint64_t>());
    d.obs_dim = static_cast<Eigen::Index>(get_uint(j, "obs_dim", static_cast<std::uint64_t>(d.state_dim)));
    d.spectral_radius = get_num(j, "spectral_radius", 0.9);
    d.noise_std = get_num(j, "noise_std", 1.0);
    d.mode = parse_choice(j, "mode", path, ObservationMode::Full, [](const std::string& s) {
      if (s == "full") return ObservationMode::Full;
      if (s == "partial") return ObservationMode::Partial;
      throw InvalidInput("expected full or partial");
    });
    if (!(d.spectral_radius > 0 && d.spectral_radius < 1))
      throw ConfigError(join_path(path, "spectral_radius"), "must lie in (0, 1)");
    return d;
  }
  throw ConfigError(join_path(path, "type"), "expected linear or lds");
}

const LinearTaskDistribution& require_linear(const TaskDistribution& d, const std::string& path) {
  if (const auto* lin = std::get_if<LinearTaskDistribution>(&d)) return *lin;
  throw ConfigError(path, "this algorithm needs a linear task distribution");
}

LossKind parse_loss(const json& j, const std::string& path, LossKind fallback) {
  return parse_choice(j, "loss", path, fallback, [](const std::string& s) {
    if (s == "squared") return LossKind::Squared;
    if (s == "clipped") return LossKind::Clipped;
    throw InvalidInput("expected squared or clipped");
  });
}

void require_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  for (const char* k : keys)
    if (!j.contains(k)) throw ConfigError(join_path(path, k), "missing required field");
}

/// Algorithms that need no per-replica state.
AlgorithmPtr build_algorithm(const json& j, const std::string& path, const TaskDistribution* dist) {
  check_object(j, path, kAlgorithm);
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "weighted_ridge") {
    require_keys(j, path, {"noise_var"});
    Eigen::MatrixXd cov;
    const std::string cov_path = join_path(path, "prior_cov");
    if (j.contains("prior_cov") && j.at("prior_cov").is_string()) {
      const std::string name = j.at("prior_cov").get<std::string>();
      if (!dist) throw ConfigError(cov_path, "named priors need a distribution for the dimension");
      const Eigen::Index d = require_linear(*dist, path).dim;
      cov = Eigen::MatrixXd::Identity(d, d);
      if (name == "identity_over_d") cov /= static_cast<double>(d);
      else if (name != "identity") throw ConfigError(cov_path, "expected identity, identity_over_d or a matrix");
    } else if (j.contains("prior_cov")) {
      cov = get_matrix(j.at("prior_cov"), cov_path);
    } else if (dist) cov = require_linear(*dist, path).covariance();
    else throw ConfigError(cov_path, "missing required field");
    return std::make_shared<WeightedRidge>(cov, j.at("noise_var").get<double>());
  }
  if (kind == "ridge") require_keys(j, path, {"lambda"});
  if (kind == "ar_ls") require_keys(j, path, {"window"});
  if (kind == "sparse_erm") require_keys(j, path, {"sparsity"});
  try {
    return algorithm_from_json(j);
  } catch (const InvalidInput& e) {
    throw ConfigError(join_path(path, "kind"), e.what());
  }
}

// ---------------------------------------------------------------------------
// Output

struct Outputs {
  std::filesystem::path dir;
  std::vector<std::string> files;

  void write(const std::string& name, const std::string& text) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw InvalidInput("cannot write '" + (dir / name).string() + "'");
    f << text;
    files.push_back(name);
  }
  void write(const std::string& name, const CsvTable& table) { write(name, table.str()); }
};

// ---------------------------------------------------------------------------
// Experiments

void run_riskcurve(const json& cfg, std::uint64_t seed, Outputs& out) {
  const TaskDistribution dist = parse_distribution(cfg.at("distribution"), "distribution");
  RiskCurveOptions opt;
  opt.n = cfg.at("n").get<std::size_t>();
  opt.reps = cfg.at("reps").get<std::size_t>();
  opt.seed = seed;
  opt.loss = parse_loss(cfg, "", LossKind::Squared);
  opt.mode = parse_choice(cfg, "mode", "", TaskMode::FreshTask, [](const std::string& s) {
    if (s == "fresh") return TaskMode::FreshTask;
    if (s == "fixed") return TaskMode::FixedTask;
    throw InvalidInput("expected fresh or fixed");
  });
  if (opt.n < 1) throw ConfigError("n", "must be >= 1");
  if (opt.reps < 30) throw ConfigError("reps", "must be >= 30");
  const auto& algs = cfg.at("algorithms");
  if (algs.empty()) throw ConfigError("algorithms", "must not be empty");

  CsvTable table = risk_curve_table();
  for (std::size_t i = 0; i < algs.size(); ++i) {
    const std::string path = "algorithms[" + std::to_string(i) + "]";
    const json& a = algs[i];
    check_object(a, path, kAlgorithm);
    const std::string kind = a.at("kind").get<std::string>();
    if (kind == "ridge_best") {
      const auto& lin = require_linear(dist, path);
      const auto grid = get_num_array(a, "grid", path, {0.01, 0.05, 0.1, 0.5, 1.0});
      ridge_best_curve(lin, grid, seed + 1, opt).curve.append_to(table);
    } else if (kind == "empirical_cov_ridge" || kind == "greedy_mtl") {
      const LinearTaskDistribution lin = require_linear(dist, path);
      require_keys(a, path, {"sources"});
      const std::size_t T = a.at("sources").get<std::size_t>();
      if (T < 1) throw ConfigError(join_path(path, "sources"), "must be >= 1");
      const double noise_var = get_num(a, "noise_var", lin.noise_std * lin.noise_std);
      AlgorithmFactory factory;
      if (kind == "greedy_mtl") {
        factory = [lin, T](Rng& rng) -> AlgorithmPtr {
          return std::make_shared<GreedyMtl>(sample_source_betas(lin, T, rng));
        };
      } else {
        factory = [lin, T, noise_var](Rng& rng) -> AlgorithmPtr {
          return std::make_shared<EmpiricalCovRidge>(sample_source_betas(lin, T, rng), noise_var);
        };
      }
      RiskCurve c = risk_curve(factory, dist, opt);
      c.alg_id = kind + "(T=" + std::to_string(T) + ")";
      c.append_to(table);
    } else {
      const AlgorithmPtr alg = build_algorithm(a, path, &dist);
      risk_curve(*alg, dist, opt).append_to(table);
    }
  }
  out.write("riskcurve.csv", table);
}

void run_stability(const json& cfg, std::uint64_t seed, Outputs& out) {
  StabilityGrid grid;
  grid.depths = get_uint_array(cfg, "depths", "", grid.depths);
  grid.gammas = get_num_array(cfg, "gammas", "", grid.gammas);
  grid.ms = get_uint_array(cfg, "ms", "", grid.ms);
  grid.trials_per_cell = get_uint(cfg, "trials_per_cell", grid.trials_per_cell);
  grid.token_dim = static_cast<Eigen::Index>(get_uint(cfg, "token_dim", static_cast<std::uint64_t>(grid.token_dim)));
  grid.activation = parse_choice(cfg, "activation", "", grid.activation, activation_from_string);
  grid.head_norm = parse_choice(cfg, "head_norm", "", grid.head_norm, head_norm_from_string);
  grid.c = get_num(cfg, "c", grid.c);
  grid.refine_steps = get_uint(cfg, "refine_steps", grid.refine_steps);
  for (auto m : grid.ms)
    if (m < 2) throw ConfigError("ms", "prompt lengths must be >= 2");
  for (auto d : grid.depths)
    if (d < 1) throw ConfigError("depths", "depths must be >= 1");
  for (auto g : grid.gammas)
    if (g < 0) throw ConfigError("gammas", "budgets must be >= 0");
  if (grid.token_dim < 2) throw ConfigError("token_dim", "must be >= 2");

  const CertificationReport rep = certify_stability_grid(grid, seed);
  out.write("stability.csv", rep.csv());
  CsvTable summary("stability_summary",
                   {"trials", "violations", "lipschitz_violations", "max_ratio", "max_lipschitz_ratio"});
  summary.add({rep.trials.size(), rep.violations, rep.lipschitz_violations, rep.max_ratio, rep.max_lipschitz_ratio});
  out.write("stability_summary.csv", summary);
}

void run_concentration(const json& cfg, std::uint64_t seed, Outputs& out) {
  const std::size_t n = cfg.at("n").get<std::size_t>();
  const std::size_t traces = cfg.at("traces").get<std::size_t>();
  const std::size_t mc_reps = cfg.at("mc_reps").get<std::size_t>();
  const double K = cfg.at("declared_K").get<double>();
  const double B = get_num(cfg, "B", 1.0);
  const LossKind loss = parse_loss(cfg, "", LossKind::Clipped);
  const std::size_t coin = get_uint(cfg, "coin_traces", 10000);
  const auto t_grid = get_num_array(cfg, "t_grid", "", {0.05, 0.1, 0.2, 0.4});
  if (n < 1) throw ConfigError("n", "must be >= 1");
  if (traces < 1) throw ConfigError("traces", "must be >= 1");
  if (mc_reps < 100) throw ConfigError("mc_reps", "must be >= 100");
  if (cfg.contains("labels") && cfg.contains("distribution"))
    throw ConfigError("distribution", "give either labels or distribution, not both");

  AlgorithmPtr alg = std::make_shared<RunningMean>();
  if (cfg.contains("algorithm")) alg = build_algorithm(cfg.at("algorithm"), "algorithm", nullptr);

  std::optional<LinearTaskDistribution> dist;
  double lo = 0.0, hi = 1.0;
  if (cfg.contains("distribution")) {
    dist = require_linear(parse_distribution(cfg.at("distribution"), "distribution"), "distribution");
  } else if (cfg.contains("labels")) {
    const auto& l = cfg.at("labels");
    check_object(l, "labels", {{"lo", "number", true, ""}, {"hi", "number", true, ""}});
    lo = l.at("lo").get<double>();
    hi = l.at("hi").get<double>();
    if (!(hi >= lo)) throw ConfigError("labels.hi", "must be >= lo");
  }

  std::vector<MartingaleTrace> doob;
  doob.reserve(traces);
  CsvTable inc("increments", {"trace", "bound", "max_increment", "violations", "steps"});
  for (std::size_t k = 0; k < traces; ++k) {
    Rng rng = Rng::stream(seed, {0, k});
    if (dist) {
      const TaskSpec task = dist->sample(rng);
      doob.push_back(doob_trace(*alg, task, n, mc_reps, rng, loss));
    } else {
      doob.push_back(doob_trace(*alg, uniform_label_sampler(lo, hi), n, mc_reps, rng, loss));
    }
    const auto audit = audit_increments(doob.back(), B, K);
    inc.add({k, audit.bound, audit.max_increment, audit.violations, audit.steps});
  }
  out.write("traces.csv", traces_csv(doob));
  out.write("increments.csv", inc);
  out.write("tail.csv", azuma_tail_check(doob, B, K, t_grid).csv());

  std::vector<MartingaleTrace> coins;
  coins.reserve(coin);
  for (std::size_t k = 0; k < coin; ++k) {
    Rng rng = Rng::stream(seed, {1, k});
    coins.push_back(coin_martingale(n, B, rng));
  }
  if (!coins.empty()) out.write("coin_tail.csv", azuma_tail_check(coins, B, 0.0, t_grid).csv());
}

void run_bounds(const json& cfg, std::uint64_t, Outputs& out) {
  BoundInputs in;
  in.L = get_num(cfg, "L", 1.0);
  in.B = get_num(cfg, "B", 1.0);
  in.K = get_num(cfg, "K", 1.0);
  in.delta = get_num(cfg, "delta", 0.05);
  in.diam = get_num(cfg, "diam", 1.0);
  in.c = get_num(cfg, "c", 1.0);
  if (cfg.contains("cover")) {
    const auto& c = cfg.at("cover");
    check_object(c, "cover", {{"dim", "number", true, ""}, {"scale", "number", false, ""}});
    in.cover.dim = c.at("dim").get<double>();
    in.cover.scale = get_num(c, "scale", 1.0);
  }
  const auto ns = get_num_array(cfg, "n", "", {});
  const auto Ts = get_num_array(cfg, "T", "", {});
  const auto Ms = get_num_array(cfg, "M", "", {1.0});
  try {
    in.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError("bounds", e.what());
  }
  out.write("boundsweep.csv", bound_sweep(in, ns, Ts, Ms));
}

void run_dynsys(const json& cfg, std::uint64_t seed, Outputs& out) {
  const auto& sys = cfg.at("system");
  check_object(sys, "system",
               {{"A", "array", false, ""}, {"state_dim", "uint", false, ""}, {"spectral_radius", "number", false, ""}});
  Eigen::MatrixXd A;
  if (sys.contains("A")) {
    A = get_matrix(sys.at("A"), "system.A");
    if (A.rows() != A.cols() || A.rows() == 0) throw ConfigError("system.A", "must be a nonempty square matrix");
  } else {
    require_keys(sys, "system", {"state_dim", "spectral_radius"});
    Rng rng = Rng::stream(seed, {0});
    const auto d = static_cast<Eigen::Index>(sys.at("state_dim").get<std::uint64_t>());
    const double r = sys.at("spectral_radius").get<double>();
    if (!(r > 0 && r < 1)) throw ConfigError("system.spectral_radius", "must lie in (0, 1)");
    A = sample_lds_task(d, d, r, rng).A;
  }
  const double rho = cfg.at("rho").get<double>();
  const double C_rho = get_num(cfg, "C_rho", 1.0);
  const double noise_std = get_num(cfg, "noise_std", 1.0);
  const std::size_t trials = cfg.at("trials").get<std::size_t>();
  const std::size_t horizon = cfg.at("horizon").get<std::size_t>();
  if (!(rho > 0 && rho < 1)) throw ConfigError("rho", "must lie in (0, 1)");
  if (trials < 1) throw ConfigError("trials", "must be >= 1");

  const StabilityCert cert =
      certify_exponential_stability(linear_dynamics(A), A.rows(), C_rho, rho, trials, horizon, noise_std, seed);
  out.write("certificate.csv", cert.csv());
  CsvTable summary("dynsys_summary",
                   {"C_rho", "rho", "exact_C_rho", "max_violation_ratio", "violations", "certified", "trials"});
  summary.add({C_rho, rho, exact_c_rho(A, rho, horizon), cert.max_violation_ratio, cert.violations, cert.certified(),
               trials});
  out.write("dynsys_summary.csv", summary);

  if (cfg.contains("sensitivity")) {
    const auto& s = cfg.at("sensitivity");
    check_object(s, "sensitivity",
                 {{"window", "uint", false, ""},
                  {"n", "uint", false, ""},
                  {"trials", "uint", false, ""},
                  {"swap_index", "uint", false, ""},
                  {"declared_K", "number", false, ""},
                  {"C_rho_bar", "number", false, ""},
                  {"rho_bar", "number", false, ""},
                  {"m_min", "uint", false, ""}});
    TaskSpec task;
    task.kind = TaskKind::Lds;
    task.A = A;
    task.C = Eigen::MatrixXd::Identity(A.rows(), A.rows());
    task.noise_std = noise_std;
    task.spectral_radius = spectral_radius(A);
    SensitivityOptions so;
    so.n = get_uint(s, "n", so.n);
    so.trials = get_uint(s, "trials", so.trials);
    so.m_min = get_uint(s, "m_min", so.m_min);
    so.declared_K = get_num(s, "declared_K", so.declared_K);
    so.C_rho_bar = get_num(s, "C_rho_bar", C_rho);
    so.rho_bar = get_num(s, "rho_bar", rho);
    const ArLeastSquares alg(get_uint(s, "window", 1));
    const auto prof = measure_trajectory_sensitivity(alg, task, get_uint(s, "swap_index", 1), seed, so);
    out.write("sensitivity.csv", prof.csv());
  }
}

void run_modelselect(const json& cfg, std::uint64_t seed, Outputs& out) {
  const LinearTaskDistribution dist =
      require_linear(parse_distribution(cfg.at("distribution"), "distribution"), "distribution");
  const auto sparsities = get_uint_array(cfg, "sparsities", "", {});
  const std::size_t n = cfg.at("n").get<std::size_t>();
  const std::size_t reps = cfg.at("reps").get<std::size_t>();
  if (n < 1) throw ConfigError("n", "must be >= 1");
  if (reps < 1) throw ConfigError("reps", "must be >= 1");
  for (auto s : sparsities)
    if (s < 1) throw ConfigError("sparsities", "sparsity levels must be >= 1");
  HypothesisClassFamily fam = populate_sparse_family(dist, sparsities, n, reps, seed);
  if (cfg.contains("approx_error")) {
    fam.approx_error = get_matrix(cfg.at("approx_error"), "approx_error");
    if (fam.approx_error.rows() != fam.risk.rows() || fam.approx_error.cols() != fam.risk.cols())
      throw ConfigError("approx_error", "must be classes x n");
  }
  out.write("risk_table.csv", risk_table_csv(fam));
  CsvTable sel("selection", {"m", "selected", "class", "value", "averaged_bound"});
  for (Eigen::Index m = 0; m < fam.length(); ++m) {
    const auto s = adaptive_model_selection(fam, m);
    sel.add({static_cast<long long>(m), static_cast<long long>(s.selected),
             fam.classes[static_cast<std::size_t>(s.selected)], s.value, s.averaged_bound});
  }
  out.write("selection.csv", sel);
}

}  // namespace

const std::vector<ExperimentKind>& experiment_catalog() { return catalog_storage(); }

std::string catalog_text() {
  std::ostringstream s;
  for (const auto& k : catalog_storage()) {
    s << k.name << "  " << k.summary << "\n";
    for (const auto& f : kCommon)
      s << "    " << f.name << " (" << f.type << (f.required ? ", required" : "") << ")  " << f.help << "\n";
    for (const auto& f : k.fields)
      s << "    " << f.name << " (" << f.type << (f.required ? ", required" : "") << ")  " << f.help << "\n";
    s << "    outputs:";
    for (const auto& o : k.outputs) s << " " << o;
    s << "\n";
  }
  return s.str();
}

std::string config_hash(const json& config) {
  const std::string text = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunResult run_experiment(json config, const RunOptions& opt) {
  if (!config.is_object()) throw ConfigError("config", "expected a JSON object");
  if (!config.contains("kind")) throw ConfigError("kind", "missing required field");
  if (!config.at("kind").is_string()) throw ConfigError("kind", "expected string");
  const ExperimentKind& kind = find_kind(config.at("kind").get<std::string>());
  if (opt.seed) config["seed"] = *opt.seed;
  std::vector<FieldSpec> fields = kCommon;
  fields.insert(fields.end(), kind.fields.begin(), kind.fields.end());
  check_object(config, "", fields);

  const std::uint64_t seed = config.at("seed").get<std::uint64_t>();
  Outputs out;
  out.dir = opt.out_dir ? *opt.out_dir : get_str(config, "output", "out");
  std::filesystem::create_directories(out.dir);

  if (kind.name == "riskcurve") run_riskcurve(config, seed, out);
  else if (kind.name == "stability") run_stability(config, seed, out);
  else if (kind.name == "concentration") run_concentration(config, seed, out);
  else if (kind.name == "bounds") run_bounds(config, seed, out);
  else if (kind.name == "dynsys") run_dynsys(config, seed, out);
  else if (kind.name == "modelselect") run_modelselect(config, seed, out);

  RunResult res;
  res.out_dir = out.dir.string();
  res.files = out.files;
  res.manifest = {{"tool", "iclab"},
                  {"version", kToolVersion},
                  {"kind", kind.name},
                  {"seed", seed},
                  {"config_hash", config_hash(config)},
                  {"config", config},
                  {"csv_schema_version", kCsvSchemaVersion},
                  {"outputs", out.files}};
  out.write("manifest.json", res.manifest.dump(2) + "\n");
  res.files = out.files;
  return res;
}

RunResult run_config_file(const std::string& path, const RunOptions& opt) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config", "cannot read '" + path + "'");
  json config;
  try {
    config = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
  return run_experiment(std::move(config), opt);
}

}  // namespace icl
