#include "icl/tfstab.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "icl/errors.hpp"
#include "icl/parallel.hpp"

namespace icl {

namespace {

constexpr PowerIterationOptions kNormOptions{1000, 1e-14};

double opnorm(const Eigen::MatrixXd& a) { return operator_norm(a, kNormOptions); }

Eigen::MatrixXd scale_to(const Eigen::MatrixXd& a, double budget) {
  const double n = opnorm(a);
  return n > 0 ? Eigen::MatrixXd(a * (budget / n)) : a;
}

Eigen::MatrixXd clip_to(const Eigen::MatrixXd& a, double budget) {
  const double n = opnorm(a);
  return n > budget ? Eigen::MatrixXd(a * (budget / n)) : a;
}

double layer_factor(double gamma) { return (1.0 + gamma) * std::exp(gamma); }

StabilityBound scaled_power(double prefactor, double gamma, std::size_t depth) {
  const double log_value = std::log(prefactor) + static_cast<double>(depth) * std::log(layer_factor(gamma));
  if (prefactor == 0.0) return {0.0, false};
  if (log_value >= std::log(std::numeric_limits<double>::max())) {
    return {std::numeric_limits<double>::infinity(), true};
  }
  return {prefactor * std::pow(layer_factor(gamma), static_cast<double>(depth)), false};
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "identity"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "identity") return Activation::Identity;
  throw InvalidInput("unknown activation '" + s + "' (expected relu or identity)");
}

std::string to_string(HeadNorm h) { return h == HeadNorm::PerRow ? "per_row" : "per_example"; }

HeadNorm head_norm_from_string(const std::string& s) {
  if (s == "per_row") return HeadNorm::PerRow;
  if (s == "per_example") return HeadNorm::PerExample;
  throw InvalidInput("unknown head normalization '" + s + "' (expected per_row or per_example)");
}

double TransformerConfig::head_row_budget() const {
  return head_norm == HeadNorm::PerRow ? c / static_cast<double>(2 * prompt_length - 1)
                                       : c / static_cast<double>(prompt_length);
}

nlohmann::json TransformerConfig::to_json() const {
  nlohmann::json j;
  j["depth"] = depth();
  j["token_dim"] = token_dim();
  j["prompt_length"] = prompt_length;
  j["gamma"] = gamma;
  j["c"] = c;
  j["activation"] = to_string(activation);
  j["head_norm"] = to_string(head_norm);
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < depth(); ++i) {
    nlohmann::json mlps = nlohmann::json::array();
    for (const auto& m : M[i]) mlps.push_back(matrix_to_json(m));
    layers.push_back({{"W", matrix_to_json(W[i])}, {"V", matrix_to_json(V[i])}, {"M", std::move(mlps)}});
  }
  j["layers"] = std::move(layers);
  j["H"] = matrix_to_json(H);
  return j;
}

TransformerConfig TransformerConfig::from_json(const nlohmann::json& j) {
  TransformerConfig cfg;
  cfg.prompt_length = j.at("prompt_length").get<std::size_t>();
  cfg.gamma = j.at("gamma").get<double>();
  cfg.c = j.value("c", 1.0);
  cfg.activation = activation_from_string(j.value("activation", std::string("relu")));
  cfg.head_norm = head_norm_from_string(j.value("head_norm", std::string("per_row")));
  for (const auto& layer : j.at("layers")) {
    cfg.W.push_back(matrix_from_json(layer.at("W")));
    cfg.V.push_back(matrix_from_json(layer.at("V")));
    std::vector<Eigen::MatrixXd> mlps;
    for (const auto& m : layer.at("M")) mlps.push_back(matrix_from_json(m));
    cfg.M.push_back(std::move(mlps));
  }
  cfg.H = matrix_from_json(j.at("H"));
  return cfg;
}

std::string constraint_violation(const TransformerConfig& cfg, double tol) {
  std::ostringstream msg;
  const Eigen::Index d = cfg.token_dim();
  const Eigen::Index rows = cfg.rows();
  if (cfg.prompt_length == 0) return "prompt_length must be >= 1";
  if (cfg.H.rows() != rows) {
    msg << "H has " << cfg.H.rows() << " rows, expected " << rows;
    return msg.str();
  }
  if (cfg.V.size() != cfg.depth() || cfg.M.size() != cfg.depth()) return "per-layer weight lists differ in length";
  for (std::size_t i = 0; i < cfg.depth(); ++i) {
    if (cfg.W[i].rows() != d || cfg.W[i].cols() != d || cfg.V[i].rows() != d || cfg.V[i].cols() != d) {
      msg << "layer " << i << ": W and V must be " << d << "x" << d;
      return msg.str();
    }
    if (static_cast<Eigen::Index>(cfg.M[i].size()) != rows) {
      msg << "layer " << i << ": expected " << rows << " MLP matrices, got " << cfg.M[i].size();
      return msg.str();
    }
    const double w = opnorm(cfg.W[i]);
    if (w > cfg.gamma / 2 + tol) {
      msg << "layer " << i << ": ||W|| = " << w << " exceeds Gamma/2 = " << cfg.gamma / 2;
      return msg.str();
    }
    const double v = opnorm(cfg.V[i]);
    if (v > 1 + tol) {
      msg << "layer " << i << ": ||V|| = " << v << " exceeds 1";
      return msg.str();
    }
    for (std::size_t j = 0; j < cfg.M[i].size(); ++j) {
      const auto& m = cfg.M[i][j];
      if (m.rows() != d || m.cols() != d) {
        msg << "layer " << i << ", token " << j << ": MLP matrix must be " << d << "x" << d;
        return msg.str();
      }
      const double mn = opnorm(m);
      if (mn > 1 + tol) {
        msg << "layer " << i << ", token " << j << ": ||M|| = " << mn << " exceeds 1";
        return msg.str();
      }
    }
  }
  const double h = norm_2_inf(cfg.H);
  if (h > cfg.head_row_budget() + tol) {
    msg << "||H||_{2,inf} = " << h << " exceeds " << cfg.head_row_budget();
    return msg.str();
  }
  return {};
}

TransformerConfig project_constraints(TransformerConfig raw, double gamma, double c, std::size_t m) {
  if (gamma < 0 || c < 0 || m == 0) throw InvalidInput("project_constraints: need gamma >= 0, c >= 0, m >= 1");
  raw.gamma = gamma;
  raw.c = c;
  raw.prompt_length = m;
  for (std::size_t i = 0; i < raw.depth(); ++i) {
    raw.W[i] = clip_to(raw.W[i], gamma / 2);
    raw.V[i] = clip_to(raw.V[i], 1.0);
    for (auto& mm : raw.M[i]) mm = clip_to(mm, 1.0);
  }
  const double budget = raw.head_row_budget();
  for (Eigen::Index r = 0; r < raw.H.rows(); ++r) {
    const double n = raw.H.row(r).norm();
    if (n > budget) raw.H.row(r) *= budget / n;
  }
  return raw;
}

TransformerConfig random_config(std::size_t depth, Eigen::Index token_dim, std::size_t m, double gamma, Rng& rng,
                                Activation act, double c, HeadNorm head_norm) {
  if (depth == 0 || token_dim < 1 || m == 0) throw InvalidInput("random_config: need depth, token_dim, m >= 1");
  TransformerConfig cfg;
  cfg.activation = act;
  cfg.head_norm = head_norm;
  cfg.gamma = gamma;
  cfg.c = c;
  cfg.prompt_length = m;
  const Eigen::Index rows = cfg.rows();
  for (std::size_t i = 0; i < depth; ++i) {
    cfg.W.push_back(scale_to(rng.normal_matrix(token_dim, token_dim), gamma / 2));
    cfg.V.push_back(scale_to(rng.normal_matrix(token_dim, token_dim), 1.0));
    std::vector<Eigen::MatrixXd> mlps;
    for (Eigen::Index j = 0; j < rows; ++j) mlps.push_back(scale_to(rng.normal_matrix(token_dim, token_dim), 1.0));
    cfg.M.push_back(std::move(mlps));
  }
  cfg.H.resize(rows, token_dim);
  for (Eigen::Index r = 0; r < rows; ++r) cfg.H.row(r) = cfg.head_row_budget() * rng.unit_sphere(token_dim).transpose();
  return project_constraints(std::move(cfg), gamma, c, m);
}

Eigen::MatrixXd attention_layer(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w, const Eigen::MatrixXd& v) {
  if (w.rows() != x.cols() || w.cols() != x.cols() || v.rows() != x.cols())
    throw InvalidInput("attention_layer: weight shapes do not match token dimension");
  const double xr = norm_2_inf(x);
  if (xr > 1 + 1e-9) throw ContractError("attention_layer: token row norm " + std::to_string(xr) + " exceeds 1");
  const double vn = opnorm(v);
  if (vn > 1 + 1e-9) throw ContractError("attention_layer: ||V|| = " + std::to_string(vn) + " exceeds 1");
  const Eigen::MatrixXd scores = x * w * x.transpose();
  return softmax_rows(scores) * (x * v);
}

Eigen::MatrixXd parallel_mlp(const Eigen::MatrixXd& a, const std::vector<Eigen::MatrixXd>& m, Activation act) {
  if (static_cast<Eigen::Index>(m.size()) != a.rows())
    throw InvalidInput("parallel_mlp: need one MLP matrix per token");
  Eigen::MatrixXd out(a.rows(), a.cols());
  for (Eigen::Index j = 0; j < a.rows(); ++j) {
    Eigen::VectorXd h = m[static_cast<std::size_t>(j)] * a.row(j).transpose();
    if (act == Activation::Relu) h = h.cwiseMax(0.0);
    out.row(j) = h.transpose();
  }
  return out;
}

std::vector<Eigen::MatrixXd> tf_layers(const TransformerConfig& cfg, const Eigen::MatrixXd& prompt) {
  if (prompt.rows() != cfg.rows() || prompt.cols() != cfg.token_dim()) {
    std::ostringstream msg;
    msg << "tf_forward: prompt is " << prompt.rows() << "x" << prompt.cols() << ", config expects " << cfg.rows()
        << "x" << cfg.token_dim();
    throw InvalidInput(msg.str());
  }
  std::vector<Eigen::MatrixXd> out{prompt};
  for (std::size_t i = 0; i < cfg.depth(); ++i) {
    Eigen::MatrixXd next = parallel_mlp(attention_layer(out.back(), cfg.W[i], cfg.V[i]), cfg.M[i], cfg.activation);
    if (!next.allFinite()) throw NumericalError("tf_forward: non-finite activations at layer " + std::to_string(i + 1));
    out.push_back(std::move(next));
  }
  return out;
}

double tf_forward(const TransformerConfig& cfg, const Eigen::MatrixXd& prompt) {
  const auto layers = tf_layers(cfg, prompt);
  const double value = cfg.H.cwiseProduct(layers.back()).sum();
  if (!std::isfinite(value)) throw NumericalError("tf_forward: non-finite output at head");
  return value;
}

Eigen::MatrixXd embed_prompt(std::span<const Pair> examples, const Eigen::VectorXd& query, Eigen::Index token_dim) {
  const Eigen::Index p = query.size();
  const Eigen::Index q = examples.empty() ? 1 : examples.front().y.size();
  if (p + q > token_dim)
    throw InvalidInput("embed_prompt: token_dim " + std::to_string(token_dim) + " too small for input dim " +
                       std::to_string(p) + " plus label dim " + std::to_string(q));
  const auto rows = static_cast<Eigen::Index>(2 * examples.size() + 1);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(rows, token_dim);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(2 * i);
    if (examples[i].x.size() != p || examples[i].y.size() != q) throw InvalidInput("embed_prompt: ragged examples");
    x.row(r).head(p) = examples[i].x.transpose();
    x.row(r + 1).tail(q) = examples[i].y.transpose();
  }
  x.row(rows - 1).head(p) = query.transpose();
  const double mx = norm_2_inf(x);
  if (mx > 1 + 1e-12) throw InvalidInput("embed_prompt: token row norm " + std::to_string(mx) + " exceeds 1");
  return x;
}

StabilityBound stability_bound(double gamma, std::size_t depth, std::size_t m, double c) {
  if (gamma < 0 || depth < 1 || m < 1 || c < 0) throw InvalidInput("stability_bound: need gamma >= 0, D >= 1, m >= 1");
  return scaled_power(2.0 * c / static_cast<double>(2 * m - 1), gamma, depth);
}

StabilityBound lipschitz_bound(double gamma, std::size_t depth, double head_row_budget, double dx_2_1) {
  if (gamma < 0 || head_row_budget < 0 || dx_2_1 < 0) throw InvalidInput("lipschitz_bound: negative input");
  return scaled_power(head_row_budget * dx_2_1, gamma, depth);
}

// ---------------------------------------------------------------------------

CsvTable CertificationReport::csv() const {
  CsvTable t("stability", {"trial", "m", "gamma", "depth", "measured", "bound", "ratio", "dx_2_1", "lipschitz",
                           "violation"});
  for (const auto& r : trials)
    t.add({r.trial, r.m, r.gamma, r.depth, r.measured, r.bound, r.ratio, r.dx_2_1, r.lipschitz,
           r.measured > r.bound});
  return t;
}

namespace {

struct PromptPair {
  std::vector<Pair> examples;
  Eigen::VectorXd query;
};

Pair random_example(Eigen::Index p, Rng& rng) {
  Pair e;
  e.x = rng.ball(p);
  e.y = Eigen::VectorXd::Constant(1, rng.uniform(-1.0, 1.0));
  return e;
}

Pair clamp_example(Pair e) {
  const double n = e.x.norm();
  if (n > 1) e.x /= n;
  e.y[0] = std::clamp(e.y[0], -1.0, 1.0);
  return e;
}

CertificationTrial run_trial(const TransformerConfig& cfg, Rng& rng, std::size_t refine_steps) {
  const std::size_t m = cfg.prompt_length;
  if (m < 2) throw InvalidInput("certify_stability: prompt_length must be >= 2");
  const Eigen::Index d = cfg.token_dim();
  const Eigen::Index p = d - 1;
  if (p < 1) throw InvalidInput("certify_stability: token_dim must be >= 2");

  std::vector<Pair> examples;
  for (std::size_t i = 0; i + 1 < m; ++i) examples.push_back(random_example(p, rng));
  const Eigen::VectorXd query = rng.ball(p);
  const std::size_t j = rng.index(m - 1);

  const Eigen::MatrixXd x = embed_prompt(examples, query, d);
  const double base = tf_forward(cfg, x);
  std::vector<Pair> alt = examples;
  alt[j] = random_example(p, rng);

  auto evaluate = [&](const Pair& swap, Eigen::MatrixXd& xp) {
    alt[j] = swap;
    xp = embed_prompt(alt, query, d);
    return std::abs(tf_forward(cfg, xp) - base);
  };

  Eigen::MatrixXd best_x;
  Pair best = alt[j];
  double best_diff = evaluate(best, best_x);
  double step = 0.5;
  for (std::size_t s = 0; s < refine_steps; ++s, step *= 0.5) {
    for (Eigen::Index k = 0; k <= p; ++k) {
      for (double dir : {1.0, -1.0}) {
        Pair cand = best;
        if (k < p) cand.x[k] += dir * step;
        else cand.y[0] += dir * step;
        cand = clamp_example(std::move(cand));
        Eigen::MatrixXd xp;
        const double diff = evaluate(cand, xp);
        if (diff > best_diff) {
          best_diff = diff;
          best = std::move(cand);
          best_x = std::move(xp);
        }
      }
    }
  }

  CertificationTrial t;
  t.m = m;
  t.gamma = cfg.gamma;
  t.depth = cfg.depth();
  t.measured = best_diff;
  t.bound = scaled_power(2.0 * cfg.head_row_budget(), cfg.gamma, cfg.depth()).value;
  t.ratio = t.bound > 0 ? t.measured / t.bound : (t.measured > 0 ? std::numeric_limits<double>::infinity() : 0.0);
  t.dx_2_1 = norm_2_1(x - best_x);
  t.lipschitz = lipschitz_bound(cfg.gamma, cfg.depth(), cfg.head_row_budget(), t.dx_2_1).value;
  return t;
}

void summarize(CertificationReport& rep, double tol) {
  for (const auto& t : rep.trials) {
    if (t.measured > t.bound + tol) ++rep.violations;
    if (t.measured > t.lipschitz + tol) ++rep.lipschitz_violations;
    rep.max_ratio = std::max(rep.max_ratio, t.ratio);
    if (t.lipschitz > 0) rep.max_lipschitz_ratio = std::max(rep.max_lipschitz_ratio, t.measured / t.lipschitz);
  }
}

}  // namespace

CertificationReport certify_stability(const TransformerConfig& cfg, Rng& rng, const CertificationOptions& opt) {
  if (const auto err = constraint_violation(cfg); !err.empty()) throw ContractError("certify_stability: " + err);
  CertificationReport rep;
  for (std::size_t i = 0; i < opt.trials; ++i) {
    rep.trials.push_back(run_trial(cfg, rng, opt.refine_steps));
    rep.trials.back().trial = i;
  }
  summarize(rep, opt.tol);
  return rep;
}

CertificationReport certify_stability_grid(const StabilityGrid& grid, std::uint64_t seed) {
  struct Cell {
    std::size_t depth;
    double gamma;
    std::size_t m;
  };
  std::vector<Cell> cells;
  for (auto depth : grid.depths)
    for (auto gamma : grid.gammas)
      for (auto m : grid.ms) cells.push_back({depth, gamma, m});

  const std::size_t total = cells.size() * grid.trials_per_cell;
  CertificationReport rep;
  rep.trials.resize(total);
  parallel_for(total, [&](std::size_t k) {
    const std::size_t cell = k / grid.trials_per_cell;
    const std::size_t trial = k % grid.trials_per_cell;
    Rng rng = Rng::stream(seed, {cell, trial});
    const Cell& c = cells[cell];
    const TransformerConfig cfg =
        random_config(c.depth, grid.token_dim, c.m, c.gamma, rng, grid.activation, grid.c, grid.head_norm);
    rep.trials[k] = run_trial(cfg, rng, grid.refine_steps);
    rep.trials[k].trial = k;
  });
  summarize(rep, 1e-9);
  return rep;
}

// ---------------------------------------------------------------------------

SoftmaxLemmaReport check_softmax_lemma(std::size_t draws, double c_min, double c_max, std::size_t n_min,
                                       std::size_t n_max, std::uint64_t seed) {
  if (c_min < 0 || c_max <= 0 || c_max < c_min || n_min < 1 || n_max < n_min)
    throw InvalidInput("check_softmax_lemma: need 0 <= c_min <= c_max, c_max > 0 and 1 <= n_min <= n_max");
  struct Draw {
    double sup_ratio, lip_ratio;
  };
  std::vector<Draw> out(draws);
  parallel_for(draws, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, {i});
    const double c = rng.uniform(c_min, c_max);
    const auto n = static_cast<Eigen::Index>(n_min + rng.index(n_max - n_min + 1));
    Eigen::VectorXd v(n), w(n);
    for (Eigen::Index k = 0; k < n; ++k) v[k] = rng.uniform(-c, c);
    for (Eigen::Index k = 0; k < n; ++k) w[k] = rng.uniform(-c, c);
    const Eigen::VectorXd p = softmax_row(v);
    const Eigen::VectorXd q = softmax_row(w);
    const double scale = std::exp(2 * c) / static_cast<double>(n);
    const double e1 = (w - v).lpNorm<1>();
    out[i].sup_ratio = p.lpNorm<Eigen::Infinity>() / scale;
    out[i].lip_ratio = e1 > 0 ? (p - q).lpNorm<1>() / (scale * e1) : 0.0;
  });
  SoftmaxLemmaReport rep;
  rep.draws = draws;
  constexpr double tol = 1e-12;
  for (const auto& d : out) {
    rep.sup_violations += d.sup_ratio > 1 + tol;
    rep.lipschitz_violations += d.lip_ratio > 1 + tol;
    rep.corrected_violations += d.lip_ratio > 2 + tol;
    rep.max_sup_ratio = std::max(rep.max_sup_ratio, d.sup_ratio);
    rep.max_lipschitz_ratio = std::max(rep.max_lipschitz_ratio, d.lip_ratio);
  }
  return rep;
}

LayerLemmaReport check_layer_lemma(std::size_t trials, double gamma, Eigen::Index max_rows, Eigen::Index max_dim,
                                   std::uint64_t seed) {
  if (gamma < 0 || max_rows < 2 || max_dim < 2) throw InvalidInput("check_layer_lemma: need gamma >= 0, sizes >= 2");
  struct Trial {
    double ratio, row_norm;
  };
  std::vector<Trial> out(trials);
  parallel_for(trials, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, {i});
    const auto rows = static_cast<Eigen::Index>(2 + rng.index(static_cast<std::size_t>(max_rows - 1)));
    const auto dim = static_cast<Eigen::Index>(2 + rng.index(static_cast<std::size_t>(max_dim - 1)));
    Eigen::MatrixXd x(rows, dim);
    for (Eigen::Index r = 0; r < rows; ++r) x.row(r) = rng.ball(dim).transpose();
    const Eigen::MatrixXd w = scale_to(rng.normal_matrix(dim, dim), rng.uniform() * gamma);
    const Eigen::MatrixXd v = scale_to(rng.normal_matrix(dim, dim), rng.uniform());
    Eigen::MatrixXd xb = x;
    xb.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(rows)))) = rng.ball(dim).transpose();
    const Eigen::MatrixXd a = attention_layer(x, w, v);
    const Eigen::MatrixXd ab = attention_layer(xb, w, v);
    const double e = norm_2_1(x - xb);
    const double bound = (2 * gamma + 1) * std::exp(2 * gamma) * e;
    out[i].ratio = bound > 0 ? norm_2_1(a - ab) / bound : 0.0;
    out[i].row_norm = std::max(norm_2_inf(a), norm_2_inf(ab));
  });
  LayerLemmaReport rep;
  rep.trials = trials;
  for (const auto& t : out) {
    rep.diff_violations += t.ratio > 1 + 1e-12;
    rep.norm_violations += t.row_norm > 1 + 1e-12;
    rep.max_ratio = std::max(rep.max_ratio, t.ratio);
    rep.max_row_norm = std::max(rep.max_row_norm, t.row_norm);
  }
  return rep;
}

}  // namespace icl
