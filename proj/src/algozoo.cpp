#include "icl/algozoo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "icl/csv.hpp"
#include "icl/errors.hpp"
#include "icl/linalg.hpp"
#include "icl/parallel.hpp"

namespace icl {

namespace {

Eigen::VectorXd scalar(double v) {
  Eigen::VectorXd out(1);
  out[0] = v;
  return out;
}

nlohmann::json vectors_to_json(const std::vector<Eigen::VectorXd>& vs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& v : vs) arr.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  return arr;
}

std::vector<Eigen::VectorXd> vectors_from_json(const nlohmann::json& j) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& row : j) {
    const auto v = row.get<std::vector<double>>();
    out.emplace_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  return out;
}

}  // namespace

std::string InContextAlgorithm::id() const {
  const nlohmann::json j = identity();
  std::string out = j.at("kind").get<std::string>();
  std::string params;
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") continue;
    std::string text;
    if (value.is_number()) {
      text = fmt_double(value.get<double>());
    } else if (value.is_array()) {
      text = "[" + std::to_string(value.size()) + "]";
    } else {
      text = value.dump();
    }
    params += (params.empty() ? "" : ";") + key + "=" + text;
  }
  return params.empty() ? out : out + "(" + params + ")";
}

double squared_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& prediction) {
  return (y - prediction).squaredNorm();
}

double clipped_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& prediction) {
  return std::min(squared_loss(y, prediction), 1.0);
}

std::string to_string(LossKind k) { return k == LossKind::Squared ? "squared" : "clipped"; }

double loss(LossKind kind, const Eigen::VectorXd& y, const Eigen::VectorXd& prediction) {
  return kind == LossKind::Squared ? squared_loss(y, prediction) : clipped_loss(y, prediction);
}

Eigen::MatrixXd stack_inputs(PrefixView prefix) {
  if (prefix.empty()) return {};
  Eigen::MatrixXd x(static_cast<Eigen::Index>(prefix.size()), prefix.front().x.size());
  for (std::size_t i = 0; i < prefix.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = prefix[i].x.transpose();
  return x;
}

Eigen::MatrixXd stack_labels(PrefixView prefix) {
  if (prefix.empty()) return {};
  Eigen::MatrixXd y(static_cast<Eigen::Index>(prefix.size()), prefix.front().y.size());
  for (std::size_t i = 0; i < prefix.size(); ++i) y.row(static_cast<Eigen::Index>(i)) = prefix[i].y.transpose();
  return y;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd ConstantPredictor::predict(PrefixView, const Eigen::VectorXd&) const {
  return scalar(value_);
}

nlohmann::json ConstantPredictor::identity() const { return {{"kind", "constant"}, {"value", value_}}; }

Eigen::VectorXd RunningMean::predict(PrefixView prefix, const Eigen::VectorXd&) const {
  if (prefix.empty()) return scalar(0.0);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(prefix.front().y.size());
  for (const auto& p : prefix) sum += p.y;
  return sum / static_cast<double>(prefix.size());
}

nlohmann::json RunningMean::identity() const { return {{"kind", "running_mean"}}; }

Eigen::VectorXd FirstLabel::predict(PrefixView prefix, const Eigen::VectorXd&) const {
  return prefix.empty() ? scalar(0.0) : prefix.front().y;
}

nlohmann::json FirstLabel::identity() const { return {{"kind", "first_label"}}; }

// ---------------------------------------------------------------------------

Eigen::VectorXd OrdinaryLeastSquares::fit(PrefixView prefix) {
  if (prefix.empty()) return {};
  const Eigen::MatrixXd x = stack_inputs(prefix);
  const Eigen::MatrixXd y = stack_labels(prefix);
  return lstsq_min_norm(x, y.col(0));
}

Eigen::VectorXd OrdinaryLeastSquares::predict(PrefixView prefix, const Eigen::VectorXd& query) const {
  if (prefix.empty()) return scalar(0.0);
  return scalar(fit(prefix).dot(query));
}

nlohmann::json OrdinaryLeastSquares::identity() const { return {{"kind", "ols"}}; }

Ridge::Ridge(double lambda) : lambda_(lambda) {
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw InvalidInput("ridge: lambda must be finite and >= 0");
}

Eigen::VectorXd Ridge::fit(PrefixView prefix) const {
  if (lambda_ == 0.0) return OrdinaryLeastSquares::fit(prefix);
  const Eigen::MatrixXd x = stack_inputs(prefix);
  const Eigen::VectorXd y = stack_labels(prefix).col(0);
  const Eigen::Index m = x.rows();
  const Eigen::Index d = x.cols();
  if (m < d) {
    Eigen::MatrixXd gram = x * x.transpose();
    gram.diagonal().array() += lambda_;
    return x.transpose() * spd_solve(gram, y, "ridge");
  }
  Eigen::MatrixXd normal = x.transpose() * x;
  normal.diagonal().array() += lambda_;
  return spd_solve(normal, x.transpose() * y, "ridge");
}

Eigen::VectorXd Ridge::predict(PrefixView prefix, const Eigen::VectorXd& query) const {
  if (prefix.empty()) return scalar(0.0);
  return scalar(fit(prefix).dot(query));
}

nlohmann::json Ridge::identity() const { return {{"kind", "ridge"}, {"lambda", lambda_}}; }

WeightedRidge::WeightedRidge(Eigen::MatrixXd prior_cov, double noise_var)
    : cov_(std::move(prior_cov)), noise_var_(noise_var) {
  if (cov_.rows() != cov_.cols() || cov_.rows() == 0)
    throw InvalidInput("weighted_ridge: prior covariance must be square and nonempty");
  if (!(noise_var >= 0) || !std::isfinite(noise_var))
    throw InvalidInput("weighted_ridge: noise variance must be finite and >= 0");
  if (noise_var_ > 0)
    cov_inv_ = spd_solve(cov_, Eigen::MatrixXd::Identity(cov_.rows(), cov_.cols()), "weighted_ridge prior");
}

Eigen::VectorXd WeightedRidge::fit(PrefixView prefix) const {
  const Eigen::MatrixXd x = stack_inputs(prefix);
  const Eigen::VectorXd y = stack_labels(prefix).col(0);
  const Eigen::Index m = x.rows();
  const Eigen::Index d = x.cols();
  if (d != cov_.rows()) throw InvalidInput("weighted_ridge: input dimension does not match prior");
  if (m <= d) {
    const Eigen::MatrixXd sx = cov_ * x.transpose();
    Eigen::MatrixXd gram = x * sx;
    gram.diagonal().array() += noise_var_;
    return sx * spd_solve(gram, y, "weighted_ridge");
  }
  Eigen::MatrixXd normal = x.transpose() * x;
  if (noise_var_ > 0) normal += noise_var_ * cov_inv_;
  return spd_solve(normal, x.transpose() * y, "weighted_ridge");
}

Eigen::VectorXd WeightedRidge::predict(PrefixView prefix, const Eigen::VectorXd& query) const {
  if (prefix.empty()) return scalar(0.0);
  return scalar(fit(prefix).dot(query));
}

nlohmann::json WeightedRidge::identity() const {
  nlohmann::json cov = nlohmann::json::array();
  for (Eigen::Index i = 0; i < cov_.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(cov_.cols()));
    for (Eigen::Index j = 0; j < cov_.cols(); ++j) row[static_cast<std::size_t>(j)] = cov_(i, j);
    cov.push_back(row);
  }
  return {{"kind", "weighted_ridge"}, {"noise_var", noise_var_}, {"prior_cov", cov}};
}

Eigen::MatrixXd EmpiricalCovRidge::empirical_cov(const std::vector<Eigen::VectorXd>& betas) {
  if (betas.empty()) throw InvalidInput("empirical_cov_ridge: at least one source beta is required");
  const Eigen::Index d = betas.front().size();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& b : betas) {
    if (b.size() != d) throw InvalidInput("empirical_cov_ridge: source betas differ in dimension");
    cov.noalias() += b * b.transpose();
  }
  return cov / static_cast<double>(betas.size());
}

namespace {

Eigen::MatrixXd plug_in_prior(const std::vector<Eigen::VectorXd>& betas, bool& fallback) {
  Eigen::MatrixXd cov = EmpiricalCovRidge::empirical_cov(betas);
  const Eigen::Index d = cov.rows();
  fallback = cov.trace() == 0.0;
  if (fallback) return Eigen::MatrixXd::Identity(d, d);
  cov.diagonal().array() += 1e-12 * cov.trace() / static_cast<double>(d);
  return cov;
}

}  // namespace

EmpiricalCovRidge::EmpiricalCovRidge(const std::vector<Eigen::VectorXd>& source_betas, double noise_var)
    : inner_(plug_in_prior(source_betas, fallback_), noise_var), num_sources_(source_betas.size()) {}

Eigen::VectorXd EmpiricalCovRidge::predict(PrefixView prefix, const Eigen::VectorXd& query) const {
  return inner_.predict(prefix, query);
}

nlohmann::json EmpiricalCovRidge::identity() const {
  nlohmann::json j = inner_.identity();
  j["kind"] = "empirical_cov_ridge";
  j["num_sources"] = num_sources_;
  j["identity_fallback"] = fallback_;
  return j;
}

GreedyMtl::GreedyMtl(std::vector<Eigen::VectorXd> source_betas) : sources_(std::move(source_betas)) {
  if (sources_.empty()) throw InvalidInput("greedy_mtl: source table must be nonempty");
}

std::size_t GreedyMtl::select(PrefixView prefix) const {
  if (prefix.empty()) return 0;
  const Eigen::MatrixXd x = stack_inputs(prefix);
  const Eigen::VectorXd y = stack_labels(prefix).col(0);
  std::size_t best = 0;
  double best_res = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < sources_.size(); ++t) {
    const double res = (y - x * sources_[t]).squaredNorm() / static_cast<double>(prefix.size());
    if (res < best_res) {
      best_res = res;
      best = t;
    }
  }
  return best;
}

Eigen::VectorXd GreedyMtl::predict(PrefixView prefix, const Eigen::VectorXd& query) const {
  return scalar(sources_[select(prefix)].dot(query));
}

nlohmann::json GreedyMtl::identity() const {
  return {{"kind", "greedy_mtl"}, {"sources", vectors_to_json(sources_)}};
}

// ---------------------------------------------------------------------------

ArLeastSquares::ArLeastSquares(std::size_t window) : window_(window) {
  if (window == 0) throw InvalidInput("ar_ls: window must be >= 1");
}

Eigen::MatrixXd ArLeastSquares::fit(PrefixView prefix) const {
  if (prefix.size() < window_)
    throw InsufficientData("ar_ls: prefix of " + std::to_string(prefix.size() + 1) +
                           " observations is too short for window " + std::to_string(window_));
  const Eigen::Index r = prefix.front().x.size();
  const auto h = static_cast<Eigen::Index>(window_);
  const auto rows = static_cast<Eigen::Index>(prefix.size() - window_ + 1);
  Eigen::MatrixXd inputs(rows, h * r);
  Eigen::MatrixXd targets(rows, prefix.front().y.size());
  for (Eigen::Index k = 0; k < rows; ++k) {
    const std::size_t last = static_cast<std::size_t>(k) + window_ - 1;
    for (Eigen::Index lag = 0; lag < h; ++lag)
      inputs.block(k, lag * r, 1, r) = prefix[last - static_cast<std::size_t>(lag)].x.transpose();
    targets.row(k) = prefix[last].y.transpose();
  }
  return lstsq_min_norm(inputs, targets).transpose();
}

Eigen::VectorXd ArLeastSquares::predict(PrefixView prefix, const Eigen::VectorXd& query) const {
  // No complete window yet: fall back to the zero prior mean.
  if (prefix.size() < window_) return Eigen::VectorXd::Zero(query.size());
  const Eigen::MatrixXd coef = fit(prefix);
  const Eigen::Index r = query.size();
  Eigen::VectorXd stacked(static_cast<Eigen::Index>(window_) * r);
  stacked.head(r) = query;
  for (std::size_t lag = 1; lag < window_; ++lag)
    stacked.segment(static_cast<Eigen::Index>(lag) * r, r) = prefix[prefix.size() - lag].x;
  return coef * stacked;
}

nlohmann::json ArLeastSquares::identity() const { return {{"kind", "ar_ls"}, {"window", window_}}; }

// ---------------------------------------------------------------------------

SparseErm::SparseErm(std::size_t sparsity) : sparsity_(sparsity) {
  if (sparsity == 0) throw InvalidInput("sparse_erm: sparsity must be >= 1");
}

namespace {

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = x.col(cols[k]);
  return out;
}

}  // namespace

Eigen::VectorXd SparseErm::fit(PrefixView prefix) const {
  const Eigen::MatrixXd x = stack_inputs(prefix);
  const Eigen::VectorXd y = stack_labels(prefix).col(0);
  const Eigen::Index d = x.cols();
  const auto s = static_cast<Eigen::Index>(sparsity_);
  if (s >= d) return lstsq_min_norm(x, y);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  if (d <= kExhaustiveMaxDim) {
    // Lexicographic subsets; the first minimum wins.
    std::vector<bool> mask(static_cast<std::size_t>(d), false);
    std::fill(mask.begin(), mask.begin() + s, true);
    double best = std::numeric_limits<double>::infinity();
    do {
      std::vector<Eigen::Index> cols;
      for (Eigen::Index j = 0; j < d; ++j)
        if (mask[static_cast<std::size_t>(j)]) cols.push_back(j);
      const Eigen::MatrixXd xs = select_columns(x, cols);
      const Eigen::VectorXd coef = lstsq_min_norm(xs, y);
      const double res = (y - xs * coef).squaredNorm();
      if (std::isinf(best) || res < best - 1e-14 * std::max(1.0, best)) {
        best = res;
        beta.setZero();
        for (std::size_t k = 0; k < cols.size(); ++k) beta[cols[k]] = coef[static_cast<Eigen::Index>(k)];
      }
    } while (std::prev_permutation(mask.begin(), mask.end()));
    return beta;
  }

  // Orthogonal matching pursuit.
  std::vector<Eigen::Index> support;
  Eigen::VectorXd residual = y;
  Eigen::VectorXd coef;
  for (Eigen::Index step = 0; step < s; ++step) {
    const Eigen::VectorXd corr = (x.transpose() * residual).cwiseAbs();
    Eigen::Index pick = -1;
    double best = -1.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (std::find(support.begin(), support.end(), j) != support.end()) continue;
      if (corr[j] > best) {
        best = corr[j];
        pick = j;
      }
    }
    support.push_back(pick);
    const Eigen::MatrixXd xs = select_columns(x, support);
    coef = lstsq_min_norm(xs, y);
    residual = y - xs * coef;
  }
  for (std::size_t k = 0; k < support.size(); ++k) beta[support[k]] = coef[static_cast<Eigen::Index>(k)];
  return beta;
}

Eigen::VectorXd SparseErm::predict(PrefixView prefix, const Eigen::VectorXd& query) const {
  if (prefix.empty()) return scalar(0.0);
  return scalar(fit(prefix).dot(query));
}

nlohmann::json SparseErm::identity() const { return {{"kind", "sparse_erm"}, {"sparsity", sparsity_}}; }

// ---------------------------------------------------------------------------

AlgorithmPtr algorithm_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") return std::make_shared<ConstantPredictor>(j.value("value", 0.0));
  if (kind == "running_mean") return std::make_shared<RunningMean>();
  if (kind == "first_label") return std::make_shared<FirstLabel>();
  if (kind == "ols") return std::make_shared<OrdinaryLeastSquares>();
  if (kind == "ridge") return std::make_shared<Ridge>(j.at("lambda").get<double>());
  if (kind == "weighted_ridge") {
    const auto rows = j.at("prior_cov").get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd cov(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) throw InvalidInput("weighted_ridge: prior_cov must be square");
      for (std::size_t k = 0; k < rows.size(); ++k)
        cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
    return std::make_shared<WeightedRidge>(cov, j.at("noise_var").get<double>());
  }
  if (kind == "empirical_cov_ridge")
    return std::make_shared<EmpiricalCovRidge>(vectors_from_json(j.at("sources")),
                                               j.at("noise_var").get<double>());
  if (kind == "greedy_mtl") return std::make_shared<GreedyMtl>(vectors_from_json(j.at("sources")));
  if (kind == "ar_ls") return std::make_shared<ArLeastSquares>(j.at("window").get<std::size_t>());
  if (kind == "sparse_erm") return std::make_shared<SparseErm>(j.at("sparsity").get<std::size_t>());
  throw InvalidInput("unknown algorithm kind '" + kind + "'");
}

// ---------------------------------------------------------------------------

RidgeGridResult ridge_grid_best(const std::vector<PromptSequence>& sequences, std::vector<double> grid) {
  if (grid.empty()) throw InvalidInput("ridge_grid_best: grid must be nonempty");
  if (sequences.empty()) throw InvalidInput("ridge_grid_best: no sequences");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const std::size_t n = sequences.front().size();
  for (const auto& s : sequences)
    if (s.size() != n) throw InvalidInput("ridge_grid_best: sequences must share one length");

  const auto g = static_cast<Eigen::Index>(grid.size());
  const auto cols = static_cast<Eigen::Index>(n);
  const double reps = static_cast<double>(sequences.size());
  RidgeGridResult out;
  out.grid = grid;
  out.risk = Eigen::MatrixXd::Zero(g, cols);
  out.std_error = Eigen::MatrixXd::Zero(g, cols);

  std::vector<Eigen::MatrixXd> per_seq(sequences.size());
  parallel_for(sequences.size(), [&](std::size_t r) {
    Eigen::MatrixXd l(g, cols);
    const PrefixView all(sequences[r].pairs);
    for (Eigen::Index k = 0; k < g; ++k) {
      const Ridge alg(grid[static_cast<std::size_t>(k)]);
      for (Eigen::Index m = 0; m < cols; ++m) {
        const auto& target = all[static_cast<std::size_t>(m)];
        l(k, m) = squared_loss(target.y, alg.predict(all.first(static_cast<std::size_t>(m)), target.x));
      }
    }
    per_seq[r] = std::move(l);
  });
  Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(g, cols);
  for (const auto& l : per_seq) {
    out.risk += l;
    sum_sq += l.cwiseProduct(l);
  }
  out.risk /= reps;
  if (reps > 1) {
    const Eigen::MatrixXd var = ((sum_sq / reps - out.risk.cwiseProduct(out.risk)) * (reps / (reps - 1))).cwiseMax(0.0);
    out.std_error = (var / reps).cwiseSqrt();
  }
  for (Eigen::Index m = 0; m < cols; ++m) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < g; ++k)
      if (out.risk(k, m) < out.risk(best, m)) best = k;
    out.best_lambda.push_back(grid[static_cast<std::size_t>(best)]);
    out.best_risk.push_back(out.risk(best, m));
    out.best_stderr.push_back(out.std_error(best, m));
  }
  return out;
}

// ---------------------------------------------------------------------------

void HypothesisClassFamily::validate() const {
  if (risk.rows() == 0 || risk.cols() == 0) throw InvalidInput("hypothesis family: empty risk table");
  if (approx_error.rows() != risk.rows() || approx_error.cols() != risk.cols())
    throw InvalidInput("hypothesis family: risk and approximation tables differ in shape");
  if (!classes.empty() && static_cast<Eigen::Index>(classes.size()) != risk.rows())
    throw InvalidInput("hypothesis family: class list does not match table rows");
  if (!risk.allFinite() || (risk.array() < 0).any() || (risk.array() > 1).any())
    throw InvalidInput("hypothesis family: risk values must lie in [0, 1]");
  if (!approx_error.allFinite() || (approx_error.array() < 0).any())
    throw InvalidInput("hypothesis family: approximation errors must be finite and >= 0");
}

ModelSelection adaptive_model_selection(const HypothesisClassFamily& family, Eigen::Index m) {
  family.validate();
  if (m < 0 || m >= family.length()) throw InvalidInput("adaptive_model_selection: column out of range");
  const Eigen::MatrixXd total = family.risk + family.approx_error;
  ModelSelection out;
  double sum = 0.0;
  for (Eigen::Index col = 0; col < total.cols(); ++col) {
    Eigen::Index best = 0;
    for (Eigen::Index h = 1; h < total.rows(); ++h)
      if (total(h, col) < total(best, col)) best = h;
    out.per_m.push_back(best);
    sum += total(best, col);
  }
  out.selected = out.per_m[static_cast<std::size_t>(m)];
  out.value = total(out.selected, m);
  out.averaged_bound = sum / static_cast<double>(total.cols());
  return out;
}

HypothesisClassFamily populate_sparse_family(const LinearTaskDistribution& dist,
                                             const std::vector<std::size_t>& sparsities,
                                             std::size_t n, std::size_t reps, std::uint64_t seed) {
  if (sparsities.empty() || n == 0 || reps == 0)
    throw InvalidInput("populate_sparse_family: need classes, n >= 1 and reps >= 1");
  const auto h = static_cast<Eigen::Index>(sparsities.size());
  const auto cols = static_cast<Eigen::Index>(n);
  std::vector<Eigen::MatrixXd> per_rep(reps);
  parallel_for(reps, [&](std::size_t r) {
    Rng rng = Rng::stream(seed, {r});
    const TaskSpec task = dist.sample(rng);
    const PromptSequence seq = sample_prompt(task, n, rng);
    const PrefixView all(seq.pairs);
    Eigen::MatrixXd l(h, cols);
    for (Eigen::Index k = 0; k < h; ++k) {
      const SparseErm alg(sparsities[static_cast<std::size_t>(k)]);
      for (Eigen::Index m = 0; m < cols; ++m) {
        const auto& target = all[static_cast<std::size_t>(m)];
        l(k, m) = clipped_loss(target.y, alg.predict(all.first(static_cast<std::size_t>(m)), target.x));
      }
    }
    per_rep[r] = std::move(l);
  });
  HypothesisClassFamily fam;
  fam.risk = Eigen::MatrixXd::Zero(h, cols);
  for (const auto& l : per_rep) fam.risk += l;
  fam.risk /= static_cast<double>(reps);
  fam.approx_error = Eigen::MatrixXd::Zero(h, cols);
  for (auto s : sparsities) fam.classes.push_back("sparse(s=" + std::to_string(s) + ")");
  return fam;
}

std::string risk_table_csv(const HypothesisClassFamily& family) {
  std::vector<std::string> cols{"h", "class"};
  for (Eigen::Index m = 0; m < family.length(); ++m) cols.push_back("m" + std::to_string(m));
  std::string out = "# iclab-csv v" + std::to_string(kCsvSchemaVersion) + " risk_table\n";
  for (std::size_t c = 0; c < cols.size(); ++c) out += (c ? "," : "") + cols[c];
  out += '\n';
  for (Eigen::Index h = 0; h < family.num_classes(); ++h) {
    out += std::to_string(h) + "," +
           (family.classes.empty() ? std::string("h") + std::to_string(h)
                                   : family.classes[static_cast<std::size_t>(h)]);
    for (Eigen::Index m = 0; m < family.length(); ++m) out += "," + fmt_double(family.risk(h, m));
    out += '\n';
  }
  return out;
}

}  // namespace icl
