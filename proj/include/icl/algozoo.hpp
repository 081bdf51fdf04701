#pragma once

// Closed-form in-context baselines behind one interface: an algorithm maps a
// prefix of (x, y) pairs plus a query input to a prediction.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "icl/rng.hpp"
#include "icl/taskgen.hpp"

namespace icl {

using PrefixView = std::span<const Pair>;

class InContextAlgorithm {
 public:
  virtual ~InContextAlgorithm() = default;

  /// Prediction for `query` given the prefix. An empty prefix yields the
  /// prior mean (zero) for every algorithm in this module.
  virtual Eigen::VectorXd predict(PrefixView prefix, const Eigen::VectorXd& query) const = 0;

  /// Kind plus hyperparameters; enough to rebuild the algorithm.
  virtual nlohmann::json identity() const = 0;

  /// Compact label, e.g. "ridge(lambda=0.5)".
  std::string id() const;
};

using AlgorithmPtr = std::shared_ptr<const InContextAlgorithm>;

/// Squared Euclidean prediction error.
double squared_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& prediction);
/// min(squared loss, 1): bounded in [0, 1].
double clipped_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& prediction);

enum class LossKind { Squared, Clipped };
std::string to_string(LossKind k);
double loss(LossKind kind, const Eigen::VectorXd& y, const Eigen::VectorXd& prediction);

/// Stack prefix inputs as rows of X and labels as rows of Y.
Eigen::MatrixXd stack_inputs(PrefixView prefix);
Eigen::MatrixXd stack_labels(PrefixView prefix);

// ---------------------------------------------------------------------------

class ConstantPredictor final : public InContextAlgorithm {
 public:
  explicit ConstantPredictor(double value = 0.0) : value_(value) {}
  Eigen::VectorXd predict(PrefixView prefix, const Eigen::VectorXd& query) const override;
  nlohmann::json identity() const override;

 private:
  double value_;
};

/// Average of the prefix labels.
class RunningMean final : public InContextAlgorithm {
 public:
  Eigen::VectorXd predict(PrefixView prefix, const Eigen::VectorXd& query) const override;
  nlohmann::json identity() const override;
};

/// Repeats the first prefix label forever. Deliberately unstable: changing
/// the first example moves every later prediction by the same amount.
class FirstLabel final : public InContextAlgorithm {
 public:
  Eigen::VectorXd predict(PrefixView prefix, const Eigen::VectorXd& query) const override;
  nlohmann::json identity() const override;
};

/// Minimum-norm least squares (pseudo-inverse when m < d).
class OrdinaryLeastSquares final : public InContextAlgorithm {
 public:
  Eigen::VectorXd predict(PrefixView prefix, const Eigen::VectorXd& query) const override;
  nlohmann::json identity() const override;
  static Eigen::VectorXd fit(PrefixView prefix);
};

/// (X^T X + lambda I)^{-1} X^T y; lambda = 0 falls back to least squares.
class Ridge final : public InContextAlgorithm {
 public:
  explicit Ridge(double lambda);
  Eigen::VectorXd predict(PrefixView prefix, const Eigen::VectorXd& query) const override;
  nlohmann::json identity() const override;
  Eigen::VectorXd fit(PrefixView prefix) const;
  double lambda() const { return lambda_; }

 private:
  double lambda_;
};

/// Bayes posterior mean under beta ~ N(0, Sigma) and noise variance sigma^2:
/// (X^T X + sigma^2 Sigma^{-1})^{-1} X^T y.
///
/// For m <= d the equivalent dual form Sigma X^T (X Sigma X^T + sigma^2 I)^{-1} y
/// is used; it stays defined as sigma^2 -> 0 and for singular Sigma.
class WeightedRidge final : public InContextAlgorithm {
 public:
  WeightedRidge(Eigen::MatrixXd prior_cov, double noise_var);
  Eigen::VectorXd predict(PrefixView prefix, const Eigen::VectorXd& query) const override;
  nlohmann::json identity() const override;
  Eigen::VectorXd fit(PrefixView prefix) const;
  const Eigen::MatrixXd& prior_cov() const { return cov_; }

 private:
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd cov_inv_;
  double noise_var_;
};

/// Weighted ridge with the plug-in prior (1/T) sum_t beta_t beta_t^T.
class EmpiricalCovRidge final : public InContextAlgorithm {
 public:
  EmpiricalCovRidge(const std::vector<Eigen::VectorXd>& source_betas, double noise_var);
  Eigen::VectorXd predict(PrefixView prefix, const Eigen::VectorXd& query) const override;
  nlohmann::json identity() const override;
  const Eigen::MatrixXd& estimated_cov() const { return inner_.prior_cov(); }
  /// True when all source betas were zero and the identity prior was used.
  bool used_identity_fallback() const { return fallback_; }

  static Eigen::MatrixXd empirical_cov(const std::vector<Eigen::VectorXd>& betas);

 private:
  WeightedRidge inner_;
  std::size_t num_sources_;
  bool fallback_;
};

/// Picks the source task with the smallest mean squared prefix residual
/// (lowest index on ties, index 0 for an empty prefix).
class GreedyMtl final : public InContextAlgorithm {
 public:
  explicit GreedyMtl(std::vector<Eigen::VectorXd> source_betas);
  Eigen::VectorXd predict(PrefixView prefix, const Eigen::VectorXd& query) const override;
  nlohmann::json identity() const override;
  std::size_t select(PrefixView prefix) const;
  const std::vector<Eigen::VectorXd>& sources() const { return sources_; }

 private:
  std::vector<Eigen::VectorXd> sources_;
};

/// Autoregressive least squares on trajectory prefixes: fits the map from the
/// last `window` observations (stacked, newest first) to the next observation
/// over every window in the prefix, then applies it to the latest window.
class ArLeastSquares final : public InContextAlgorithm {
 public:
  explicit ArLeastSquares(std::size_t window);
  Eigen::VectorXd predict(PrefixView prefix, const Eigen::VectorXd& query) const override;
  nlohmann::json identity() const override;
  /// Fitted coefficient matrix (obs_dim x window*obs_dim).
  Eigen::MatrixXd fit(PrefixView prefix) const;
  std::size_t window() const { return window_; }

 private:
  std::size_t window_;
};

/// Best s-sparse least-squares fit: exhaustive subset search for d <= 12,
/// orthogonal matching pursuit above.
class SparseErm final : public InContextAlgorithm {
 public:
  explicit SparseErm(std::size_t sparsity);
  Eigen::VectorXd predict(PrefixView prefix, const Eigen::VectorXd& query) const override;
  nlohmann::json identity() const override;
  Eigen::VectorXd fit(PrefixView prefix) const;

  static constexpr Eigen::Index kExhaustiveMaxDim = 12;

 private:
  std::size_t sparsity_;
};

/// Rebuild an algorithm from its identity JSON (source tables included).
AlgorithmPtr algorithm_from_json(const nlohmann::json& identity);

// ---------------------------------------------------------------------------

struct RidgeGridResult {
  std::vector<double> grid;           // ascending
  Eigen::MatrixXd risk;               // grid.size() x n, mean squared loss per prefix length
  Eigen::MatrixXd std_error;          // same shape
  std::vector<double> best_lambda;    // per m
  std::vector<double> best_risk;      // per m
  std::vector<double> best_stderr;    // per m
};

/// For each prefix length m, the lambda in `grid` with the smallest mean
/// squared loss predicting pair m from pairs 0..m-1 across `sequences`.
/// Ties go to the smallest lambda.
RidgeGridResult ridge_grid_best(const std::vector<PromptSequence>& sequences, std::vector<double> grid);

// ---------------------------------------------------------------------------

struct HypothesisClassFamily {
  std::vector<std::string> classes;
  Eigen::MatrixXd risk;          // H x n
  Eigen::MatrixXd approx_error;  // H x n, user supplied
  void validate() const;
  Eigen::Index num_classes() const { return risk.rows(); }
  Eigen::Index length() const { return risk.cols(); }
};

struct ModelSelection {
  Eigen::Index selected = 0;
  double value = 0.0;           // risk + approx_error of the selected class at m
  double averaged_bound = 0.0;  // (1/n) sum_m min_h {risk + approx_error}
  std::vector<Eigen::Index> per_m;
};

/// argmin_h {risk(h,m) + approx_error(h,m)} with ties to the smallest h.
ModelSelection adaptive_model_selection(const HypothesisClassFamily& family, Eigen::Index m);

/// Family of s-sparse ERM classes, risk(h,m) = Monte-Carlo clipped loss of
/// SparseErm(sparsities[h]) at prefix length m on fresh tasks.
HypothesisClassFamily populate_sparse_family(const LinearTaskDistribution& dist,
                                             const std::vector<std::size_t>& sparsities,
                                             std::size_t n, std::size_t reps, std::uint64_t seed);

/// Rows h, columns m.
std::string risk_table_csv(const HypothesisClassFamily& family);

}  // namespace icl
