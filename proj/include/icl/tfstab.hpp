#pragma once

// Normalized multilayer attention: X_(i) = ParallelMLP(softmax(X W X^T) X V),
// output <H, X_(D)>. Weight budgets ||V|| <= 1, ||M|| <= 1, ||W|| <= Gamma/2
// and row norms of H bounded make the output Lipschitz in the prompt.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "icl/csv.hpp"
#include "icl/linalg.hpp"
#include "icl/rng.hpp"
#include "icl/taskgen.hpp"

namespace icl {

/// Numerically stable softmax of a vector (max subtracted before exp).
template <typename Derived>
Vector<typename Derived::Scalar> softmax_row(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() == 0) return Vector<Scalar>();
  const Scalar mx = v.maxCoeff();
  Vector<Scalar> e = (v.array() - mx).exp().matrix();
  return e / e.sum();
}

/// Row-wise softmax.
template <typename Derived>
Matrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& s) {
  Matrix<typename Derived::Scalar> out(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) out.row(i) = softmax_row(s.row(i).transpose()).transpose();
  return out;
}

enum class Activation { Relu, Identity };
std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Head normalization: each row of H bounded by c/(2m-1) (one per token row)
/// or by c/m (one per prompt example).
enum class HeadNorm { PerRow, PerExample };
std::string to_string(HeadNorm h);
HeadNorm head_norm_from_string(const std::string& s);

struct TransformerConfig {
  std::vector<Eigen::MatrixXd> W;               // per layer, d x d
  std::vector<Eigen::MatrixXd> V;               // per layer, d x d
  std::vector<std::vector<Eigen::MatrixXd>> M;  // [layer][token], d x d
  Eigen::MatrixXd H;                            // rows x d
  Activation activation = Activation::Relu;
  double gamma = 1.0;
  double c = 1.0;
  std::size_t prompt_length = 1;  // m
  HeadNorm head_norm = HeadNorm::PerRow;

  std::size_t depth() const { return W.size(); }
  Eigen::Index token_dim() const { return H.cols(); }
  /// 2m - 1 token rows for an m-example prompt.
  Eigen::Index rows() const { return static_cast<Eigen::Index>(2 * prompt_length - 1); }
  double head_row_budget() const;

  nlohmann::json to_json() const;
  static TransformerConfig from_json(const nlohmann::json& j);
};

/// Shape check plus a norm audit; the returned string is empty when every
/// budget holds within tol.
std::string constraint_violation(const TransformerConfig& cfg, double tol = 1e-9);

/// Rescales every matrix exceeding its operator-norm budget and clips H rows.
TransformerConfig project_constraints(TransformerConfig raw, double gamma, double c, std::size_t m);

/// Gaussian weights projected onto the budgets (every matrix ends up on its
/// budget boundary with probability one for d >= 2).
TransformerConfig random_config(std::size_t depth, Eigen::Index token_dim, std::size_t m, double gamma,
                                Rng& rng, Activation act = Activation::Relu, double c = 1.0,
                                HeadNorm head_norm = HeadNorm::PerRow);

/// softmax(X W X^T) X V. Throws ContractError if ||X||_{2,inf} > 1 or ||V|| > 1.
Eigen::MatrixXd attention_layer(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w, const Eigen::MatrixXd& v);

/// Row j -> phi(M_j a_j).
Eigen::MatrixXd parallel_mlp(const Eigen::MatrixXd& a, const std::vector<Eigen::MatrixXd>& m, Activation act);

/// Layer outputs X_(0) .. X_(D).
std::vector<Eigen::MatrixXd> tf_layers(const TransformerConfig& cfg, const Eigen::MatrixXd& prompt);

/// <H, X_(D)>. Throws NumericalError naming the layer on non-finite values.
double tf_forward(const TransformerConfig& cfg, const Eigen::MatrixXd& prompt);

/// Interleaved token rows x_1, y_1, ..., x_{m-1}, y_{m-1}, x_m. Inputs fill the
/// leading coordinates, labels the last one; token_dim must exceed the input
/// dimension. Throws if any row norm exceeds 1.
Eigen::MatrixXd embed_prompt(std::span<const Pair> examples, const Eigen::VectorXd& query, Eigen::Index token_dim);

struct StabilityBound {
  double value = 0.0;
  bool saturated = false;  // value overflowed and was replaced by +inf
};

/// 2c/(2m-1) ((1+Gamma) e^Gamma)^D.
StabilityBound stability_bound(double gamma, std::size_t depth, std::size_t m, double c = 1.0);

/// head_row_budget ((1+Gamma) e^Gamma)^D ||dX||_{2,1}: the per-instance
/// Lipschitz form.
StabilityBound lipschitz_bound(double gamma, std::size_t depth, double head_row_budget, double dx_2_1);

// ---------------------------------------------------------------------------
// Certification

struct CertificationTrial {
  std::size_t trial = 0;
  std::size_t m = 0;
  double gamma = 0.0;
  std::size_t depth = 0;
  double measured = 0.0;   // |TF - TF'|
  double bound = 0.0;      // stability_bound
  double ratio = 0.0;      // measured / bound
  double dx_2_1 = 0.0;     // ||X - X'||_{2,1}
  double lipschitz = 0.0;  // lipschitz_bound for this pair
};

struct CertificationReport {
  std::vector<CertificationTrial> trials;
  std::size_t violations = 0;            // measured > bound
  std::size_t lipschitz_violations = 0;  // measured > lipschitz
  double max_ratio = 0.0;
  double max_lipschitz_ratio = 0.0;

  CsvTable csv() const;
};

struct CertificationOptions {
  std::size_t trials = 100;
  /// Coordinate-ascent steps that try to enlarge |TF - TF'| per trial.
  std::size_t refine_steps = 8;
  double tol = 1e-9;
};

/// Random prompt pairs differing in one example (x_j, y_j), inputs in the
/// unit ball and labels in [-1, 1], evaluated on a fixed config.
CertificationReport certify_stability(const TransformerConfig& cfg, Rng& rng,
                                      const CertificationOptions& opt = {});

struct StabilityGrid {
  std::vector<std::size_t> depths{1, 2, 3};
  std::vector<double> gammas{0.5, 1.0};
  std::vector<std::size_t> ms{2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
  std::size_t trials_per_cell = 12;  // fresh config per trial
  Eigen::Index token_dim = 4;
  Activation activation = Activation::Relu;
  HeadNorm head_norm = HeadNorm::PerRow;
  double c = 1.0;
  std::size_t refine_steps = 8;
};

/// One random config and prompt pair per trial over the full grid, using
/// substream (seed, cell, trial). Deterministic for any thread count.
CertificationReport certify_stability_grid(const StabilityGrid& grid, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Supporting lemmas

struct SoftmaxLemmaReport {
  std::size_t draws = 0;
  std::size_t sup_violations = 0;        // ||sft(v)||_inf > e^{2c}/n
  std::size_t lipschitz_violations = 0;  // ||sft(v)-sft(v+e)||_1 > e^{2c}||e||_1/n
  std::size_t corrected_violations = 0;  // same with factor 2
  double max_sup_ratio = 0.0;
  double max_lipschitz_ratio = 0.0;
};

/// Per draw: c uniform in [c_min, c_max], n uniform in [n_min, n_max], and
/// v, v + e independently uniform in the box [-c, c]^n.
SoftmaxLemmaReport check_softmax_lemma(std::size_t draws, double c_min, double c_max, std::size_t n_min,
                                       std::size_t n_max, std::uint64_t seed);

struct LayerLemmaReport {
  std::size_t trials = 0;
  std::size_t diff_violations = 0;  // ||A - A'||_{2,1} > (2G+1)e^{2G}||E||_{2,1}
  std::size_t norm_violations = 0;  // ||A||_{2,inf} > 1
  double max_ratio = 0.0;
  double max_row_norm = 0.0;
};

/// Per trial: rows in [2, max_rows], dim in [2, max_dim], X with rows in the
/// unit ball, ||W|| uniform in [0, gamma], ||V|| uniform in [0, 1], and one
/// token replaced by another point of the unit ball.
LayerLemmaReport check_layer_lemma(std::size_t trials, double gamma, Eigen::Index max_rows,
                                   Eigen::Index max_dim, std::uint64_t seed);

}  // namespace icl
