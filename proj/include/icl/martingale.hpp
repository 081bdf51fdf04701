#pragma once

// Doob martingales of the empirical task risk, increment and tail audits,
// swap-based stability estimates, and the closed-form generalization bounds.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "icl/algozoo.hpp"
#include "icl/csv.hpp"
#include "icl/rng.hpp"
#include "icl/taskgen.hpp"

namespace icl {

/// Draws one i.i.d. example.
using PairSampler = std::function<Pair(Rng&)>;

/// x ~ N(0, I), y = beta^T x + xi for a linear task.
PairSampler linear_pair_sampler(const TaskSpec& task);

/// Scalar label uniform in [lo, hi] with a one-dimensional zero input.
PairSampler uniform_label_sampler(double lo = 0.0, double hi = 1.0);

struct MartingaleTrace {
  /// X_0 .. X_n: estimates of E[empirical risk | first i examples].
  std::vector<double> values;
  /// Monte-Carlo standard error of each X_i (0 for X_n).
  std::vector<double> std_errors;
  /// Standard error of each increment X_i - X_{i-1}, i = 1..n, from paired
  /// differences under common random numbers.
  std::vector<double> increment_std_errors;
  /// Realized per-step losses l(y_i, f_{S^(i-1)}(x_i)).
  std::vector<double> losses;
  std::size_t mc_reps = 0;

  std::size_t length() const { return values.empty() ? 0 : values.size() - 1; }
  /// (1/n) sum of realized losses; equals values.back() exactly.
  double realized_risk() const;
};

/// Fixes one realized sequence and, for each i, averages the empirical risk
/// over mc_reps fresh suffixes. Each replica draws one full fresh sequence
/// and reuses it at every i, so neighbouring estimates share randomness.
MartingaleTrace doob_trace(const InContextAlgorithm& alg, const PairSampler& sampler, std::size_t n,
                           std::size_t mc_reps, Rng& rng, LossKind loss = LossKind::Clipped);

/// Linear-task convenience overload.
MartingaleTrace doob_trace(const InContextAlgorithm& alg, const TaskSpec& task, std::size_t n,
                           std::size_t mc_reps, Rng& rng, LossKind loss = LossKind::Clipped);

/// Sum of n independent +-B/n steps starting at 0 (increments known exactly).
MartingaleTrace coin_martingale(std::size_t n, double B, Rng& rng);

/// (B + K log n) / n.
double increment_bound(std::size_t n, double B, double K);

struct IncrementAudit {
  double bound = 0.0;
  double max_increment = 0.0;
  /// Steps with |X_i - X_{i-1}| > bound + bands * se_i.
  std::size_t violations = 0;
  std::size_t steps = 0;
};

IncrementAudit audit_increments(const MartingaleTrace& trace, double B, double K, double bands = 3.0);

/// 2 exp(-n t^2 / (2 (B + K log n)^2)).
double azuma_tail_bound(std::size_t n, double B, double K, double t);

struct TailRow {
  double t = 0.0;
  double empirical = 0.0;  // fraction of traces with |X_n - X_0| >= t
  double bound = 0.0;
  double margin = 0.0;     // bound - empirical
};

struct TailCheck {
  std::vector<TailRow> rows;
  std::size_t traces = 0;
  bool dominated() const;
  CsvTable csv() const;
};

TailCheck azuma_tail_check(std::span<const MartingaleTrace> traces, double B, double K,
                           const std::vector<double>& t_grid);

/// Traces as CSV rows (trace, i, value, std_error).
CsvTable traces_csv(std::span<const MartingaleTrace> traces);

// ---------------------------------------------------------------------------

struct StabilityEstimate {
  std::vector<std::size_t> m;
  std::vector<double> change;     // mean |expected-loss change| per m
  std::vector<double> std_error;
  double k_hat = 0.0;             // mean over the grid of change * m
  std::string protocol = "first example (x, f(x)) -> (x', -f(x')), fresh queries shared";

  CsvTable csv() const;
};

/// For each m, draws a task and a length-m prefix, replaces its first example
/// with (x', -beta^T x'), and measures the change in mean loss over
/// `queries` fresh test points shared by both prefixes.
StabilityEstimate estimate_stability(const InContextAlgorithm& alg, const LinearTaskDistribution& dist,
                                     const std::vector<std::size_t>& m_grid, std::size_t trials,
                                     std::uint64_t seed, LossKind loss = LossKind::Squared,
                                     std::size_t queries = 16);

// ---------------------------------------------------------------------------
// Bound calculators. All logs are natural; c is the unspecified absolute
// constant of the concentration step (default 1).

/// log N(eps) = dim * log(1 + scale * diam / eps).
struct CoveringModel {
  double dim = 0.0;
  double scale = 1.0;
  double log_covering(double eps, double diam) const;
};

struct BoundInputs {
  double n = 1;
  double T = 1;
  double M = 1;
  double L = 1.0;
  double B = 1.0;
  double K = 1.0;
  double delta = 0.05;
  double diam = 1.0;
  double c = 1.0;
  CoveringModel cover;

  void validate() const;
};

struct OptimizedBound {
  double eps = 0.0;
  double value = 0.0;
};

/// 200 log-spaced points on [1e-6 diam, diam].
std::vector<double> epsilon_grid(double diam, std::size_t points = 200);

/// 4 L eps + 2 (B + K log n) sqrt((log N(eps) + log(1/delta)) / (c n T)).
double mtl_bound(const BoundInputs& in, double eps);
OptimizedBound mtl_bound_opt(const BoundInputs& in);

/// Dudley form: 8 L eps + (L+ + K log n)/sqrt(c n T) *
/// (int_eps^{diam/2} sqrt(log N(u)) du + diam+ sqrt(log(log(diam/eps)/delta))), x+ = max(x, 1).
double chaining_bound(const BoundInputs& in, double eps);

/// int_a^b sqrt(log N(u)) du by adaptive Simpson (relative tolerance 1e-8).
double entropy_integral(const CoveringModel& cover, double diam, double a, double b);

/// mtl_bound with T replaced by T * M.
double multi_sequence_bound(const BoundInputs& in, double eps);
OptimizedBound multi_sequence_bound_opt(const BoundInputs& in);

/// min over eps of 4 L eps + B sqrt(2 log(N(eps)/delta) / T).
OptimizedBound transfer_bound(double T, double B, double L, double delta, const CoveringModel& cover,
                              double diam = 1.0);

/// R_mtl / nu + 2 eps.
double diversity_transfer_bound(double r_mtl, double nu, double eps);

/// 8 L R_n + 4 B sqrt(log(1/delta) / n).
double erm_risk_bound(double rademacher, double n, double B, double L, double delta);

/// Bound sweep rows (n, T, M, eps, value, variant) for every combination.
CsvTable bound_sweep(const BoundInputs& base, const std::vector<double>& ns, const std::vector<double>& Ts,
                     const std::vector<double>& Ms);

/// Generic adaptive Simpson quadrature on [a, b].
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double rel_tol = 1e-8,
                        int max_depth = 50);

}  // namespace icl
