#pragma once

// Exponential stability of noisy dynamics x_{m+1} = f(x_m) + w_{m+1}, the
// trajectory-perturbation sensitivity of in-context predictors, and the
// dynamics-adjusted stability constant.

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "icl/algozoo.hpp"
#include "icl/csv.hpp"
#include "icl/martingale.hpp"
#include "icl/taskgen.hpp"

namespace icl {

using Dynamics = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

Dynamics linear_dynamics(const Eigen::MatrixXd& a);

struct StabilityCert {
  double C_rho = 1.0;
  double rho = 0.5;
  std::size_t trials = 0;
  std::size_t horizon = 0;
  /// max over trials and m of ||D_m|| / (C_rho rho^m ||D_0||).
  double max_violation_ratio = 0.0;
  /// Number of (trial, m) points with ratio > 1 + 1e-9.
  std::size_t violations = 0;
  /// Per-m maximum ratio, m = 0..horizon.
  std::vector<double> envelope;

  bool certified() const { return max_violation_ratio <= 1.0 + 1e-9; }
  CsvTable csv() const;
};

/// Paired rollouts from independent Gaussian x_0, x_0' sharing one noise
/// sequence (Gaussian truncated at 3 noise_std). Draws with x_0 == x_0' are
/// resampled.
StabilityCert certify_exponential_stability(const Dynamics& f, Eigen::Index dim, double C_rho, double rho,
                                            std::size_t trials, std::size_t horizon, double noise_std,
                                            std::uint64_t seed);

/// max_{0 <= m <= horizon} ||A^m|| / rho^m, spectral norms from an SVD.
double exact_c_rho(const Eigen::MatrixXd& a, double rho, std::size_t horizon);

struct DynBoundInputs {
  double K = 1.0;
  double C_rho_bar = 1.0;
  double rho_bar = 0.5;
  double w_bar = 1.0;
  double x_bar = 0.0;
  double n = 1.0;

  void validate() const;
};

/// 2 K C_rho_bar / (1 - rho_bar) * (w_bar + x_bar / sqrt(n)).
double kbar(const DynBoundInputs& in);

/// The multitask bound with K replaced by kbar; n comes from `dyn`.
double dynamic_mtl_bound(const BoundInputs& base, const DynBoundInputs& dyn, double eps);
OptimizedBound dynamic_mtl_bound_opt(const BoundInputs& base, const DynBoundInputs& dyn);

struct SensitivityRow {
  std::size_t m = 0;
  double mean_loss_change = 0.0;     // mean |l - l'|
  double mean_path_change = 0.0;     // mean sum_{i <= m} ||x_i - x_i'||
  double ratio = 0.0;                // mean_loss_change / ((K/m) mean_path_change)
  double max_trial_ratio = 0.0;      // max over trials of the same ratio
  double aggregate_bound = 0.0;      // (K/m) 2 C_rho_bar w_bar / (1 - rho_bar), x_bar for j = 0
  double max_loss_change = 0.0;
};

struct SensitivityProfile {
  std::size_t swap_index = 0;
  double declared_K = 0.0;
  std::vector<SensitivityRow> rows;
  /// Smallest K with |l - l'| <= (K/m) sum ||x_i - x_i'|| on every observation.
  double smallest_consistent_K = 0.0;
  /// Rows whose max_loss_change exceeds aggregate_bound.
  std::size_t aggregate_violations = 0;

  CsvTable csv() const;
};

struct SensitivityOptions {
  std::size_t n = 200;           // trajectory length (pairs)
  std::size_t trials = 200;
  std::size_t m_min = 1;
  double declared_K = 1.0;
  double C_rho_bar = 1.0;
  double rho_bar = 0.5;
  double truncate_at = 3.0;      // noise truncation in units of noise_std
  /// Radius of the initial-state perturbation when swap_index == 0.
  double x_bar = 1.0;
};

/// Replaces noise w_j (or the initial state when j == 0) while sharing every
/// other noise draw, then compares the per-step losses of the two
/// trajectories for prefix lengths m_min..n-1.
SensitivityProfile measure_trajectory_sensitivity(const InContextAlgorithm& alg, const TaskSpec& task,
                                                  std::size_t swap_index, std::uint64_t seed,
                                                  const SensitivityOptions& opt = {});

}  // namespace icl
