#pragma once

// Seeded generators for the synthetic task distributions: linear regression
// tasks with a Gaussian (or spherical) prior on the weight vector, and
// linear dynamical systems normalized to a target spectral radius.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "icl/rng.hpp"

namespace icl {

enum class TaskKind { Linear, Lds };
enum class ObservationMode { Full, Partial };

std::string to_string(TaskKind k);
std::string to_string(ObservationMode m);

struct TaskSpec {
  TaskKind kind = TaskKind::Linear;
  // linear
  Eigen::VectorXd beta;
  Eigen::MatrixXd task_cov;
  double noise_std = 0.0;
  // lds
  Eigen::MatrixXd A;
  Eigen::MatrixXd C;
  double spectral_radius = 0.0;
  ObservationMode observe = ObservationMode::Full;

  /// Input dimension of emitted pairs (d for linear, r or d for lds).
  Eigen::Index input_dim() const;
  Eigen::Index state_dim() const { return kind == TaskKind::Lds ? A.rows() : beta.size(); }
  Eigen::Index obs_dim() const;
  /// Observation of a latent state (identity in full mode).
  Eigen::VectorXd observe_state(const Eigen::VectorXd& s) const;
};

struct Pair {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

/// An ordered task sequence. For linear tasks pairs are i.i.d. with
/// noise[i] = xi_i; for trajectories pair i is (obs(s_i), obs(s_{i+1})),
/// states holds s_0..s_n and noise[i] = w_{i+1}.
struct PromptSequence {
  TaskKind kind = TaskKind::Linear;
  std::size_t task_index = 0;
  std::vector<Pair> pairs;
  std::vector<Eigen::VectorXd> noise;
  std::vector<Eigen::VectorXd> states;

  std::size_t size() const { return pairs.size(); }
};

struct MetaDataset {
  std::uint64_t seed = 0;
  std::vector<TaskSpec> tasks;
  /// sequences[t][m]: M sequences per task, all of identical length n.
  std::vector<std::vector<PromptSequence>> sequences;

  std::size_t num_tasks() const { return tasks.size(); }
  std::size_t sequences_per_task() const { return sequences.empty() ? 0 : sequences.front().size(); }
  std::size_t length() const;
};

/// beta ~ N(0, cov).
TaskSpec sample_linear_task(Eigen::Index d, const Eigen::MatrixXd& cov, double noise_std, Rng& rng);

/// beta uniform on the unit sphere; task_cov records the implied I/d.
TaskSpec sample_sphere_task(Eigen::Index d, double noise_std, Rng& rng);

/// x_i ~ N(0, I_d), y_i = beta^T x_i + xi_i with xi_i ~ N(0, sigma^2).
PromptSequence sample_prompt(const TaskSpec& task, std::size_t n, Rng& rng);

/// A, C with i.i.d. N(0,1) entries; A rescaled to the target spectral radius.
TaskSpec sample_lds_task(Eigen::Index state_dim, Eigen::Index obs_dim, double spectral_radius,
                         Rng& rng, double noise_std = 1.0,
                         ObservationMode mode = ObservationMode::Full);

/// A * target / rho(A). Throws for rho(A) == 0.
Eigen::MatrixXd normalize_spectral_radius(const Eigen::MatrixXd& a, double target);

struct RolloutOptions {
  /// Replaces s_0 = 0. Not part of the reference protocol.
  std::optional<Eigen::VectorXd> initial_state;
  /// Truncate each Gaussian noise coordinate to +-truncate_at * sigma (0 = off).
  double truncate_at = 0.0;
};

/// s_i = A s_{i-1} + w_i from s_0 (zero unless overridden), emitting n pairs.
PromptSequence rollout(const TaskSpec& task, std::size_t n, Rng& rng, const RolloutOptions& opt = {});

/// Advance one step of the recursion with an explicit noise vector.
Eigen::VectorXd lds_step(const TaskSpec& task, const Eigen::VectorXd& state, const Eigen::VectorXd& noise);

/// sigma * z with z standard normal per coordinate, resampled while
/// |z| > truncate_at (0 disables truncation).
Eigen::VectorXd draw_noise(Eigen::Index d, double sigma, double truncate_at, Rng& rng);

/// Trajectory driven by an explicit noise sequence w_1..w_n from s_0.
PromptSequence rollout_with_noise(const TaskSpec& task, const Eigen::VectorXd& initial_state,
                                  const std::vector<Eigen::VectorXd>& noise);

/// Rebuild pairs/states from the stored noise and first state; true when the
/// result is bit-identical to the stored sequence.
bool replay_matches(const TaskSpec& task, const PromptSequence& seq);

// ---------------------------------------------------------------------------
// Task distributions (descriptors used by the evaluation harness and CLI).

enum class BetaLaw { Gaussian, Sphere };

struct LinearTaskDistribution {
  Eigen::Index dim = 1;
  Eigen::MatrixXd cov;  // empty => identity
  double noise_std = 0.0;
  BetaLaw law = BetaLaw::Gaussian;
  /// >0: beta restricted to a uniformly random support of this size.
  Eigen::Index sparsity = 0;

  TaskSpec sample(Rng& rng) const;
  Eigen::MatrixXd covariance() const;
  std::string id() const;
};

struct LdsTaskDistribution {
  Eigen::Index state_dim = 1;
  Eigen::Index obs_dim = 1;
  double spectral_radius = 0.9;
  double noise_std = 1.0;
  ObservationMode mode = ObservationMode::Full;

  TaskSpec sample(Rng& rng) const;
  std::string id() const;
};

using TaskDistribution = std::variant<LinearTaskDistribution, LdsTaskDistribution>;

TaskSpec sample_task(const TaskDistribution& dist, Rng& rng);
PromptSequence sample_sequence(const TaskSpec& task, std::size_t n, Rng& rng);
std::string distribution_id(const TaskDistribution& dist);

/// diag(1, 1/4, ..., 1/d^2).
Eigen::MatrixXd harmonic_square_cov(Eigen::Index d);

/// T tasks x M sequences of length n. Task t uses substream (seed, t) and
/// sequence (t, m) uses substream (seed, t, m + 1).
MetaDataset sample_meta_dataset(const TaskDistribution& dist, std::size_t T, std::size_t M,
                                std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Serialization: manifest.json + one CSV per sequence.

/// Row-major nested arrays.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

nlohmann::json task_to_json(const TaskSpec& task);
TaskSpec task_from_json(const nlohmann::json& j);

/// Columns: i, x0..x{p-1}, y0..y{q-1}, noise0..noise{k-1}. 17 significant digits.
std::string sequence_csv(const PromptSequence& seq);

/// Writes manifest.json and seq_t<t>_m<m>.csv files into dir.
void write_meta_dataset(const MetaDataset& ds, const std::string& dir);

/// Task specs listed in a manifest written by write_meta_dataset.
std::vector<TaskSpec> read_manifest_tasks(const std::string& manifest_path);

}  // namespace icl
