#pragma once

// Monte-Carlo risk of in-context algorithms: per-prefix risk curves, the
// empirical multitask risk of a meta-dataset, excess and transfer risk.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "icl/algozoo.hpp"
#include "icl/csv.hpp"
#include "icl/taskgen.hpp"

namespace icl {

enum class TaskMode { FreshTask, FixedTask };
std::string to_string(TaskMode m);

struct RiskCurve {
  std::vector<double> mean;       // m = 0..n-1
  std::vector<double> std_error;
  std::string alg_id;
  std::string dist_id;
  LossKind loss = LossKind::Squared;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  /// reps x n per-replica losses; replicas with equal (seed, r) share tasks
  /// and prompts across algorithms, so columns can be compared pairwise.
  Eigen::MatrixXd samples;

  std::size_t length() const { return mean.size(); }
  /// Mean over prefix lengths of the per-replica losses, with its stderr.
  double averaged() const;
  double averaged_std_error() const;
  /// Rows (m, mean, stderr, alg_id, dist_id, loss_kind, reps, seed).
  void append_to(CsvTable& table) const;
};

CsvTable risk_curve_table();

/// Builds the algorithm for one replica (e.g. with a freshly drawn source table).
using AlgorithmFactory = std::function<AlgorithmPtr(Rng&)>;

struct RiskCurveOptions {
  std::size_t n = 10;
  std::size_t reps = 100;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::Squared;
  TaskMode mode = TaskMode::FreshTask;
};

/// Replica r draws its task from substream (seed, r, 0) (fixed-task mode: one
/// task from (seed, 2^64-1) shared by all replicas), its prompt of length n
/// from the same stream, and the algorithm from (seed, r, 1). Loss at m is
/// for predicting pair m from pairs 0..m-1.
RiskCurve risk_curve(const InContextAlgorithm& alg, const TaskDistribution& dist, const RiskCurveOptions& opt);
RiskCurve risk_curve(const AlgorithmFactory& factory, const TaskDistribution& dist, const RiskCurveOptions& opt);

struct PairedDifference {
  std::vector<double> mean;       // a - b per m
  std::vector<double> std_error;
};

/// Per-m difference of two curves computed with the same seed and reps.
PairedDifference paired_difference(const RiskCurve& a, const RiskCurve& b);

/// (1/(T M n)) sum over tasks, sequences and positions of the loss of
/// predicting pair i from pairs 0..i-1.
double empirical_mtl_risk(const InContextAlgorithm& alg, const MetaDataset& data, LossKind loss = LossKind::Squared);

struct ScalarEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Prefix-averaged risk of alg minus that of oracle, paired by replica.
ScalarEstimate excess_mtl_risk(const InContextAlgorithm& alg, const InContextAlgorithm& oracle,
                               const TaskDistribution& dist, const RiskCurveOptions& opt);

struct TransferRisk {
  RiskCurve curve;          // per-m risk on unseen tasks
  ScalarEstimate averaged;  // mean over m = 0..n-1
};

/// Risk on target tasks drawn independently of any source table the
/// algorithm holds (the factory draws its table on a separate substream).
TransferRisk transfer_risk(const AlgorithmFactory& factory, const TaskDistribution& target,
                           const RiskCurveOptions& opt);
TransferRisk transfer_risk(const InContextAlgorithm& alg, const TaskDistribution& target,
                           const RiskCurveOptions& opt);

/// Source betas t = 0..T-1 drawn from substreams of rng.
std::vector<Eigen::VectorXd> sample_source_betas(const LinearTaskDistribution& dist, std::size_t T, Rng& rng);

/// `count` fresh-task prompts of length n; prompt r uses substream (seed, r).
std::vector<PromptSequence> sample_sequences(const TaskDistribution& dist, std::size_t count, std::size_t n,
                                             std::uint64_t seed);

struct RidgeBestCurve {
  RidgeGridResult selection;   // computed on the selection batch
  RiskCurve curve;             // evaluated on an independent batch
};

/// Picks lambda per m on `reps` prompts from select_seed, then evaluates
/// ridge(best_lambda[m]) at each m on the curve batch of opt.seed.
RidgeBestCurve ridge_best_curve(const LinearTaskDistribution& dist, const std::vector<double>& grid,
                                std::uint64_t select_seed, const RiskCurveOptions& opt);

struct SelectionAccuracy {
  std::size_t trials = 0;
  std::size_t correct = 0;
  double rate() const { return trials ? static_cast<double>(correct) / static_cast<double>(trials) : 0.0; }
};

/// Per trial: a fresh table of T source betas, a prompt of length n from a
/// uniformly chosen source, and whether greedy selection recovers it.
SelectionAccuracy greedy_selection_accuracy(const LinearTaskDistribution& dist, std::size_t T, std::size_t n,
                                            std::size_t trials, std::uint64_t seed);

struct BucketRisk {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double mean = 0.0;
  double std_error = 0.0;
};

/// Greedy transfer risk (prefix-averaged) grouped by the distance from the
/// target beta to its nearest source. Buckets are [edges[k], edges[k+1]).
std::vector<BucketRisk> greedy_transfer_by_distance(const std::vector<Eigen::VectorXd>& sources,
                                                    const LinearTaskDistribution& target, std::size_t n,
                                                    std::size_t reps, std::uint64_t seed,
                                                    const std::vector<double>& edges);

}  // namespace icl
