#include "icl/riskeval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "icl/errors.hpp"
#include "icl/parallel.hpp"

namespace icl {

namespace {

constexpr std::uint64_t kFixedTaskStream = std::numeric_limits<std::uint64_t>::max();

ScalarEstimate estimate(const Eigen::VectorXd& v) {
  ScalarEstimate e;
  const auto k = static_cast<double>(v.size());
  if (v.size() == 0) return e;
  e.value = v.mean();
  if (v.size() > 1) e.std_error = std::sqrt((v.array() - e.value).square().sum() / (k - 1.0) / k);
  return e;
}

void summarize(RiskCurve& c) {
  const Eigen::Index n = c.samples.cols();
  c.mean.resize(static_cast<std::size_t>(n));
  c.std_error.resize(static_cast<std::size_t>(n));
  for (Eigen::Index m = 0; m < n; ++m) {
    const auto e = estimate(c.samples.col(m));
    c.mean[static_cast<std::size_t>(m)] = e.value;
    c.std_error[static_cast<std::size_t>(m)] = e.std_error;
  }
}

RiskCurve run_curve(const std::function<AlgorithmPtr(std::size_t, Rng&)>& make, const TaskDistribution& dist,
                    const RiskCurveOptions& opt) {
  if (opt.n == 0) throw InvalidInput("risk_curve: n must be >= 1");
  if (opt.reps < 2) throw InvalidInput("risk_curve: reps must be >= 2");
  RiskCurve curve;
  curve.dist_id = distribution_id(dist);
  curve.loss = opt.loss;
  curve.reps = opt.reps;
  curve.seed = opt.seed;
  curve.samples.resize(static_cast<Eigen::Index>(opt.reps), static_cast<Eigen::Index>(opt.n));

  TaskSpec fixed;
  if (opt.mode == TaskMode::FixedTask) {
    Rng rng = Rng::stream(opt.seed, {kFixedTaskStream});
    fixed = sample_task(dist, rng);
  }
  std::vector<std::string> ids(opt.reps);
  parallel_for(opt.reps, [&](std::size_t r) {
    Rng task_rng = Rng::stream(opt.seed, {r, 0});
    Rng alg_rng = Rng::stream(opt.seed, {r, 1});
    const TaskSpec task = opt.mode == TaskMode::FixedTask ? fixed : sample_task(dist, task_rng);
    const PromptSequence seq = sample_sequence(task, opt.n, task_rng);
    const AlgorithmPtr alg = make(r, alg_rng);
    if (r == 0) ids[0] = alg->id();
    const PrefixView all(seq.pairs);
    for (std::size_t m = 0; m < opt.n; ++m)
      curve.samples(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(m)) =
          loss(opt.loss, all[m].y, alg->predict(all.first(m), all[m].x));
  });
  curve.alg_id = ids[0];
  summarize(curve);
  return curve;
}

}  // namespace

std::string to_string(TaskMode m) { return m == TaskMode::FreshTask ? "fresh" : "fixed"; }

double RiskCurve::averaged() const { return estimate(samples.rowwise().mean()).value; }

double RiskCurve::averaged_std_error() const { return estimate(samples.rowwise().mean()).std_error; }

CsvTable risk_curve_table() {
  return CsvTable("riskcurve", {"m", "mean", "stderr", "alg_id", "dist_id", "loss_kind", "reps", "seed"});
}

void RiskCurve::append_to(CsvTable& table) const {
  for (std::size_t m = 0; m < mean.size(); ++m)
    table.add({m, mean[m], std_error[m], alg_id, dist_id, to_string(loss), reps, seed});
}

RiskCurve risk_curve(const InContextAlgorithm& alg, const TaskDistribution& dist, const RiskCurveOptions& opt) {
  // Non-owning pointer: alg outlives the call.
  const AlgorithmPtr shared(&alg, [](const InContextAlgorithm*) {});
  return run_curve([&](std::size_t, Rng&) { return shared; }, dist, opt);
}

RiskCurve risk_curve(const AlgorithmFactory& factory, const TaskDistribution& dist, const RiskCurveOptions& opt) {
  return run_curve([&](std::size_t, Rng& rng) { return factory(rng); }, dist, opt);
}

PairedDifference paired_difference(const RiskCurve& a, const RiskCurve& b) {
  if (a.samples.rows() != b.samples.rows() || a.samples.cols() != b.samples.cols() || a.seed != b.seed)
    throw InvalidInput("paired_difference: curves must share seed, reps and length");
  PairedDifference d;
  const Eigen::MatrixXd diff = a.samples - b.samples;
  for (Eigen::Index m = 0; m < diff.cols(); ++m) {
    const auto e = estimate(diff.col(m));
    d.mean.push_back(e.value);
    d.std_error.push_back(e.std_error);
  }
  return d;
}

double empirical_mtl_risk(const InContextAlgorithm& alg, const MetaDataset& data, LossKind loss_kind) {
  if (data.sequences.empty() || data.sequences.front().empty())
    throw InvalidInput("empirical_mtl_risk: dataset is empty");
  const std::size_t T = data.sequences.size();
  std::vector<double> per_task(T, 0.0);
  parallel_for(T, [&](std::size_t t) {
    double acc = 0.0;
    for (const auto& seq : data.sequences[t]) {
      const PrefixView all(seq.pairs);
      double s = 0.0;
      for (std::size_t i = 0; i < all.size(); ++i) s += loss(loss_kind, all[i].y, alg.predict(all.first(i), all[i].x));
      acc += s / static_cast<double>(all.size());
    }
    per_task[t] = acc / static_cast<double>(data.sequences[t].size());
  });
  double total = 0.0;
  for (double v : per_task) total += v;
  return total / static_cast<double>(T);
}

ScalarEstimate excess_mtl_risk(const InContextAlgorithm& alg, const InContextAlgorithm& oracle,
                               const TaskDistribution& dist, const RiskCurveOptions& opt) {
  const RiskCurve a = risk_curve(alg, dist, opt);
  const RiskCurve b = risk_curve(oracle, dist, opt);
  return estimate((a.samples - b.samples).rowwise().mean());
}

TransferRisk transfer_risk(const AlgorithmFactory& factory, const TaskDistribution& target,
                           const RiskCurveOptions& opt) {
  TransferRisk tr;
  tr.curve = risk_curve(factory, target, opt);
  tr.averaged = {tr.curve.averaged(), tr.curve.averaged_std_error()};
  return tr;
}

TransferRisk transfer_risk(const InContextAlgorithm& alg, const TaskDistribution& target,
                           const RiskCurveOptions& opt) {
  TransferRisk tr;
  tr.curve = risk_curve(alg, target, opt);
  tr.averaged = {tr.curve.averaged(), tr.curve.averaged_std_error()};
  return tr;
}

std::vector<Eigen::VectorXd> sample_source_betas(const LinearTaskDistribution& dist, std::size_t T, Rng& rng) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    Rng sub = rng.substream(t);
    out.push_back(dist.sample(sub).beta);
  }
  return out;
}

std::vector<PromptSequence> sample_sequences(const TaskDistribution& dist, std::size_t count, std::size_t n,
                                             std::uint64_t seed) {
  std::vector<PromptSequence> out(count);
  parallel_for(count, [&](std::size_t r) {
    Rng rng = Rng::stream(seed, {r});
    out[r] = sample_sequence(sample_task(dist, rng), n, rng);
  });
  return out;
}

RidgeBestCurve ridge_best_curve(const LinearTaskDistribution& dist, const std::vector<double>& grid,
                                std::uint64_t select_seed, const RiskCurveOptions& opt) {
  if (select_seed == opt.seed) throw InvalidInput("ridge_best_curve: selection and evaluation seeds must differ");
  RidgeBestCurve out;
  out.selection = ridge_grid_best(sample_sequences(dist, opt.reps, opt.n, select_seed), grid);

  std::map<double, RiskCurve> by_lambda;
  for (double lambda : out.selection.best_lambda)
    if (!by_lambda.count(lambda)) by_lambda.emplace(lambda, risk_curve(Ridge(lambda), dist, opt));

  RiskCurve& c = out.curve;
  c = by_lambda.begin()->second;
  c.alg_id = "ridge_best(grid=" + std::to_string(out.selection.grid.size()) + ")";
  for (std::size_t m = 0; m < opt.n; ++m) {
    const RiskCurve& src = by_lambda.at(out.selection.best_lambda[m]);
    c.samples.col(static_cast<Eigen::Index>(m)) = src.samples.col(static_cast<Eigen::Index>(m));
    c.mean[m] = src.mean[m];
    c.std_error[m] = src.std_error[m];
  }
  return out;
}

SelectionAccuracy greedy_selection_accuracy(const LinearTaskDistribution& dist, std::size_t T, std::size_t n,
                                            std::size_t trials, std::uint64_t seed) {
  if (T == 0 || n == 0) throw InvalidInput("greedy_selection_accuracy: need T >= 1 and n >= 1");
  std::vector<char> hit(trials, 0);
  parallel_for(trials, [&](std::size_t k) {
    Rng rng = Rng::stream(seed, {k});
    Rng table_rng = rng.substream(0);
    const GreedyMtl greedy(sample_source_betas(dist, T, table_rng));
    const std::size_t truth = rng.index(T);
    TaskSpec task;
    task.kind = TaskKind::Linear;
    task.beta = greedy.sources()[truth];
    task.noise_std = dist.noise_std;
    const PromptSequence seq = sample_prompt(task, n, rng);
    hit[k] = greedy.select(seq.pairs) == truth;
  });
  SelectionAccuracy acc;
  acc.trials = trials;
  for (char h : hit) acc.correct += static_cast<std::size_t>(h);
  return acc;
}

std::vector<BucketRisk> greedy_transfer_by_distance(const std::vector<Eigen::VectorXd>& sources,
                                                    const LinearTaskDistribution& target, std::size_t n,
                                                    std::size_t reps, std::uint64_t seed,
                                                    const std::vector<double>& edges) {
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()))
    throw InvalidInput("greedy_transfer_by_distance: need at least two ascending bucket edges");
  const GreedyMtl greedy(sources);
  std::vector<double> distance(reps), risk(reps);
  parallel_for(reps, [&](std::size_t r) {
    Rng rng = Rng::stream(seed, {r});
    const TaskSpec task = target.sample(rng);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : sources) best = std::min(best, (b - task.beta).norm());
    const PromptSequence seq = sample_prompt(task, n, rng);
    const PrefixView all(seq.pairs);
    double acc = 0.0;
    for (std::size_t m = 0; m < n; ++m) acc += squared_loss(all[m].y, greedy.predict(all.first(m), all[m].x));
    distance[r] = best;
    risk[r] = acc / static_cast<double>(n);
  });
  std::vector<BucketRisk> out;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    std::vector<double> in;
    for (std::size_t r = 0; r < reps; ++r)
      if (distance[r] >= edges[k] && distance[r] < edges[k + 1]) in.push_back(risk[r]);
    BucketRisk b;
    b.lo = edges[k];
    b.hi = edges[k + 1];
    b.count = in.size();
    const auto e = estimate(Eigen::Map<const Eigen::VectorXd>(in.data(), static_cast<Eigen::Index>(in.size())));
    b.mean = e.value;
    b.std_error = e.std_error;
    out.push_back(b);
  }
  return out;
}

}  // namespace icl
