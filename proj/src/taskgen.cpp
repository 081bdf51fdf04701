#include "icl/taskgen.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "icl/csv.hpp"
#include "icl/errors.hpp"
#include "icl/linalg.hpp"

namespace icl {

std::string to_string(TaskKind k) { return k == TaskKind::Linear ? "linear" : "lds"; }
std::string to_string(ObservationMode m) { return m == ObservationMode::Full ? "full" : "partial"; }

Eigen::Index TaskSpec::input_dim() const {
  return kind == TaskKind::Linear ? beta.size() : obs_dim();
}

Eigen::Index TaskSpec::obs_dim() const {
  if (kind == TaskKind::Linear) return 1;
  return observe == ObservationMode::Full ? A.rows() : C.rows();
}

Eigen::VectorXd TaskSpec::observe_state(const Eigen::VectorXd& s) const {
  return observe == ObservationMode::Full ? s : Eigen::VectorXd(C * s);
}

std::size_t MetaDataset::length() const {
  if (sequences.empty() || sequences.front().empty()) return 0;
  return sequences.front().front().size();
}

TaskSpec sample_linear_task(Eigen::Index d, const Eigen::MatrixXd& cov, double noise_std, Rng& rng) {
  if (d < 1) throw InvalidInput("sample_linear_task: d must be >= 1");
  if (cov.rows() != d || cov.cols() != d) throw InvalidInput("sample_linear_task: cov must be d x d");
  if (noise_std < 0) throw InvalidInput("sample_linear_task: noise_std must be >= 0");
  const Eigen::MatrixXd l = psd_factor(cov);
  TaskSpec t;
  t.kind = TaskKind::Linear;
  t.beta = l * rng.normal_vector(d);
  t.task_cov = cov;
  t.noise_std = noise_std;
  return t;
}

TaskSpec sample_sphere_task(Eigen::Index d, double noise_std, Rng& rng) {
  if (d < 1) throw InvalidInput("sample_sphere_task: d must be >= 1");
  if (noise_std < 0) throw InvalidInput("sample_sphere_task: noise_std must be >= 0");
  TaskSpec t;
  t.kind = TaskKind::Linear;
  t.beta = rng.unit_sphere(d);
  t.task_cov = Eigen::MatrixXd::Identity(d, d) / static_cast<double>(d);
  t.noise_std = noise_std;
  return t;
}

PromptSequence sample_prompt(const TaskSpec& task, std::size_t n, Rng& rng) {
  if (task.kind != TaskKind::Linear) throw InvalidInput("sample_prompt: task must be linear");
  if (n == 0) throw InvalidInput("sample_prompt: length must be >= 1");
  const Eigen::Index d = task.beta.size();
  PromptSequence seq;
  seq.kind = TaskKind::Linear;
  seq.pairs.reserve(n);
  seq.noise.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd x = rng.normal_vector(d);
    Eigen::VectorXd xi(1);
    xi[0] = task.noise_std * rng.normal();
    Eigen::VectorXd y(1);
    y[0] = task.beta.dot(x) + xi[0];
    seq.pairs.push_back({std::move(x), std::move(y)});
    seq.noise.push_back(std::move(xi));
  }
  return seq;
}

Eigen::MatrixXd normalize_spectral_radius(const Eigen::MatrixXd& a, double target) {
  const double rho = spectral_radius(a);
  if (!(rho > 0)) throw NumericalError("normalize_spectral_radius: matrix has zero spectral radius");
  return a * (target / rho);
}

TaskSpec sample_lds_task(Eigen::Index state_dim, Eigen::Index obs_dim, double spectral_radius,
                         Rng& rng, double noise_std, ObservationMode mode) {
  if (!(spectral_radius > 0 && spectral_radius < 1))
    throw InvalidInput("sample_lds_task: spectral radius must lie in (0, 1)");
  if (state_dim < 1 || obs_dim < 1) throw InvalidInput("sample_lds_task: dimensions must be >= 1");
  if (noise_std < 0) throw InvalidInput("sample_lds_task: noise_std must be >= 0");
  TaskSpec t;
  t.kind = TaskKind::Lds;
  Eigen::MatrixXd a = rng.normal_matrix(state_dim, state_dim);
  while (icl::spectral_radius(a) == 0.0) a = rng.normal_matrix(state_dim, state_dim);
  t.A = normalize_spectral_radius(a, spectral_radius);
  t.C = rng.normal_matrix(obs_dim, state_dim);
  t.spectral_radius = spectral_radius;
  t.noise_std = noise_std;
  t.observe = mode;
  return t;
}

Eigen::VectorXd draw_noise(Eigen::Index d, double sigma, double truncate_at, Rng& rng) {
  Eigen::VectorXd w(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    double z = rng.normal();
    if (truncate_at > 0)
      while (std::abs(z) > truncate_at) z = rng.normal();
    w[k] = sigma * z;
  }
  return w;
}

PromptSequence rollout_with_noise(const TaskSpec& task, const Eigen::VectorXd& initial_state,
                                  const std::vector<Eigen::VectorXd>& noise) {
  if (task.kind != TaskKind::Lds) throw InvalidInput("rollout_with_noise: task must be an lds");
  if (noise.empty()) throw InvalidInput("rollout_with_noise: need at least one noise vector");
  if (initial_state.size() != task.A.rows()) throw InvalidInput("rollout_with_noise: initial state has wrong size");
  PromptSequence seq;
  seq.kind = TaskKind::Lds;
  seq.states.reserve(noise.size() + 1);
  seq.states.push_back(initial_state);
  for (const auto& w : noise) {
    Eigen::VectorXd next = lds_step(task, seq.states.back(), w);
    seq.pairs.push_back({task.observe_state(seq.states.back()), task.observe_state(next)});
    seq.noise.push_back(w);
    seq.states.push_back(std::move(next));
  }
  return seq;
}

Eigen::VectorXd lds_step(const TaskSpec& task, const Eigen::VectorXd& state, const Eigen::VectorXd& noise) {
  return task.A * state + noise;
}

PromptSequence rollout(const TaskSpec& task, std::size_t n, Rng& rng, const RolloutOptions& opt) {
  if (task.kind != TaskKind::Lds) throw InvalidInput("rollout: task must be an lds");
  if (n == 0) throw InvalidInput("rollout: length must be >= 1");
  const Eigen::Index d = task.A.rows();
  PromptSequence seq;
  seq.kind = TaskKind::Lds;
  seq.states.reserve(n + 1);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(d);
  if (opt.initial_state) {
    if (opt.initial_state->size() != d) throw InvalidInput("rollout: initial state has wrong size");
    s = *opt.initial_state;
  }
  seq.states.push_back(s);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd w = draw_noise(d, task.noise_std, opt.truncate_at, rng);
    Eigen::VectorXd next = lds_step(task, seq.states.back(), w);
    seq.pairs.push_back({task.observe_state(seq.states.back()), task.observe_state(next)});
    seq.noise.push_back(std::move(w));
    seq.states.push_back(std::move(next));
  }
  return seq;
}

bool replay_matches(const TaskSpec& task, const PromptSequence& seq) {
  if (task.kind == TaskKind::Linear) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const double y = task.beta.dot(seq.pairs[i].x) + seq.noise[i][0];
      if (y != seq.pairs[i].y[0]) return false;
    }
    return true;
  }
  if (seq.states.size() != seq.size() + 1) return false;
  Eigen::VectorXd s = seq.states.front();
  for (std::size_t i = 0; i < seq.size(); ++i) {
    Eigen::VectorXd next = lds_step(task, s, seq.noise[i]);
    if (next != seq.states[i + 1]) return false;
    if (task.observe_state(s) != seq.pairs[i].x || task.observe_state(next) != seq.pairs[i].y)
      return false;
    s = std::move(next);
  }
  return true;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd LinearTaskDistribution::covariance() const {
  return cov.size() == 0 ? Eigen::MatrixXd::Identity(dim, dim) : cov;
}

TaskSpec LinearTaskDistribution::sample(Rng& rng) const {
  TaskSpec t = law == BetaLaw::Sphere ? sample_sphere_task(dim, noise_std, rng)
                                      : sample_linear_task(dim, covariance(), noise_std, rng);
  if (sparsity > 0 && sparsity < dim) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(dim));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    // Partial Fisher-Yates keeps the first `sparsity` entries as the support.
    for (Eigen::Index i = 0; i < sparsity; ++i) {
      const auto j = i + static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(dim - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    Eigen::VectorXd masked = Eigen::VectorXd::Zero(dim);
    for (Eigen::Index i = 0; i < sparsity; ++i) {
      const auto k = idx[static_cast<std::size_t>(i)];
      masked[k] = t.beta[k];
    }
    t.beta = masked;
  }
  return t;
}

std::string LinearTaskDistribution::id() const {
  std::string s = "linear(d=" + std::to_string(dim) + ",sigma=" + fmt_double(noise_std);
  s += law == BetaLaw::Sphere ? ",beta=sphere" : (cov.size() == 0 ? ",cov=I" : ",cov=custom");
  if (sparsity > 0) s += ",s=" + std::to_string(sparsity);
  return s + ")";
}

TaskSpec LdsTaskDistribution::sample(Rng& rng) const {
  return sample_lds_task(state_dim, obs_dim, spectral_radius, rng, noise_std, mode);
}

std::string LdsTaskDistribution::id() const {
  return "lds(d=" + std::to_string(state_dim) + ",r=" + std::to_string(obs_dim) +
         ",rho=" + fmt_double(spectral_radius) + ",sigma=" + fmt_double(noise_std) +
         ",mode=" + to_string(mode) + ")";
}

TaskSpec sample_task(const TaskDistribution& dist, Rng& rng) {
  return std::visit([&](const auto& d) { return d.sample(rng); }, dist);
}

PromptSequence sample_sequence(const TaskSpec& task, std::size_t n, Rng& rng) {
  return task.kind == TaskKind::Linear ? sample_prompt(task, n, rng) : rollout(task, n, rng);
}

std::string distribution_id(const TaskDistribution& dist) {
  return std::visit([](const auto& d) { return d.id(); }, dist);
}

Eigen::MatrixXd harmonic_square_cov(Eigen::Index d) {
  Eigen::VectorXd diag(d);
  for (Eigen::Index i = 0; i < d; ++i) diag[i] = 1.0 / static_cast<double>((i + 1) * (i + 1));
  return diag.asDiagonal();
}

MetaDataset sample_meta_dataset(const TaskDistribution& dist, std::size_t T, std::size_t M,
                                std::size_t n, std::uint64_t seed) {
  if (T == 0 || M == 0 || n == 0) throw InvalidInput("sample_meta_dataset: T, M, n must be >= 1");
  MetaDataset ds;
  ds.seed = seed;
  ds.tasks.reserve(T);
  ds.sequences.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    Rng task_rng = Rng::stream(seed, {t});
    ds.tasks.push_back(sample_task(dist, task_rng));
    for (std::size_t m = 0; m < M; ++m) {
      Rng seq_rng = Rng::stream(seed, {t, m + 1});
      PromptSequence seq = sample_sequence(ds.tasks.back(), n, seq_rng);
      seq.task_index = t;
      ds.sequences[t].push_back(std::move(seq));
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw InvalidInput("matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.front().size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& r = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(r.size()) != cols) throw InvalidInput("matrix rows have unequal length");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = r.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

nlohmann::json task_to_json(const TaskSpec& task) {
  nlohmann::json j;
  j["kind"] = to_string(task.kind);
  j["noise_std"] = task.noise_std;
  if (task.kind == TaskKind::Linear) {
    j["d"] = task.beta.size();
    j["beta"] = std::vector<double>(task.beta.data(), task.beta.data() + task.beta.size());
    j["task_cov"] = matrix_to_json(task.task_cov);
  } else {
    j["d"] = task.A.rows();
    j["r"] = task.C.rows();
    j["spectral_radius"] = task.spectral_radius;
    j["observe"] = to_string(task.observe);
    j["A"] = matrix_to_json(task.A);
    j["C"] = matrix_to_json(task.C);
  }
  return j;
}

TaskSpec task_from_json(const nlohmann::json& j) {
  TaskSpec t;
  const std::string kind = j.at("kind").get<std::string>();
  t.noise_std = j.at("noise_std").get<double>();
  if (kind == "linear") {
    t.kind = TaskKind::Linear;
    const auto beta = j.at("beta").get<std::vector<double>>();
    t.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    t.task_cov = matrix_from_json(j.at("task_cov"));
  } else if (kind == "lds") {
    t.kind = TaskKind::Lds;
    t.A = matrix_from_json(j.at("A"));
    t.C = matrix_from_json(j.at("C"));
    t.spectral_radius = j.at("spectral_radius").get<double>();
    t.observe = j.at("observe").get<std::string>() == "partial" ? ObservationMode::Partial
                                                                 : ObservationMode::Full;
  } else {
    throw InvalidInput("unknown task kind '" + kind + "'");
  }
  return t;
}

std::string sequence_csv(const PromptSequence& seq) {
  if (seq.pairs.empty()) throw InvalidInput("sequence_csv: empty sequence");
  const auto p = seq.pairs.front().x.size();
  const auto q = seq.pairs.front().y.size();
  const auto k = seq.noise.empty() ? Eigen::Index{0} : seq.noise.front().size();
  std::vector<std::string> cols{"i"};
  for (Eigen::Index a = 0; a < p; ++a) cols.push_back("x" + std::to_string(a));
  for (Eigen::Index a = 0; a < q; ++a) cols.push_back("y" + std::to_string(a));
  for (Eigen::Index a = 0; a < k; ++a) cols.push_back("noise" + std::to_string(a));
  std::string out = "# iclab-csv v" + std::to_string(kCsvSchemaVersion) + " sequence\n";
  for (std::size_t c = 0; c < cols.size(); ++c) out += (c ? "," : "") + cols[c];
  out += '\n';
  for (std::size_t i = 0; i < seq.size(); ++i) {
    out += std::to_string(i);
    for (Eigen::Index a = 0; a < p; ++a) out += "," + fmt_double(seq.pairs[i].x[a]);
    for (Eigen::Index a = 0; a < q; ++a) out += "," + fmt_double(seq.pairs[i].y[a]);
    for (Eigen::Index a = 0; a < k; ++a) out += "," + fmt_double(seq.noise[i][a]);
    out += '\n';
  }
  return out;
}

void write_meta_dataset(const MetaDataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["schema_version"] = kCsvSchemaVersion;
  manifest["seed"] = ds.seed;
  manifest["T"] = ds.num_tasks();
  manifest["M"] = ds.sequences_per_task();
  manifest["n"] = ds.length();
  manifest["csv_columns"] = "i, x0..x{p-1}, y0..y{q-1}, noise0..noise{k-1}";
  nlohmann::json tasks = nlohmann::json::array();
  for (std::size_t t = 0; t < ds.num_tasks(); ++t) {
    nlohmann::json tj = task_to_json(ds.tasks[t]);
    tj["task_id"] = t;
    tj["seed"] = ds.seed;
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t m = 0; m < ds.sequences[t].size(); ++m) {
      const std::string name = "seq_t" + std::to_string(t) + "_m" + std::to_string(m) + ".csv";
      std::ofstream f(std::filesystem::path(dir) / name, std::ios::binary);
      if (!f) throw InvalidInput("cannot write " + name);
      f << sequence_csv(ds.sequences[t][m]);
      files.push_back(name);
    }
    tj["sequences"] = files;
    tasks.push_back(std::move(tj));
  }
  manifest["tasks"] = tasks;
  std::ofstream f(std::filesystem::path(dir) / "manifest.json", std::ios::binary);
  f << manifest.dump(2) << '\n';
}

std::vector<TaskSpec> read_manifest_tasks(const std::string& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw InvalidInput("cannot read manifest '" + manifest_path + "'");
  const auto j = nlohmann::json::parse(f);
  std::vector<TaskSpec> out;
  for (const auto& tj : j.at("tasks")) out.push_back(task_from_json(tj));
  return out;
}

}  // namespace icl
