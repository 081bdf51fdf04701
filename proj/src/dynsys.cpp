#include "icl/dynsys.hpp"

#include <algorithm>
#include <cmath>

#include "icl/errors.hpp"
#include "icl/parallel.hpp"

namespace icl {

Dynamics linear_dynamics(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw InvalidInput("linear_dynamics: matrix must be square");
  return [a](const Eigen::VectorXd& x) -> Eigen::VectorXd { return a * x; };
}

CsvTable StabilityCert::csv() const {
  CsvTable t("certificate", {"m", "max_ratio", "C_rho", "rho", "trials", "certified"});
  for (std::size_t m = 0; m < envelope.size(); ++m) t.add({m, envelope[m], C_rho, rho, trials, certified()});
  return t;
}

StabilityCert certify_exponential_stability(const Dynamics& f, Eigen::Index dim, double C_rho, double rho,
                                            std::size_t trials, std::size_t horizon, double noise_std,
                                            std::uint64_t seed) {
  if (!(rho > 0 && rho < 1)) throw InvalidInput("certify_exponential_stability: rho must lie in (0, 1)");
  if (!(C_rho > 0)) throw InvalidInput("certify_exponential_stability: C_rho must be positive");
  if (dim < 1 || trials == 0) throw InvalidInput("certify_exponential_stability: need dim >= 1 and trials >= 1");

  Eigen::MatrixXd ratios(static_cast<Eigen::Index>(trials), static_cast<Eigen::Index>(horizon + 1));
  parallel_for(trials, [&](std::size_t tr) {
    Rng rng = Rng::stream(seed, {tr});
    Eigen::VectorXd x = rng.normal_vector(dim);
    Eigen::VectorXd xp = rng.normal_vector(dim);
    while ((x - xp).norm() == 0.0) xp = rng.normal_vector(dim);
    const double d0 = (x - xp).norm();
    double envelope = C_rho;
    for (std::size_t m = 0; m <= horizon; ++m) {
      ratios(static_cast<Eigen::Index>(tr), static_cast<Eigen::Index>(m)) = (x - xp).norm() / (envelope * d0);
      const Eigen::VectorXd w = draw_noise(dim, noise_std, 3.0, rng);
      x = f(x) + w;
      xp = f(xp) + w;
      envelope *= rho;
    }
  });

  StabilityCert cert;
  cert.C_rho = C_rho;
  cert.rho = rho;
  cert.trials = trials;
  cert.horizon = horizon;
  cert.envelope.resize(horizon + 1);
  for (std::size_t m = 0; m <= horizon; ++m) {
    const auto col = ratios.col(static_cast<Eigen::Index>(m));
    cert.envelope[m] = col.maxCoeff();
    cert.violations += static_cast<std::size_t>((col.array() > 1.0 + 1e-9).count());
  }
  cert.max_violation_ratio = *std::max_element(cert.envelope.begin(), cert.envelope.end());
  return cert;
}

double exact_c_rho(const Eigen::MatrixXd& a, double rho, std::size_t horizon) {
  if (a.rows() != a.cols()) throw InvalidInput("exact_c_rho: matrix must be square");
  if (!(rho > 0)) throw InvalidInput("exact_c_rho: rho must be positive");
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  double best = 1.0;
  double scale = 1.0;
  for (std::size_t m = 1; m <= horizon; ++m) {
    power = a * power;
    scale *= rho;
    const double sigma = Eigen::JacobiSVD<Eigen::MatrixXd>(power).singularValues()(0);
    best = std::max(best, sigma / scale);
  }
  return best;
}

void DynBoundInputs::validate() const {
  if (!(rho_bar >= 0 && rho_bar < 1)) throw InvalidInput("dynamics bound: rho_bar must lie in [0, 1)");
  if (K < 0 || C_rho_bar < 0 || w_bar < 0 || x_bar < 0)
    throw InvalidInput("dynamics bound: K, C_rho_bar, w_bar, x_bar must be nonnegative");
  if (!(n >= 1)) throw InvalidInput("dynamics bound: n must be >= 1");
}

double kbar(const DynBoundInputs& in) {
  in.validate();
  return 2.0 * in.K * in.C_rho_bar / (1.0 - in.rho_bar) * (in.w_bar + in.x_bar / std::sqrt(in.n));
}

namespace {

BoundInputs with_kbar(const BoundInputs& base, const DynBoundInputs& dyn) {
  if (base.n != dyn.n) throw InvalidInput("dynamic_mtl_bound: sequence length differs between inputs");
  BoundInputs in = base;
  in.K = kbar(dyn);
  return in;
}

}  // namespace

double dynamic_mtl_bound(const BoundInputs& base, const DynBoundInputs& dyn, double eps) {
  return mtl_bound(with_kbar(base, dyn), eps);
}

OptimizedBound dynamic_mtl_bound_opt(const BoundInputs& base, const DynBoundInputs& dyn) {
  return mtl_bound_opt(with_kbar(base, dyn));
}

// ---------------------------------------------------------------------------

CsvTable SensitivityProfile::csv() const {
  CsvTable t("sensitivity", {"m", "swap_index", "declared_K", "mean_loss_change", "mean_path_change", "ratio",
                             "max_trial_ratio", "aggregate_bound", "max_loss_change"});
  for (const auto& r : rows)
    t.add({r.m, swap_index, declared_K, r.mean_loss_change, r.mean_path_change, r.ratio, r.max_trial_ratio,
           r.aggregate_bound, r.max_loss_change});
  return t;
}

SensitivityProfile measure_trajectory_sensitivity(const InContextAlgorithm& alg, const TaskSpec& task,
                                                  std::size_t swap_index, std::uint64_t seed,
                                                  const SensitivityOptions& opt) {
  if (task.kind != TaskKind::Lds) throw InvalidInput("measure_trajectory_sensitivity: task must be an lds");
  if (opt.n < 2 || opt.trials == 0) throw InvalidInput("measure_trajectory_sensitivity: need n >= 2, trials >= 1");
  if (swap_index > opt.n) throw InvalidInput("measure_trajectory_sensitivity: swap index beyond the trajectory");
  if (opt.m_min == 0 || opt.m_min >= opt.n) throw InvalidInput("measure_trajectory_sensitivity: need 1 <= m_min < n");
  if (!(opt.rho_bar >= 0 && opt.rho_bar < 1)) throw InvalidInput("measure_trajectory_sensitivity: rho_bar in [0, 1)");

  const Eigen::Index d = task.A.rows();
  const std::size_t count = opt.n - opt.m_min;
  Eigen::MatrixXd loss_change(static_cast<Eigen::Index>(opt.trials), static_cast<Eigen::Index>(count));
  Eigen::MatrixXd path_change(static_cast<Eigen::Index>(opt.trials), static_cast<Eigen::Index>(count));

  parallel_for(opt.trials, [&](std::size_t tr) {
    Rng rng = Rng::stream(seed, {tr});
    std::vector<Eigen::VectorXd> noise;
    noise.reserve(opt.n);
    for (std::size_t i = 0; i < opt.n; ++i) noise.push_back(draw_noise(d, task.noise_std, opt.truncate_at, rng));
    std::vector<Eigen::VectorXd> noise_alt = noise;
    Eigen::VectorXd s0 = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd s0_alt = s0;
    if (swap_index == 0) {
      s0_alt = rng.ball(d, opt.x_bar);
    } else {
      noise_alt[swap_index - 1] = draw_noise(d, task.noise_std, opt.truncate_at, rng);
    }
    const PromptSequence a = rollout_with_noise(task, s0, noise);
    const PromptSequence b = rollout_with_noise(task, s0_alt, noise_alt);

    double path = 0.0;
    for (std::size_t i = 0; i < opt.m_min; ++i) path += (a.pairs[i].x - b.pairs[i].x).norm();
    for (std::size_t m = opt.m_min; m < opt.n; ++m) {
      path += (a.pairs[m].x - b.pairs[m].x).norm();
      const PrefixView pa(a.pairs.data(), m), pb(b.pairs.data(), m);
      const double la = squared_loss(a.pairs[m].y, alg.predict(pa, a.pairs[m].x));
      const double lb = squared_loss(b.pairs[m].y, alg.predict(pb, b.pairs[m].x));
      const auto r = static_cast<Eigen::Index>(tr);
      const auto c = static_cast<Eigen::Index>(m - opt.m_min);
      loss_change(r, c) = std::abs(la - lb);
      path_change(r, c) = path;
    }
  });

  SensitivityProfile prof;
  prof.swap_index = swap_index;
  prof.declared_K = opt.declared_K;
  const double w_bar = opt.truncate_at * task.noise_std * std::sqrt(static_cast<double>(d));
  const double radius = swap_index == 0 ? opt.x_bar : w_bar;
  for (std::size_t k = 0; k < count; ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    SensitivityRow row;
    row.m = opt.m_min + k;
    const double per_m = opt.declared_K / static_cast<double>(row.m);
    row.mean_loss_change = loss_change.col(c).mean();
    row.mean_path_change = path_change.col(c).mean();
    row.max_loss_change = loss_change.col(c).maxCoeff();
    row.ratio = row.mean_path_change > 0 && per_m > 0 ? row.mean_loss_change / (per_m * row.mean_path_change) : 0.0;
    for (Eigen::Index r = 0; r < loss_change.rows(); ++r) {
      const double p = path_change(r, c);
      if (p > 0) {
        prof.smallest_consistent_K =
            std::max(prof.smallest_consistent_K, loss_change(r, c) * static_cast<double>(row.m) / p);
        if (per_m > 0) row.max_trial_ratio = std::max(row.max_trial_ratio, loss_change(r, c) / (per_m * p));
      }
    }
    row.aggregate_bound = per_m * 2.0 * opt.C_rho_bar * radius / (1.0 - opt.rho_bar);
    if (row.max_loss_change > row.aggregate_bound) ++prof.aggregate_violations;
    prof.rows.push_back(row);
  }
  return prof;
}

}  // namespace icl
