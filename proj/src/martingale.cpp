#include "icl/martingale.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "icl/errors.hpp"
#include "icl/parallel.hpp"

namespace icl {

namespace {

double mean_of(const Eigen::VectorXd& v) { return v.size() ? v.mean() : 0.0; }

double stderr_of(const Eigen::VectorXd& v) {
  const auto k = static_cast<double>(v.size());
  if (v.size() < 2) return 0.0;
  const double var = (v.array() - v.mean()).square().sum() / (k - 1.0);
  return std::sqrt(var / k);
}

}  // namespace

PairSampler linear_pair_sampler(const TaskSpec& task) {
  if (task.kind != TaskKind::Linear) throw InvalidInput("linear_pair_sampler: task must be linear");
  return [task](Rng& rng) {
    Pair p;
    p.x = rng.normal_vector(task.beta.size());
    p.y = Eigen::VectorXd::Constant(1, task.beta.dot(p.x) + task.noise_std * rng.normal());
    return p;
  };
}

PairSampler uniform_label_sampler(double lo, double hi) {
  if (!(hi >= lo)) throw InvalidInput("uniform_label_sampler: need lo <= hi");
  return [lo, hi](Rng& rng) {
    Pair p;
    p.x = Eigen::VectorXd::Zero(1);
    p.y = Eigen::VectorXd::Constant(1, rng.uniform(lo, hi));
    return p;
  };
}

double MartingaleTrace::realized_risk() const {
  if (losses.empty()) return 0.0;
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

MartingaleTrace doob_trace(const InContextAlgorithm& alg, const PairSampler& sampler, std::size_t n,
                           std::size_t mc_reps, Rng& rng, LossKind loss) {
  if (n == 0) throw InvalidInput("doob_trace: n must be >= 1");
  if (mc_reps < 2) throw InvalidInput("doob_trace: mc_reps must be >= 2");

  std::vector<Pair> realized;
  realized.reserve(n);
  for (std::size_t i = 0; i < n; ++i) realized.push_back(sampler(rng));

  MartingaleTrace trace;
  trace.mc_reps = mc_reps;
  trace.losses.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const PrefixView prefix(realized.data(), k);
    trace.losses[k] = icl::loss(loss, realized[k].y, alg.predict(prefix, realized[k].x));
  }
  const double inv_n = 1.0 / static_cast<double>(n);

  // risk(r, i): empirical risk with the first i examples realized and the
  // rest taken from replica r's fresh sequence.
  Eigen::MatrixXd risk(static_cast<Eigen::Index>(mc_reps), static_cast<Eigen::Index>(n + 1));
  const Rng base = rng.substream(0x6d61727467ULL);
  parallel_for(mc_reps, [&](std::size_t r) {
    Rng local = base.substream(r);
    std::vector<Pair> hybrid;
    hybrid.reserve(n);
    for (std::size_t k = 0; k < n; ++k) hybrid.push_back(sampler(local));
    double realized_sum = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      if (i > 0) {
        hybrid[i - 1] = realized[i - 1];
        realized_sum += trace.losses[i - 1];
      }
      double suffix = 0.0;
      for (std::size_t k = i; k < n; ++k) {
        const PrefixView prefix(hybrid.data(), k);
        suffix += icl::loss(loss, hybrid[k].y, alg.predict(prefix, hybrid[k].x));
      }
      risk(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = (realized_sum + suffix) * inv_n;
    }
  });

  trace.values.resize(n + 1);
  trace.std_errors.resize(n + 1);
  trace.increment_std_errors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd col = risk.col(static_cast<Eigen::Index>(i));
    trace.values[i] = mean_of(col);
    trace.std_errors[i] = stderr_of(col);
  }
  trace.values[n] = trace.realized_risk();
  trace.std_errors[n] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const Eigen::VectorXd diff =
        risk.col(static_cast<Eigen::Index>(i)) - risk.col(static_cast<Eigen::Index>(i - 1));
    trace.increment_std_errors[i - 1] = stderr_of(diff);
  }
  return trace;
}

MartingaleTrace doob_trace(const InContextAlgorithm& alg, const TaskSpec& task, std::size_t n, std::size_t mc_reps,
                           Rng& rng, LossKind loss) {
  return doob_trace(alg, linear_pair_sampler(task), n, mc_reps, rng, loss);
}

MartingaleTrace coin_martingale(std::size_t n, double B, Rng& rng) {
  if (n == 0) throw InvalidInput("coin_martingale: n must be >= 1");
  MartingaleTrace t;
  t.values.assign(n + 1, 0.0);
  t.std_errors.assign(n + 1, 0.0);
  t.increment_std_errors.assign(n, 0.0);
  const double step = B / static_cast<double>(n);
  for (std::size_t i = 1; i <= n; ++i) t.values[i] = t.values[i - 1] + (rng.uniform() < 0.5 ? step : -step);
  return t;
}

double increment_bound(std::size_t n, double B, double K) {
  if (n == 0) throw InvalidInput("increment_bound: n must be >= 1");
  const double dn = static_cast<double>(n);
  return (B + K * std::log(dn)) / dn;
}

IncrementAudit audit_increments(const MartingaleTrace& trace, double B, double K, double bands) {
  IncrementAudit a;
  const std::size_t n = trace.length();
  a.bound = increment_bound(n, B, K);
  a.steps = n;
  for (std::size_t i = 1; i <= n; ++i) {
    const double inc = std::abs(trace.values[i] - trace.values[i - 1]);
    const double se = i - 1 < trace.increment_std_errors.size() ? trace.increment_std_errors[i - 1] : 0.0;
    a.max_increment = std::max(a.max_increment, inc);
    if (inc > a.bound + bands * se + 1e-12) ++a.violations;
  }
  return a;
}

double azuma_tail_bound(std::size_t n, double B, double K, double t) {
  if (n == 0) throw InvalidInput("azuma_tail_bound: n must be >= 1");
  const double dn = static_cast<double>(n);
  const double r = B + K * std::log(dn);
  if (r <= 0) return t > 0 ? 0.0 : 2.0;
  return 2.0 * std::exp(-dn * t * t / (2.0 * r * r));
}

bool TailCheck::dominated() const {
  return std::all_of(rows.begin(), rows.end(), [](const TailRow& r) { return r.empirical <= r.bound; });
}

CsvTable TailCheck::csv() const {
  CsvTable t("tail", {"t", "empirical", "bound", "margin", "traces"});
  for (const auto& r : rows) t.add({r.t, r.empirical, r.bound, r.margin, traces});
  return t;
}

TailCheck azuma_tail_check(std::span<const MartingaleTrace> traces, double B, double K,
                           const std::vector<double>& t_grid) {
  if (traces.empty()) throw InvalidInput("azuma_tail_check: no traces");
  const std::size_t n = traces.front().length();
  for (const auto& tr : traces)
    if (tr.length() != n) throw InvalidInput("azuma_tail_check: traces have different lengths");
  TailCheck out;
  out.traces = traces.size();
  for (double t : t_grid) {
    std::size_t hits = 0;
    for (const auto& tr : traces) hits += std::abs(tr.values.back() - tr.values.front()) >= t;
    TailRow row;
    row.t = t;
    row.empirical = static_cast<double>(hits) / static_cast<double>(traces.size());
    row.bound = azuma_tail_bound(n, B, K, t);
    row.margin = row.bound - row.empirical;
    out.rows.push_back(row);
  }
  return out;
}

CsvTable traces_csv(std::span<const MartingaleTrace> traces) {
  CsvTable t("trace", {"trace", "i", "value", "std_error"});
  for (std::size_t k = 0; k < traces.size(); ++k)
    for (std::size_t i = 0; i < traces[k].values.size(); ++i)
      t.add({k, i, traces[k].values[i], i < traces[k].std_errors.size() ? traces[k].std_errors[i] : 0.0});
  return t;
}

// ---------------------------------------------------------------------------

CsvTable StabilityEstimate::csv() const {
  CsvTable t("stability_profile", {"m", "change", "stderr", "change_times_m", "k_hat"});
  for (std::size_t i = 0; i < m.size(); ++i)
    t.add({m[i], change[i], std_error[i], change[i] * static_cast<double>(m[i]), k_hat});
  return t;
}

StabilityEstimate estimate_stability(const InContextAlgorithm& alg, const LinearTaskDistribution& dist,
                                     const std::vector<std::size_t>& m_grid, std::size_t trials, std::uint64_t seed,
                                     LossKind loss, std::size_t queries) {
  if (trials < 2 || queries == 0) throw InvalidInput("estimate_stability: need trials >= 2 and queries >= 1");
  StabilityEstimate est;
  for (std::size_t gi = 0; gi < m_grid.size(); ++gi) {
    const std::size_t m = m_grid[gi];
    if (m == 0) throw InvalidInput("estimate_stability: prefix lengths must be >= 1");
    Eigen::VectorXd change(static_cast<Eigen::Index>(trials));
    parallel_for(trials, [&](std::size_t tr) {
      Rng rng = Rng::stream(seed, {gi, tr});
      const TaskSpec task = dist.sample(rng);
      const PromptSequence prompt = sample_prompt(task, m, rng);
      std::vector<Pair> swapped = prompt.pairs;
      swapped[0].x = rng.normal_vector(task.beta.size());
      swapped[0].y = Eigen::VectorXd::Constant(1, -task.beta.dot(swapped[0].x));
      const PromptSequence test = sample_prompt(task, queries, rng);
      double before = 0.0, after = 0.0;
      for (const auto& q : test.pairs) {
        before += icl::loss(loss, q.y, alg.predict(prompt.pairs, q.x));
        after += icl::loss(loss, q.y, alg.predict(swapped, q.x));
      }
      change[static_cast<Eigen::Index>(tr)] = std::abs(after - before) / static_cast<double>(queries);
    });
    est.m.push_back(m);
    est.change.push_back(mean_of(change));
    est.std_error.push_back(stderr_of(change));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < est.m.size(); ++i) acc += est.change[i] * static_cast<double>(est.m[i]);
  est.k_hat = est.m.empty() ? 0.0 : acc / static_cast<double>(est.m.size());
  return est;
}

// ---------------------------------------------------------------------------

double CoveringModel::log_covering(double eps, double diam) const {
  if (dim == 0.0) return 0.0;
  if (eps <= 0) return std::numeric_limits<double>::infinity();
  return dim * std::log1p(scale * diam / eps);
}

void BoundInputs::validate() const {
  if (!(n >= 1) || !(T >= 1) || !(M >= 1)) throw InvalidInput("bound inputs: n, T and M must be >= 1");
  if (L < 0 || B < 0 || K < 0) throw InvalidInput("bound inputs: L, B and K must be nonnegative");
  if (!(delta > 0 && delta < 1)) throw InvalidInput("bound inputs: delta must lie in (0, 1)");
  if (!(diam > 0)) throw InvalidInput("bound inputs: diameter must be positive");
  if (!(c > 0)) throw InvalidInput("bound inputs: c must be positive");
  if (cover.dim < 0 || !(cover.scale > 0)) throw InvalidInput("bound inputs: covering dim >= 0 and scale > 0 required");
}

std::vector<double> epsilon_grid(double diam, std::size_t points) {
  if (points < 2) throw InvalidInput("epsilon_grid: need at least 2 points");
  std::vector<double> g(points);
  const double lo = std::log(1e-6 * diam), hi = std::log(diam);
  for (std::size_t i = 0; i < points; ++i)
    g[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
  g.back() = diam;
  return g;
}

namespace {

OptimizedBound minimize(const std::vector<double>& grid, const std::function<double(double)>& f) {
  OptimizedBound best{grid.front(), f(grid.front())};
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double v = f(grid[i]);
    if (v < best.value) best = {grid[i], v};
  }
  return best;
}

double complexity_prefactor(const BoundInputs& in) { return in.B + in.K * std::log(in.n); }

}  // namespace

double mtl_bound(const BoundInputs& in, double eps) {
  in.validate();
  if (!(eps > 0)) throw InvalidInput("mtl_bound: eps must be positive");
  const double logs = in.cover.log_covering(eps, in.diam) + std::log(1.0 / in.delta);
  return 4.0 * in.L * eps + 2.0 * complexity_prefactor(in) * std::sqrt(logs / (in.c * in.n * in.T));
}

OptimizedBound mtl_bound_opt(const BoundInputs& in) {
  in.validate();
  return minimize(epsilon_grid(in.diam), [&](double e) { return mtl_bound(in, e); });
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double rel_tol, int max_depth) {
  if (!(b > a)) return 0.0;
  struct Rec {
    const std::function<double(double)>& f;
    int max_depth;
    double run(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) const {
      const double m = 0.5 * (a + b);
      const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
      const double flm = f(lm), frm = f(rm);
      const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
      const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
      const double delta = left + right - whole;
      if (depth >= max_depth || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
      return run(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) + run(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
    }
  };
  const double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  // A coarse first pass sets the absolute tolerance from the integral's scale.
  Rec rec{f, max_depth};
  const double rough = rec.run(a, b, fa, fm, fb, whole, std::abs(whole) * 1e-3, 0);
  const double tol = std::max(rel_tol * std::abs(rough), std::numeric_limits<double>::min());
  return rec.run(a, b, fa, fm, fb, whole, tol, 0);
}

double entropy_integral(const CoveringModel& cover, double diam, double a, double b) {
  if (cover.dim == 0.0 || !(b > a)) return 0.0;
  return adaptive_simpson([&](double u) { return std::sqrt(cover.log_covering(u, diam)); }, a, b, 1e-8);
}

double chaining_bound(const BoundInputs& in, double eps) {
  in.validate();
  if (!(eps > 0)) throw InvalidInput("chaining_bound: eps must be positive");
  const double l_plus = std::max(in.L, 1.0);
  const double d_plus = std::max(in.diam, 1.0);
  const double integral = eps < in.diam / 2 ? entropy_integral(in.cover, in.diam, eps, in.diam / 2) : 0.0;
  const double inner = std::log(in.diam / eps) / in.delta;
  const double tail = inner > 1.0 ? std::sqrt(std::log(inner)) : 0.0;
  return 8.0 * in.L * eps + (l_plus + in.K * std::log(in.n)) / std::sqrt(in.c * in.n * in.T) * (integral + d_plus * tail);
}

double multi_sequence_bound(const BoundInputs& in, double eps) {
  BoundInputs pooled = in;
  pooled.T = in.T * in.M;
  return mtl_bound(pooled, eps);
}

OptimizedBound multi_sequence_bound_opt(const BoundInputs& in) {
  BoundInputs pooled = in;
  pooled.T = in.T * in.M;
  return mtl_bound_opt(pooled);
}

OptimizedBound transfer_bound(double T, double B, double L, double delta, const CoveringModel& cover, double diam) {
  if (!(T >= 1)) throw InvalidInput("transfer_bound: T must be >= 1");
  if (!(delta > 0 && delta < 1)) throw InvalidInput("transfer_bound: delta must lie in (0, 1)");
  if (B < 0 || L < 0 || !(diam > 0)) throw InvalidInput("transfer_bound: need B, L >= 0 and diam > 0");
  return minimize(epsilon_grid(diam), [&](double e) {
    return 4.0 * L * e + B * std::sqrt(2.0 * (cover.log_covering(e, diam) + std::log(1.0 / delta)) / T);
  });
}

double diversity_transfer_bound(double r_mtl, double nu, double eps) {
  if (!(nu > 0)) throw InvalidInput("diversity_transfer_bound: nu must be positive");
  return r_mtl / nu + 2.0 * eps;
}

double erm_risk_bound(double rademacher, double n, double B, double L, double delta) {
  if (!(n > 0) || !(delta > 0 && delta < 1) || rademacher < 0 || B < 0 || L < 0)
    throw InvalidInput("erm_risk_bound: need n > 0, delta in (0, 1), nonnegative R_n, B, L");
  return 8.0 * L * rademacher + 4.0 * B * std::sqrt(std::log(1.0 / delta) / n);
}

CsvTable bound_sweep(const BoundInputs& base, const std::vector<double>& ns, const std::vector<double>& Ts,
                     const std::vector<double>& Ms) {
  CsvTable t("boundsweep", {"n", "T", "M", "eps", "value", "variant"});
  for (double n : ns)
    for (double T : Ts)
      for (double M : Ms) {
        BoundInputs in = base;
        in.n = n;
        in.T = T;
        in.M = M;
        const auto mtl = mtl_bound_opt(in);
        t.add({n, T, M, mtl.eps, mtl.value, "mtl"});
        const auto multi = multi_sequence_bound_opt(in);
        t.add({n, T, M, multi.eps, multi.value, "multi_sequence"});
        std::vector<double> grid;
        for (double e : epsilon_grid(in.diam))
          if (e < in.diam / 2) grid.push_back(e);
        const auto chain = minimize(grid, [&](double e) { return chaining_bound(in, e); });
        t.add({n, T, M, chain.eps, chain.value, "chaining"});
        const auto tr = transfer_bound(T, in.B, in.L, in.delta, in.cover, in.diam);
        t.add({n, T, M, tr.eps, tr.value, "transfer"});
      }
  return t;
}

}  // namespace icl
