// End-to-end acceptance checks. Each test is one numbered criterion; a
// listener prints a PASS/FAIL line per criterion after it runs.

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "icl/dynsys.hpp"
#include "icl/martingale.hpp"
#include "icl/riskeval.hpp"
#include "icl/tfstab.hpp"

using namespace icl;
namespace fs = std::filesystem;

namespace {

const std::map<std::string, std::string> kCriteria{
    {"TransformerStabilityGrid", "1"},     {"SoftmaxInequalities", "2"},
    {"AttentionLayerPerturbation", "3"},   {"WeightedRidgeBeatsLeastSquares", "4"},
    {"IsotropicRidgeSelection", "5"},      {"SourceTableTransfer", "6"},
    {"ConcentrationMachinery", "7"},       {"BoundCalculators", "8"},
    {"DynamicalSystems", "9"},             {"CliDeterminism", "10"},
};

class CriterionPrinter : public testing::EmptyTestEventListener {
  void OnTestEnd(const testing::TestInfo& info) override {
    const auto it = kCriteria.find(info.name());
    const std::string id = it == kCriteria.end() ? "?" : it->second;
    std::printf("criterion %s (%s): %s\n", id.c_str(), info.name(), info.result()->Passed() ? "PASS" : "FAIL");
    std::fflush(stdout);
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST(Acceptance, TransformerStabilityGrid) {
  const auto t0 = std::chrono::steady_clock::now();
  const StabilityGrid grid;  // D in {1,2,3}, Gamma in {0.5,1}, m in 2..16, 12 configs per cell
  const CertificationReport rep = certify_stability_grid(grid, 20240601);
  const double secs = seconds_since(t0);
  std::printf("  trials=%zu violations=%zu max_ratio=%.4g lipschitz_violations=%zu max_lipschitz_ratio=%.4g "
              "time=%.1fs\n",
              rep.trials.size(), rep.violations, rep.max_ratio, rep.lipschitz_violations, rep.max_lipschitz_ratio,
              secs);
  EXPECT_GE(rep.trials.size(), 1000u);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_LE(rep.max_ratio, 1.0);
  EXPECT_LE(secs, 120.0);
}

TEST(Acceptance, SoftmaxInequalities) {
  const auto t0 = std::chrono::steady_clock::now();
  const SoftmaxLemmaReport rep = check_softmax_lemma(100000, 0.0, 2.0, 2, 16, 20240602);
  const double secs = seconds_since(t0);
  std::printf("  draws=%zu sup_violations=%zu lipschitz_violations=%zu (max ratio %.4f) "
              "factor-2 violations=%zu time=%.1fs\n",
              rep.draws, rep.sup_violations, rep.lipschitz_violations, rep.max_lipschitz_ratio,
              rep.corrected_violations, secs);
  EXPECT_EQ(rep.sup_violations, 0u);
  EXPECT_EQ(rep.lipschitz_violations, 0u) << "the l1 perturbation inequality without a factor 2 does not hold";
  EXPECT_LE(secs, 30.0);
}

TEST(Acceptance, AttentionLayerPerturbation) {
  for (double gamma : {0.5, 1.0, 2.0}) {
    const LayerLemmaReport rep = check_layer_lemma(1000, gamma, 16, 6, 20240603);
    std::printf("  gamma=%.1f trials=%zu diff_violations=%zu max_ratio=%.4f norm_violations=%zu max_row=%.6f\n",
                gamma, rep.trials, rep.diff_violations, rep.max_ratio, rep.norm_violations, rep.max_row_norm);
    EXPECT_EQ(rep.trials, 1000u);
    EXPECT_EQ(rep.diff_violations, 0u);
    EXPECT_EQ(rep.norm_violations, 0u);
  }
}

TEST(Acceptance, WeightedRidgeBeatsLeastSquares) {
  const auto t0 = std::chrono::steady_clock::now();
  LinearTaskDistribution dist;
  dist.dim = 20;
  dist.cov = harmonic_square_cov(20);
  dist.noise_std = 0.0;
  RiskCurveOptions opt;
  opt.n = 41;
  opt.reps = 2000;
  opt.seed = 20240604;
  const RiskCurve ols = risk_curve(OrdinaryLeastSquares(), dist, opt);
  const RiskCurve wr = risk_curve(WeightedRidge(dist.cov, 0.0), dist, opt);
  const PairedDifference gap = paired_difference(ols, wr);
  std::size_t failures = 0;
  for (std::size_t m = 1; m <= 40; ++m) {
    const bool ok = m < 20 ? gap.mean[m] >= 3.0 * gap.std_error[m] : wr.mean[m] <= ols.mean[m] + 1e-9;
    if (!ok) ++failures;
    if (m % 5 == 0 || !ok)
      std::printf("  m=%2zu ols=%.5g wr=%.5g gap=%.4g se=%.2g %s\n", m, ols.mean[m], wr.mean[m], gap.mean[m],
                  gap.std_error[m], ok ? "" : "<- fails");
  }
  const double secs = seconds_since(t0);
  std::printf("  time=%.1fs\n", secs);
  EXPECT_EQ(failures, 0u);
  EXPECT_LE(secs, 300.0);
}

TEST(Acceptance, IsotropicRidgeSelection) {
  LinearTaskDistribution dist;
  dist.dim = 10;
  dist.noise_std = 1.0;
  RiskCurveOptions opt;
  opt.n = 30;
  opt.reps = 2000;
  opt.seed = 20240605;
  const RidgeBestCurve best = ridge_best_curve(dist, {0.01, 0.05, 0.1, 0.5, 1.0}, opt.seed + 1, opt);
  const RiskCurve wr = risk_curve(WeightedRidge(Eigen::MatrixXd::Identity(10, 10), 1.0), dist, opt);
  std::size_t failures = 0;
  for (std::size_t m = 0; m < opt.n; ++m) {
    const double diff = std::abs(best.curve.mean[m] - wr.mean[m]);
    const double tol = 2.0 * std::max(best.curve.std_error[m], wr.std_error[m]);
    const bool ok = diff <= tol;
    if (!ok) ++failures;
    if (m % 5 == 0 || !ok)
      std::printf("  m=%2zu lambda*=%.2f best=%.5f wr=%.5f |diff|=%.2g tol=%.2g %s\n", m,
                  best.selection.best_lambda[m], best.curve.mean[m], wr.mean[m], diff, tol, ok ? "" : "<- fails");
  }
  EXPECT_EQ(failures, 0u);
}

TEST(Acceptance, SourceTableTransfer) {
  const Eigen::Index d = 20;
  LinearTaskDistribution dist;
  dist.dim = d;
  dist.law = BetaLaw::Sphere;
  dist.noise_std = std::sqrt(0.1);
  const std::size_t T = 3 * static_cast<std::size_t>(d);
  RiskCurveOptions opt;
  opt.n = 2 * static_cast<std::size_t>(d);
  opt.reps = 2000;
  opt.seed = 20240606;
  const TransferRisk mtl = transfer_risk(
      [&](Rng& rng) -> AlgorithmPtr {
        return std::make_shared<EmpiricalCovRidge>(sample_source_betas(dist, T, rng), 0.1);
      },
      dist, opt);
  const TransferRisk truth =
      transfer_risk(WeightedRidge(Eigen::MatrixXd::Identity(d, d) / static_cast<double>(d), 0.1), dist, opt);
  const double rel = (mtl.averaged.value - truth.averaged.value) / truth.averaged.value;
  std::printf("  T=%zu empirical-cov=%.5f (se %.2g) true-cov=%.5f (se %.2g) relative gap=%.2f%%\n", T,
              mtl.averaged.value, mtl.averaged.std_error, truth.averaged.value, truth.averaged.std_error,
              100.0 * rel);
  EXPECT_LE(rel, 0.10);

  LinearTaskDistribution greedy_dist = dist;
  greedy_dist.noise_std = 0.1;
  const SelectionAccuracy acc = greedy_selection_accuracy(greedy_dist, 1024, 15, 1000, 20240607);
  std::printf("  greedy selection: %zu/%zu correct (%.1f%%)\n", acc.correct, acc.trials, 100.0 * acc.rate());
  EXPECT_EQ(acc.trials, 1000u);
  EXPECT_GE(acc.rate(), 0.95);
}

TEST(Acceptance, ConcentrationMachinery) {
  // Running mean of labels in [0,1] under the clipped loss: swapping one of
  // m prefix labels moves the prediction by at most 1/m and the loss by at
  // most 2/m, so K = 2 with B = 1.
  const std::size_t n = 64, traces = 100, mc_reps = 100;
  const double B = 1.0, K = 2.0;
  std::vector<MartingaleTrace> doob;
  std::size_t violations = 0;
  double max_inc = 0.0;
  for (std::size_t k = 0; k < traces; ++k) {
    Rng rng = Rng::stream(20240608, {k});
    doob.push_back(doob_trace(RunningMean(), uniform_label_sampler(0.0, 1.0), n, mc_reps, rng));
    const IncrementAudit a = audit_increments(doob.back(), B, K);
    violations += a.violations;
    max_inc = std::max(max_inc, a.max_increment);
  }
  std::printf("  doob traces=%zu increment bound=%.4f max increment=%.4f violations=%zu\n", traces,
              increment_bound(n, B, K), max_inc, violations);
  EXPECT_EQ(violations, 0u);

  std::size_t control = 0;
  for (std::size_t k = 0; k < 20; ++k) {
    Rng rng = Rng::stream(20240609, {k});
    control += audit_increments(doob_trace(FirstLabel(), uniform_label_sampler(0.0, 1.0), n, mc_reps, rng), B, 0.0)
                   .violations;
  }
  std::printf("  negative control (first-label, K=0): %zu violations\n", control);
  EXPECT_GT(control, 0u);

  std::vector<MartingaleTrace> coins;
  coins.reserve(10000);
  for (std::size_t k = 0; k < 10000; ++k) {
    Rng rng = Rng::stream(20240610, {k});
    coins.push_back(coin_martingale(n, B, rng));
  }
  const TailCheck tail = azuma_tail_check(coins, B, 0.0, {0.05, 0.1, 0.2, 0.4});
  for (const auto& r : tail.rows) std::printf("  t=%.2f empirical=%.4f bound=%.4f\n", r.t, r.empirical, r.bound);
  EXPECT_EQ(tail.traces, 10000u);
  EXPECT_TRUE(tail.dominated());
}

TEST(Acceptance, BoundCalculators) {
  BoundInputs in;
  in.n = 64;
  in.T = 100;
  in.cover = {10, 1};
  // Independent high-precision evaluations of the same closed forms.
  const std::vector<std::pair<const char*, std::pair<double, double>>> frozen{
      {"mtl(eps=0.01)", {mtl_bound(in, 0.01), 0.94415715682235853008}},
      {"mtl optimized", {mtl_bound_opt(in).value, 0.91704068313488370967}},
      {"chaining(eps=0.01)", {chaining_bound(in, 0.01), 0.35024113519667443023}},
      {"transfer(T=400)", {transfer_bound(400, 1, 1, 0.05, {10, 1}).value, 0.53445317150761626147}},
      {"erm(R=0.1,n=100)", {erm_risk_bound(0.1, 100, 1, 1, 0.05), 1.4923273530409141353}},
  };
  for (const auto& [name, v] : frozen) {
    const double rel = std::abs(v.first - v.second) / v.second;
    std::printf("  %-20s computed=%.17g reference=%.17g rel=%.1e\n", name, v.first, v.second, rel);
    EXPECT_LE(rel, 1e-10) << name;
  }

  std::size_t checks = 0, failures = 0;
  auto expect_less = [&](double a, double b) {
    ++checks;
    if (!(a < b)) ++failures;
  };
  for (double n : {64.0, 256.0, 1024.0})
    for (double T : {10.0, 100.0, 1000.0})
      for (double M : {1.0, 2.0, 4.0}) {
        BoundInputs b;
        b.n = n;
        b.T = T;
        b.M = M;
        b.cover = {10, 1};
        auto with = [&](auto f) {
          BoundInputs c = b;
          f(c);
          return c;
        };
        const double base = multi_sequence_bound_opt(b).value;
        expect_less(multi_sequence_bound_opt(with([](BoundInputs& c) { c.n *= 2; })).value, base);
        expect_less(multi_sequence_bound_opt(with([](BoundInputs& c) { c.T *= 2; })).value, base);
        expect_less(multi_sequence_bound_opt(with([](BoundInputs& c) { c.M *= 2; })).value, base);
        expect_less(base, multi_sequence_bound_opt(with([](BoundInputs& c) { c.cover.dim *= 2; })).value);
        expect_less(multi_sequence_bound_opt(with([](BoundInputs& c) { c.delta *= 2; })).value, base);
        expect_less(chaining_bound(with([](BoundInputs& c) { c.n *= 2; }), 0.01), chaining_bound(b, 0.01));
        expect_less(chaining_bound(with([](BoundInputs& c) { c.T *= 2; }), 0.01), chaining_bound(b, 0.01));
        expect_less(chaining_bound(b, 0.01), chaining_bound(with([](BoundInputs& c) { c.cover.dim *= 2; }), 0.01));
        expect_less(chaining_bound(with([](BoundInputs& c) { c.delta *= 2; }), 0.01), chaining_bound(b, 0.01));
        expect_less(transfer_bound(2 * T, 1, 1, 0.05, b.cover).value, transfer_bound(T, 1, 1, 0.05, b.cover).value);
        expect_less(transfer_bound(T, 1, 1, 0.05, b.cover).value, transfer_bound(T, 1, 1, 0.05, {20, 1}).value);
        expect_less(transfer_bound(T, 1, 1, 0.1, b.cover).value, transfer_bound(T, 1, 1, 0.05, b.cover).value);

        // Pooling M sequences per task is exactly T M tasks.
        BoundInputs pooled = b;
        pooled.T = T * M;
        pooled.M = 1;
        ++checks;
        if (multi_sequence_bound(b, 0.01) != mtl_bound(pooled, 0.01)) ++failures;
      }
  std::printf("  monotonicity and substitution: %zu checks, %zu failures\n", checks, failures);
  EXPECT_EQ(failures, 0u);
}

TEST(Acceptance, DynamicalSystems) {
  const auto scalar = certify_exponential_stability(linear_dynamics(Eigen::MatrixXd::Constant(1, 1, 0.5)), 1, 1.0,
                                                    0.5, 200, 15, 1.0, 20240611);
  std::printf("  scalar 0.5: violations=%zu max ratio=%.12f\n", scalar.violations, scalar.max_violation_ratio);
  EXPECT_EQ(scalar.violations, 0u);
  EXPECT_TRUE(scalar.certified());

  Rng rng(20240612);
  Eigen::MatrixXd a = rng.normal_matrix(6, 6);
  a *= 0.9 / Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()(0);
  const auto contractive = certify_exponential_stability(linear_dynamics(a), 6, 1.0, 0.9, 200, 50, 1.0, 20240613);
  std::printf("  ||A||=0.9: violations=%zu max ratio=%.6f\n", contractive.violations,
              contractive.max_violation_ratio);
  EXPECT_EQ(contractive.violations, 0u);

  const TaskSpec sys = sample_lds_task(10, 10, 0.9, rng, 0.0);
  RolloutOptions start;
  start.initial_state = rng.normal_vector(10);
  const PromptSequence seq = rollout(sys, 11, rng, start);
  const Eigen::VectorXd probe = rng.normal_vector(10);
  const double residual = (ArLeastSquares(1).predict(seq.pairs, probe) - sys.A * probe).norm();
  std::printf("  AR-LS identification: residual=%.3g\n", residual);
  EXPECT_LE(residual, 1e-6);

  DynBoundInputs dyn;
  dyn.K = 1;
  dyn.C_rho_bar = 1;
  dyn.rho_bar = 0.5;
  dyn.w_bar = 1;
  dyn.x_bar = 0;
  dyn.n = 64;
  std::printf("  kbar=%.17g\n", kbar(dyn));
  EXPECT_EQ(kbar(dyn), 4.0);
  dyn.x_bar = 1.5;
  EXPECT_NEAR(kbar(dyn), 2.0 * 1 * 1 / 0.5 * (1 + 1.5 / 8.0), 1e-15);

  BoundInputs base;
  base.n = 64;
  base.T = 100;
  base.cover = {10, 1};
  BoundInputs sub = base;
  sub.K = kbar(dyn);
  const double lhs = dynamic_mtl_bound(base, dyn, 0.01);
  const double rhs = mtl_bound(sub, 0.01);
  std::printf("  dynamic bound=%.17g substituted static bound=%.17g\n", lhs, rhs);
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Acceptance, CliDeterminism) {
  const fs::path root = fs::temp_directory_path() / "iclab_acceptance_determinism";
  fs::remove_all(root);
  std::size_t files = 0, mismatches = 0;
  for (const auto& entry : fs::directory_iterator(ICLAB_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    const std::string stem = entry.path().stem().string();
    for (const char* threads : {"1", "4"}) {
      const fs::path out = root / stem / threads;
      const std::string cmd = std::string(ICLAB_CLI_PATH) + " --threads " + threads + " run " +
                              entry.path().string() + " --out " + out.string() + " > /dev/null";
      ASSERT_EQ(std::system(cmd.c_str()), 0) << cmd;
    }
    for (const auto& f : fs::directory_iterator(root / stem / "1")) {
      ++files;
      const fs::path other = root / stem / "4" / f.path().filename();
      if (!fs::exists(other) || slurp(f.path()) != slurp(other)) {
        ++mismatches;
        std::printf("  differs: %s/%s\n", stem.c_str(), f.path().filename().c_str());
      }
    }
  }
  std::printf("  compared %zu output files across reruns (1 vs 4 threads): %zu differ\n", files, mismatches);
  EXPECT_GT(files, 0u);
  EXPECT_EQ(mismatches, 0u);
}

int main(int argc, char** argv) {
  testing::InitGoogleTest(&argc, argv);
  testing::UnitTest::GetInstance()->listeners().Append(new CriterionPrinter);
  return RUN_ALL_TESTS();
}
