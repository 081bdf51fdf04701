#include <gtest/gtest.h>

#include <cmath>

#include "icl/errors.hpp"
#include "icl/martingale.hpp"

using namespace icl;

namespace {

BoundInputs documented() {
  BoundInputs in;
  in.L = 1;
  in.B = 1;
  in.K = 1;
  in.n = 64;
  in.T = 100;
  in.delta = 0.05;
  in.diam = 1;
  in.cover = {10, 1};
  return in;
}

}  // namespace

TEST(Doob, ConstantAlgorithmHasFlatTrace) {
  Rng rng(1);
  const auto tr = doob_trace(ConstantPredictor(0.5), uniform_label_sampler(0, 1), 16, 100, rng);
  for (std::size_t i = 1; i < tr.values.size(); ++i) EXPECT_NEAR(tr.values[i], tr.values[0], 0.05);
  const auto audit = audit_increments(tr, 1.0, 0.0);
  EXPECT_EQ(audit.violations, 0u);
}

TEST(Doob, DeterministicTaskAndConstantGiveEqualValues) {
  TaskSpec t;
  t.beta = Eigen::VectorXd::Zero(2);
  Rng rng(2);
  const auto tr = doob_trace(ConstantPredictor(0.3), t, 10, 100, rng);
  for (double v : tr.values) EXPECT_NEAR(v, 0.09, 1e-15);
}

TEST(Doob, FinalValueIsRealizedRisk) {
  Rng rng(3);
  const auto tr = doob_trace(RunningMean(), uniform_label_sampler(0, 1), 32, 100, rng);
  double direct = 0.0;
  for (double l : tr.losses) direct += l;
  direct /= static_cast<double>(tr.losses.size());
  EXPECT_NEAR(tr.values.back(), direct, 1e-12);
  EXPECT_NEAR(tr.realized_risk(), direct, 1e-12);
  EXPECT_EQ(tr.length(), 32u);
}

TEST(Doob, MartingaleIncrementsCenteredAcrossTraces) {
  // For every step i, the mean over traces of X_i - X_{i-1} is zero up to
  // Monte-Carlo error.
  const std::size_t n = 64, traces = 100;
  std::vector<MartingaleTrace> all;
  for (std::size_t k = 0; k < traces; ++k) {
    Rng rng = Rng::stream(4, {k});
    all.push_back(doob_trace(RunningMean(), uniform_label_sampler(0, 1), n, 100, rng));
  }
  std::size_t outside = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    double s = 0, s2 = 0;
    for (const auto& tr : all) {
      const double d = tr.values[i] - tr.values[i - 1];
      s += d;
      s2 += d * d;
    }
    const double mean = s / traces;
    const double se = std::sqrt((s2 / traces - mean * mean) / (traces - 1));
    if (std::abs(mean) > 3 * se) ++outside;
  }
  // 3-sigma per step over 64 steps: a couple of exceedances are expected by chance.
  EXPECT_LE(outside, 3u);
}

TEST(Increments, BoundFormula) {
  EXPECT_DOUBLE_EQ(increment_bound(64, 1.0, 2.0), (1.0 + 2.0 * std::log(64.0)) / 64.0);
}

TEST(Increments, NegativeControlDetectsUnderstatedK) {
  std::size_t violations = 0;
  for (std::size_t k = 0; k < 20; ++k) {
    Rng rng = Rng::stream(5, {k});
    const auto tr = doob_trace(FirstLabel(), uniform_label_sampler(0, 1), 64, 100, rng);
    violations += audit_increments(tr, 1.0, 0.0).violations;
  }
  EXPECT_GT(violations, 0u);
}

TEST(Tail, ZeroThresholdAndMonotone) {
  std::vector<MartingaleTrace> coins;
  for (std::size_t k = 0; k < 1000; ++k) {
    Rng rng = Rng::stream(6, {k});
    coins.push_back(coin_martingale(32, 1.0, rng));
  }
  const auto chk = azuma_tail_check(coins, 1.0, 0.0, {0.0, 0.05, 0.1, 0.2, 0.4});
  EXPECT_DOUBLE_EQ(chk.rows[0].empirical, 1.0);
  EXPECT_DOUBLE_EQ(chk.rows[0].bound, 2.0);
  for (std::size_t i = 1; i < chk.rows.size(); ++i) EXPECT_LT(chk.rows[i].bound, chk.rows[i - 1].bound);
  EXPECT_TRUE(chk.dominated());
}

TEST(StabilityEstimate, ConstantAlgorithmIsInsensitive) {
  const auto est = estimate_stability(ConstantPredictor(0.2), LinearTaskDistribution{3, {}, 0.0}, {4, 8}, 50, 7);
  for (double c : est.change) EXPECT_EQ(c, 0.0);
  EXPECT_EQ(est.k_hat, 0.0);
}

TEST(StabilityEstimate, OlsChangeDecays) {
  const auto est =
      estimate_stability(OrdinaryLeastSquares(), LinearTaskDistribution{3, {}, 0.5}, {8, 16, 32, 64}, 400, 8);
  for (std::size_t i = 1; i < est.change.size(); ++i) EXPECT_LT(est.change[i], est.change[i - 1]);
}

TEST(Bounds, MtlRegression) {
  EXPECT_NEAR(mtl_bound(documented(), 0.01), 0.94415715682235853008, 1e-10 * 0.944);
  const auto opt = mtl_bound_opt(documented());
  EXPECT_NEAR(opt.value, 0.91704068313488370967, 1e-10 * 0.917);
  EXPECT_NEAR(opt.eps, 0.02523539170434766063, 1e-12);
}

TEST(Bounds, SingletonClass) {
  BoundInputs in = documented();
  in.cover.dim = 0;
  const double conc = 2 * (1 + std::log(64.0)) * std::sqrt(std::log(20.0) / (64.0 * 100.0));
  EXPECT_NEAR(mtl_bound(in, 1e-9), conc + 4e-9, 1e-14);
}

TEST(Bounds, QuadrupledSequenceLength) {
  BoundInputs in = documented();
  const double a = mtl_bound_opt(in).value;
  in.n *= 4;
  const double r = mtl_bound_opt(in).value / a;
  EXPECT_GT(r, 0.4);
  EXPECT_LT(r, 1.0);
}

TEST(Bounds, ChainingRegression) {
  EXPECT_NEAR(chaining_bound(documented(), 0.01), 0.35024113519667443023, 1e-10 * 0.35);
}

TEST(Bounds, EntropyIntegralAgainstTrapezoid) {
  const CoveringModel cover{10, 1};
  const double a = 0.01, b = 0.5;
  const int k = 1000000;
  const double h = (b - a) / k;
  double trap = 0.5 * (std::sqrt(cover.log_covering(a, 1)) + std::sqrt(cover.log_covering(b, 1)));
  for (int i = 1; i < k; ++i) trap += std::sqrt(cover.log_covering(a + i * h, 1));
  trap *= h;
  const double simpson = entropy_integral(cover, 1.0, a, b);
  EXPECT_NEAR(simpson / trap, 1.0, 1e-6);
  EXPECT_NEAR(simpson, 2.0639782718451542804, 1e-8);
}

TEST(Bounds, ChainingSingletonClass) {
  BoundInputs in = documented();
  in.cover.dim = 0;
  const double eps = 0.01;
  const double expect =
      8 * eps + (1 + std::log(64.0)) * std::sqrt(std::log(std::log(100.0) / 0.05)) / std::sqrt(6400.0);
  EXPECT_NEAR(chaining_bound(in, eps), expect, 1e-14);
}

TEST(Bounds, ChainingScalesWithNT) {
  // With K = 0 the prefactor does not depend on n, so doubling n and T halves
  // the non-epsilon part exactly.
  BoundInputs in = documented();
  in.K = 0;
  const double eps = 0.02;
  const double base = chaining_bound(in, eps) - 8 * eps;
  in.n *= 2;
  in.T *= 2;
  EXPECT_NEAR(chaining_bound(in, eps) - 8 * eps, base / 2, 1e-15);
}

TEST(Bounds, MultiSequenceSubstitution) {
  BoundInputs in = documented();
  EXPECT_NEAR(multi_sequence_bound(in, 0.01), mtl_bound(in, 0.01), 1e-15);
  in.M = 4;
  BoundInputs pooled = documented();
  pooled.T *= 4;
  EXPECT_EQ(multi_sequence_bound(in, 0.01), mtl_bound(pooled, 0.01));
  BoundInputs more = in;
  more.M = 8;
  EXPECT_LT(multi_sequence_bound_opt(more).value, multi_sequence_bound_opt(in).value);
}

TEST(Bounds, TransferRegression) {
  const auto tr = transfer_bound(400, 1, 1, 0.05, {10, 1}, 1.0);
  EXPECT_NEAR(tr.value, 0.53445317150761626147, 1e-10 * 0.534);
  EXPECT_NEAR(tr.eps, 0.012603829296797274438, 1e-12);
  const auto singleton = transfer_bound(400, 1, 1, 0.05, {0, 1}, 1.0);
  EXPECT_NEAR(singleton.value, std::sqrt(2 * std::log(20.0) / 400) + 4e-6, 1e-12);
}

TEST(Bounds, DiversityTransfer) {
  EXPECT_DOUBLE_EQ(diversity_transfer_bound(0.3, 1.0, 0.0), 0.3);
  EXPECT_NEAR(diversity_transfer_bound(0.2, 0.5, 0.05), 0.5, 1e-15);
  EXPECT_GT(diversity_transfer_bound(0.2, 0.4, 0.05), diversity_transfer_bound(0.2, 0.5, 0.05));
  EXPECT_THROW(diversity_transfer_bound(0.2, 0.0, 0.0), InvalidInput);
}

TEST(Bounds, ErmRegression) {
  EXPECT_NEAR(erm_risk_bound(0.1, 100, 1, 1, 0.05), 1.4923273530409141353, 1e-14);
}

TEST(Bounds, InvalidInputsRejected) {
  BoundInputs in = documented();
  EXPECT_THROW(mtl_bound(in, 0.0), InvalidInput);
  in.delta = 1.5;
  EXPECT_THROW(mtl_bound(in, 0.1), InvalidInput);
}

TEST(Bounds, SweepCsvShape) {
  const CsvTable t = bound_sweep(documented(), {64, 128}, {10}, {1, 2});
  EXPECT_EQ(t.rows().size(), 2u * 1u * 2u * 4u);
  EXPECT_EQ(t.kind(), "boundsweep");
}

TEST(Quadrature, PolynomialExact) {
  EXPECT_NEAR(adaptive_simpson([](double x) { return x * x * x; }, 0, 2), 4.0, 1e-12);
}
