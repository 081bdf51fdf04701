#include <gtest/gtest.h>

#include <algorithm>

#include "icl/algozoo.hpp"
#include "icl/errors.hpp"
#include "icl/riskeval.hpp"
#include "icl/taskgen.hpp"

using namespace icl;

namespace {

Pair pair(std::initializer_list<double> x, double y) {
  Pair p;
  p.x = Eigen::VectorXd(static_cast<Eigen::Index>(x.size()));
  Eigen::Index i = 0;
  for (double v : x) p.x[i++] = v;
  p.y = Eigen::VectorXd::Constant(1, y);
  return p;
}

std::vector<Pair> noiseless_prefix(const Eigen::VectorXd& beta, std::size_t m, std::uint64_t seed) {
  TaskSpec t;
  t.beta = beta;
  Rng rng(seed);
  return sample_prompt(t, m, rng).pairs;
}

}  // namespace

TEST(Ols, ScalarFit) {
  const std::vector<Pair> pre{pair({2}, 4)};
  OrdinaryLeastSquares ols;
  EXPECT_NEAR(OrdinaryLeastSquares::fit(pre)[0], 2.0, 1e-14);
  EXPECT_NEAR(ols.predict(pre, Eigen::VectorXd::Constant(1, 3))[0], 6.0, 1e-13);
}

TEST(Ols, InterpolatesWhenOverdetermined) {
  Rng rng(1);
  const Eigen::VectorXd beta = rng.normal_vector(6);
  const auto pre = noiseless_prefix(beta, 10, 2);
  const Eigen::VectorXd q = rng.normal_vector(6);
  EXPECT_NEAR(OrdinaryLeastSquares().predict(pre, q)[0], beta.dot(q), 1e-8);
}

TEST(Ols, MatchesPseudoInverseOracle) {
  // d = 5, m = 3: minimum-norm solution X^T (X X^T)^{-1} y.
  Rng rng(3);
  std::vector<Pair> pre;
  Eigen::MatrixXd X(3, 5);
  Eigen::VectorXd y(3);
  for (int i = 0; i < 3; ++i) {
    Pair p;
    p.x = rng.normal_vector(5);
    p.y = Eigen::VectorXd::Constant(1, rng.normal());
    X.row(i) = p.x.transpose();
    y[i] = p.y[0];
    pre.push_back(p);
  }
  const Eigen::VectorXd oracle = X.transpose() * (X * X.transpose()).inverse() * y;
  EXPECT_LT((OrdinaryLeastSquares::fit(pre) - oracle).norm(), 1e-10);
}

TEST(Ols, EmptyPrefixPredictsZero) {
  EXPECT_EQ(OrdinaryLeastSquares().predict({}, Eigen::VectorXd::Ones(3))[0], 0.0);
}

TEST(WeightedRidge, IdentityExample) {
  const std::vector<Pair> pre{pair({1, 0}, 1), pair({0, 1}, 2)};
  const WeightedRidge wr(Eigen::MatrixXd::Identity(2, 2), 1.0);
  const Eigen::VectorXd b = wr.fit(pre);
  EXPECT_NEAR(b[0], 0.5, 1e-14);
  EXPECT_NEAR(b[1], 1.0, 1e-14);
}

TEST(WeightedRidge, IsotropicPriorEqualsRidge) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.index(8));
    const std::size_t m = 1 + rng.index(12);
    const double lambda = rng.uniform(0.05, 2.0);
    std::vector<Pair> pre;
    for (std::size_t i = 0; i < m; ++i) {
      Pair p;
      p.x = rng.normal_vector(d);
      p.y = Eigen::VectorXd::Constant(1, rng.normal());
      pre.push_back(p);
    }
    const Eigen::VectorXd q = rng.normal_vector(d);
    const double a = WeightedRidge(Eigen::MatrixXd::Identity(d, d), lambda).predict(pre, q)[0];
    const double b = Ridge(lambda).predict(pre, q)[0];
    EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, std::abs(b)));
  }
}

TEST(WeightedRidge, OrderInvariance) {
  Rng rng(5);
  std::vector<Pair> pre;
  for (int i = 0; i < 7; ++i) pre.push_back({rng.normal_vector(4), Eigen::VectorXd::Constant(1, rng.normal())});
  const Eigen::VectorXd q = rng.normal_vector(4);
  const WeightedRidge wr(harmonic_square_cov(4), 0.3);
  const double a = wr.predict(pre, q)[0];
  std::reverse(pre.begin(), pre.end());
  EXPECT_NEAR(wr.predict(pre, q)[0], a, 1e-12);
  EXPECT_NEAR(OrdinaryLeastSquares().predict(pre, q)[0], OrdinaryLeastSquares().predict(pre, q)[0], 0.0);
}

TEST(RidgeGrid, SingletonGrid) {
  const auto seqs = sample_sequences(LinearTaskDistribution{3, {}, 0.2}, 20, 6, 7);
  const auto res = ridge_grid_best(seqs, {0.3});
  for (double l : res.best_lambda) EXPECT_EQ(l, 0.3);
}

TEST(RidgeGrid, NoiselessPicksZeroOnceDetermined) {
  const auto seqs = sample_sequences(LinearTaskDistribution{3, {}, 0.0}, 50, 10, 8);
  const auto res = ridge_grid_best(seqs, {0.0, 1.0});
  for (std::size_t m = 3; m < 10; ++m) EXPECT_EQ(res.best_lambda[m], 0.0) << "m = " << m;
}

TEST(EmpiricalCovRidge, CovarianceArithmetic) {
  const std::vector<Eigen::VectorXd> betas{Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};
  const Eigen::MatrixXd s = EmpiricalCovRidge::empirical_cov(betas);
  EXPECT_TRUE(s.isApprox(0.5 * Eigen::MatrixXd::Identity(2, 2)));
}

TEST(EmpiricalCovRidge, RankOneSourceIsFinite) {
  const std::vector<Eigen::VectorXd> betas{Eigen::Vector3d(1, 2, -1)};
  const EmpiricalCovRidge alg(betas, 0.1);
  const std::vector<Pair> pre{pair({1, 0, 0}, 1), pair({0, 1, 0}, 2)};
  EXPECT_TRUE(std::isfinite(alg.predict(pre, Eigen::Vector3d(1, 1, 1))[0]));
  EXPECT_TRUE(alg.estimated_cov().allFinite());
}

TEST(GreedyMtl, ExactMatch) {
  const GreedyMtl g({Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)});
  const auto pre = noiseless_prefix(Eigen::Vector2d(1, 0), 5, 9);
  EXPECT_EQ(g.select(pre), 0u);
  const Eigen::Vector2d q(0.3, -0.7);
  EXPECT_DOUBLE_EQ(g.predict(pre, q)[0], 0.3);
}

TEST(GreedyMtl, DuplicatesTieToLowestIndex) {
  const GreedyMtl g({Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 0)});
  EXPECT_EQ(g.select(noiseless_prefix(Eigen::Vector2d(1, 0), 4, 10)), 1u);
}

TEST(ArLs, ScalarCoefficient) {
  TaskSpec t;
  t.kind = TaskKind::Lds;
  t.A = Eigen::MatrixXd::Constant(1, 1, 0.5);
  t.C = Eigen::MatrixXd::Identity(1, 1);
  Rng rng(1);
  RolloutOptions opt;
  opt.initial_state = Eigen::VectorXd::Ones(1);
  const auto seq = rollout(t, 8, rng, opt);
  const ArLeastSquares ar(1);
  const PrefixView all(seq.pairs);
  EXPECT_NEAR(ar.fit(all.first(5))(0, 0), 0.5, 1e-10);
  EXPECT_NEAR(ar.predict(all.first(5), seq.pairs[5].x)[0], seq.pairs[5].y[0], 1e-12);
}

TEST(ArLs, IdentifiesFullyObservedSystem) {
  Rng rng(2);
  const TaskSpec t = sample_lds_task(10, 10, 0.9, rng, 0.0);
  RolloutOptions start;
  start.initial_state = rng.normal_vector(10);
  const auto seq = rollout(t, 30, rng, start);
  const ArLeastSquares ar(1);
  const PrefixView all(seq.pairs);
  const Eigen::MatrixXd a_hat = ar.fit(all.first(11));
  EXPECT_LT((a_hat - t.A).norm(), 1e-6);
}

TEST(ArLs, LongerWindowHelpsUnderPartialObservation) {
  const TaskDistribution dist = LdsTaskDistribution{6, 2, 0.9, 1.0, ObservationMode::Partial};
  RiskCurveOptions opt;
  opt.n = 60;
  opt.reps = 300;
  opt.seed = 21;
  const RiskCurve h1 = risk_curve(ArLeastSquares(1), dist, opt);
  const RiskCurve h4 = risk_curve(ArLeastSquares(4), dist, opt);
  double a = 0, b = 0;
  for (std::size_t m = 40; m < 60; ++m) {
    a += h1.mean[m];
    b += h4.mean[m];
  }
  EXPECT_LT(b, a);
}

TEST(SparseErm, RecoversSupport) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(8);
  beta[2] = 1.5;
  beta[6] = -0.7;
  const auto pre = noiseless_prefix(beta, 12, 3);
  EXPECT_LT((SparseErm(2).fit(pre) - beta).norm(), 1e-10);
}

TEST(ModelSelection, SingleClass) {
  HypothesisClassFamily f;
  f.risk = (Eigen::MatrixXd(1, 3) << 0.3, 0.2, 0.1).finished();
  f.approx_error = Eigen::MatrixXd::Zero(1, 3);
  for (Eigen::Index m = 0; m < 3; ++m) EXPECT_EQ(adaptive_model_selection(f, m).selected, 0);
  EXPECT_NEAR(adaptive_model_selection(f, 0).averaged_bound, 0.2, 1e-15);
}

TEST(ModelSelection, TieBreakAndAveragedBound) {
  HypothesisClassFamily f;
  f.risk.resize(2, 4);
  f.risk.row(0).setConstant(0.5);
  for (int m = 0; m < 4; ++m) f.risk(1, m) = 1.0 / (m + 1);
  f.approx_error = Eigen::MatrixXd::Zero(2, 4);
  EXPECT_EQ(adaptive_model_selection(f, 0).selected, 0);
  EXPECT_EQ(adaptive_model_selection(f, 1).selected, 0);
  EXPECT_EQ(adaptive_model_selection(f, 2).selected, 1);
  EXPECT_EQ(adaptive_model_selection(f, 3).selected, 1);
  EXPECT_NEAR(adaptive_model_selection(f, 3).averaged_bound, 0.39583333333333333, 1e-15);
}

TEST(ModelSelection, AdaptiveNeverWorseThanFixedClass) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    HypothesisClassFamily f;
    f.risk = Eigen::MatrixXd::Random(3, 6).cwiseAbs();
    f.approx_error = Eigen::MatrixXd::Zero(3, 6);
    const double adaptive = adaptive_model_selection(f, 0).averaged_bound;
    for (Eigen::Index h = 0; h < 3; ++h) EXPECT_LE(adaptive, f.risk.row(h).mean() + 1e-15);
  }
}

TEST(AlgorithmJson, RoundTripIdentity) {
  const std::vector<AlgorithmPtr> algs{std::make_shared<Ridge>(0.25), std::make_shared<ArLeastSquares>(3),
                                       std::make_shared<SparseErm>(2), std::make_shared<RunningMean>()};
  for (const auto& a : algs) EXPECT_EQ(algorithm_from_json(a->identity())->id(), a->id());
  EXPECT_THROW(algorithm_from_json({{"kind", "nope"}}), InvalidInput);
}
