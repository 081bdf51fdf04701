#include <gtest/gtest.h>

#include "icl/errors.hpp"
#include "icl/parallel.hpp"
#include "icl/riskeval.hpp"

using namespace icl;

TEST(RiskCurve, ShapeAndCsv) {
  RiskCurveOptions opt;
  opt.n = 4;
  opt.reps = 30;
  opt.seed = 1;
  const RiskCurve c = risk_curve(OrdinaryLeastSquares(), LinearTaskDistribution{2, {}, 0.0}, opt);
  EXPECT_EQ(c.length(), 4u);
  CsvTable t = risk_curve_table();
  c.append_to(t);
  EXPECT_EQ(t.rows().size(), 4u);
  EXPECT_EQ(t.rows()[0][3], "ols");
}

TEST(RiskCurve, ThreadCountDoesNotChangeResults) {
  RiskCurveOptions opt;
  opt.n = 8;
  opt.reps = 64;
  opt.seed = 2;
  const TaskDistribution dist = LinearTaskDistribution{3, {}, 0.3};
  thread_override() = 1;
  const RiskCurve a = risk_curve(Ridge(0.1), dist, opt);
  thread_override() = 5;
  const RiskCurve b = risk_curve(Ridge(0.1), dist, opt);
  thread_override() = 0;
  EXPECT_EQ(a.samples, b.samples);
}

TEST(RiskCurve, NoiselessOlsIsExactOnceDetermined) {
  RiskCurveOptions opt;
  opt.n = 8;
  opt.reps = 40;
  const RiskCurve c = risk_curve(OrdinaryLeastSquares(), LinearTaskDistribution{3, {}, 0.0}, opt);
  for (std::size_t m = 3; m < 8; ++m) EXPECT_LT(c.mean[m], 1e-16);
}

TEST(RiskCurve, FixedTaskModeSharesTask) {
  RiskCurveOptions opt;
  opt.n = 2;
  opt.reps = 50;
  opt.mode = TaskMode::FixedTask;
  // With a single shared task, the constant-zero predictor's loss at m = 0
  // is (beta^T x)^2, whose mean over replicas is ||beta||^2.
  const RiskCurve c = risk_curve(ConstantPredictor(0.0), LinearTaskDistribution{2, {}, 0.0}, opt);
  EXPECT_GT(c.std_error[0], 0.0);
  EXPECT_THROW(paired_difference(c, risk_curve(ConstantPredictor(0.0), LinearTaskDistribution{2, {}, 0.0},
                                               RiskCurveOptions{3, 50, 0})),
               InvalidInput);
}

TEST(PairedDifference, SelfDifferenceIsZero) {
  RiskCurveOptions opt;
  opt.n = 5;
  opt.reps = 30;
  const RiskCurve c = risk_curve(Ridge(1.0), LinearTaskDistribution{2, {}, 0.1}, opt);
  const auto d = paired_difference(c, c);
  for (double v : d.mean) EXPECT_EQ(v, 0.0);
}

TEST(EmpiricalRisk, ConstantPredictorOnKnownData) {
  MetaDataset ds;
  ds.sequences.resize(1);
  PromptSequence s;
  for (double y : {1.0, 3.0}) s.pairs.push_back({Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, y)});
  ds.sequences[0].push_back(s);
  EXPECT_DOUBLE_EQ(empirical_mtl_risk(ConstantPredictor(1.0), ds), 2.0);
  EXPECT_THROW(empirical_mtl_risk(ConstantPredictor(1.0), MetaDataset{}), InvalidInput);
}

TEST(ExcessRisk, OracleAgainstItselfIsZero) {
  RiskCurveOptions opt;
  opt.n = 6;
  opt.reps = 30;
  const auto e = excess_mtl_risk(Ridge(0.5), Ridge(0.5), LinearTaskDistribution{2, {}, 0.2}, opt);
  EXPECT_EQ(e.value, 0.0);
}

TEST(RidgeBest, RequiresIndependentSelection) {
  RiskCurveOptions opt;
  opt.seed = 3;
  EXPECT_THROW(ridge_best_curve(LinearTaskDistribution{2, {}, 0.5}, {0.1, 1.0}, 3, opt), InvalidInput);
}

TEST(Greedy, SelectionAccuracyNoiseless) {
  const auto acc = greedy_selection_accuracy(LinearTaskDistribution{5, {}, 0.0}, 32, 6, 200, 4);
  EXPECT_EQ(acc.correct, acc.trials);
}

TEST(Greedy, TransferRiskGrowsWithSourceDistance) {
  Rng rng(5);
  LinearTaskDistribution target;
  target.dim = 3;
  target.law = BetaLaw::Sphere;
  target.noise_std = 0.1;
  const auto sources = sample_source_betas(target, 8, rng);
  const auto buckets = greedy_transfer_by_distance(sources, target, 10, 20000, 6, {0.0, 0.3, 0.6, 2.1});
  ASSERT_EQ(buckets.size(), 3u);
  for (const auto& b : buckets) ASSERT_GT(b.count, 100u);
  EXPECT_LT(buckets[0].mean, buckets[1].mean);
  EXPECT_LT(buckets[1].mean, buckets[2].mean);
}
