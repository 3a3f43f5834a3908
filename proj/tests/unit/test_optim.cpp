#include <gtest/gtest.h>

#include <sstream>

#include "test_support.hpp"

using namespace tripstab;
using namespace tripstab::testing;

namespace {

/// Every triplet of this dataset is x+ = x~+ = (1, 0), x- = (0, 0).
TripletDataset hand_dataset() { return make_dataset({pos({1, 0}), pos({1, 0})}, {neg({0, 0})}); }

}  // namespace

TEST(SgdStep, HandExample) {
  const MetricParams w2 = sgd_step(MetricParams::zero(2), {vec({1, 0}), vec({1, 0}), vec({0, 0})}, 0.1, {0.0});
  Matrix expect = Matrix::Zero(2, 2);
  expect(0, 0) = -0.05;
  EXPECT_LT((w2.matrix() - expect).norm(), 1e-16);
}

TEST(SgdTrain, SingleStepWithLargestAdmissibleFactor) {
  SgdConfig cfg;
  cfg.T = 1;
  cfg.c = 1.0 / 32.0;
  const SgdResult r = sgd_train(hand_dataset(), cfg);
  Matrix expect = Matrix::Zero(2, 2);
  expect(0, 0) = -1.0 / 64.0;
  EXPECT_LT((r.w.matrix() - expect).norm(), 1e-17);
  ASSERT_EQ(r.trace.steps.size(), 1u);
  EXPECT_EQ(r.trace.steps[0].eta, 1.0 / 32.0);
}

TEST(SgdTrain, NoStepsReturnsZero) {
  SgdConfig cfg;
  cfg.T = 0;
  const SgdResult r = sgd_train(hand_dataset(), cfg);
  EXPECT_TRUE(r.w == MetricParams::zero(2));
  EXPECT_TRUE(r.trace.steps.empty());
}

TEST(SgdTrain, RejectsOversizedStepFactor) {
  SgdConfig cfg;
  cfg.c = 0.1;
  EXPECT_EQ(error_code_of([&] { sgd_train(hand_dataset(), cfg); }), Errc::StepSizeTooLarge);
}

TEST(SgdTrain, DeterministicAndSymmetric) {
  Task t = gen_task(TaskConfig{});
  SgdConfig cfg;
  cfg.T = 500;
  cfg.seed = 42;
  const SgdResult a = sgd_train(t.train, cfg);
  const SgdResult b = sgd_train(t.train, cfg);
  EXPECT_TRUE(a.w == b.w);
  ASSERT_EQ(a.trace.steps.size(), b.trace.steps.size());
  for (std::size_t s = 0; s < a.trace.steps.size(); ++s) {
    EXPECT_EQ(a.trace.steps[s].i, b.trace.steps[s].i);
    EXPECT_EQ(a.trace.steps[s].k, b.trace.steps[s].k);
    EXPECT_NE(a.trace.steps[s].i, a.trace.steps[s].j);
  }
  EXPECT_EQ(a.w.matrix(), a.w.matrix().transpose());
}

TEST(SgdTrain, SameSeedGivesSameDrawsOnDifferentData) {
  TaskConfig c;
  SgdConfig cfg;
  cfg.T = 200;
  cfg.seed = 3;
  const SgdResult a = sgd_train(gen_task(c.with_seed(1)).train, cfg);
  const SgdResult b = sgd_train(gen_task(c.with_seed(2)).train, cfg);
  for (std::size_t s = 0; s < a.trace.steps.size(); ++s) {
    EXPECT_EQ(a.trace.steps[s].i, b.trace.steps[s].i);
    EXPECT_EQ(a.trace.steps[s].j, b.trace.steps[s].j);
    EXPECT_EQ(a.trace.steps[s].k, b.trace.steps[s].k);
  }
}

TEST(SgdTrain, MatchesStepByStepReplay) {
  Task t = gen_task(TaskConfig{});
  SgdConfig cfg;
  cfg.T = 300;
  cfg.seed = 9;
  cfg.zeta = 0.2;
  const SgdResult r = sgd_train(t.train, cfg);
  MetricParams w = MetricParams::zero(2);
  for (const auto& s : r.trace.steps)
    w = sgd_step(w, {t.train.positive(s.i).transpose(), t.train.positive(s.j).transpose(),
                     t.train.negative(s.k).transpose()},
                 s.eta, cfg.loss());
  EXPECT_LT((w.matrix() - r.w.matrix()).norm(), 1e-14);
}

TEST(TraceCsv, MarksHitSteps) {
  TrainTrace tr{3, 2, {{1, 0, 1, 0, 0.5}, {2, 2, 1, 1, 0.5}}};
  std::ostringstream out;
  write_trace_csv(out, tr, SlotRef{Pool::Positive, 0});
  EXPECT_EQ(out.str(), "t,i,j,k,eta,hit_slot_flag\n1,0,1,0,0.5,1\n2,2,1,1,0.5,0\n");
  EXPECT_EQ(tr.indicator_hits(SlotRef{Pool::Negative, 1}), 1u);
  EXPECT_EQ(error_code_of([&] { tr.indicator_hits(SlotRef{Pool::Negative, 2}); }), Errc::SlotOutOfBounds);
}

TEST(Uniformity, UniformDrawsPass) {
  std::mt19937_64 rng(1);
  const auto ds = random_dataset(rng, 4, 3, 2);
  SgdConfig cfg;
  cfg.T = 100000;
  cfg.seed = 5;
  const UniformityResult u = sampling_uniformity_check(sgd_train(ds, cfg).trace);
  EXPECT_FALSE(u.marginal);
  EXPECT_EQ(u.dof, 35.0);
  EXPECT_GT(u.p_value, 0.001);
}

TEST(Uniformity, AdversarialTraceFails) {
  TrainTrace tr{4, 3, {}};
  for (std::uint64_t t = 1; t <= 10000; ++t) tr.steps.push_back({t, 0, 1, 0, 0.01});
  EXPECT_LT(sampling_uniformity_check(tr).p_value, 1e-10);
}

TEST(Uniformity, EmptyTraceIsRejected) {
  EXPECT_EQ(error_code_of([] { sampling_uniformity_check(TrainTrace{4, 3, {}}); }), Errc::Precondition);
}

TEST(Uniformity, LargeIndexSetUsesMarginals) {
  std::mt19937_64 rng(2);
  const auto ds = random_dataset(rng, 50, 50, 2);
  SgdConfig cfg;
  cfg.T = 5000;
  const UniformityResult u = sampling_uniformity_check(sgd_train(ds, cfg).trace);
  EXPECT_TRUE(u.marginal);
  EXPECT_GT(u.p_value, 1e-4);
}

TEST(Expansiveness, IdenticalIteratesAndOversizedStep) {
  std::mt19937_64 rng(3);
  const MetricParams w = random_metric(rng, 2);
  const TripletFeatures t{vec({0.5, 0.5}), vec({-0.2, 0.1}), vec({0.3, -0.6})};
  const ExpansivenessResult e = expansiveness_check(w, w, t, 0.01, {0.0});
  EXPECT_EQ(e.lhs, 0.0);
  EXPECT_TRUE(e.holds);
  const double alpha = regularity_constants(triplet_bound(t)).alpha;
  EXPECT_EQ(error_code_of([&] { expansiveness_check(w, w, t, 10.0 / alpha, {0.0}); }), Errc::StepSizeTooLarge);
}

TEST(Rrm, HugeRidgeKeepsSolutionNearZero) {
  std::mt19937_64 rng(4);
  const auto ds = random_dataset(rng, 6, 4, 2, 0.7);
  ASSERT_LE(feature_bound(ds), 1.0);
  RrmConfig cfg;
  cfg.lambda = 1e6;
  const RrmResult r = rrm_train(ds, cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.w.frobenius_norm(), 4e-6);
}

TEST(Rrm, ConstantLossesGiveZero) {
  const auto ds = make_dataset({pos({0.3, 0.1}), pos({0.3, 0.1}), pos({0.3, 0.1})}, {neg({0.3, 0.1})});
  RrmConfig cfg;
  const RrmResult r = rrm_train(ds, cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.w.frobenius_norm(), 0.0);
}

TEST(Rrm, StoppingContractAndOptimality) {
  Task t = gen_task(TaskConfig{}.with_sizes(12, 10));
  RrmConfig cfg;
  cfg.lambda = 0.05;
  cfg.tol = 1e-8;
  const RrmResult r = rrm_train(t.train, cfg);
  ASSERT_TRUE(r.converged);
  const Matrix grad = risk_derivatives(r.w, t.train, cfg.loss(), false).gradient + 2.0 * cfg.lambda * r.w.matrix();
  EXPECT_LE(grad.norm(), 1e-8);
  EXPECT_EQ(r.w.matrix(), r.w.matrix().transpose());

  const double f0 = regularized_objective(r.w, t.train, cfg);
  std::mt19937_64 rng(5);
  const double s = 1e-3;
  for (int dir = 0; dir < 100; ++dir) {
    Matrix u = random_metric(rng, 2).matrix();
    u /= u.norm();
    MetricParams w2 = r.w;
    w2.add_scaled(s, u);
    EXPECT_GE(regularized_objective(w2, t.train, cfg), f0 - cfg.tol * s);
  }
}

TEST(Rrm, NewtonAndGradientDescentAgree) {
  Task t = gen_task(TaskConfig{}.with_sizes(8, 6));
  RrmConfig cfg;
  cfg.lambda = 0.5;
  cfg.tol = 1e-9;
  const RrmResult newton = rrm_train(t.train, cfg);
  cfg.solver = RrmSolver::GradientDescent;
  const RrmResult gd = rrm_train(t.train, cfg);
  ASSERT_TRUE(newton.converged);
  ASSERT_TRUE(gd.converged);
  // Both are within tol / (2 lambda) of the unique minimizer.
  EXPECT_LE((newton.w.matrix() - gd.w.matrix()).norm(), 2e-9 / (2.0 * cfg.lambda));
}

TEST(Rrm, IterationCapIsReported) {
  Task t = gen_task(TaskConfig{}.with_sizes(8, 6));
  RrmConfig cfg;
  cfg.solver = RrmSolver::GradientDescent;
  cfg.max_iters = 2;
  cfg.tol = 1e-14;
  const RrmResult r = rrm_train(t.train, cfg);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 2u);
}

TEST(Rrm, ConfigAndBudgetChecks) {
  Task t = gen_task(TaskConfig{}.with_sizes(8, 6));
  RrmConfig cfg;
  cfg.lambda = 0.0;
  EXPECT_EQ(error_code_of([&] { rrm_train(t.train, cfg); }), Errc::InvalidConfig);
  cfg = RrmConfig{};
  cfg.triplet_budget = 10;
  EXPECT_EQ(error_code_of([&] { rrm_train(t.train, cfg); }), Errc::BudgetExceeded);
}

TEST(RegularizedObjective, ZeroAndOracle) {
  std::mt19937_64 rng(6);
  const auto ds = random_dataset(rng, 4, 3, 2);
  RrmConfig cfg;
  cfg.zeta = 0.7;
  EXPECT_NEAR(regularized_objective(MetricParams::zero(2), ds, cfg), logistic::phi(0.7), 1e-15);
  const MetricParams w = random_metric(rng, 2);
  const double expect = brute_force_risk(w, ds, 0.7) + cfg.lambda * w.frobenius_norm() * w.frobenius_norm();
  EXPECT_NEAR(regularized_objective(w, ds, cfg), expect, 1e-12);
}
