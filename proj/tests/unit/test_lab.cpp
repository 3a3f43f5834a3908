#include <gtest/gtest.h>

#include <sstream>

#include "test_support.hpp"

using namespace tripstab;
using namespace tripstab::testing;

TEST(SlopeFit, ExactPowerLaws) {
  const SlopeFit half = fit_loglog_slope({{100, 0.1}, {400, 0.05}, {1600, 0.025}});
  EXPECT_NEAR(half.slope, -0.5, 1e-14);
  EXPECT_NEAR(half.r_squared, 1.0, 1e-14);
  EXPECT_NEAR(half.slope_stderr, 0.0, 1e-7);
  EXPECT_NEAR(fit_loglog_slope({{10, 1}, {100, 0.1}, {1000, 0.01}}).slope, -1.0, 1e-14);
  EXPECT_EQ(fit_loglog_slope({{10, 0.3}, {20, 0.3}, {40, 0.3}}).slope, 0.0);
}

TEST(SlopeFit, Errors) {
  EXPECT_EQ(error_code_of([] { fit_loglog_slope({{10, 1}, {20, 0.0}, {40, 1}}); }), Errc::NonpositiveValue);
  EXPECT_EQ(error_code_of([] { fit_loglog_slope({{10, 1}, {20, 1}}); }), Errc::TooFewPoints);
}

TEST(SlopeFit, MatchesNormalEquations) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  std::vector<RatePoint> pts;
  for (double n : {8.0, 16.0, 32.0, 64.0, 128.0}) pts.push_back({n, u(rng) / std::sqrt(n)});
  Eigen::MatrixXd A(5, 2);
  Eigen::VectorXd y(5);
  for (int r = 0; r < 5; ++r) {
    A(r, 0) = 1.0;
    A(r, 1) = std::log(pts[static_cast<std::size_t>(r)].n);
    y(r) = std::log(pts[static_cast<std::size_t>(r)].value);
  }
  const Eigen::VectorXd beta = (A.transpose() * A).ldlt().solve(A.transpose() * y);
  const SlopeFit f = fit_loglog_slope(pts);
  EXPECT_NEAR(f.intercept, beta(0), 1e-12);
  EXPECT_NEAR(f.slope, beta(1), 1e-12);
}

TEST(SweepConfig, Validation) {
  SweepConfig c;
  c.n_grid = {32, 16, 64};
  EXPECT_EQ(error_code_of([&] { c.validate(); }), Errc::InvalidConfig);
  c.n_grid = {32, 64};
  EXPECT_EQ(error_code_of([&] { c.validate(); }), Errc::InvalidConfig);
  c.n_grid = {2, 8, 16};
  EXPECT_EQ(error_code_of([&] { c.validate(); }), Errc::InvalidConfig);
  c.n_grid = {8, 16, 32};
  EXPECT_NO_THROW(c.validate());
}

TEST(SweepConfig, SigmaRules) {
  SweepConfig c;
  c.sigma0 = 4.0;
  c.sigma_rule = SigmaRule::InvSqrtN;
  EXPECT_DOUBLE_EQ(c.sigma_at(16), 1.0);
  c.sigma_rule = SigmaRule::OptimisticSchedule;
  EXPECT_DOUBLE_EQ(c.sigma_at(16), 0.25);
  c.sigma_rule = SigmaRule::Constant;
  EXPECT_DOUBLE_EQ(c.sigma_at(16), 4.0);
  c.algorithm = Algorithm::Sgd;
  const auto s = std::get<SgdConfig>(c.trainer_at(64, 0));
  EXPECT_EQ(s.T, 64u);
  EXPECT_EQ(*s.c, regularity_constants(c.task.B).eta_max);
}

TEST(RateSweep, ConstantTrainerGivesZeroGapsAndFlagsTheFit) {
  SweepConfig c;
  c.algorithm = Algorithm::Constant;
  c.n_grid = {6, 8, 10};
  c.trials_per_n = 2;
  c.population_m = 100;
  const SweepReport r = run_rate_sweep(c);
  EXPECT_EQ(r.rows.size(), 6u);
  for (const auto& row : r.rows) EXPECT_EQ(row.gap, 0.0);
  EXPECT_FALSE(r.fit.has_value());
  EXPECT_NE(r.fit_error.find("NonpositiveValue"), std::string::npos);
}

TEST(RateSweep, SmallSgdSweepIsDeterministic) {
  SweepConfig c;
  c.n_grid = {8, 12, 16};
  c.trials_per_n = 3;
  c.population_m = 2000;
  c.proxy_triplets = 2000;
  c.task.noise_scale = 0.5;
  c.seed = 4;
  const SweepReport a = run_rate_sweep(c);
  const SweepReport b = run_rate_sweep(c);
  std::ostringstream oa, ob;
  write_sweep_rows_csv(oa, a);
  write_sweep_cells_csv(oa, a);
  write_fit_csv(oa, a.fit, a.fit_error);
  write_sweep_rows_csv(ob, b);
  write_sweep_cells_csv(ob, b);
  write_fit_csv(ob, b.fit, b.fit_error);
  EXPECT_EQ(oa.str(), ob.str());
  EXPECT_EQ(a.rows.size(), 9u);
  EXPECT_EQ(a.cells.size(), 3u);
  for (const auto& cell : a.cells) EXPECT_TRUE(std::isfinite(cell.mean_excess_proxy));
}

TEST(RateSweep, RrmRespectsTheTripletBudget) {
  SweepConfig c;
  c.algorithm = Algorithm::Rrm;
  c.n_grid = {8, 16, 300};
  EXPECT_EQ(error_code_of([&] { run_rate_sweep(c); }), Errc::BudgetExceeded);
}

TEST(ExcessRisk, TermsTelescope) {
  ExcessConfig c;
  c.sweep.algorithm = Algorithm::Rrm;
  c.sweep.sigma0 = 1.0;
  c.sweep.n_grid = {6, 8, 10};
  c.sweep.trials_per_n = 2;
  c.sweep.population_m = 3000;
  c.sweep.proxy_triplets = 3000;
  c.sweep.task.noise_scale = 0.4;
  c.bernstein_samples = 5000;
  const ExcessReport r = run_excess_risk_experiment(c);
  ASSERT_EQ(r.rows.size(), 6u);
  for (const auto& row : r.rows) {
    EXPECT_NEAR(row.estimation + row.optimization + row.deviation, row.total, 1e-12);
    EXPECT_GT(row.bernstein, 0.0);
  }
}

TEST(KernelMoments, ZeroMetric) {
  TripletSampler s = make_sampler(TaskConfig{});
  const KernelMoments km = estimate_kernel_moments(MetricParams::zero(2), s, 100, {0.0});
  EXPECT_EQ(km.b, std::log(2.0));
  EXPECT_EQ(km.tau, 0.0);
}

TEST(Optimistic, RegimeViolationBeforeTraining) {
  OptimisticConfig c;
  c.sweep.algorithm = Algorithm::Rrm;
  c.sweep.sigma_rule = SigmaRule::Constant;
  c.sweep.sigma0 = 0.01;
  c.sweep.n_grid = {8, 16, 32};
  c.sweep.task = low_noise_config();
  EXPECT_EQ(error_code_of([&] { run_optimistic_experiment(c); }), Errc::RegimeViolation);
}

TEST(Optimistic, NeedsRrm) {
  OptimisticConfig c;
  c.sweep.algorithm = Algorithm::Sgd;
  c.sweep.task = low_noise_config();
  EXPECT_EQ(error_code_of([&] { run_optimistic_experiment(c); }), Errc::InvalidConfig);
}

TEST(Optimistic, SmallRunProducesBoundsAndCells) {
  OptimisticConfig c;
  c.sweep.algorithm = Algorithm::Rrm;
  c.sweep.sigma_rule = SigmaRule::OptimisticSchedule;
  c.sweep.sigma0 = 512.0;
  c.sweep.n_grid = {8, 12, 16};
  c.sweep.trials_per_n = 2;
  c.sweep.population_m = 5000;
  c.sweep.proxy_triplets = 5000;
  c.sweep.task = low_noise_config(2, 1.6, 1.0);
  const OptimisticReport r = run_optimistic_experiment(c);
  ASSERT_EQ(r.cells.size(), 3u);
  for (const auto& cell : r.cells) {
    EXPECT_NEAR(cell.sigma, 512.0 / static_cast<double>(cell.n), 1e-12);
    EXPECT_NEAR(cell.epsilon, balanced_epsilon(cell.n, cell.n, cell.sigma), 1e-12);
    EXPECT_GE(cell.bound, 0.0);
    EXPECT_EQ(cell.dominated, cell.mean_gap <= cell.bound);
  }
  for (const auto& row : r.rows) EXPECT_NEAR(row.adjusted_gap, row.gap - row.reference_gap, 1e-15);
}
