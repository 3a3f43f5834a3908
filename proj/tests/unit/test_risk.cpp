#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace tripstab;
using namespace tripstab::testing;

TEST(EmpiricalRisk, ZeroMetricIsLogTwo) {
  std::mt19937_64 rng(1);
  const auto ds = random_dataset(rng, 7, 5, 3);
  const RiskEstimate r = empirical_risk(MetricParams::zero(3), ds, {0.0});
  EXPECT_EQ(r.value, std::log(2.0));
  EXPECT_EQ(r.std_error, 0.0);
  EXPECT_EQ(r.mode, RiskMode::ExactUStatistic);
  EXPECT_EQ(r.n_terms, ds.triplet_count());
}

TEST(EmpiricalRisk, MatchesTripleLoopOracle) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t np = 2 + rep % 5;
    const std::size_t nm = 1 + rep % 4;
    const auto ds = random_dataset(rng, np, nm, 2 + rep % 3);
    const MetricParams w = random_metric(rng, ds.dim(), 2.0);
    const double zeta = 0.1 * (rep % 7);
    EXPECT_NEAR(empirical_risk(w, ds, {zeta}).value, brute_force_risk(w, ds, zeta), 1e-12);
  }
}

TEST(EmpiricalRisk, FallsBackToSamplingAboveBudget) {
  std::mt19937_64 rng(3);
  const auto ds = random_dataset(rng, 500, 500, 2);
  const MetricParams w = random_metric(rng, 2);
  const RiskEstimate r = empirical_risk(w, ds, {0.0});
  EXPECT_EQ(r.mode, RiskMode::SampledTriplets);
  EXPECT_EQ(r.n_terms, 2000000u);
  EXPECT_GT(r.std_error, 0.0);
  EXPECT_EQ(error_code_of([&] { exact_empirical_risk(w, ds, {0.0}); }), Errc::BudgetExceeded);

  const auto small = random_dataset(rng, 40, 30, 2);
  const RiskEstimate exact = empirical_risk(w, small, {0.2});
  const RiskEstimate sampled = empirical_risk(w, small, {0.2}, 20000);
  EXPECT_EQ(sampled.mode, RiskMode::SampledTriplets);
  EXPECT_LT(std::abs(sampled.value - exact.value), 6.0 * sampled.std_error);
}

TEST(PopulationRisk, ZeroMetricIsExactlyLogTwo) {
  TripletSampler s = make_sampler(TaskConfig{});
  const RiskEstimate r = population_risk(MetricParams::zero(2), s, 1000, {0.0});
  EXPECT_EQ(r.value, std::log(2.0));
  EXPECT_EQ(r.std_error, 0.0);
  EXPECT_EQ(r.mode, RiskMode::MonteCarloPopulation);
}

TEST(PopulationRisk, IndependentSeedsAgree) {
  TaskConfig c;
  c.noise_scale = 0.3;
  std::mt19937_64 rng(4);
  const MetricParams w = random_metric(rng, 2, 2.0);
  TripletSampler a = make_sampler(c.with_seed(1));
  TripletSampler b = make_sampler(c.with_seed(2));
  const RiskEstimate ra = population_risk(w, a, 100000, {0.1});
  const RiskEstimate rb = population_risk(w, b, 100000, {0.1});
  EXPECT_LT(std::abs(ra.value - rb.value), 6.0 * std::hypot(ra.std_error, rb.std_error));
}

TEST(PopulationRisk, NeedsTwoSamples) {
  TripletSampler s = make_sampler(TaskConfig{});
  EXPECT_EQ(error_code_of([&] { population_risk(MetricParams::zero(2), s, 1, {0.0}); }), Errc::Precondition);
}

TEST(GeneralizationGap, ZeroMetricHasZeroGap) {
  Task t = gen_task(TaskConfig{});
  const GapEstimate g = generalization_gap(MetricParams::zero(2), t.train, t.sampler, 5000, {0.4});
  EXPECT_EQ(g.gap, 0.0);
}

TEST(GeneralizationGap, TrainingTripletsAsPopulationGiveZeroGap) {
  std::mt19937_64 rng(5);
  const auto ds = random_dataset(rng, 5, 4, 2);
  const MetricParams w = random_metric(rng, 2);
  const auto all = enumerate_triplets(ds);
  TripletBatch b{RowMatrix(static_cast<Eigen::Index>(all.size()), 2), RowMatrix(static_cast<Eigen::Index>(all.size()), 2),
                 RowMatrix(static_cast<Eigen::Index>(all.size()), 2)};
  for (std::size_t r = 0; r < all.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    b.anchors.row(row) = ds.positive(all[r].i);
    b.positives.row(row) = ds.positive(all[r].j);
    b.negatives.row(row) = ds.negative(all[r].k);
  }
  const GapEstimate g = combine_gap(batch_risk(w, b, {0.0}), empirical_risk(w, ds, {0.0}));
  EXPECT_NEAR(g.gap, 0.0, 1e-14);
}

TEST(BernsteinBound, HandValue) {
  EXPECT_NEAR(bernstein_ustat_bound(1.0, 0.25, 0.05, 100, 50), 0.42605, 1e-5);
  const double lg = std::log(20.0);
  const double expect = 2.0 * (2.0 * lg / 150.0 + std::sqrt(0.5 * lg / 50.0));
  EXPECT_NEAR(bernstein_ustat_bound(1.0, 0.25, 0.05, 100, 50), expect, 1e-15);
}

TEST(BernsteinBound, Limits) {
  EXPECT_LT(bernstein_ustat_bound(1.0, 0.25, 1.0 - 1e-12, 100, 50), 1e-5);
  const double lg = std::log(20.0);
  EXPECT_NEAR(bernstein_ustat_bound(1.0, 0.0, 0.05, 100, 50), 2.0 * lg / 150.0 + 2.0 * lg / 150.0, 1e-15);
  EXPECT_EQ(error_code_of([] { bernstein_ustat_bound(1.0, 0.25, 0.0, 100, 50); }), Errc::InvalidDelta);
  EXPECT_EQ(error_code_of([] { bernstein_ustat_bound(1.0, 0.25, 0.1, 1, 50); }), Errc::InvalidCounts);
}

TEST(RiskDerivatives, GradientMatchesPerTripletSum) {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const auto ds = random_dataset(rng, 6, 5, 3);
    const MetricParams w = random_metric(rng, 3);
    const LossConfig cfg{0.3};
    Matrix g = Matrix::Zero(3, 3);
    for (const auto& t : enumerate_triplets(ds))
      g += logistic_triplet_grad(w, {ds.positive(t.i).transpose(), ds.positive(t.j).transpose(),
                                     ds.negative(t.k).transpose()},
                                 cfg);
    g /= static_cast<double>(ds.triplet_count());
    const RiskDerivatives d = risk_derivatives(w, ds, cfg, true);
    EXPECT_LT((d.gradient - g).norm(), 1e-13);
    EXPECT_NEAR(d.value, brute_force_risk(w, ds, 0.3), 1e-13);

    const auto all = enumerate_triplets(ds);
    const RiskDerivatives d2 = risk_derivatives_on(w, ds, all, cfg, true);
    EXPECT_LT((d2.gradient - g).norm(), 1e-13);
    EXPECT_LT((d2.hessian - d.hessian).norm(), 1e-12);
  }
}

TEST(RiskDerivatives, HessianMatchesFiniteDifferenceOfGradient) {
  std::mt19937_64 rng(7);
  const auto ds = random_dataset(rng, 5, 4, 3);
  const MetricParams w = random_metric(rng, 3);
  const LossConfig cfg{0.2};
  const RiskDerivatives d = risk_derivatives(w, ds, cfg, true);
  const std::size_t p = packed_size(3);
  const double h = 1e-6;
  for (std::size_t c = 0; c < p; ++c) {
    Vector e = Vector::Zero(static_cast<Eigen::Index>(p));
    e(static_cast<Eigen::Index>(c)) = h;
    MetricParams wp = w, wm = w;
    wp.add_scaled(1.0, unpack_symmetric(e, 3));
    wm.add_scaled(-1.0, unpack_symmetric(e, 3));
    const Vector col = (pack_symmetric(risk_derivatives(wp, ds, cfg, false).gradient) -
                        pack_symmetric(risk_derivatives(wm, ds, cfg, false).gradient)) /
                       (2.0 * h);
    EXPECT_LT((col - d.hessian.col(static_cast<Eigen::Index>(c))).norm(), 1e-7);
  }
}

TEST(Packing, PreservesFrobeniusNormAndRoundTrips) {
  std::mt19937_64 rng(8);
  const MetricParams w = random_metric(rng, 4);
  const Vector v = pack_symmetric(w.matrix());
  EXPECT_NEAR(v.norm(), w.frobenius_norm(), 1e-14);
  EXPECT_LT((unpack_symmetric(v, 4) - w.matrix()).norm(), 1e-15);
}
