#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "tripstab/core.hpp"
#include "tripstab/error.hpp"
#include "tripstab/loss.hpp"
#include "tripstab/numeric.hpp"
#include "tripstab/synth.hpp"

namespace tripstab {

enum class RiskMode { ExactUStatistic, SampledTriplets, MonteCarloPopulation };

constexpr std::string_view to_string(RiskMode m) noexcept {
  switch (m) {
    case RiskMode::ExactUStatistic: return "exact";
    case RiskMode::SampledTriplets: return "sampled";
    case RiskMode::MonteCarloPopulation: return "population";
  }
  return "unknown";
}

struct RiskEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t n_terms = 0;
  RiskMode mode = RiskMode::ExactUStatistic;
};

inline constexpr std::uint64_t kDefaultTripletBudget = 2'000'000;
inline constexpr std::uint64_t kDefaultSampleSeed = 0x7269736bULL;

/// All scores the empirical risk needs: pos_pos(i, j) = h(x_i+, x_j+) and
/// pos_neg(i, k) = h(x_i+, x_k-). Every triplet margin is then
/// pos_pos(i, j) - pos_neg(i, k) + zeta, which turns the O(N d^2) risk into
/// O((n+^2 + n+ n-) d^2 + N).
struct PairScores {
  RowMatrix pos_pos;
  RowMatrix pos_neg;
};

inline PairScores pair_scores(const MetricParams& w, const TripletDataset& ds) {
  detail::check_dims(w, static_cast<Eigen::Index>(ds.dim()));
  const RowMatrix& X = ds.positives();
  const RowMatrix& Y = ds.negatives();
  const Matrix& m = w.matrix();
  const auto np = X.rows();
  const auto nm = Y.rows();
  PairScores s{RowMatrix(np, np), RowMatrix(np, nm)};
  for (Eigen::Index i = 0; i < np; ++i) {
    s.pos_pos(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < np; ++j) {
      const double v = detail::quad_diff(m, X.row(i), X.row(j));
      s.pos_pos(i, j) = v;
      s.pos_pos(j, i) = v;
    }
    for (Eigen::Index k = 0; k < nm; ++k) s.pos_neg(i, k) = detail::quad_diff(m, X.row(i), Y.row(k));
  }
  return s;
}

/// Calls fn(i, j, k, u) for every triplet in lexicographic order.
template <class Fn>
void for_each_margin(const PairScores& s, double zeta, Fn&& fn) {
  const auto np = s.pos_pos.rows();
  const auto nm = s.pos_neg.cols();
  for (Eigen::Index i = 0; i < np; ++i) {
    for (Eigen::Index j = 0; j < np; ++j) {
      if (i == j) continue;
      const double base = s.pos_pos(i, j) + zeta;
      for (Eigen::Index k = 0; k < nm; ++k) fn(i, j, k, base - s.pos_neg(i, k));
    }
  }
}

namespace detail {

inline RiskEstimate exact_risk(const MetricParams& w, const TripletDataset& ds, const LossConfig& cfg) {
  const PairScores s = pair_scores(w, ds);
  ShiftedMean acc;
  for_each_margin(s, cfg.zeta, [&](auto, auto, auto, double u) { acc.add(logistic::phi(u)); });
  return {acc.mean(), 0.0, acc.count(), RiskMode::ExactUStatistic};
}

inline RiskEstimate sampled_risk(const MetricParams& w, const TripletDataset& ds, const LossConfig& cfg,
                                 std::uint64_t budget, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint64_t> pick(0, ds.triplet_count() - 1);
  const Matrix& m = w.matrix();
  const RowMatrix& X = ds.positives();
  const RowMatrix& Y = ds.negatives();
  RunningStats stats;
  for (std::uint64_t r = 0; r < budget; ++r) {
    const TripletIndex t = triplet_at(pick(rng), ds.n_plus(), ds.n_minus());
    const auto i = static_cast<Eigen::Index>(t.i);
    const double u = quad_diff(m, X.row(i), X.row(static_cast<Eigen::Index>(t.j))) -
                     quad_diff(m, X.row(i), Y.row(static_cast<Eigen::Index>(t.k))) + cfg.zeta;
    stats.add(logistic::phi(u));
  }
  return {stats.mean(), stats.std_error(), budget, RiskMode::SampledTriplets};
}

}  // namespace detail

/// R_S(w). Exact when the triplet count fits in the budget, otherwise an
/// i.i.d. uniform triplet sample of size `budget`.
inline RiskEstimate empirical_risk(const MetricParams& w, const TripletDataset& ds, const LossConfig& cfg,
                                   std::optional<std::uint64_t> budget = std::nullopt,
                                   std::uint64_t sample_seed = kDefaultSampleSeed) {
  cfg.validate();
  detail::check_dims(w, static_cast<Eigen::Index>(ds.dim()));
  const std::uint64_t cap = budget.value_or(kDefaultTripletBudget);
  require(cap >= 1, Errc::InvalidConfig, "triplet budget must be at least 1");
  if (ds.triplet_count() <= cap) return detail::exact_risk(w, ds, cfg);
  return detail::sampled_risk(w, ds, cfg, cap, sample_seed);
}

/// Exact R_S(w); BudgetExceeded when the triplet count is above `budget`.
inline double exact_empirical_risk(const MetricParams& w, const TripletDataset& ds, const LossConfig& cfg,
                                   std::uint64_t budget = kDefaultTripletBudget) {
  cfg.validate();
  require(ds.triplet_count() <= budget, Errc::BudgetExceeded,
          "dataset has " + std::to_string(ds.triplet_count()) + " triplets, budget is " +
              std::to_string(budget));
  return detail::exact_risk(w, ds, cfg).value;
}

/// Monte Carlo R(w) over m fresh triplets. Advances the sampler.
inline RiskEstimate population_risk(const MetricParams& w, TripletSampler& sampler, std::uint64_t m,
                                    const LossConfig& cfg) {
  cfg.validate();
  require(m >= 2, Errc::Precondition, "population risk needs m >= 2");
  detail::check_dims(w, static_cast<Eigen::Index>(sampler.dim()));
  constexpr std::uint64_t kChunk = 8192;
  const Matrix& wm = w.matrix();
  RunningStats stats;
  for (std::uint64_t done = 0; done < m;) {
    const std::uint64_t take = std::min(kChunk, m - done);
    const TripletBatch b = sampler.draw_batch(take);
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(take); ++r) {
      const double u = detail::quad_diff(wm, b.anchors.row(r), b.positives.row(r)) -
                       detail::quad_diff(wm, b.anchors.row(r), b.negatives.row(r)) + cfg.zeta;
      stats.add(logistic::phi(u));
    }
    done += take;
  }
  return {stats.mean(), stats.std_error(), m, RiskMode::MonteCarloPopulation};
}

/// Monte Carlo R(w) on a fixed batch of triplets (common random numbers).
inline RiskEstimate batch_risk(const MetricParams& w, const TripletBatch& b, const LossConfig& cfg) {
  cfg.validate();
  require(b.size() >= 2, Errc::Precondition, "population risk needs m >= 2");
  detail::check_dims(w, b.anchors.cols());
  const Matrix& wm = w.matrix();
  RunningStats stats;
  for (Eigen::Index r = 0; r < b.anchors.rows(); ++r) {
    const double u = detail::quad_diff(wm, b.anchors.row(r), b.positives.row(r)) -
                     detail::quad_diff(wm, b.anchors.row(r), b.negatives.row(r)) + cfg.zeta;
    stats.add(logistic::phi(u));
  }
  return {stats.mean(), stats.std_error(), b.size(), RiskMode::MonteCarloPopulation};
}

struct GapEstimate {
  double gap = 0.0;
  double std_error = 0.0;
  RiskEstimate population;
  RiskEstimate empirical;
};

inline GapEstimate combine_gap(const RiskEstimate& pop, const RiskEstimate& emp) {
  return {pop.value - emp.value, std::hypot(pop.std_error, emp.std_error), pop, emp};
}

/// R(w) - R_S(w) with the two standard errors combined in quadrature.
inline GapEstimate generalization_gap(const MetricParams& w, const TripletDataset& ds, TripletSampler& sampler,
                                      std::uint64_t m, const LossConfig& cfg,
                                      std::optional<std::uint64_t> budget = std::nullopt) {
  const RiskEstimate emp = empirical_risk(w, ds, cfg, budget);
  const RiskEstimate pop = population_risk(w, sampler, m, cfg);
  return combine_gap(pop, emp);
}

/// Deviation bound for the two-sample triplet U-statistic with kernel range b
/// and kernel variance tau, at confidence 1 - delta.
inline double bernstein_ustat_bound(double b, double tau, double delta, std::size_t n_plus,
                                    std::size_t n_minus) {
  require(std::isfinite(delta) && delta > 0.0 && delta < 1.0, Errc::InvalidDelta, "delta must lie in (0, 1)");
  require(n_plus >= 2 && n_minus >= 1, Errc::InvalidCounts, "need n_plus >= 2 and n_minus >= 1");
  require(std::isfinite(b) && b > 0.0, Errc::InvalidInputs, "b must be positive");
  require(std::isfinite(tau) && tau >= 0.0, Errc::InvalidInputs, "tau must be nonnegative");
  const double lg = std::log(1.0 / delta);
  const double mp = std::floor(static_cast<double>(n_plus) / 2.0);
  const double mn = static_cast<double>(n_minus);
  return 2.0 * b * lg / (3.0 * mp) + std::sqrt(2.0 * tau * lg / mp) + 2.0 * b * lg / (3.0 * mn) +
         std::sqrt(2.0 * tau * lg / mn);
}

// ---------------------------------------------------------------------------
// Derivatives of the empirical risk, used by the RRM solver.

/// Symmetric d x d matrices as vectors of length d(d+1)/2, off-diagonal
/// entries scaled by sqrt(2) so the Euclidean norm equals the Frobenius norm.
inline std::size_t packed_size(std::size_t d) { return d * (d + 1) / 2; }

template <class M>
Vector pack_symmetric(const M& m) {
  const Eigen::Index d = m.rows();
  Vector v(static_cast<Eigen::Index>(packed_size(static_cast<std::size_t>(d))));
  Eigen::Index p = 0;
  for (Eigen::Index a = 0; a < d; ++a) {
    v(p++) = m(a, a);
    for (Eigen::Index b = a + 1; b < d; ++b) v(p++) = std::sqrt(2.0) * m(a, b);
  }
  return v;
}

inline Matrix unpack_symmetric(const Vector& v, std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  Matrix m(n, n);
  Eigen::Index p = 0;
  for (Eigen::Index a = 0; a < n; ++a) {
    m(a, a) = v(p++);
    for (Eigen::Index b = a + 1; b < n; ++b) {
      const double x = v(p++) / std::sqrt(2.0);
      m(a, b) = x;
      m(b, a) = x;
    }
  }
  return m;
}

struct RiskDerivatives {
  double value = 0.0;
  Matrix gradient;  // symmetric d x d
  Matrix hessian;   // packed, p x p; empty unless requested
};

namespace detail {

/// Packed outer product v v^T of a difference vector.
template <class V>
void packed_outer(const V& diff, Eigen::Ref<Vector> out) {
  const Eigen::Index d = diff.size();
  Eigen::Index p = 0;
  for (Eigen::Index a = 0; a < d; ++a) {
    out(p++) = diff(a) * diff(a);
    for (Eigen::Index b = a + 1; b < d; ++b) out(p++) = std::sqrt(2.0) * diff(a) * diff(b);
  }
}

inline Matrix symmetrize(const Matrix& g) { return 0.5 * (g + g.transpose()); }

}  // namespace detail

/// Value, gradient and (optionally) packed Hessian of R_S at w over all triplets.
/// The gradient is assembled from per-pair coefficient sums, so its cost is
/// dominated by the O(N) pass over margins.
inline RiskDerivatives risk_derivatives(const MetricParams& w, const TripletDataset& ds, const LossConfig& cfg,
                                        bool with_hessian) {
  cfg.validate();
  const PairScores s = pair_scores(w, ds);
  const RowMatrix& X = ds.positives();
  const RowMatrix& Y = ds.negatives();
  const auto np = X.rows();
  const auto nm = Y.rows();
  const auto d = X.cols();
  const double inv_n = 1.0 / static_cast<double>(ds.triplet_count());

  Matrix A = Matrix::Zero(np, np);   // A(i, j) = sum_k phi'
  Matrix Bc = Matrix::Zero(np, nm);  // Bc(i, k) = sum_j phi'
  ShiftedMean value;

  const auto p = static_cast<Eigen::Index>(packed_size(static_cast<std::size_t>(d)));
  Matrix H;
  Matrix E;  // packed negatives outer products for the current anchor, one column per k
  Vector a_vec(p), v_vec(p), t_k;
  if (with_hessian) {
    H = Matrix::Zero(p, p);
    E.resize(p, nm);
    t_k.resize(nm);
  }

  for (Eigen::Index i = 0; i < np; ++i) {
    if (with_hessian) {
      for (Eigen::Index k = 0; k < nm; ++k) detail::packed_outer((X.row(i) - Y.row(k)).transpose(), E.col(k));
      t_k.setZero();
    }
    for (Eigen::Index j = 0; j < np; ++j) {
      if (i == j) continue;
      const double base = s.pos_pos(i, j) + cfg.zeta;
      double a_sum = 0.0;
      double c_sum = 0.0;
      if (with_hessian) v_vec.setZero();
      for (Eigen::Index k = 0; k < nm; ++k) {
        const double u = base - s.pos_neg(i, k);
        const double e = std::exp(-std::abs(u));
        const double one_e = 1.0 + e;
        value.add(std::log1p(e) + std::max(-u, 0.0));
        const double dphi = u >= 0.0 ? -e / one_e : -1.0 / one_e;
        a_sum += dphi;
        Bc(i, k) += dphi;
        if (with_hessian) {
          const double c = e / (one_e * one_e);
          c_sum += c;
          t_k(k) += c;
          v_vec.noalias() += c * E.col(k);
        }
      }
      A(i, j) = a_sum;
      if (with_hessian) {
        detail::packed_outer((X.row(i) - X.row(j)).transpose(), a_vec);
        H.noalias() += c_sum * (a_vec * a_vec.transpose());
        H.noalias() -= a_vec * v_vec.transpose() + v_vec * a_vec.transpose();
      }
    }
    if (with_hessian) H.noalias() += E * t_k.asDiagonal() * E.transpose();
  }

  // sum_{ij} A_ij (x_i - x_j)(x_i - x_j)^T = X^T diag(r + c) X - X^T (A + A^T) X
  const Vector r = A.rowwise().sum();
  const Vector c = A.colwise().sum().transpose();
  const Matrix Xm = X;
  const Matrix Ym = Y;
  Matrix G = Xm.transpose() * (r + c).asDiagonal() * Xm - Xm.transpose() * (A + A.transpose()) * Xm;
  // minus sum_{ik} Bc_ik (x_i - y_k)(x_i - y_k)^T
  const Vector rb = Bc.rowwise().sum();
  const Vector cb = Bc.colwise().sum().transpose();
  const Matrix XBY = Xm.transpose() * Bc * Ym;
  G -= Xm.transpose() * rb.asDiagonal() * Xm + Ym.transpose() * cb.asDiagonal() * Ym - XBY - XBY.transpose();

  RiskDerivatives out;
  out.value = value.mean();
  out.gradient = detail::symmetrize(inv_n * G);
  if (with_hessian) out.hessian = detail::symmetrize(inv_n * H);
  return out;
}

/// Same quantities averaged over an explicit list of triplets of `ds`.
inline RiskDerivatives risk_derivatives_on(const MetricParams& w, const TripletDataset& ds,
                                           std::span<const TripletIndex> triplets, const LossConfig& cfg,
                                           bool with_hessian) {
  cfg.validate();
  require(!triplets.empty(), Errc::Precondition, "triplet list is empty");
  detail::check_dims(w, static_cast<Eigen::Index>(ds.dim()));
  const RowMatrix& X = ds.positives();
  const RowMatrix& Y = ds.negatives();
  const Matrix& wm = w.matrix();
  const auto d = X.cols();
  const auto p = static_cast<Eigen::Index>(packed_size(static_cast<std::size_t>(d)));
  ShiftedMean value;
  Matrix G = Matrix::Zero(d, d);
  Matrix H;
  Vector q(p), qn(p);
  if (with_hessian) H = Matrix::Zero(p, p);
  for (const TripletIndex& t : triplets) {
    require(t.i < ds.n_plus() && t.j < ds.n_plus() && t.k < ds.n_minus() && t.i != t.j, Errc::SlotOutOfBounds,
            "invalid triplet index");
    const Vector dp = (X.row(static_cast<Eigen::Index>(t.i)) - X.row(static_cast<Eigen::Index>(t.j))).transpose();
    const Vector dn = (X.row(static_cast<Eigen::Index>(t.i)) - Y.row(static_cast<Eigen::Index>(t.k))).transpose();
    const double u = dp.dot(wm * dp) - dn.dot(wm * dn) + cfg.zeta;
    value.add(logistic::phi(u));
    const double g = logistic::phi_prime(u);
    G.noalias() += g * (dp * dp.transpose() - dn * dn.transpose());
    if (with_hessian) {
      detail::packed_outer(dp, q);
      detail::packed_outer(dn, qn);
      q -= qn;
      H.noalias() += logistic::phi_second(u) * (q * q.transpose());
    }
  }
  const double inv_n = 1.0 / static_cast<double>(triplets.size());
  RiskDerivatives out;
  out.value = value.mean();
  out.gradient = detail::symmetrize(inv_n * G);
  if (with_hessian) out.hessian = detail::symmetrize(inv_n * H);
  return out;
}

/// Fraction of training triplets violating the margin condition under the 0-1 loss.
inline double empirical_violation_rate(const MetricParams& w, const TripletDataset& ds, const LossConfig& cfg) {
  cfg.validate();
  const PairScores s = pair_scores(w, ds);
  std::uint64_t bad = 0;
  for_each_margin(s, cfg.zeta, [&](auto, auto, auto, double u) { bad += u >= 0.0 ? 1 : 0; });
  return static_cast<double>(bad) / static_cast<double>(ds.triplet_count());
}

/// Fraction of m fresh triplets violating the margin condition. Advances the sampler.
inline double population_violation_rate(const MetricParams& w, TripletSampler& sampler, std::uint64_t m,
                                        const LossConfig& cfg) {
  cfg.validate();
  require(m >= 1, Errc::Precondition, "need at least one triplet");
  std::uint64_t bad = 0;
  for (std::uint64_t r = 0; r < m; ++r) bad += static_cast<std::uint64_t>(zero_one_triplet_loss(w, sampler.draw_triplet(), cfg));
  return static_cast<double>(bad) / static_cast<double>(m);
}

}  // namespace tripstab
