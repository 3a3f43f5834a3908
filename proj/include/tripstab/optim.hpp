#pragma once

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "tripstab/core.hpp"
#include "tripstab/error.hpp"
#include "tripstab/loss.hpp"
#include "tripstab/risk.hpp"

namespace tripstab {

// ---------------------------------------------------------------------------
// Stochastic gradient descent on single triplets.

struct SgdConfig {
  std::uint64_t T = 100;
  /// Step factor; every step uses eta = c / sqrt(T). When unset, the largest
  /// admissible value 2 / alpha for the training set's feature bound is used.
  std::optional<double> c;
  std::uint64_t seed = 0;
  double zeta = 0.0;

  LossConfig loss() const { return LossConfig{zeta}; }
};

struct TrainStep {
  std::uint64_t t = 0;  // 1-based
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;
  double eta = 0.0;

  bool touches(SlotRef slot) const noexcept {
    return slot.pool == Pool::Positive ? (i == slot.index || j == slot.index) : k == slot.index;
  }
};

struct TrainTrace {
  std::size_t n_plus = 0;
  std::size_t n_minus = 0;
  std::vector<TrainStep> steps;

  void check_slot(SlotRef slot) const {
    const std::size_t n = slot.pool == Pool::Positive ? n_plus : n_minus;
    require(slot.index < n, Errc::SlotOutOfBounds,
            std::string(to_string(slot.pool)) + " slot " + std::to_string(slot.index) + " out of range");
  }

  std::uint64_t indicator_hits(SlotRef slot) const {
    check_slot(slot);
    std::uint64_t hits = 0;
    for (const auto& s : steps) hits += s.touches(slot) ? 1 : 0;
    return hits;
  }
};

struct SgdResult {
  MetricParams w;
  TrainTrace trace;
  double c = 0.0;  // resolved step factor
};

/// One update w - eta * grad l(w; triplet).
inline MetricParams sgd_step(const MetricParams& w, const TripletFeatures& t, double eta, const LossConfig& cfg) {
  require(std::isfinite(eta) && eta >= 0.0, Errc::InvalidConfig, "step size must be finite and nonnegative");
  MetricParams next = w;
  next.add_scaled(-eta, logistic_triplet_grad(w, t, cfg));
  return next;
}

/// Step factor the run will use on `ds`, after validation.
inline double resolve_step_factor(const SgdConfig& cfg, const TripletDataset& ds) {
  const double B = feature_bound(ds);
  const double eta_max = B > 0.0 ? regularity_constants(B).eta_max : std::numeric_limits<double>::infinity();
  if (!cfg.c) {
    require(std::isfinite(eta_max), Errc::InvalidConfig,
            "step factor must be given when every feature is zero");
    return eta_max;
  }
  const double c = *cfg.c;
  require(std::isfinite(c) && c > 0.0, Errc::InvalidConfig, "step factor c must be positive");
  require(c <= eta_max * (1.0 + 1e-12), Errc::StepSizeTooLarge,
          "step factor " + std::to_string(c) + " exceeds 2/alpha = " + std::to_string(eta_max));
  return c;
}

/// Uniform draw over {(i, j, k) : i != j} by rejection on i == j.
class TripletIndexSampler {
 public:
  TripletIndexSampler(std::size_t n_plus, std::size_t n_minus, std::uint64_t seed)
      : rng_(seed), pos_(0, n_plus - 1), neg_(0, n_minus - 1) {}

  TripletIndex draw() {
    std::size_t i = 0;
    std::size_t j = 0;
    do {
      i = pos_(rng_);
      j = pos_(rng_);
    } while (i == j);
    return {i, j, neg_(rng_)};
  }

 private:
  std::mt19937_64 rng_;
  std::uniform_int_distribution<std::size_t> pos_;
  std::uniform_int_distribution<std::size_t> neg_;
};

/// Plain SGD from w = 0. The index sequence depends only on the seed and the
/// pool sizes, so two datasets of equal shape see identical draws.
inline SgdResult sgd_train(const TripletDataset& ds, const SgdConfig& cfg) {
  const LossConfig loss = cfg.loss();
  loss.validate();
  const double c = resolve_step_factor(cfg, ds);
  SgdResult out{MetricParams::zero(ds.dim()), TrainTrace{ds.n_plus(), ds.n_minus(), {}}, c};
  if (cfg.T == 0) return out;
  const double eta = c / std::sqrt(static_cast<double>(cfg.T));
  out.trace.steps.reserve(cfg.T);

  const RowMatrix& X = ds.positives();
  const RowMatrix& Y = ds.negatives();
  const auto d = static_cast<Eigen::Index>(ds.dim());
  Matrix step(d, d);
  Vector dp(d), dn(d);
  TripletIndexSampler sampler(ds.n_plus(), ds.n_minus(), cfg.seed);
  for (std::uint64_t t = 1; t <= cfg.T; ++t) {
    const TripletIndex idx = sampler.draw();
    const auto i = static_cast<Eigen::Index>(idx.i);
    dp = (X.row(i) - X.row(static_cast<Eigen::Index>(idx.j))).transpose();
    dn = (X.row(i) - Y.row(static_cast<Eigen::Index>(idx.k))).transpose();
    const Matrix& w = out.w.matrix();
    const double u = dp.dot(w * dp) - dn.dot(w * dn) + loss.zeta;
    step.noalias() = dp * dp.transpose();
    step.noalias() -= dn * dn.transpose();
    out.w.add_scaled(-eta * logistic::phi_prime(u), step);
    out.trace.steps.push_back({t, idx.i, idx.j, idx.k, eta});
  }
  return out;
}

/// CSV columns t,i,j,k,eta,hit_slot_flag; the flag marks steps touching `slot`.
inline void write_trace_csv(std::ostream& out, const TrainTrace& trace, std::optional<SlotRef> slot = std::nullopt) {
  out << "t,i,j,k,eta,hit_slot_flag\n";
  for (const auto& s : trace.steps) {
    out << s.t << ',' << s.i << ',' << s.j << ',' << s.k << ',' << detail::format_double(s.eta) << ','
        << (slot && s.touches(*slot) ? 1 : 0) << '\n';
  }
}

struct UniformityResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
  bool marginal = false;  // true when the test ran on slot marginals
};

namespace detail {

inline double chi_square_uniform(const std::vector<std::uint64_t>& counts, double total) {
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (auto c : counts) {
    const double diff = static_cast<double>(c) - expected;
    stat += diff * diff / expected;
  }
  return stat;
}

}  // namespace detail

/// Chi-square goodness of fit of the drawn triplets against the uniform law.
/// Uses all n+(n+-1)n- cells when there are at most 10 T of them, otherwise
/// the anchor and negative marginals (independent under the null, so their
/// statistics add).
inline UniformityResult sampling_uniformity_check(const TrainTrace& trace) {
  require(!trace.steps.empty(), Errc::Precondition, "trace is empty");
  require(trace.n_plus >= 2 && trace.n_minus >= 1, Errc::InvalidCounts, "trace has invalid pool sizes");
  const std::uint64_t T = trace.steps.size();
  const std::uint64_t cells = static_cast<std::uint64_t>(trace.n_plus) * (trace.n_plus - 1) * trace.n_minus;
  UniformityResult r;
  const double total = static_cast<double>(T);
  if (cells <= 10 * T) {
    std::vector<std::uint64_t> counts(cells, 0);
    for (const auto& s : trace.steps) {
      require(s.i != s.j && s.i < trace.n_plus && s.j < trace.n_plus && s.k < trace.n_minus, Errc::SlotOutOfBounds,
              "trace contains an invalid triplet");
      const std::size_t jj = s.j < s.i ? s.j : s.j - 1;
      ++counts[(s.i * (trace.n_plus - 1) + jj) * trace.n_minus + s.k];
    }
    r.statistic = detail::chi_square_uniform(counts, total);
    r.dof = static_cast<double>(cells - 1);
  } else {
    std::vector<std::uint64_t> anchors(trace.n_plus, 0);
    std::vector<std::uint64_t> negatives(trace.n_minus, 0);
    for (const auto& s : trace.steps) {
      require(s.i < trace.n_plus && s.k < trace.n_minus, Errc::SlotOutOfBounds, "trace contains an invalid triplet");
      ++anchors[s.i];
      ++negatives[s.k];
    }
    r.statistic = detail::chi_square_uniform(anchors, total);
    r.dof = static_cast<double>(trace.n_plus - 1);
    if (trace.n_minus > 1) {
      r.statistic += detail::chi_square_uniform(negatives, total);
      r.dof += static_cast<double>(trace.n_minus - 1);
    }
    r.marginal = true;
  }
  r.p_value = boost::math::gamma_q(0.5 * r.dof, 0.5 * r.statistic);
  return r;
}

// ---------------------------------------------------------------------------
// 1-expansiveness of the gradient step.

struct ExpansivenessResult {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

inline ExpansivenessResult expansiveness_check(const MetricParams& w, const MetricParams& w2, const TripletFeatures& t,
                                               double eta, const LossConfig& cfg) {
  const double B = triplet_bound(t);
  if (B > 0.0) {
    const double eta_max = regularity_constants(B).eta_max;
    require(eta <= eta_max * (1.0 + 1e-12), Errc::StepSizeTooLarge,
            "step " + std::to_string(eta) + " exceeds 2/alpha = " + std::to_string(eta_max));
  }
  const Matrix a = w.matrix() - eta * logistic_triplet_grad(w, t, cfg);
  const Matrix b = w2.matrix() - eta * logistic_triplet_grad(w2, t, cfg);
  ExpansivenessResult r;
  r.lhs = (a - b).norm();
  r.rhs = (w.matrix() - w2.matrix()).norm();
  r.holds = r.lhs <= r.rhs + 1e-12;
  return r;
}

// ---------------------------------------------------------------------------
// Regularized risk minimization: F_S(w) = R_S(w) + lambda ||w||_F^2.

enum class RrmSolver { Newton, GradientDescent };

constexpr std::string_view to_string(RrmSolver s) noexcept {
  return s == RrmSolver::Newton ? "newton" : "gd";
}

inline constexpr std::uint64_t kRrmTripletBudget = std::uint64_t{1} << 24;

struct RrmConfig {
  double lambda = 0.1;
  double tol = 1e-8;
  std::uint64_t max_iters = 100000;
  double zeta = 0.0;
  RrmSolver solver = RrmSolver::Newton;
  std::uint64_t triplet_budget = kRrmTripletBudget;

  LossConfig loss() const { return LossConfig{zeta}; }
  double sigma() const noexcept { return 2.0 * lambda; }

  void validate() const {
    require(std::isfinite(lambda) && lambda > 0.0, Errc::InvalidConfig, "lambda must be positive");
    require(std::isfinite(tol) && tol > 0.0, Errc::InvalidConfig, "tol must be positive");
    require(max_iters >= 1, Errc::InvalidConfig, "max_iters must be at least 1");
    require(triplet_budget >= 1, Errc::InvalidConfig, "triplet budget must be at least 1");
    loss().validate();
  }
};

struct RrmResult {
  MetricParams w;
  std::uint64_t iterations = 0;
  bool converged = false;
  double grad_norm = 0.0;  // ||grad F_S(w)||_F at the returned w
  double objective = 0.0;
};

inline double regularized_objective(const MetricParams& w, const TripletDataset& ds, const RrmConfig& cfg) {
  cfg.validate();
  const double rs = exact_empirical_risk(w, ds, cfg.loss(), cfg.triplet_budget);
  const double n = w.frobenius_norm();
  return rs + cfg.lambda * n * n;
}

namespace detail {

/// Shared solver loop. `deriv(w, hessian)` returns R's value/gradient
/// (and packed Hessian when asked); `value(w)` returns R alone.
template <class Deriv, class Value>
RrmResult minimize_regularized(std::size_t d, const RrmConfig& cfg, double smoothness, const MetricParams& init,
                               Deriv&& deriv, Value&& value) {
  const double lam = cfg.lambda;
  auto objective = [&](const MetricParams& w, double r) {
    const double n = w.frobenius_norm();
    return r + lam * n * n;
  };
  RrmResult res;
  res.w = init;
  const bool newton = cfg.solver == RrmSolver::Newton;
  const double gd_step = 1.0 / (smoothness + 2.0 * lam);

  for (std::uint64_t it = 0;; ++it) {
    RiskDerivatives rd = deriv(res.w, newton);
    const Matrix grad = rd.gradient + 2.0 * lam * res.w.matrix();
    res.grad_norm = grad.norm();
    res.objective = objective(res.w, rd.value);
    res.iterations = it;
    if (res.grad_norm <= cfg.tol) {
      res.converged = true;
      return res;
    }
    if (it >= cfg.max_iters) return res;

    if (!newton) {
      res.w.add_scaled(-gd_step, grad);
      continue;
    }

    const Vector g = pack_symmetric(grad);
    Matrix H = rd.hessian;
    H.diagonal().array() += 2.0 * lam;
    const Vector step = -H.llt().solve(g);
    const double decrement2 = -g.dot(step);
    Matrix dW = unpack_symmetric(step, d);
    if (decrement2 < 1e-12) {
      // Inside the quadratic convergence region: take the full step.
      res.w.add_scaled(1.0, dW);
      continue;
    }
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      MetricParams trial = res.w;
      trial.add_scaled(t, dW);
      if (objective(trial, value(trial)) <= res.objective - 0.25 * t * decrement2) {
        res.w = std::move(trial);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // Line search failed to make progress (round-off floor); fall back to a
      // safe gradient step so the loop keeps its descent guarantee.
      res.w.add_scaled(-gd_step, grad);
    }
  }
}

}  // namespace detail

/// Minimizer of F_S over all triplets of `ds`, started at `init` (zero by default).
/// Stops once ||grad F_S||_F <= tol; on hitting max_iters the last iterate is
/// returned with converged = false.
inline RrmResult rrm_train(const TripletDataset& ds, const RrmConfig& cfg,
                           std::optional<MetricParams> init = std::nullopt) {
  cfg.validate();
  require(ds.triplet_count() <= cfg.triplet_budget, Errc::BudgetExceeded,
          "dataset has " + std::to_string(ds.triplet_count()) + " triplets, budget is " +
              std::to_string(cfg.triplet_budget));
  const LossConfig loss = cfg.loss();
  const double B = feature_bound(ds);
  const double smooth = B > 0.0 ? regularity_constants(B).alpha : 0.0;
  MetricParams start = init ? *init : MetricParams::zero(ds.dim());
  detail::check_dims(start, static_cast<Eigen::Index>(ds.dim()));
  return detail::minimize_regularized(
      ds.dim(), cfg, smooth, start,
      [&](const MetricParams& w, bool hess) { return risk_derivatives(w, ds, loss, hess); },
      [&](const MetricParams& w) { return detail::exact_risk(w, ds, loss).value; });
}

/// Same objective with R_S replaced by the mean loss over an explicit triplet list.
inline RrmResult rrm_train_on_triplets(const TripletDataset& ds, std::span<const TripletIndex> triplets,
                                       const RrmConfig& cfg, std::optional<MetricParams> init = std::nullopt) {
  cfg.validate();
  require(triplets.size() <= cfg.triplet_budget, Errc::BudgetExceeded, "triplet list exceeds the budget");
  const LossConfig loss = cfg.loss();
  const double B = feature_bound(ds);
  const double smooth = B > 0.0 ? regularity_constants(B).alpha : 0.0;
  MetricParams start = init ? *init : MetricParams::zero(ds.dim());
  return detail::minimize_regularized(
      ds.dim(), cfg, smooth, start,
      [&](const MetricParams& w, bool hess) { return risk_derivatives_on(w, ds, triplets, loss, hess); },
      [&](const MetricParams& w) { return risk_derivatives_on(w, ds, triplets, loss, false).value; });
}

}  // namespace tripstab
