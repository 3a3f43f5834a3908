#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "tripstab/core.hpp"
#include "tripstab/error.hpp"
#include "tripstab/loss.hpp"
#include "tripstab/numeric.hpp"
#include "tripstab/optim.hpp"
#include "tripstab/risk.hpp"
#include "tripstab/synth.hpp"

namespace tripstab {

// ---------------------------------------------------------------------------
// Closed-form bound evaluators.

inline double rrm_stability_bound(std::size_t n_plus, std::size_t n_minus, double L, double sigma) {
  require(n_plus > 0 && n_minus > 0 && L > 0.0 && sigma > 0.0 && std::isfinite(L) && std::isfinite(sigma),
          Errc::InvalidInputs, "rrm stability bound needs positive inputs");
  const double t = std::min(8.0 / static_cast<double>(n_plus), 4.0 / static_cast<double>(n_minus));
  return t * L * L / sigma;
}

/// 2 L^2 times the summed step sizes of the steps whose triplet touches any of `slots`.
inline double sgd_stability_bound(const TrainTrace& trace, std::span<const SlotRef> slots, double L) {
  require(std::isfinite(L) && L >= 0.0, Errc::InvalidInputs, "L must be nonnegative");
  for (const auto& s : slots) trace.check_slot(s);
  CompensatedSum eta_sum;
  for (const auto& step : trace.steps) {
    const bool hit = std::any_of(slots.begin(), slots.end(), [&](SlotRef s) { return step.touches(s); });
    if (hit) eta_sum.add(step.eta);
  }
  return 2.0 * L * L * eta_sum.value();
}

inline double sgd_stability_bound(const TrainTrace& trace, SlotRef slot, double L) {
  return sgd_stability_bound(trace, std::span<const SlotRef>(&slot, 1), L);
}

inline double lemma5_M_bound(std::size_t n_plus, std::size_t n_minus, double L, double sigma) {
  require(n_plus > 0 && n_minus > 0 && L > 0.0 && sigma > 0.0 && std::isfinite(L) && std::isfinite(sigma),
          Errc::InvalidInputs, "M bound needs positive inputs");
  const double a = 4.0 * std::sqrt(6.0) / std::sqrt(static_cast<double>(n_plus));
  const double b = 4.0 * std::sqrt(3.0) / std::sqrt(static_cast<double>(n_minus));
  return std::min(a, b) * L * L / sigma;
}

/// ceil(log2(x)) for x >= 1, computed on integers.
inline unsigned ceil_log2(std::uint64_t x) {
  require(x >= 1, Errc::InvalidInputs, "ceil_log2 needs x >= 1");
  return static_cast<unsigned>(std::bit_width(x - 1));
}

/// High-probability generalization bound from a uniform stability gamma and a
/// loss-expectation bound M, valid for delta in (0, 1/e).
inline double theorem1_bound(std::size_t n_plus, std::size_t n_minus, double gamma, double M, double delta) {
  require(std::isfinite(delta) && delta > 0.0 && delta < std::exp(-1.0), Errc::InvalidDelta,
          "delta must lie in (0, 1/e)");
  require(n_plus >= 2 && n_minus >= 1, Errc::InvalidCounts, "need n_plus >= 2 and n_minus >= 1");
  require(std::isfinite(gamma) && gamma >= 0.0 && std::isfinite(M) && M >= 0.0, Errc::InvalidInputs,
          "gamma and M must be nonnegative");
  const double e = std::numbers::e;
  const double lg = std::log(e / delta);
  const double np1 = static_cast<double>(n_plus - 1);
  const double nm = static_cast<double>(n_minus);
  const std::uint64_t count = static_cast<std::uint64_t>(n_minus) * (n_plus - 1) * (n_plus - 1);
  const double levels = static_cast<double>(ceil_log2(count)) + 2.0;
  return 6.0 * gamma + e * (8.0 * M * (1.0 / std::sqrt(nm) + 2.0 / std::sqrt(np1)) * std::sqrt(lg) +
                            24.0 * std::sqrt(2.0) * gamma * levels * lg);
}

/// High-probability cap on how many of T uniform draws touch a given slot.
inline double chernoff_hit_bound(std::uint64_t T, std::size_t n_plus, std::size_t n_minus, double delta) {
  require(T >= 1 && n_plus >= 1 && n_minus >= 1, Errc::InvalidInputs, "need T, n_plus, n_minus >= 1");
  require(std::isfinite(delta) && delta > 0.0 && delta < 1.0, Errc::InvalidInputs, "delta must lie in (0, 1)");
  const double t = static_cast<double>(T);
  const double a = t / static_cast<double>(n_plus);
  const double b = t / (2.0 * static_cast<double>(n_minus));
  return (1.0 + std::sqrt(3.0 * std::log(1.0 / delta) / std::max(a, b))) * (a + b);
}

/// The epsilon that balances the optimistic bound when n+ and n- are comparable.
inline double balanced_epsilon(std::size_t n_plus, std::size_t n_minus, double sigma) {
  require(n_plus >= 2 && n_minus >= 1 && std::isfinite(sigma) && sigma > 0.0, Errc::InvalidInputs,
          "epsilon needs n_plus >= 2, n_minus >= 1, sigma > 0");
  const double np = static_cast<double>(n_plus);
  const double nm = static_cast<double>(n_minus);
  return std::sqrt(3.0 * np * np * (np - 1.0) * nm * nm * sigma * sigma / (4608.0 * nm * nm + 256.0 * np * np));
}

inline bool optimistic_regime_holds(double alpha, double sigma, std::size_t n_plus, std::size_t n_minus) {
  return sigma * static_cast<double>(std::min(n_plus, n_minus)) >= 8.0 * alpha;
}

/// Multiplier of E_S R_S(A(S)) in the optimistic bound.
inline double theorem4_coefficient(double epsilon, double alpha, double sigma, std::size_t n_plus,
                                   std::size_t n_minus) {
  require(std::isfinite(epsilon) && epsilon > 0.0, Errc::InvalidInputs, "epsilon must be positive");
  require(std::isfinite(alpha) && alpha > 0.0 && std::isfinite(sigma) && sigma > 0.0, Errc::InvalidInputs,
          "alpha and sigma must be positive");
  require(n_plus >= 2 && n_minus >= 1, Errc::InvalidInputs, "need n_plus >= 2 and n_minus >= 1");
  require(optimistic_regime_holds(alpha, sigma, n_plus, n_minus), Errc::RegimeViolation,
          "sigma * min(n_plus, n_minus) = " + std::to_string(sigma * static_cast<double>(std::min(n_plus, n_minus))) +
              " is below 8 alpha = " + std::to_string(8.0 * alpha));
  const double np = static_cast<double>(n_plus);
  const double nm = static_cast<double>(n_minus);
  const double s2 = sigma * sigma;
  const double ea = epsilon + alpha;
  return alpha / epsilon + 1536.0 * alpha * ea / (np * np * (np - 1.0) * s2) +
         256.0 * alpha * ea / (3.0 * (np - 1.0) * nm * nm * s2);
}

inline double theorem4_optimistic_bound(double epsilon, double alpha, double sigma, std::size_t n_plus,
                                        std::size_t n_minus, double empirical_risk_mean) {
  require(std::isfinite(empirical_risk_mean) && empirical_risk_mean >= 0.0, Errc::InvalidInputs,
          "empirical risk mean must be nonnegative");
  return theorem4_coefficient(epsilon, alpha, sigma, n_plus, n_minus) * empirical_risk_mean;
}

// ---------------------------------------------------------------------------
// Trainers as deterministic maps from datasets to parameters.

using Trainer = std::variant<SgdConfig, RrmConfig, MetricParams>;

constexpr std::string_view trainer_kind(const Trainer& t) noexcept {
  switch (t.index()) {
    case 0: return "sgd";
    case 1: return "rrm";
    default: return "constant";
  }
}

struct TrainOutput {
  MetricParams w;
  std::optional<TrainTrace> trace;  // SGD only
};

/// Runs the trainer. `warm_start` seeds the RRM solver; the minimizer does not
/// depend on it beyond the stopping tolerance.
inline TrainOutput train(const Trainer& trainer, const TripletDataset& ds,
                         const std::optional<MetricParams>& warm_start = std::nullopt) {
  if (const auto* s = std::get_if<SgdConfig>(&trainer)) {
    SgdResult r = sgd_train(ds, *s);
    return {std::move(r.w), std::move(r.trace)};
  }
  if (const auto* r = std::get_if<RrmConfig>(&trainer)) {
    RrmResult res = rrm_train(ds, *r, warm_start);
    require(res.converged, Errc::Precondition,
            "RRM solver stopped at max_iters with gradient norm " + std::to_string(res.grad_norm));
    return {std::move(res.w), std::nullopt};
  }
  const auto& w = std::get<MetricParams>(trainer);
  detail::check_dims(w, static_cast<Eigen::Index>(ds.dim()));
  return {w, std::nullopt};
}

inline double trainer_zeta(const Trainer& trainer, double fallback) {
  if (const auto* s = std::get_if<SgdConfig>(&trainer)) return s->zeta;
  if (const auto* r = std::get_if<RrmConfig>(&trainer)) return r->zeta;
  return fallback;
}

// ---------------------------------------------------------------------------
// Empirical stability estimators.

enum class StabilityProtocol { UniformSup, OnAverage };

constexpr std::string_view to_string(StabilityProtocol p) noexcept {
  return p == StabilityProtocol::UniformSup ? "uniform" : "on_average";
}

enum class Replacement { Single, Triple };

struct StabilityOptions {
  Replacement replacement = Replacement::Single;
  /// Margin for a Constant trainer; SGD and RRM use their own.
  double zeta = 0.0;
  /// Add every training triplet of S and S-bar to the probe set.
  bool include_training_triplets = true;
  /// Replace the chosen slots with copies of the samples already there.
  bool identical_replacement = false;
  /// Start the S-bar solve at A(S) for RRM.
  bool warm_start = true;
  std::uint64_t seed = 0;
};

struct StabilityTrial {
  std::uint64_t trial = 0;
  std::vector<SlotRef> slots;
  double value = 0.0;                 // probe max of |l(A(S)) - l(A(S-bar))|
  std::optional<double> bound;        // formula value for this trial, when one applies
  double M_hat = 0.0;                 // probe max of |l(A(S))|
  std::uint64_t probe_points = 0;
};

struct StabilityReport {
  StabilityProtocol protocol = StabilityProtocol::UniformSup;
  std::string trainer_kind;
  std::size_t n_plus = 0;
  std::size_t n_minus = 0;
  double sigma_or_T = 0.0;
  double gamma_hat = 0.0;
  std::optional<double> gamma_bound;
  double M_hat = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t probe_size = 0;
  std::uint64_t seed = 0;
  std::uint64_t violations = 0;  // trials whose value exceeds their bound
  // On-average protocol only.
  double signed_mean = 0.0;
  double abs_mean = 0.0;
  double std_error = 0.0;
  std::vector<StabilityTrial> records;
};

namespace detail {

/// max over the probe of |l(w1) - l(w2)| and of |l(w1)|.
struct ProbeMax {
  double diff = 0.0;
  double loss = 0.0;
  std::uint64_t points = 0;

  void add(double l1, double l2) {
    diff = std::max(diff, std::abs(l1 - l2));
    loss = std::max(loss, std::abs(l1));
    ++points;
  }
};

inline void probe_batch(const MetricParams& w1, const MetricParams& w2, const TripletBatch& b, double zeta,
                        ProbeMax& acc) {
  const Matrix& m1 = w1.matrix();
  const Matrix& m2 = w2.matrix();
  for (Eigen::Index r = 0; r < b.anchors.rows(); ++r) {
    const double u1 = quad_diff(m1, b.anchors.row(r), b.positives.row(r)) -
                      quad_diff(m1, b.anchors.row(r), b.negatives.row(r)) + zeta;
    const double u2 = quad_diff(m2, b.anchors.row(r), b.positives.row(r)) -
                      quad_diff(m2, b.anchors.row(r), b.negatives.row(r)) + zeta;
    acc.add(logistic::phi(u1), logistic::phi(u2));
  }
}

inline void probe_dataset(const MetricParams& w1, const MetricParams& w2, const TripletDataset& ds, double zeta,
                          ProbeMax& acc) {
  const PairScores s1 = pair_scores(w1, ds);
  const PairScores s2 = pair_scores(w2, ds);
  const auto np = s1.pos_pos.rows();
  const auto nm = s1.pos_neg.cols();
  for (Eigen::Index i = 0; i < np; ++i) {
    for (Eigen::Index j = 0; j < np; ++j) {
      if (i == j) continue;
      const double b1 = s1.pos_pos(i, j) + zeta;
      const double b2 = s2.pos_pos(i, j) + zeta;
      for (Eigen::Index k = 0; k < nm; ++k)
        acc.add(logistic::phi(b1 - s1.pos_neg(i, k)), logistic::phi(b2 - s2.pos_neg(i, k)));
    }
  }
}

inline std::vector<SlotRef> draw_slots(std::mt19937_64& rng, std::size_t n_plus, std::size_t n_minus,
                                       Replacement rep) {
  if (rep == Replacement::Single) {
    std::uniform_int_distribution<std::size_t> pick(0, n_plus + n_minus - 1);
    const std::size_t s = pick(rng);
    return {s < n_plus ? SlotRef{Pool::Positive, s} : SlotRef{Pool::Negative, s - n_plus}};
  }
  std::uniform_int_distribution<std::size_t> pos(0, n_plus - 1);
  std::uniform_int_distribution<std::size_t> neg(0, n_minus - 1);
  std::size_t i = 0;
  std::size_t j = 0;
  do {
    i = pos(rng);
    j = pos(rng);
  } while (i == j);
  return {{Pool::Positive, i}, {Pool::Positive, j}, {Pool::Negative, neg(rng)}};
}

inline double task_lipschitz(const TaskConfig& task) { return regularity_constants(task.B).L; }

/// Resolves an unset SGD step factor against the task bound so that S and S-bar share it.
inline Trainer pin_trainer(const Trainer& trainer, const TaskConfig& task) {
  if (const auto* s = std::get_if<SgdConfig>(&trainer)) {
    if (!s->c) {
      SgdConfig pinned = *s;
      pinned.c = regularity_constants(task.B).eta_max;
      return pinned;
    }
  }
  return trainer;
}

}  // namespace detail

/// Definition-1 style probe: per trial, draw S, replace one slot (or three,
/// for the triple protocol) with fresh samples, train on both and take the
/// max loss difference over fresh triplets plus all training triplets. Every
/// value is a lower estimate of the true supremum.
inline StabilityReport estimate_uniform_stability(const Trainer& trainer_in, const TaskConfig& task,
                                                  std::uint64_t trials, std::uint64_t probe_size,
                                                  const StabilityOptions& opt = {}) {
  task.validate();
  require(trials >= 1, Errc::InvalidConfig, "trials must be at least 1");
  require(probe_size >= 1, Errc::InvalidConfig, "probe_size must be at least 1");
  const Trainer trainer = detail::pin_trainer(trainer_in, task);
  const double zeta = trainer_zeta(trainer, opt.zeta);
  const double L = detail::task_lipschitz(task);

  StabilityReport rep;
  rep.protocol = StabilityProtocol::UniformSup;
  rep.trainer_kind = std::string(trainer_kind(trainer));
  rep.n_plus = task.n_plus;
  rep.n_minus = task.n_minus;
  rep.trials = trials;
  rep.probe_size = probe_size;
  rep.seed = opt.seed;
  if (const auto* r = std::get_if<RrmConfig>(&trainer)) rep.sigma_or_T = r->sigma();
  if (const auto* s = std::get_if<SgdConfig>(&trainer)) rep.sigma_or_T = static_cast<double>(s->T);

  const TripletSampler base = make_sampler(task.with_seed(opt.seed), 3);
  for (std::uint64_t t = 0; t < trials; ++t) {
    TripletSampler sampler = base.fork(t);
    std::mt19937_64 slot_rng(derive_seed(opt.seed, 0x510, t));
    const TripletDataset S = sampler.draw_dataset(task.n_plus, task.n_minus);
    StabilityTrial rec;
    rec.trial = t;
    rec.slots = detail::draw_slots(slot_rng, task.n_plus, task.n_minus, opt.replacement);
    std::vector<std::pair<SlotRef, Sample>> repl;
    for (const auto& slot : rec.slots)
      repl.emplace_back(slot, opt.identical_replacement ? S.sample(slot) : sampler.draw_sample(slot.pool));
    const TripletDataset S_bar = replace_samples(S, repl);

    const TrainOutput a = train(trainer, S);
    const TrainOutput b = train(trainer, S_bar, opt.warm_start ? std::optional<MetricParams>(a.w) : std::nullopt);

    detail::ProbeMax acc;
    detail::probe_batch(a.w, b.w, sampler.draw_batch(probe_size), zeta, acc);
    if (opt.include_training_triplets) {
      detail::probe_dataset(a.w, b.w, S, zeta, acc);
      detail::probe_dataset(a.w, b.w, S_bar, zeta, acc);
    }
    rec.value = acc.diff;
    rec.M_hat = acc.loss;
    rec.probe_points = acc.points;

    const double mult = opt.replacement == Replacement::Triple ? 3.0 : 1.0;
    if (const auto* r = std::get_if<RrmConfig>(&trainer)) {
      rec.bound = mult * rrm_stability_bound(task.n_plus, task.n_minus, L, r->sigma());
    } else if (a.trace) {
      rec.bound = sgd_stability_bound(*a.trace, rec.slots, L);
    }
    if (rec.bound && !(rec.value <= *rec.bound)) ++rep.violations;
    rep.gamma_hat = std::max(rep.gamma_hat, rec.value);
    rep.M_hat = std::max(rep.M_hat, rec.M_hat);
    if (rec.bound) rep.gamma_bound = std::max(rep.gamma_bound.value_or(0.0), *rec.bound);
    rep.records.push_back(std::move(rec));
  }
  return rep;
}

/// Definition-2 style estimate: per trial draw S and an independent S-bar,
/// then for sampled (i, j, k) retrain on S with z_i+, z_j+, z_k- taken from
/// S-bar and compare the losses at the original triplet. When
/// triplet_subsample covers the whole index set, every triplet is used once.
inline StabilityReport estimate_on_average_stability(const Trainer& trainer_in, const TaskConfig& task,
                                                     std::uint64_t trials, std::uint64_t triplet_subsample,
                                                     const StabilityOptions& opt = {}) {
  task.validate();
  require(trials >= 1, Errc::InvalidConfig, "trials must be at least 1");
  require(triplet_subsample >= 1, Errc::InvalidConfig, "triplet_subsample must be at least 1");
  const Trainer trainer = detail::pin_trainer(trainer_in, task);
  const double zeta = trainer_zeta(trainer, opt.zeta);
  const LossConfig loss{zeta};

  StabilityReport rep;
  rep.protocol = StabilityProtocol::OnAverage;
  rep.trainer_kind = std::string(trainer_kind(trainer));
  rep.n_plus = task.n_plus;
  rep.n_minus = task.n_minus;
  rep.trials = trials;
  rep.seed = opt.seed;
  if (const auto* r = std::get_if<RrmConfig>(&trainer)) rep.sigma_or_T = r->sigma();
  if (const auto* s = std::get_if<SgdConfig>(&trainer)) rep.sigma_or_T = static_cast<double>(s->T);

  const std::uint64_t total = static_cast<std::uint64_t>(task.n_plus) * (task.n_plus - 1) * task.n_minus;
  const bool exhaustive = triplet_subsample >= total;
  rep.probe_size = exhaustive ? total : triplet_subsample;

  RunningStats signed_stats;
  ShiftedMean abs_mean;
  const TripletSampler base = make_sampler(task.with_seed(opt.seed), 4);
  for (std::uint64_t t = 0; t < trials; ++t) {
    TripletSampler sampler = base.fork(t);
    const TripletDataset S = sampler.draw_dataset(task.n_plus, task.n_minus);
    const TripletDataset S_bar =
        opt.identical_replacement ? S : sampler.draw_dataset(task.n_plus, task.n_minus);
    const TrainOutput a = train(trainer, S);

    std::vector<TripletIndex> picks;
    if (exhaustive) {
      picks = enumerate_triplets(S);
    } else {
      std::mt19937_64 rng(derive_seed(opt.seed, 0x0a7e, t));
      std::uniform_int_distribution<std::uint64_t> flat(0, total - 1);
      for (std::uint64_t r = 0; r < triplet_subsample; ++r) picks.push_back(triplet_at(flat(rng), task.n_plus, task.n_minus));
    }

    StabilityTrial rec;
    rec.trial = t;
    for (const TripletIndex& idx : picks) {
      const SlotRef si{Pool::Positive, idx.i};
      const SlotRef sj{Pool::Positive, idx.j};
      const SlotRef sk{Pool::Negative, idx.k};
      const TripletDataset S_ijk =
          replace_samples(S, {{si, S_bar.sample(si)}, {sj, S_bar.sample(sj)}, {sk, S_bar.sample(sk)}});
      const TrainOutput b = train(trainer, S_ijk, opt.warm_start ? std::optional<MetricParams>(a.w) : std::nullopt);
      const TripletFeatures z{S.positive(idx.i), S.positive(idx.j), S.negative(idx.k)};
      const double la = logistic_triplet_loss(a.w, z, loss);
      const double diff = logistic_triplet_loss(b.w, z, loss) - la;
      signed_stats.add(diff);
      abs_mean.add(std::abs(diff));
      rec.value = std::max(rec.value, std::abs(diff));
      rec.M_hat = std::max(rec.M_hat, std::abs(la));
      ++rec.probe_points;
    }
    rep.M_hat = std::max(rep.M_hat, rec.M_hat);
    rep.records.push_back(std::move(rec));
  }
  rep.signed_mean = signed_stats.mean();
  rep.abs_mean = abs_mean.mean();
  rep.std_error = signed_stats.std_error();
  rep.gamma_hat = std::abs(rep.signed_mean);
  return rep;
}

inline void write_stability_csv_header(std::ostream& out) {
  out << "protocol,trainer_kind,n_plus,n_minus,sigma_or_T,gamma_hat,gamma_bound,M_hat,trials,probe_size,seed\n";
}

inline void write_stability_csv_row(std::ostream& out, const StabilityReport& r) {
  out << to_string(r.protocol) << ',' << r.trainer_kind << ',' << r.n_plus << ',' << r.n_minus << ','
      << detail::format_double(r.sigma_or_T) << ',' << detail::format_double(r.gamma_hat) << ','
      << (r.gamma_bound ? detail::format_double(*r.gamma_bound) : std::string()) << ','
      << detail::format_double(r.M_hat) << ',' << r.trials << ',' << r.probe_size << ',' << r.seed << '\n';
}

}  // namespace tripstab
