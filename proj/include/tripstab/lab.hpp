#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "tripstab/core.hpp"
#include "tripstab/error.hpp"
#include "tripstab/loss.hpp"
#include "tripstab/numeric.hpp"
#include "tripstab/optim.hpp"
#include "tripstab/risk.hpp"
#include "tripstab/stability.hpp"
#include "tripstab/synth.hpp"

namespace tripstab {

inline constexpr std::string_view kLibraryVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Log-log slope fitting.

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r_squared = 1.0;
};

struct RatePoint {
  double n = 0.0;
  double value = 0.0;
};

/// Ordinary least squares of log(value) on log(n).
inline SlopeFit fit_loglog_slope(std::span<const RatePoint> points) {
  require(points.size() >= 3, Errc::TooFewPoints, "slope fit needs at least 3 points");
  std::vector<double> x, y;
  for (const auto& p : points) {
    require(std::isfinite(p.n) && p.n > 0.0, Errc::NonpositiveValue, "n must be positive");
    require(std::isfinite(p.value) && p.value > 0.0, Errc::NonpositiveValue,
            "value " + detail::format_double(p.value) + " at n = " + detail::format_double(p.n) + " is not positive");
    x.push_back(std::log(p.n));
    y.push_back(std::log(p.value));
  }
  const double k = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, Errc::InvalidInputs, "slope fit needs at least two distinct n");
  SlopeFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    sse += r * r;
  }
  f.slope_stderr = std::sqrt(sse / (k - 2.0) / sxx);
  f.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return f;
}

inline SlopeFit fit_loglog_slope(std::initializer_list<RatePoint> points) {
  return fit_loglog_slope(std::span<const RatePoint>(points.begin(), points.size()));
}

// ---------------------------------------------------------------------------
// Sweep configuration.

enum class Algorithm { Sgd, Rrm, Constant };
enum class SigmaRule { InvSqrtN, OptimisticSchedule, Constant };

constexpr std::string_view to_string(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::Sgd: return "sgd";
    case Algorithm::Rrm: return "rrm";
    case Algorithm::Constant: return "constant";
  }
  return "unknown";
}

constexpr std::string_view to_string(SigmaRule r) noexcept {
  switch (r) {
    case SigmaRule::InvSqrtN: return "inv_sqrt_n";
    case SigmaRule::OptimisticSchedule: return "optimistic";
    case SigmaRule::Constant: return "constant";
  }
  return "unknown";
}

struct SweepConfig {
  Algorithm algorithm = Algorithm::Sgd;
  std::vector<std::size_t> n_grid{32, 64, 128, 256, 512};
  std::uint64_t trials_per_n = 20;
  /// RRM strong convexity sigma(n) = 2 lambda(n):
  /// InvSqrtN: sigma0 / sqrt(n); OptimisticSchedule: sigma0 / n; Constant: sigma0.
  SigmaRule sigma_rule = SigmaRule::InvSqrtN;
  double sigma0 = 1.0;
  /// SGD step factor; T = n and eta = c / sqrt(T). Defaults to 2 / alpha of task.B.
  std::optional<double> sgd_c;
  double zeta = 0.0;
  double rrm_tol = 1e-8;
  std::uint64_t population_m = 100000;
  /// Excess-risk reference: RRM with proxy_lambda on a proxy_factor x larger
  /// fresh dataset, restricted to proxy_triplets sampled triplets.
  bool excess_proxy = true;
  std::uint64_t proxy_factor = 10;
  std::uint64_t proxy_triplets = 200000;
  double proxy_lambda = 1e-3;
  /// Parameter returned by the Constant algorithm; zero when unset.
  std::optional<MetricParams> constant_w;
  TaskConfig task;
  std::uint64_t seed = 0;

  void validate() const {
    task.validate();
    require(n_grid.size() >= 3, Errc::InvalidConfig, "n_grid needs at least 3 values");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
      require(n_grid[i] >= 4, Errc::InvalidConfig, "every n must be at least 4");
      if (i) require(n_grid[i] > n_grid[i - 1], Errc::InvalidConfig, "n_grid must be strictly increasing");
    }
    require(trials_per_n >= 1, Errc::InvalidConfig, "trials_per_n must be at least 1");
    require(std::isfinite(sigma0) && sigma0 > 0.0, Errc::InvalidConfig, "sigma0 must be positive");
    require(std::isfinite(rrm_tol) && rrm_tol > 0.0, Errc::InvalidConfig, "rrm_tol must be positive");
    require(population_m >= 2, Errc::InvalidConfig, "population_m must be at least 2");
    require(proxy_factor >= 1 && proxy_triplets >= 1, Errc::InvalidConfig, "proxy sizes must be positive");
    require(std::isfinite(proxy_lambda) && proxy_lambda > 0.0, Errc::InvalidConfig, "proxy_lambda must be positive");
    if (sgd_c) require(std::isfinite(*sgd_c) && *sgd_c > 0.0, Errc::InvalidConfig, "sgd_c must be positive");
    if (constant_w) require(constant_w->dim() == task.d, Errc::DimensionMismatch, "constant_w has the wrong size");
    LossConfig{zeta}.validate();
  }

  double sigma_at(std::size_t n) const {
    const double x = static_cast<double>(n);
    switch (sigma_rule) {
      case SigmaRule::InvSqrtN: return sigma0 / std::sqrt(x);
      case SigmaRule::OptimisticSchedule: return sigma0 / x;
      case SigmaRule::Constant: return sigma0;
    }
    return sigma0;
  }

  /// Deterministic trainer for cell (n, trial).
  Trainer trainer_at(std::size_t n, std::uint64_t trial) const {
    switch (algorithm) {
      case Algorithm::Sgd: {
        SgdConfig s;
        s.T = n;
        s.c = sgd_c ? *sgd_c : regularity_constants(task.B).eta_max;
        s.seed = derive_seed(seed, 0x59d, n * 1000003ULL + trial);
        s.zeta = zeta;
        return s;
      }
      case Algorithm::Rrm: {
        RrmConfig r;
        r.lambda = 0.5 * sigma_at(n);
        r.tol = rrm_tol;
        r.zeta = zeta;
        return r;
      }
      case Algorithm::Constant:
        return constant_w ? *constant_w : MetricParams::zero(task.d);
    }
    return MetricParams::zero(task.d);
  }

  /// sigma for RRM, T for SGD, 0 for Constant.
  double sigma_or_T(std::size_t n) const {
    if (algorithm == Algorithm::Rrm) return sigma_at(n);
    if (algorithm == Algorithm::Sgd) return static_cast<double>(n);
    return 0.0;
  }
};

namespace detail {

/// Independent sampler for cell (n, trial); the dataset and the population
/// batch come from separate forks of it.
inline TripletSampler cell_sampler(const SweepConfig& cfg, std::size_t n, std::uint64_t trial) {
  return make_sampler(cfg.task.with_seed(derive_seed(cfg.seed, 0xce11, n * 1000003ULL + trial)), 1);
}

inline std::vector<TripletIndex> sample_triplets(std::size_t n_plus, std::size_t n_minus, std::uint64_t count,
                                                 std::uint64_t seed) {
  const std::uint64_t total = static_cast<std::uint64_t>(n_plus) * (n_plus - 1) * n_minus;
  std::vector<TripletIndex> out;
  if (total <= count) {
    out.reserve(total);
    for_each_triplet(n_plus, n_minus, [&](const TripletIndex& t) { out.push_back(t); });
    return out;
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint64_t> flat(0, total - 1);
  out.reserve(count);
  for (std::uint64_t r = 0; r < count; ++r) out.push_back(triplet_at(flat(rng), n_plus, n_minus));
  return out;
}

/// RRM on a fresh dataset proxy_factor times larger than n, independent of every cell.
inline MetricParams proxy_minimizer(const SweepConfig& cfg, std::size_t n, double lambda) {
  TripletSampler s = make_sampler(cfg.task.with_seed(derive_seed(cfg.seed, 0xb0b, n)), 1);
  const std::size_t big = static_cast<std::size_t>(cfg.proxy_factor) * n;
  const TripletDataset D = s.draw_dataset(big, big);
  const auto picks = sample_triplets(big, big, cfg.proxy_triplets, derive_seed(cfg.seed, 0xb0c, n));
  RrmConfig r;
  r.lambda = lambda;
  r.tol = cfg.rrm_tol;
  r.zeta = cfg.zeta;
  r.triplet_budget = std::max<std::uint64_t>(picks.size(), 1);
  RrmResult res = rrm_train_on_triplets(D, picks, r);
  require(res.converged, Errc::Precondition, "proxy minimizer did not converge");
  return res.w;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Rate sweep.

struct SweepRow {
  std::size_t n = 0;
  std::uint64_t trial = 0;
  double sigma_or_T = 0.0;
  double empirical_risk = 0.0;
  RiskMode empirical_mode = RiskMode::ExactUStatistic;
  double population_risk = 0.0;
  double population_std_error = 0.0;
  double gap = 0.0;
  double excess_proxy = std::nan("");  // R(w) - R(w_proxy), same population batch
};

struct SweepCell {
  std::size_t n = 0;
  double mean_gap = 0.0;
  double mean_abs_gap = 0.0;
  double gap_std_error = 0.0;
  double mean_empirical_risk = 0.0;
  double mean_population_risk = 0.0;
  double mean_excess_proxy = std::nan("");
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<SweepCell> cells;
  std::optional<SlopeFit> fit;  // of mean |gap| against n
  std::string fit_error;        // set when the fit was impossible
};

inline SweepReport run_rate_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const LossConfig loss{cfg.zeta};
  SweepReport rep;
  for (const std::size_t n : cfg.n_grid) {
    if (cfg.algorithm == Algorithm::Rrm) {
      const std::uint64_t count = static_cast<std::uint64_t>(n) * (n - 1) * n;
      require(count <= kRrmTripletBudget, Errc::BudgetExceeded,
              "n = " + std::to_string(n) + " exceeds the exact-risk triplet budget");
    }
  }
  for (const std::size_t n : cfg.n_grid) {
    std::optional<MetricParams> proxy;
    if (cfg.excess_proxy && cfg.algorithm != Algorithm::Constant) proxy = detail::proxy_minimizer(cfg, n, cfg.proxy_lambda);
    RunningStats gap, abs_gap, emp, pop, excess;
    for (std::uint64_t t = 0; t < cfg.trials_per_n; ++t) {
      TripletSampler sampler = detail::cell_sampler(cfg, n, t);
      const TripletDataset S = sampler.draw_dataset(n, n);
      const MetricParams w = train(cfg.trainer_at(n, t), S).w;
      const TripletBatch batch = sampler.fork(7).draw_batch(cfg.population_m);
      const RiskEstimate e = empirical_risk(w, S, loss);
      const RiskEstimate p = batch_risk(w, batch, loss);
      SweepRow row;
      row.n = n;
      row.trial = t;
      row.sigma_or_T = cfg.sigma_or_T(n);
      row.empirical_risk = e.value;
      row.empirical_mode = e.mode;
      row.population_risk = p.value;
      row.population_std_error = p.std_error;
      row.gap = p.value - e.value;
      if (proxy) {
        row.excess_proxy = p.value - batch_risk(*proxy, batch, loss).value;
        excess.add(row.excess_proxy);
      }
      gap.add(row.gap);
      abs_gap.add(std::abs(row.gap));
      emp.add(e.value);
      pop.add(p.value);
      rep.rows.push_back(row);
    }
    SweepCell cell;
    cell.n = n;
    cell.mean_gap = gap.mean();
    cell.mean_abs_gap = abs_gap.mean();
    cell.gap_std_error = gap.std_error();
    cell.mean_empirical_risk = emp.mean();
    cell.mean_population_risk = pop.mean();
    if (proxy) cell.mean_excess_proxy = excess.mean();
    rep.cells.push_back(cell);
  }
  std::vector<RatePoint> pts;
  for (const auto& c : rep.cells) pts.push_back({static_cast<double>(c.n), c.mean_abs_gap});
  try {
    rep.fit = fit_loglog_slope(pts);
  } catch (const Error& e) {
    rep.fit_error = e.what();
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Excess-risk decomposition.

struct ExcessConfig {
  SweepConfig sweep;
  double bernstein_delta = 0.1;
  std::uint64_t bernstein_samples = 1000000;

  void validate() const {
    sweep.validate();
    require(sweep.algorithm != Algorithm::Constant, Errc::InvalidConfig, "excess experiment needs sgd or rrm");
    require(bernstein_delta > 0.0 && bernstein_delta < 1.0, Errc::InvalidDelta, "bernstein_delta must lie in (0, 1)");
    require(bernstein_samples >= 2, Errc::InvalidConfig, "bernstein_samples must be at least 2");
  }
};

struct ExcessRow {
  std::size_t n = 0;
  std::uint64_t trial = 0;
  double estimation = 0.0;    // R(w_T) - R_S(w_T)
  double optimization = 0.0;  // R_S(w_T) - R_S(w_proxy)
  double deviation = 0.0;     // R_S(w_proxy) - R(w_proxy)
  double total = 0.0;         // R(w_T) - R(w_proxy)
  double bernstein = 0.0;     // deviation bound at the configured delta
};

struct KernelMoments {
  double b = 0.0;    // max |loss| over the sample
  double tau = 0.0;  // sample variance of the loss
  double mean = 0.0;
};

/// Range and variance of the triplet loss at w from m fresh triplets. Advances the sampler.
inline KernelMoments estimate_kernel_moments(const MetricParams& w, TripletSampler& sampler, std::uint64_t m,
                                             const LossConfig& cfg) {
  require(m >= 2, Errc::Precondition, "need at least 2 samples");
  constexpr std::uint64_t kChunk = 8192;
  RunningStats stats;
  double b = 0.0;
  const Matrix& wm = w.matrix();
  for (std::uint64_t done = 0; done < m;) {
    const std::uint64_t take = std::min(kChunk, m - done);
    const TripletBatch batch = sampler.draw_batch(take);
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(take); ++r) {
      const double u = detail::quad_diff(wm, batch.anchors.row(r), batch.positives.row(r)) -
                       detail::quad_diff(wm, batch.anchors.row(r), batch.negatives.row(r)) + cfg.zeta;
      const double l = logistic::phi(u);
      stats.add(l);
      b = std::max(b, std::abs(l));
    }
    done += take;
  }
  return {b, stats.variance(), stats.mean()};
}

struct ExcessReport {
  std::vector<ExcessRow> rows;
};

inline ExcessReport run_excess_risk_experiment(const ExcessConfig& cfg) {
  cfg.validate();
  const SweepConfig& sw = cfg.sweep;
  const LossConfig loss{sw.zeta};
  ExcessReport rep;
  for (const std::size_t n : sw.n_grid) {
    const MetricParams proxy = detail::proxy_minimizer(sw, n, sw.proxy_lambda);
    TripletSampler moment_stream = make_sampler(sw.task.with_seed(derive_seed(sw.seed, 0xbe5, n)), 1);
    const KernelMoments km = estimate_kernel_moments(proxy, moment_stream, cfg.bernstein_samples, loss);
    const double bound = bernstein_ustat_bound(std::max(km.b, 1e-300), km.tau, cfg.bernstein_delta, n, n);
    for (std::uint64_t t = 0; t < sw.trials_per_n; ++t) {
      TripletSampler sampler = detail::cell_sampler(sw, n, t);
      const TripletDataset S = sampler.draw_dataset(n, n);
      const MetricParams w = train(sw.trainer_at(n, t), S).w;
      const TripletBatch batch = sampler.fork(7).draw_batch(sw.population_m);
      const double rs_w = empirical_risk(w, S, loss).value;
      const double rs_p = empirical_risk(proxy, S, loss).value;
      const double r_w = batch_risk(w, batch, loss).value;
      const double r_p = batch_risk(proxy, batch, loss).value;
      ExcessRow row;
      row.n = n;
      row.trial = t;
      row.estimation = r_w - rs_w;
      row.optimization = rs_w - rs_p;
      row.deviation = rs_p - r_p;
      row.total = r_w - r_p;
      row.bernstein = bound;
      rep.rows.push_back(row);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Optimistic regime.

struct OptimisticConfig {
  SweepConfig sweep;  // algorithm must be Rrm
  /// Subtract R(w_ref) - R_S(w_ref) for an independent reference w_ref; its
  /// expectation over S is zero, so the mean gap estimate stays unbiased.
  bool control_variate = true;

  void validate() const {
    sweep.validate();
    require(sweep.algorithm == Algorithm::Rrm, Errc::InvalidConfig, "optimistic experiment needs the rrm algorithm");
    require(sweep.task.separation > 0.0, Errc::InvalidConfig, "optimistic experiment needs a separated task");
  }

  /// RegimeViolation unless sigma(n) * n >= 8 alpha at every n.
  void check_regime() const {
    const double alpha = regularity_constants(sweep.task.B).alpha;
    for (const std::size_t n : sweep.n_grid) {
      const double s = sweep.sigma_at(n);
      require(optimistic_regime_holds(alpha, s, n, n), Errc::RegimeViolation,
              "sigma(" + std::to_string(n) + ") * n = " + detail::format_double(s * static_cast<double>(n)) +
                  " is below 8 alpha = " + detail::format_double(8.0 * alpha));
    }
  }
};

struct OptimisticRow {
  std::size_t n = 0;
  std::uint64_t trial = 0;
  double sigma = 0.0;
  double empirical_risk = 0.0;
  double population_risk = 0.0;
  double gap = 0.0;           // R(A(S)) - R_S(A(S))
  double reference_gap = 0.0; // R(w_ref) - R_S(w_ref), zero without control variate
  double adjusted_gap = 0.0;  // gap - reference_gap
};

struct OptimisticCell {
  std::size_t n = 0;
  double sigma = 0.0;
  double epsilon = 0.0;
  double mean_gap = 0.0;  // mean adjusted gap
  double gap_std_error = 0.0;
  double mean_raw_gap = 0.0;
  double raw_gap_std_error = 0.0;
  double mean_empirical_risk = 0.0;
  double bound = 0.0;
  bool dominated = false;
};

struct OptimisticReport {
  std::vector<OptimisticRow> rows;
  std::vector<OptimisticCell> cells;
  std::optional<SlopeFit> fit;  // of mean gap against n
  std::string fit_error;
  std::uint64_t violations = 0;  // cells where the mean gap exceeds the bound
};

inline OptimisticReport run_optimistic_experiment(const OptimisticConfig& cfg) {
  cfg.validate();
  cfg.check_regime();
  const SweepConfig& sw = cfg.sweep;
  const LossConfig loss{sw.zeta};
  const double alpha = regularity_constants(sw.task.B).alpha;
  OptimisticReport rep;
  for (const std::size_t n : sw.n_grid) {
    const double sigma = sw.sigma_at(n);
    std::optional<MetricParams> ref;
    if (cfg.control_variate) ref = detail::proxy_minimizer(sw, n, 0.5 * sigma);
    RunningStats adj, raw, emp;
    for (std::uint64_t t = 0; t < sw.trials_per_n; ++t) {
      TripletSampler sampler = detail::cell_sampler(sw, n, t);
      const TripletDataset S = sampler.draw_dataset(n, n);
      const MetricParams w = train(sw.trainer_at(n, t), S).w;
      const TripletBatch batch = sampler.fork(7).draw_batch(sw.population_m);
      OptimisticRow row;
      row.n = n;
      row.trial = t;
      row.sigma = sigma;
      row.empirical_risk = empirical_risk(w, S, loss).value;
      row.population_risk = batch_risk(w, batch, loss).value;
      row.gap = row.population_risk - row.empirical_risk;
      if (ref) row.reference_gap = batch_risk(*ref, batch, loss).value - empirical_risk(*ref, S, loss).value;
      row.adjusted_gap = row.gap - row.reference_gap;
      adj.add(row.adjusted_gap);
      raw.add(row.gap);
      emp.add(row.empirical_risk);
      rep.rows.push_back(row);
    }
    OptimisticCell cell;
    cell.n = n;
    cell.sigma = sigma;
    cell.epsilon = balanced_epsilon(n, n, sigma);
    cell.mean_gap = adj.mean();
    cell.gap_std_error = adj.std_error();
    cell.mean_raw_gap = raw.mean();
    cell.raw_gap_std_error = raw.std_error();
    cell.mean_empirical_risk = emp.mean();
    cell.bound = theorem4_optimistic_bound(cell.epsilon, alpha, sigma, n, n, std::max(cell.mean_empirical_risk, 0.0));
    cell.dominated = cell.mean_gap <= cell.bound;
    if (!cell.dominated) ++rep.violations;
    rep.cells.push_back(cell);
  }
  std::vector<RatePoint> pts;
  for (const auto& c : rep.cells) pts.push_back({static_cast<double>(c.n), c.mean_gap});
  try {
    rep.fit = fit_loglog_slope(pts);
  } catch (const Error& e) {
    rep.fit_error = e.what();
  }
  return rep;
}

// ---------------------------------------------------------------------------
// CSV writers. Every number goes through format_double so output is byte-stable.

namespace detail {
inline std::string fmt(double x) { return std::isnan(x) ? std::string() : format_double(x); }
}  // namespace detail

inline void write_sweep_rows_csv(std::ostream& out, const SweepReport& r) {
  out << "n,trial,sigma_or_T,mode,empirical_risk,population_risk,population_std_error,gap,abs_gap,excess_proxy\n";
  for (const auto& x : r.rows) {
    out << x.n << ',' << x.trial << ',' << detail::fmt(x.sigma_or_T) << ',' << to_string(x.empirical_mode) << ','
        << detail::fmt(x.empirical_risk) << ',' << detail::fmt(x.population_risk) << ','
        << detail::fmt(x.population_std_error) << ',' << detail::fmt(x.gap) << ',' << detail::fmt(std::abs(x.gap))
        << ',' << detail::fmt(x.excess_proxy) << '\n';
  }
}

inline void write_sweep_cells_csv(std::ostream& out, const SweepReport& r) {
  out << "n,mean_gap,mean_abs_gap,gap_std_error,mean_empirical_risk,mean_population_risk,mean_excess_proxy\n";
  for (const auto& c : r.cells) {
    out << c.n << ',' << detail::fmt(c.mean_gap) << ',' << detail::fmt(c.mean_abs_gap) << ','
        << detail::fmt(c.gap_std_error) << ',' << detail::fmt(c.mean_empirical_risk) << ','
        << detail::fmt(c.mean_population_risk) << ',' << detail::fmt(c.mean_excess_proxy) << '\n';
  }
}

inline void write_fit_csv(std::ostream& out, const std::optional<SlopeFit>& fit, const std::string& error) {
  out << "slope,intercept,slope_stderr,r_squared,error\n";
  if (fit) {
    out << detail::fmt(fit->slope) << ',' << detail::fmt(fit->intercept) << ',' << detail::fmt(fit->slope_stderr)
        << ',' << detail::fmt(fit->r_squared) << ",\n";
  } else {
    std::string e = error;
    std::replace(e.begin(), e.end(), ',', ';');
    out << ",,,," << e << '\n';
  }
}

inline void write_excess_csv(std::ostream& out, const ExcessReport& r) {
  out << "n,trial,estimation,optimization,deviation,total,bernstein_bound\n";
  for (const auto& x : r.rows) {
    out << x.n << ',' << x.trial << ',' << detail::fmt(x.estimation) << ',' << detail::fmt(x.optimization) << ','
        << detail::fmt(x.deviation) << ',' << detail::fmt(x.total) << ',' << detail::fmt(x.bernstein) << '\n';
  }
}

inline void write_optimistic_rows_csv(std::ostream& out, const OptimisticReport& r) {
  out << "n,trial,sigma,empirical_risk,population_risk,gap,reference_gap,adjusted_gap\n";
  for (const auto& x : r.rows) {
    out << x.n << ',' << x.trial << ',' << detail::fmt(x.sigma) << ',' << detail::fmt(x.empirical_risk) << ','
        << detail::fmt(x.population_risk) << ',' << detail::fmt(x.gap) << ',' << detail::fmt(x.reference_gap) << ','
        << detail::fmt(x.adjusted_gap) << '\n';
  }
}

inline void write_optimistic_cells_csv(std::ostream& out, const OptimisticReport& r) {
  out << "n,sigma,epsilon,mean_gap,gap_std_error,mean_raw_gap,raw_gap_std_error,mean_empirical_risk,bound,dominated\n";
  for (const auto& c : r.cells) {
    out << c.n << ',' << detail::fmt(c.sigma) << ',' << detail::fmt(c.epsilon) << ',' << detail::fmt(c.mean_gap) << ','
        << detail::fmt(c.gap_std_error) << ',' << detail::fmt(c.mean_raw_gap) << ','
        << detail::fmt(c.raw_gap_std_error) << ',' << detail::fmt(c.mean_empirical_risk) << ','
        << detail::fmt(c.bound) << ',' << (c.dominated ? 1 : 0) << '\n';
  }
}

}  // namespace tripstab
