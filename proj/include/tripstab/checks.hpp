#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tripstab/loss.hpp"
#include "tripstab/numeric.hpp"
#include "tripstab/optim.hpp"

namespace tripstab {

/// Outcome of one randomized property suite.
struct CheckResult {
  std::string name;
  std::uint64_t probes = 0;
  std::uint64_t violations = 0;
  double worst = 0.0;  // largest observed ratio or error
  double limit = 0.0;  // the value `worst` is compared against
};

struct CheckOptions {
  std::uint64_t probes = 10000;
  double B = 1.0;
  std::uint64_t seed = 0;
  std::size_t d = 3;
  double w_scale = 1.0;  // entries of random parameters are uniform on [-w_scale, w_scale]
  double zeta_max = 2.0;
};

namespace detail {

class ProbeDraws {
 public:
  ProbeDraws(const CheckOptions& opt, std::uint64_t stream) : opt_(opt), rng_(derive_seed(opt.seed, stream)) {}

  /// Uniform point in the Euclidean ball of radius B; a quarter of the draws sit on the sphere.
  Vector point() {
    Vector v(static_cast<Eigen::Index>(opt_.d));
    for (Eigen::Index a = 0; a < v.size(); ++a) v(a) = normal_(rng_);
    const double nrm = v.norm();
    if (nrm == 0.0) return v;
    const double r = unit_(rng_) < 0.25 ? 1.0 : std::pow(unit_(rng_), 1.0 / static_cast<double>(opt_.d));
    return v * (opt_.B * r / nrm);
  }

  TripletFeatures triplet() { return {point(), point(), point()}; }

  MetricParams params() {
    const auto d = static_cast<Eigen::Index>(opt_.d);
    Matrix m(d, d);
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = a; b < d; ++b) {
        const double x = opt_.w_scale * (2.0 * unit_(rng_) - 1.0);
        m(a, b) = x;
        m(b, a) = x;
      }
    return MetricParams::from_matrix(m);
  }

  LossConfig loss() { return {opt_.zeta_max * unit_(rng_)}; }

 private:
  CheckOptions opt_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

/// Loss at an arbitrary (not necessarily symmetric) matrix, for finite differences.
inline double loss_at_matrix(const Matrix& w, const TripletFeatures& t, const LossConfig& cfg) {
  const double u = quad_diff(w, t.anchor, t.positive) - quad_diff(w, t.anchor, t.negative) + cfg.zeta;
  return logistic::phi(u);
}

}  // namespace detail

/// Analytic gradient against entrywise central differences with step h.
/// The error is ||G_fd - G||_F / ||G||_F; probes with ||G||_F below 1e-8 use
/// the absolute error instead.
inline CheckResult gradient_check(const CheckOptions& opt, double h = 1e-6, double limit = 1e-6) {
  detail::ProbeDraws draw(opt, 1);
  CheckResult r{"gradient", opt.probes, 0, 0.0, limit};
  const auto d = static_cast<Eigen::Index>(opt.d);
  for (std::uint64_t p = 0; p < opt.probes; ++p) {
    const MetricParams w = draw.params();
    const TripletFeatures t = draw.triplet();
    const LossConfig cfg = draw.loss();
    const Matrix g = logistic_triplet_grad(w, t, cfg);
    Matrix fd(d, d);
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b) {
        Matrix wp = w.matrix();
        Matrix wm = w.matrix();
        wp(a, b) += h;
        wm(a, b) -= h;
        fd(a, b) = (detail::loss_at_matrix(wp, t, cfg) - detail::loss_at_matrix(wm, t, cfg)) / (2.0 * h);
      }
    const double gn = g.norm();
    const double err = (fd - g).norm() / (gn > 1e-8 ? gn : 1.0);
    r.worst = std::max(r.worst, err);
    if (!(err < limit)) ++r.violations;
  }
  return r;
}

/// |l(w) - l(w')| <= 8 B^2 ||w - w'||_F.
inline CheckResult lipschitz_check(const CheckOptions& opt) {
  detail::ProbeDraws draw(opt, 2);
  const double L = regularity_constants(opt.B).L;
  CheckResult r{"lipschitz", opt.probes, 0, 0.0, L};
  for (std::uint64_t p = 0; p < opt.probes; ++p) {
    const MetricParams w = draw.params();
    const MetricParams w2 = draw.params();
    const TripletFeatures t = draw.triplet();
    const LossConfig cfg = draw.loss();
    const double dist = (w.matrix() - w2.matrix()).norm();
    const double diff = std::abs(logistic_triplet_loss(w, t, cfg) - logistic_triplet_loss(w2, t, cfg));
    if (dist > 0.0) r.worst = std::max(r.worst, diff / dist);
    if (!(diff <= L * dist)) ++r.violations;
  }
  return r;
}

/// ||grad l(w) - grad l(w')||_F <= 64 B^4 ||w - w'||_F.
inline CheckResult smoothness_check(const CheckOptions& opt) {
  detail::ProbeDraws draw(opt, 3);
  const double alpha = regularity_constants(opt.B).alpha;
  CheckResult r{"smoothness", opt.probes, 0, 0.0, alpha};
  for (std::uint64_t p = 0; p < opt.probes; ++p) {
    const MetricParams w = draw.params();
    const MetricParams w2 = draw.params();
    const TripletFeatures t = draw.triplet();
    const LossConfig cfg = draw.loss();
    const double dist = (w.matrix() - w2.matrix()).norm();
    const double diff = (logistic_triplet_grad(w, t, cfg) - logistic_triplet_grad(w2, t, cfg)).norm();
    if (dist > 0.0) r.worst = std::max(r.worst, diff / dist);
    if (!(diff <= alpha * dist)) ++r.violations;
  }
  return r;
}

/// l((w + w') / 2) <= (l(w) + l(w')) / 2 + 1e-12; `worst` is the largest excess.
inline CheckResult convexity_check(const CheckOptions& opt) {
  detail::ProbeDraws draw(opt, 4);
  CheckResult r{"convexity", opt.probes, 0, -std::numeric_limits<double>::infinity(), 1e-12};
  for (std::uint64_t p = 0; p < opt.probes; ++p) {
    const MetricParams w = draw.params();
    const MetricParams w2 = draw.params();
    const TripletFeatures t = draw.triplet();
    const LossConfig cfg = draw.loss();
    const MetricParams mid = MetricParams::from_matrix(0.5 * (w.matrix() + w2.matrix()));
    const double excess =
        logistic_triplet_loss(mid, t, cfg) - 0.5 * (logistic_triplet_loss(w, t, cfg) + logistic_triplet_loss(w2, t, cfg));
    r.worst = std::max(r.worst, excess);
    if (!(excess <= 1e-12)) ++r.violations;
  }
  return r;
}

/// The gradient step with eta = 1 / (32 B^4) never increases the distance between two parameters.
inline CheckResult expansiveness_sweep(const CheckOptions& opt) {
  detail::ProbeDraws draw(opt, 5);
  const double eta = 1.0 / (32.0 * std::pow(opt.B, 4));
  CheckResult r{"expansiveness", opt.probes, 0, 0.0, 1.0};
  for (std::uint64_t p = 0; p < opt.probes; ++p) {
    const MetricParams w = draw.params();
    const MetricParams w2 = draw.params();
    const TripletFeatures t = draw.triplet();
    const LossConfig cfg = draw.loss();
    const ExpansivenessResult e = expansiveness_check(w, w2, t, eta, cfg);
    if (e.rhs > 0.0) r.worst = std::max(r.worst, e.lhs / e.rhs);
    if (!e.holds) ++r.violations;
  }
  return r;
}

inline std::vector<CheckResult> run_property_checks(const CheckOptions& opt) {
  CheckOptions grad_opt = opt;
  grad_opt.probes = std::min<std::uint64_t>(opt.probes, 1000);
  return {gradient_check(grad_opt), lipschitz_check(opt), smoothness_check(opt), convexity_check(opt),
          expansiveness_sweep(opt)};
}

}  // namespace tripstab
