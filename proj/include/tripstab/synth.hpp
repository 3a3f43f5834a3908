#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

#include "tripstab/core.hpp"
#include "tripstab/loss.hpp"
#include "tripstab/numeric.hpp"

namespace tripstab {

/// Synthetic two-pool task: isotropic Gaussians at +-(separation/2) e1 with
/// spread noise_scale, radially pulled back into the ball of radius B.
struct TaskConfig {
  std::size_t d = 2;
  std::size_t n_plus = 50;
  std::size_t n_minus = 50;
  double B = 1.0;
  double separation = 1.0;
  double noise_scale = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    require(d >= 1, Errc::InvalidConfig, "d must be at least 1");
    require(std::isfinite(B) && B > 0.0, Errc::InvalidConfig, "B must be positive");
    require(n_plus >= 2, Errc::InvalidConfig, "n_plus must be at least 2");
    require(n_minus >= 1, Errc::InvalidConfig, "n_minus must be at least 1");
    require(std::isfinite(separation) && separation >= 0.0, Errc::InvalidConfig,
            "separation must be nonnegative");
    require(std::isfinite(noise_scale) && noise_scale >= 0.0, Errc::InvalidConfig,
            "noise_scale must be nonnegative");
  }

  /// Same task with the pool sizes replaced.
  TaskConfig with_sizes(std::size_t np, std::size_t nm) const {
    TaskConfig c = *this;
    c.n_plus = np;
    c.n_minus = nm;
    return c;
  }

  TaskConfig with_seed(std::uint64_t s) const {
    TaskConfig c = *this;
    c.seed = s;
    return c;
  }
};

inline constexpr int kPositiveLabel = 1;
inline constexpr int kNegativeLabel = 0;

/// Law of one pool.
class PoolLaw {
 public:
  PoolLaw() = default;
  PoolLaw(Vector mean, double noise, double bound) : mean_(std::move(mean)), noise_(noise), bound_(bound) {}

  template <class Rng>
  void draw_into(Rng& rng, std::normal_distribution<double>& normal, Eigen::Ref<Vector> out) const {
    for (Eigen::Index a = 0; a < mean_.size(); ++a) out(a) = mean_(a) + noise_ * normal(rng);
    const double norm = out.norm();
    if (norm > bound_) {
      out *= bound_ / norm;
      while (out.norm() > bound_) out *= std::nextafter(1.0, 0.0);
    }
  }

  const Vector& mean() const noexcept { return mean_; }
  double noise() const noexcept { return noise_; }
  double bound() const noexcept { return bound_; }

 private:
  Vector mean_;
  double noise_ = 0.0;
  double bound_ = 1.0;
};

/// A batch of triplets stored row-wise.
struct TripletBatch {
  RowMatrix anchors;
  RowMatrix positives;
  RowMatrix negatives;

  std::size_t size() const noexcept { return static_cast<std::size_t>(anchors.rows()); }
  TripletFeatures at(std::size_t r) const {
    const auto i = static_cast<Eigen::Index>(r);
    return {anchors.row(i).transpose(), positives.row(i).transpose(), negatives.row(i).transpose()};
  }
};

/// Unlimited stream of fresh i.i.d. samples/triplets from the task law:
/// x+ and x~+ independent from the positive law, x- from the negative law.
class TripletSampler {
 public:
  TripletSampler(PoolLaw positive, PoolLaw negative, std::uint64_t seed)
      : pos_(std::move(positive)), neg_(std::move(negative)), seed_(seed), rng_(seed) {}

  std::size_t dim() const noexcept { return static_cast<std::size_t>(pos_.mean().size()); }
  std::uint64_t seed() const noexcept { return seed_; }
  const PoolLaw& law(Pool pool) const noexcept { return pool == Pool::Positive ? pos_ : neg_; }

  /// Independent stream; forks with distinct ids never share state.
  TripletSampler fork(std::uint64_t stream) const {
    return TripletSampler(pos_, neg_, derive_seed(seed_, 0x5a3f, stream));
  }

  Sample draw_sample(Pool pool) {
    Sample s;
    s.pool = pool;
    s.label = pool == Pool::Positive ? kPositiveLabel : kNegativeLabel;
    s.features.resize(static_cast<Eigen::Index>(dim()));
    law(pool).draw_into(rng_, normal_, s.features);
    return s;
  }

  TripletFeatures draw_triplet() {
    TripletFeatures t;
    t.anchor = draw_sample(Pool::Positive).features;
    t.positive = draw_sample(Pool::Positive).features;
    t.negative = draw_sample(Pool::Negative).features;
    return t;
  }

  TripletBatch draw_batch(std::size_t m) {
    const auto d = static_cast<Eigen::Index>(dim());
    const auto rows = static_cast<Eigen::Index>(m);
    TripletBatch b{RowMatrix(rows, d), RowMatrix(rows, d), RowMatrix(rows, d)};
    Vector tmp(d);
    for (Eigen::Index r = 0; r < rows; ++r) {
      pos_.draw_into(rng_, normal_, tmp);
      b.anchors.row(r) = tmp.transpose();
      pos_.draw_into(rng_, normal_, tmp);
      b.positives.row(r) = tmp.transpose();
      neg_.draw_into(rng_, normal_, tmp);
      b.negatives.row(r) = tmp.transpose();
    }
    return b;
  }

  /// n samples from one pool as matrix rows.
  RowMatrix draw_pool(Pool pool, std::size_t n) {
    const auto d = static_cast<Eigen::Index>(dim());
    RowMatrix m(static_cast<Eigen::Index>(n), d);
    Vector tmp(d);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      law(pool).draw_into(rng_, normal_, tmp);
      m.row(r) = tmp.transpose();
    }
    return m;
  }

  TripletDataset draw_dataset(std::size_t n_plus, std::size_t n_minus) {
    RowMatrix pos = draw_pool(Pool::Positive, n_plus);
    RowMatrix neg = draw_pool(Pool::Negative, n_minus);
    return make_dataset(std::move(pos), std::vector<int>(n_plus, kPositiveLabel), std::move(neg),
                        std::vector<int>(n_minus, kNegativeLabel));
  }

 private:
  PoolLaw pos_;
  PoolLaw neg_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
};

struct Task {
  TripletDataset train;
  TripletSampler sampler;
};

struct LowNoiseTask {
  TripletDataset train;
  TripletSampler sampler;
  MetricParams w_ref;
};

/// Sampler for the task law without drawing a training set.
inline TripletSampler make_sampler(const TaskConfig& cfg, std::uint64_t stream = 2) {
  cfg.validate();
  Vector mu_pos = Vector::Zero(static_cast<Eigen::Index>(cfg.d));
  Vector mu_neg = Vector::Zero(static_cast<Eigen::Index>(cfg.d));
  mu_pos(0) = 0.5 * cfg.separation;
  mu_neg(0) = -0.5 * cfg.separation;
  return TripletSampler(PoolLaw(mu_pos, cfg.noise_scale, cfg.B), PoolLaw(mu_neg, cfg.noise_scale, cfg.B),
                        derive_seed(cfg.seed, stream));
}

/// Training set from the dataset stream, plus an independent sampler for
/// population quantities.
inline Task gen_task(const TaskConfig& cfg) {
  TripletSampler data_stream = make_sampler(cfg, 1);
  TripletDataset train = data_stream.draw_dataset(cfg.n_plus, cfg.n_minus);
  return Task{std::move(train), make_sampler(cfg, 2)};
}

/// Well separated task with a reference metric w_ref = I / separation^2,
/// which scores the distance between the pool means as 1.
inline LowNoiseTask low_noise_task(const TaskConfig& cfg) {
  cfg.validate();
  require(cfg.separation > 0.0, Errc::InvalidConfig, "low-noise task needs separation > 0");
  Task t = gen_task(cfg);
  return LowNoiseTask{std::move(t.train), std::move(t.sampler),
                      MetricParams::identity(cfg.d, 1.0 / (cfg.separation * cfg.separation))};
}

/// Default low-noise configuration: spread 1% of the separation.
inline TaskConfig low_noise_config(std::size_t d = 2, double separation = 1.0, double B = 1.0) {
  TaskConfig c;
  c.d = d;
  c.B = B;
  c.separation = separation;
  c.noise_scale = 0.01 * separation;
  return c;
}

}  // namespace tripstab
