#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "tripstab/core.hpp"
#include "tripstab/error.hpp"

namespace tripstab {

using Matrix = Eigen::MatrixXd;

/// Model parameter of the bilinear metric h_w(x, x') = <w, (x - x')(x - x')^T>.
/// Always exactly symmetric: the constructors symmetrize, and every update
/// adds an exactly symmetric matrix.
class MetricParams {
 public:
  MetricParams() = default;

  static MetricParams zero(std::size_t d) {
    MetricParams w;
    w.m_ = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    return w;
  }

  static MetricParams identity(std::size_t d, double scale = 1.0) {
    MetricParams w;
    w.m_ = scale * Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    return w;
  }

  /// Accepts a square matrix whose asymmetry is within `tol` (entrywise) and
  /// stores its exact symmetric part.
  static MetricParams from_matrix(const Matrix& m, double tol = 1e-12) {
    require(m.rows() == m.cols() && m.rows() > 0, Errc::DimensionMismatch,
            "metric matrix must be square and non-empty");
    require(m.allFinite(), Errc::NonFiniteValue, "metric matrix has a non-finite entry");
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    require(asym <= tol, Errc::InvalidInputs,
            "metric matrix is not symmetric (max asymmetry " + std::to_string(asym) + ")");
    MetricParams w;
    w.m_ = 0.5 * (m + m.transpose());
    return w;
  }

  const Matrix& matrix() const noexcept { return m_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  double frobenius_norm() const { return m_.norm(); }

  /// w <- w + a * g, where g is symmetric.
  void add_scaled(double a, const Matrix& g) {
    require(g.rows() == m_.rows() && g.cols() == m_.cols(), Errc::DimensionMismatch,
            "update has the wrong shape");
    m_.noalias() += a * g;
  }

  friend bool operator==(const MetricParams& a, const MetricParams& b) {
    return a.m_.rows() == b.m_.rows() && a.m_.cols() == b.m_.cols() && a.m_ == b.m_;
  }

 private:
  Matrix m_;
};

struct LossConfig {
  double zeta = 0.0;

  void validate() const {
    require(std::isfinite(zeta) && zeta >= 0.0, Errc::InvalidConfig,
            "margin zeta must be finite and nonnegative");
  }
};

/// Feature vectors of one triplet: anchor x+, second positive x~+, negative x-.
struct TripletFeatures {
  Vector anchor;
  Vector positive;
  Vector negative;
};

struct RegularityConstants {
  double B = 0.0;
  double L = 0.0;        // Lipschitz: 8 B^2
  double alpha = 0.0;    // smoothness: 64 B^4
  double eta_max = 0.0;  // 2 / alpha
};

inline RegularityConstants regularity_constants(double B) {
  require(std::isfinite(B) && B > 0.0, Errc::NonpositiveBound, "feature bound B must be positive");
  const double b2 = B * B;
  const double alpha = 64.0 * b2 * b2;
  return {B, 8.0 * b2, alpha, 2.0 / alpha};
}

/// phi(u) = log(1 + exp(-u)) and its derivatives, stable for any finite u.
namespace logistic {

inline double phi(double u) noexcept { return std::log1p(std::exp(-std::abs(u))) + std::max(-u, 0.0); }

inline double phi_prime(double u) noexcept {
  if (u >= 0.0) {
    const double e = std::exp(-u);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(u));
}

inline double phi_second(double u) noexcept {
  const double e = std::exp(-std::abs(u));
  const double s = 1.0 + e;
  return e / (s * s);
}

}  // namespace logistic

namespace detail {

inline void check_dims(const MetricParams& w, Eigen::Index d) {
  require(static_cast<Eigen::Index>(w.dim()) == d, Errc::DimensionMismatch,
          "metric is " + std::to_string(w.dim()) + "x" + std::to_string(w.dim()) +
              " but features have dimension " + std::to_string(d));
}

inline void check_triplet(const MetricParams& w, const TripletFeatures& t) {
  const auto d = t.anchor.size();
  require(t.positive.size() == d && t.negative.size() == d, Errc::DimensionMismatch,
          "triplet features have inconsistent dimensions");
  check_dims(w, d);
}

/// (x - y)^T w (x - y) without allocating; x and y are any Eigen vector expressions.
template <class X, class Y>
double quad_diff(const Matrix& w, const X& x, const Y& y) {
  const Eigen::Index d = w.rows();
  double acc = 0.0;
  for (Eigen::Index a = 0; a < d; ++a) {
    const double da = x(a) - y(a);
    double row = 0.0;
    for (Eigen::Index b = 0; b < d; ++b) row += w(a, b) * (x(b) - y(b));
    acc += da * row;
  }
  return acc;
}

}  // namespace detail

inline double metric_score(const MetricParams& w, const Vector& x, const Vector& x2) {
  require(x.size() == x2.size(), Errc::DimensionMismatch, "score arguments differ in dimension");
  detail::check_dims(w, x.size());
  return detail::quad_diff(w.matrix(), x, x2);
}

/// u = h_w(x+, x~+) - h_w(x+, x-) + zeta, the argument of phi.
inline double triplet_margin(const MetricParams& w, const TripletFeatures& t, const LossConfig& cfg) {
  detail::check_triplet(w, t);
  return detail::quad_diff(w.matrix(), t.anchor, t.positive) -
         detail::quad_diff(w.matrix(), t.anchor, t.negative) + cfg.zeta;
}

inline double logistic_triplet_loss(const MetricParams& w, const TripletFeatures& t,
                                    const LossConfig& cfg) {
  return logistic::phi(triplet_margin(w, t, cfg));
}

/// D+ - D- with D+ = (x+ - x~+)(x+ - x~+)^T and D- = (x+ - x-)(x+ - x-)^T.
inline Matrix triplet_direction(const TripletFeatures& t) {
  const Vector dp = t.anchor - t.positive;
  const Vector dn = t.anchor - t.negative;
  return dp * dp.transpose() - dn * dn.transpose();
}

/// phi'(u) (D+ - D-); symmetric because both outer products are.
inline Matrix logistic_triplet_grad(const MetricParams& w, const TripletFeatures& t,
                                    const LossConfig& cfg) {
  const double u = triplet_margin(w, t, cfg);
  return logistic::phi_prime(u) * triplet_direction(t);
}

/// 1 when the margin condition h(x+, x~+) + zeta < h(x+, x-) fails (boundary counts as failure).
inline int zero_one_triplet_loss(const MetricParams& w, const TripletFeatures& t,
                                 const LossConfig& cfg) {
  return triplet_margin(w, t, cfg) >= 0.0 ? 1 : 0;
}

/// Largest norm among the three feature vectors of a triplet.
inline double triplet_bound(const TripletFeatures& t) {
  return std::max({t.anchor.norm(), t.positive.norm(), t.negative.norm()});
}

// Matrix CSV: d rows of d comma-separated values, no header.

inline void write_metric_csv(std::ostream& out, const MetricParams& w) {
  const Matrix& m = w.matrix();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << detail::format_double(m(r, c));
    }
    out << '\n';
  }
}

inline MetricParams read_metric_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    for (const auto& cell : detail::split_csv_line(line)) row.push_back(detail::parse_double(cell, line_no));
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), Errc::Parse, "empty metric file");
  const auto d = rows.size();
  Matrix m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < d; ++r) {
    require(rows[r].size() == d, Errc::DimensionMismatch, "metric file is not square");
    for (std::size_t c = 0; c < d; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return MetricParams::from_matrix(m, 1e-12);
}

}  // namespace tripstab
