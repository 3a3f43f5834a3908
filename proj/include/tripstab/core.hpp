#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tripstab/error.hpp"

namespace tripstab {

using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Pool : std::uint8_t { Positive, Negative };

constexpr std::string_view to_string(Pool pool) noexcept {
  return pool == Pool::Positive ? "pos" : "neg";
}

struct Sample {
  Vector features;
  int label = 0;
  Pool pool = Pool::Positive;

  friend bool operator==(const Sample& a, const Sample& b) {
    return a.pool == b.pool && a.label == b.label && a.features.size() == b.features.size() &&
           a.features == b.features;
  }
};

/// (anchor positive, second positive, negative); i != j always.
struct TripletIndex {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;

  friend auto operator<=>(const TripletIndex&, const TripletIndex&) = default;
};

struct SlotRef {
  Pool pool = Pool::Positive;
  std::size_t index = 0;

  friend auto operator<=>(const SlotRef&, const SlotRef&) = default;
};

/// Positional slot identity: the i-th positive is the i-th row, whatever its
/// content. Perturbations therefore keep row order.
class TripletDataset {
 public:
  TripletDataset() = default;

  std::size_t n_plus() const noexcept { return static_cast<std::size_t>(pos_.rows()); }
  std::size_t n_minus() const noexcept { return static_cast<std::size_t>(neg_.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(pos_.cols()); }
  std::size_t pool_size(Pool pool) const noexcept {
    return pool == Pool::Positive ? n_plus() : n_minus();
  }

  /// n+ (n+ - 1) n-, the number of terms in the empirical risk.
  std::uint64_t triplet_count() const noexcept {
    const auto np = static_cast<std::uint64_t>(n_plus());
    return np * (np - 1) * static_cast<std::uint64_t>(n_minus());
  }

  const RowMatrix& positives() const noexcept { return pos_; }
  const RowMatrix& negatives() const noexcept { return neg_; }
  const std::vector<int>& positive_labels() const noexcept { return pos_labels_; }
  const std::vector<int>& negative_labels() const noexcept { return neg_labels_; }

  auto positive(std::size_t i) const { return pos_.row(static_cast<Eigen::Index>(i)); }
  auto negative(std::size_t k) const { return neg_.row(static_cast<Eigen::Index>(k)); }

  Sample sample(SlotRef slot) const {
    check_slot(slot);
    const auto row = static_cast<Eigen::Index>(slot.index);
    if (slot.pool == Pool::Positive) {
      return Sample{pos_.row(row).transpose(), pos_labels_[slot.index], Pool::Positive};
    }
    return Sample{neg_.row(row).transpose(), neg_labels_[slot.index], Pool::Negative};
  }

  void check_slot(SlotRef slot) const {
    require(slot.index < pool_size(slot.pool), Errc::SlotOutOfBounds,
            "slot " + std::to_string(slot.index) + " outside " + std::string(to_string(slot.pool)) +
                " pool of size " + std::to_string(pool_size(slot.pool)));
  }

  friend bool operator==(const TripletDataset& a, const TripletDataset& b) {
    return a.pos_.rows() == b.pos_.rows() && a.neg_.rows() == b.neg_.rows() &&
           a.pos_.cols() == b.pos_.cols() && a.pos_ == b.pos_ && a.neg_ == b.neg_ &&
           a.pos_labels_ == b.pos_labels_ && a.neg_labels_ == b.neg_labels_;
  }

 private:
  friend TripletDataset replace_samples(const TripletDataset&,
                                        std::span<const std::pair<SlotRef, Sample>>);
  friend TripletDataset make_dataset(RowMatrix, std::vector<int>, RowMatrix, std::vector<int>);

  RowMatrix pos_;
  RowMatrix neg_;
  std::vector<int> pos_labels_;
  std::vector<int> neg_labels_;
};

namespace detail {

inline void check_finite(const Eigen::Ref<const Vector>& v, const char* what) {
  require(v.allFinite(), Errc::NonFiniteValue, std::string(what) + " has a non-finite entry");
}

}  // namespace detail

/// Builds a validated dataset from feature matrices (rows are samples).
inline TripletDataset make_dataset(RowMatrix positives, std::vector<int> pos_labels,
                                   RowMatrix negatives, std::vector<int> neg_labels) {
  require(negatives.rows() > 0, Errc::EmptyNegatives, "negative pool is empty");
  require(positives.rows() >= 2, Errc::TooFewPositives,
          "need at least two positives, got " + std::to_string(positives.rows()));
  require(positives.cols() > 0, Errc::DimensionMismatch, "feature dimension must be positive");
  require(positives.cols() == negatives.cols(), Errc::DimensionMismatch,
          "positives have dimension " + std::to_string(positives.cols()) + ", negatives " +
              std::to_string(negatives.cols()));
  require(pos_labels.size() == static_cast<std::size_t>(positives.rows()) &&
              neg_labels.size() == static_cast<std::size_t>(negatives.rows()),
          Errc::InvalidInputs, "label count does not match sample count");
  require(positives.allFinite() && negatives.allFinite(), Errc::NonFiniteValue,
          "features must be finite");
  TripletDataset ds;
  ds.pos_ = std::move(positives);
  ds.neg_ = std::move(negatives);
  ds.pos_labels_ = std::move(pos_labels);
  ds.neg_labels_ = std::move(neg_labels);
  return ds;
}

inline TripletDataset make_dataset(const std::vector<Sample>& positives,
                                   const std::vector<Sample>& negatives) {
  require(!negatives.empty(), Errc::EmptyNegatives, "negative pool is empty");
  require(positives.size() >= 2, Errc::TooFewPositives,
          "need at least two positives, got " + std::to_string(positives.size()));
  const auto d = positives.front().features.size();
  require(d > 0, Errc::DimensionMismatch, "feature dimension must be positive");

  RowMatrix pos(static_cast<Eigen::Index>(positives.size()), d);
  RowMatrix neg(static_cast<Eigen::Index>(negatives.size()), d);
  std::vector<int> pos_labels;
  std::vector<int> neg_labels;
  pos_labels.reserve(positives.size());
  neg_labels.reserve(negatives.size());

  for (std::size_t i = 0; i < positives.size(); ++i) {
    const Sample& s = positives[i];
    require(s.pool == Pool::Positive, Errc::PoolMismatch,
            "sample " + std::to_string(i) + " of the positive list is tagged negative");
    require(s.features.size() == d, Errc::DimensionMismatch,
            "positive " + std::to_string(i) + " has dimension " + std::to_string(s.features.size()));
    detail::check_finite(s.features, "positive sample");
    pos.row(static_cast<Eigen::Index>(i)) = s.features.transpose();
    pos_labels.push_back(s.label);
  }
  for (std::size_t k = 0; k < negatives.size(); ++k) {
    const Sample& s = negatives[k];
    require(s.pool == Pool::Negative, Errc::PoolMismatch,
            "sample " + std::to_string(k) + " of the negative list is tagged positive");
    require(s.features.size() == d, Errc::DimensionMismatch,
            "negative " + std::to_string(k) + " has dimension " + std::to_string(s.features.size()));
    detail::check_finite(s.features, "negative sample");
    neg.row(static_cast<Eigen::Index>(k)) = s.features.transpose();
    neg_labels.push_back(s.label);
  }
  return make_dataset(std::move(pos), std::move(pos_labels), std::move(neg), std::move(neg_labels));
}

/// Returns a copy of `dataset` with the listed slots overwritten. This is how
/// S_i, S_k, S_{i,j,k} and friends are built.
inline TripletDataset replace_samples(const TripletDataset& dataset,
                                      std::span<const std::pair<SlotRef, Sample>> replacements) {
  std::set<SlotRef> seen;
  for (const auto& [slot, sample] : replacements) {
    dataset.check_slot(slot);
    require(seen.insert(slot).second, Errc::DuplicateSlot,
            "slot " + std::string(to_string(slot.pool)) + "[" + std::to_string(slot.index) +
                "] listed twice");
    require(sample.pool == slot.pool, Errc::PoolMismatch,
            "replacement sample pool does not match slot pool");
    require(sample.features.size() == static_cast<Eigen::Index>(dataset.dim()),
            Errc::DimensionMismatch, "replacement sample has the wrong dimension");
    detail::check_finite(sample.features, "replacement sample");
  }

  TripletDataset out = dataset;
  for (const auto& [slot, sample] : replacements) {
    const auto row = static_cast<Eigen::Index>(slot.index);
    if (slot.pool == Pool::Positive) {
      out.pos_.row(row) = sample.features.transpose();
      out.pos_labels_[slot.index] = sample.label;
    } else {
      out.neg_.row(row) = sample.features.transpose();
      out.neg_labels_[slot.index] = sample.label;
    }
  }
  return out;
}

inline TripletDataset replace_samples(const TripletDataset& dataset,
                                      std::initializer_list<std::pair<SlotRef, Sample>> replacements) {
  return replace_samples(dataset, std::span<const std::pair<SlotRef, Sample>>(
                                      replacements.begin(), replacements.size()));
}

/// Visits every (i, j, k) with i != j in lexicographic order.
template <class Fn>
void for_each_triplet(std::size_t n_plus, std::size_t n_minus, Fn&& fn) {
  for (std::size_t i = 0; i < n_plus; ++i) {
    for (std::size_t j = 0; j < n_plus; ++j) {
      if (i == j) continue;
      for (std::size_t k = 0; k < n_minus; ++k) fn(TripletIndex{i, j, k});
    }
  }
}

inline std::vector<TripletIndex> enumerate_triplets(const TripletDataset& dataset) {
  std::vector<TripletIndex> out;
  out.reserve(static_cast<std::size_t>(dataset.triplet_count()));
  for_each_triplet(dataset.n_plus(), dataset.n_minus(),
                   [&](const TripletIndex& t) { out.push_back(t); });
  return out;
}

/// Maps a flat position in lexicographic enumeration order back to (i, j, k).
inline TripletIndex triplet_at(std::uint64_t flat, std::size_t n_plus, std::size_t n_minus) {
  const std::uint64_t per_i = static_cast<std::uint64_t>(n_plus - 1) * n_minus;
  const auto i = static_cast<std::size_t>(flat / per_i);
  const std::uint64_t rest = flat % per_i;
  auto j = static_cast<std::size_t>(rest / n_minus);
  const auto k = static_cast<std::size_t>(rest % n_minus);
  if (j >= i) ++j;
  return {i, j, k};
}

/// B: the largest Euclidean feature norm across both pools.
inline double feature_bound(const TripletDataset& dataset) {
  double b = 0.0;
  if (dataset.n_plus() > 0) b = std::max(b, dataset.positives().rowwise().norm().maxCoeff());
  if (dataset.n_minus() > 0) b = std::max(b, dataset.negatives().rowwise().norm().maxCoeff());
  return b;
}

// CSV: header `pool,label,f0,...`; row order inside each pool is slot order.

namespace detail {

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t start = cell.find_first_not_of(' ');
    cells.push_back(start == std::string::npos ? std::string() : cell.substr(start));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_double(const std::string& s, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  require(!s.empty() && end == s.c_str() + s.size(), Errc::Parse,
          "line " + std::to_string(line_no) + ": '" + s + "' is not a number");
  return v;
}

inline int parse_int(const std::string& s, std::size_t line_no) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  require(!s.empty() && end == s.c_str() + s.size(), Errc::Parse,
          "line " + std::to_string(line_no) + ": '" + s + "' is not an integer");
  return static_cast<int>(v);
}

}  // namespace detail

inline void write_dataset_csv(std::ostream& out, const TripletDataset& dataset) {
  out << "pool,label";
  for (std::size_t f = 0; f < dataset.dim(); ++f) out << ",f" << f;
  out << '\n';
  auto emit = [&](const RowMatrix& m, const std::vector<int>& labels, Pool pool) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      out << to_string(pool) << ',' << labels[static_cast<std::size_t>(r)];
      for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << detail::format_double(m(r, c));
      out << '\n';
    }
  };
  emit(dataset.positives(), dataset.positive_labels(), Pool::Positive);
  emit(dataset.negatives(), dataset.negative_labels(), Pool::Negative);
}

inline TripletDataset read_dataset_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), Errc::Parse, "missing header row");
  const auto header = detail::split_csv_line(line);
  require(header.size() >= 3 && header[0] == "pool" && header[1] == "label", Errc::Parse,
          "header must start with pool,label,f0");
  const std::size_t d = header.size() - 2;
  for (std::size_t f = 0; f < d; ++f) {
    require(header[f + 2] == "f" + std::to_string(f), Errc::Parse,
            "unexpected header column '" + header[f + 2] + "'");
  }

  std::vector<Sample> pos;
  std::vector<Sample> neg;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    require(cells.size() == d + 2, Errc::DimensionMismatch,
            "line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                " columns, expected " + std::to_string(d + 2));
    Sample s;
    if (cells[0] == "pos") {
      s.pool = Pool::Positive;
    } else if (cells[0] == "neg") {
      s.pool = Pool::Negative;
    } else {
      throw Error(Errc::Parse, "line " + std::to_string(line_no) + ": pool must be pos or neg");
    }
    s.label = detail::parse_int(cells[1], line_no);
    s.features.resize(static_cast<Eigen::Index>(d));
    for (std::size_t f = 0; f < d; ++f) {
      s.features(static_cast<Eigen::Index>(f)) = detail::parse_double(cells[f + 2], line_no);
    }
    (s.pool == Pool::Positive ? pos : neg).push_back(std::move(s));
  }
  return make_dataset(pos, neg);
}

}  // namespace tripstab
