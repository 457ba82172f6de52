#pragma once

// Count-Min and Count-Sketch point queries with per-row control-variate
// corrections. Each row is corrected on its own, then rows are combined with
// the sketch's native min (Count-Min) or median (Count-Sketch).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cvsketch/aggregation.hpp"
#include "cvsketch/control_variates.hpp"
#include "cvsketch/error.hpp"
#include "cvsketch/frequency_vector.hpp"
#include "cvsketch/hashing.hpp"
#include "cvsketch/random.hpp"
#include "cvsketch/tug_of_war.hpp"

namespace cvsketch {

struct SketchDims {
  std::uint64_t buckets = 2;
  std::size_t rows = 1;

  /// k = ceil(2 / eps), t = ceil(log2(1 / delta)).
  static SketchDims count_min(double epsilon, double delta) {
    validate(epsilon, delta);
    return {std::max<std::uint64_t>(2, static_cast<std::uint64_t>(std::ceil(2.0 / epsilon))),
            rows_for(delta)};
  }

  /// k = ceil(3 / eps^2), t = ceil(log2(1 / delta)).
  static SketchDims count_sketch(double epsilon, double delta) {
    validate(epsilon, delta);
    return {std::max<std::uint64_t>(
                2, static_cast<std::uint64_t>(std::ceil(3.0 / (epsilon * epsilon)))),
            rows_for(delta)};
  }

 private:
  static void validate(double epsilon, double delta) {
    if (!(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "need epsilon > 0 and 0 < delta < 1");
    }
  }
  static std::size_t rows_for(double delta) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::log2(1.0 / delta))));
  }
};

struct PointCvResult {
  std::vector<CvEstimate> rows;
  double raw = 0.0;        // native combination of raw rows
  double corrected = 0.0;  // native combination of corrected rows
};

namespace detail {

inline void check_item(std::uint64_t item, std::uint64_t universe) {
  if (item >= universe) {
    throw Error(ErrorKind::ItemOutOfRange,
                "item " + std::to_string(item) + " outside universe " + std::to_string(universe));
  }
}

inline std::uint64_t cv_items(std::optional<std::uint64_t> cv_universe, std::uint64_t universe) {
  const std::uint64_t n = cv_universe.value_or(universe);
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "point-query control variate needs n >= 2");
  if (n > universe) {
    throw Error(ErrorKind::InvalidArgument, "control-variate universe exceeds the sketch universe");
  }
  return n;
}

}  // namespace detail

template <BucketSource Bucket = PolyHashFamily>
class CountMinSketch {
 public:
  explicit CountMinSketch(std::vector<std::shared_ptr<const Bucket>> row_hashes)
      : hashes_(std::move(row_hashes)) {
    if (hashes_.empty()) throw Error(ErrorKind::InvalidArgument, "at least one row is required");
    buckets_ = hashes_.front()->range();
    universe_ = hashes_.front()->universe();
    for (const auto& h : hashes_) {
      if (!h || h->range() != buckets_ || h->universe() != universe_) {
        throw Error(ErrorKind::InvalidArgument, "row hashes must share range and universe");
      }
    }
    table_.assign(hashes_.size() * buckets_, 0);
  }

  std::size_t rows() const noexcept { return hashes_.size(); }
  std::uint64_t buckets() const noexcept { return buckets_; }
  std::uint64_t universe() const noexcept { return universe_; }
  const Bucket& row_hash(std::size_t row) const { return *hashes_.at(row); }

  std::int64_t counter(std::size_t row, std::uint64_t bucket) const {
    return table_.at(row * buckets_ + bucket);
  }
  std::span<const std::int64_t> counters() const noexcept { return table_; }
  void set_counters(std::span<const std::int64_t> values) {
    if (values.size() != table_.size()) {
      throw Error(ErrorKind::LengthMismatch, "counter table has the wrong shape");
    }
    table_.assign(values.begin(), values.end());
  }

  void update(std::uint64_t item, std::int64_t delta) {
    detail::check_item(item, universe_);
    for (std::size_t r = 0; r < hashes_.size(); ++r) {
      auto& cell = table_[r * buckets_ + hashes_[r]->bucket(item)];
      cell = detail::checked_add(cell, delta);
    }
  }
  void update(const StreamUpdate& u) { update(u.item, u.delta); }
  void update(const FrequencyVector& v) {
    const auto counts = v.counts();
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (counts[i] != 0) update(i, counts[i]);
    }
  }

  double row_estimate(std::size_t row, std::uint64_t item) const {
    detail::check_item(item, universe_);
    return static_cast<double>(table_[row * buckets_ + hashes_.at(row)->bucket(item)]);
  }

  /// Minimum over rows.
  double query(std::uint64_t item) const {
    double best = row_estimate(0, item);
    for (std::size_t r = 1; r < hashes_.size(); ++r) best = std::min(best, row_estimate(r, item));
    return best;
  }

  /// Z for one row: how many items in [0, n) share the bucket of `item`.
  std::uint64_t row_control_variate(std::size_t row, std::uint64_t item, std::uint64_t n) const {
    const auto& h = *hashes_.at(row);
    const auto target = h.bucket(item);
    std::uint64_t z = 0;
    for (std::uint64_t j = 0; j < n; ++j) z += h.bucket(j) == target ? 1 : 0;
    return z;
  }

  /// E[Z] = 1 + (n-1)/k, Var[Z] = (n-1)/k (1-1/k), Cov = (F1-f_a)/k (1-1/k).
  CvMomentSpec row_moments(double f1, double fa_proxy, std::uint64_t n) const {
    const auto k = static_cast<double>(buckets_);
    const auto m = static_cast<double>(n) - 1.0;
    const double shrink = 1.0 - 1.0 / k;
    return CvMomentSpec{(f1 - fa_proxy) / k * shrink, m / k * shrink, 1.0 + m / k};
  }

  PointCvResult cv_query(std::uint64_t item, double f1, const ProxyPolicy& policy,
                         std::optional<std::uint64_t> cv_universe = std::nullopt) const {
    const std::uint64_t n = detail::cv_items(cv_universe, universe_);
    std::vector<double> z(hashes_.size());
    for (std::size_t r = 0; r < hashes_.size(); ++r) {
      z[r] = static_cast<double>(row_control_variate(r, item, n));
    }
    return combine(item, f1, policy, n, z);
  }

  /// Per-row bucket occupancy over [0, n), so each query's Z is a lookup.
  struct BucketProfile {
    std::uint64_t items = 0;
    std::vector<std::uint64_t> occupancy;  // rows x buckets
  };

  BucketProfile profile(std::uint64_t n) const {
    BucketProfile p{n, std::vector<std::uint64_t>(table_.size(), 0)};
    for (std::size_t r = 0; r < hashes_.size(); ++r) {
      for (std::uint64_t j = 0; j < n; ++j) ++p.occupancy[r * buckets_ + hashes_[r]->bucket(j)];
    }
    return p;
  }

  std::vector<PointCvResult> cv_query_batch(std::span<const std::uint64_t> items,
                                            std::span<const double> f1_values,
                                            const ProxyPolicy& policy,
                                            std::optional<std::uint64_t> cv_universe = std::nullopt) const {
    if (f1_values.size() != 1 && f1_values.size() != items.size()) {
      throw Error(ErrorKind::LengthMismatch, "need one F1 value or one per item");
    }
    const std::uint64_t n = detail::cv_items(cv_universe, universe_);
    const BucketProfile p = profile(n);
    std::vector<PointCvResult> out;
    out.reserve(items.size());
    std::vector<double> z(hashes_.size());
    for (std::size_t q = 0; q < items.size(); ++q) {
      detail::check_item(items[q], universe_);
      for (std::size_t r = 0; r < hashes_.size(); ++r) {
        z[r] = static_cast<double>(p.occupancy[r * buckets_ + hashes_[r]->bucket(items[q])]);
      }
      out.push_back(combine(items[q], f1_values[f1_values.size() == 1 ? 0 : q], policy, n, z));
    }
    return out;
  }

 private:
  PointCvResult combine(std::uint64_t item, double f1, const ProxyPolicy& policy, std::uint64_t n,
                        std::span<const double> z) const {
    PointCvResult out;
    out.rows.reserve(hashes_.size());
    for (std::size_t r = 0; r < hashes_.size(); ++r) {
      const double x = row_estimate(r, item);
      out.rows.push_back(cv_correct(x, row_moments(f1, resolve_proxy(policy, x), n), z[r]));
    }
    out.raw = out.rows.front().raw;
    out.corrected = out.rows.front().corrected;
    for (const auto& e : out.rows) {
      out.raw = std::min(out.raw, e.raw);
      out.corrected = std::min(out.corrected, e.corrected);
    }
    return out;
  }

  std::vector<std::shared_ptr<const Bucket>> hashes_;
  std::uint64_t buckets_ = 0;
  std::uint64_t universe_ = 0;
  std::vector<std::int64_t> table_;
};

template <BucketSource Bucket = PolyHashFamily, SignSource Sign = PolySignHash>
class CountSketch {
 public:
  CountSketch(std::vector<std::shared_ptr<const Bucket>> row_hashes,
              std::vector<std::shared_ptr<const Sign>> row_signs)
      : hashes_(std::move(row_hashes)), signs_(std::move(row_signs)) {
    if (hashes_.empty() || hashes_.size() != signs_.size()) {
      throw Error(ErrorKind::InvalidArgument, "need one bucket hash and one sign hash per row");
    }
    buckets_ = hashes_.front()->range();
    universe_ = hashes_.front()->universe();
    for (std::size_t r = 0; r < hashes_.size(); ++r) {
      if (!hashes_[r] || !signs_[r] || hashes_[r]->range() != buckets_ ||
          hashes_[r]->universe() != universe_ || signs_[r]->universe() != universe_) {
        throw Error(ErrorKind::InvalidArgument, "row hashes must share range and universe");
      }
    }
    table_.assign(hashes_.size() * buckets_, 0);
  }

  std::size_t rows() const noexcept { return hashes_.size(); }
  std::uint64_t buckets() const noexcept { return buckets_; }
  std::uint64_t universe() const noexcept { return universe_; }
  const Bucket& row_hash(std::size_t row) const { return *hashes_.at(row); }
  const Sign& row_sign(std::size_t row) const { return *signs_.at(row); }

  std::int64_t counter(std::size_t row, std::uint64_t bucket) const {
    return table_.at(row * buckets_ + bucket);
  }
  std::span<const std::int64_t> counters() const noexcept { return table_; }
  void set_counters(std::span<const std::int64_t> values) {
    if (values.size() != table_.size()) {
      throw Error(ErrorKind::LengthMismatch, "counter table has the wrong shape");
    }
    table_.assign(values.begin(), values.end());
  }

  void update(std::uint64_t item, std::int64_t delta) {
    detail::check_item(item, universe_);
    for (std::size_t r = 0; r < hashes_.size(); ++r) {
      auto& cell = table_[r * buckets_ + hashes_[r]->bucket(item)];
      cell = detail::checked_add(cell, detail::checked_mul(delta, signs_[r]->sign(item)));
    }
  }
  void update(const StreamUpdate& u) { update(u.item, u.delta); }
  void update(const FrequencyVector& v) {
    const auto counts = v.counts();
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (counts[i] != 0) update(i, counts[i]);
    }
  }

  double row_estimate(std::size_t row, std::uint64_t item) const {
    detail::check_item(item, universe_);
    return static_cast<double>(signs_.at(row)->sign(item)) *
           static_cast<double>(table_[row * buckets_ + hashes_[row]->bucket(item)]);
  }

  /// Median over rows.
  double query(std::uint64_t item) const {
    std::vector<double> est(hashes_.size());
    for (std::size_t r = 0; r < hashes_.size(); ++r) est[r] = row_estimate(r, item);
    return median(std::move(est));
  }

  /// Z for one row: sign(a) * sum of signs of items in [0, n) sharing a's bucket.
  std::int64_t row_control_variate(std::size_t row, std::uint64_t item, std::uint64_t n) const {
    const auto& h = *hashes_.at(row);
    const auto& g = *signs_.at(row);
    const auto target = h.bucket(item);
    std::int64_t s = 0;
    for (std::uint64_t j = 0; j < n; ++j) {
      if (h.bucket(j) == target) s += g.sign(j);
    }
    return g.sign(item) * s;
  }

  /// E[Z] = 1, Var[Z] = (n-1)/k, Cov = (F1-f_a)/k.
  CvMomentSpec row_moments(double f1, double fa_proxy, std::uint64_t n) const {
    const auto k = static_cast<double>(buckets_);
    return CvMomentSpec{(f1 - fa_proxy) / k, (static_cast<double>(n) - 1.0) / k, 1.0};
  }

  PointCvResult cv_query(std::uint64_t item, double f1, const ProxyPolicy& policy,
                         std::optional<std::uint64_t> cv_universe = std::nullopt) const {
    const std::uint64_t n = detail::cv_items(cv_universe, universe_);
    std::vector<double> z(hashes_.size());
    for (std::size_t r = 0; r < hashes_.size(); ++r) {
      z[r] = static_cast<double>(row_control_variate(r, item, n));
    }
    return combine(item, f1, policy, n, z);
  }

  /// Per-row signed bucket sums over [0, n).
  struct BucketProfile {
    std::uint64_t items = 0;
    std::vector<std::int64_t> signed_occupancy;  // rows x buckets
  };

  BucketProfile profile(std::uint64_t n) const {
    BucketProfile p{n, std::vector<std::int64_t>(table_.size(), 0)};
    for (std::size_t r = 0; r < hashes_.size(); ++r) {
      for (std::uint64_t j = 0; j < n; ++j) {
        p.signed_occupancy[r * buckets_ + hashes_[r]->bucket(j)] += signs_[r]->sign(j);
      }
    }
    return p;
  }

  std::vector<PointCvResult> cv_query_batch(std::span<const std::uint64_t> items,
                                            std::span<const double> f1_values,
                                            const ProxyPolicy& policy,
                                            std::optional<std::uint64_t> cv_universe = std::nullopt) const {
    if (f1_values.size() != 1 && f1_values.size() != items.size()) {
      throw Error(ErrorKind::LengthMismatch, "need one F1 value or one per item");
    }
    const std::uint64_t n = detail::cv_items(cv_universe, universe_);
    const BucketProfile p = profile(n);
    std::vector<PointCvResult> out;
    out.reserve(items.size());
    std::vector<double> z(hashes_.size());
    for (std::size_t q = 0; q < items.size(); ++q) {
      const auto a = items[q];
      detail::check_item(a, universe_);
      for (std::size_t r = 0; r < hashes_.size(); ++r) {
        z[r] = static_cast<double>(signs_[r]->sign(a) *
                                   p.signed_occupancy[r * buckets_ + hashes_[r]->bucket(a)]);
      }
      out.push_back(combine(a, f1_values[f1_values.size() == 1 ? 0 : q], policy, n, z));
    }
    return out;
  }

 private:
  PointCvResult combine(std::uint64_t item, double f1, const ProxyPolicy& policy, std::uint64_t n,
                        std::span<const double> z) const {
    PointCvResult out;
    out.rows.reserve(hashes_.size());
    std::vector<double> raw(hashes_.size());
    std::vector<double> corrected(hashes_.size());
    for (std::size_t r = 0; r < hashes_.size(); ++r) {
      const double x = row_estimate(r, item);
      out.rows.push_back(cv_correct(x, row_moments(f1, resolve_proxy(policy, x), n), z[r]));
      raw[r] = out.rows.back().raw;
      corrected[r] = out.rows.back().corrected;
    }
    out.raw = median(std::move(raw));
    out.corrected = median(std::move(corrected));
    return out;
  }

  std::vector<std::shared_ptr<const Bucket>> hashes_;
  std::vector<std::shared_ptr<const Sign>> signs_;
  std::uint64_t buckets_ = 0;
  std::uint64_t universe_ = 0;
  std::vector<std::int64_t> table_;
};

/// Row r's bucket hash is seeded with mix_seed(seed, r); Count-Sketch sign
/// hashes use mix_seed(mix_seed(seed, r), 1).
inline std::uint64_t row_seed(std::uint64_t seed, std::size_t row) { return mix_seed(seed, row); }

inline CountMinSketch<PolyHashFamily> make_count_min(SketchDims dims, std::uint64_t universe,
                                                     std::uint64_t seed) {
  std::vector<std::shared_ptr<const PolyHashFamily>> rows;
  for (std::size_t r = 0; r < dims.rows; ++r) {
    rows.push_back(std::make_shared<const PolyHashFamily>(
        PolyHashFamily::create(2, dims.buckets, universe, row_seed(seed, r))));
  }
  return CountMinSketch<PolyHashFamily>(std::move(rows));
}

inline CountSketch<PolyHashFamily, PolySignHash> make_count_sketch(SketchDims dims,
                                                                   std::uint64_t universe,
                                                                   std::uint64_t seed) {
  std::vector<std::shared_ptr<const PolyHashFamily>> rows;
  std::vector<std::shared_ptr<const PolySignHash>> signs;
  for (std::size_t r = 0; r < dims.rows; ++r) {
    const auto s = row_seed(seed, r);
    rows.push_back(std::make_shared<const PolyHashFamily>(
        PolyHashFamily::create(2, dims.buckets, universe, s)));
    signs.push_back(
        std::make_shared<const PolySignHash>(PolySignHash::create(universe, mix_seed(s, 1), 2)));
  }
  return CountSketch<PolyHashFamily, PolySignHash>(std::move(rows), std::move(signs));
}

}  // namespace cvsketch
