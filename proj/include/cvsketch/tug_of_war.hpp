#pragma once

// Single-counter Tug-of-War sketch: x = sum_j f_j * sign(j).

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>

#include "cvsketch/error.hpp"
#include "cvsketch/frequency_vector.hpp"
#include "cvsketch/hashing.hpp"

namespace cvsketch {

namespace detail {

inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t out;
  if (__builtin_add_overflow(a, b, &out)) {
    throw Error(ErrorKind::Overflow, "sketch counter overflow");
  }
  return out;
}

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t out;
  if (__builtin_mul_overflow(a, b, &out)) {
    throw Error(ErrorKind::Overflow, "sketch counter overflow");
  }
  return out;
}

}  // namespace detail

template <SignSource Hash = PolySignHash>
class TugOfWarSketch {
 public:
  using hash_type = Hash;

  explicit TugOfWarSketch(std::shared_ptr<const Hash> hash, std::int64_t counter = 0)
      : hash_(std::move(hash)), counter_(counter) {
    if (!hash_) throw Error(ErrorKind::InvalidArgument, "sketch requires a hash");
  }

  void update(std::uint64_t item, std::int64_t delta) {
    if (item >= hash_->universe()) {
      throw Error(ErrorKind::ItemOutOfRange, "item " + std::to_string(item) +
                                                 " outside universe " +
                                                 std::to_string(hash_->universe()));
    }
    counter_ = detail::checked_add(counter_, detail::checked_mul(delta, hash_->sign(item)));
  }
  void update(const StreamUpdate& u) { update(u.item, u.delta); }

  void update(std::span<const StreamUpdate> updates) {
    for (const auto& u : updates) update(u.item, u.delta);
  }

  /// Feeds every nonzero count of `v` as one update.
  void update(const FrequencyVector& v) {
    const auto counts = v.counts();
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (counts[i] != 0) update(i, counts[i]);
    }
  }

  std::int64_t counter() const noexcept { return counter_; }
  std::uint64_t universe() const noexcept { return hash_->universe(); }
  const std::shared_ptr<const Hash>& hash() const noexcept { return hash_; }

  /// X = x^2. Exact for |x| < 2^53; beyond that the square is rounded.
  double estimate_f2() const noexcept {
    const auto x = static_cast<double>(counter_);
    return x * x;
  }

 private:
  std::shared_ptr<const Hash> hash_;
  std::int64_t counter_ = 0;
};

template <SignSource Hash>
void require_shared_hash(const TugOfWarSketch<Hash>& a, const TugOfWarSketch<Hash>& b) {
  if (a.hash().get() != b.hash().get()) {
    throw Error(ErrorKind::MismatchedHash, "sketches do not share a sign hash");
  }
}

/// X2 = x_f * x_g for two sketches built over the same hash instance.
template <SignSource Hash>
double estimate_ip(const TugOfWarSketch<Hash>& f, const TugOfWarSketch<Hash>& g) {
  require_shared_hash(f, g);
  return static_cast<double>(f.counter()) * static_cast<double>(g.counter());
}

template <SignSource Hash>
TugOfWarSketch<Hash> merge(const TugOfWarSketch<Hash>& a, const TugOfWarSketch<Hash>& b) {
  require_shared_hash(a, b);
  return TugOfWarSketch<Hash>(a.hash(), detail::checked_add(a.counter(), b.counter()));
}

/// Fresh sketch with its own degree-4 polynomial sign hash.
inline TugOfWarSketch<PolySignHash> make_tug_of_war(std::uint64_t universe, std::uint64_t seed,
                                                    std::size_t degree = PolySignHash::kDefaultDegree) {
  return TugOfWarSketch<PolySignHash>(
      std::make_shared<const PolySignHash>(PolySignHash::create(universe, seed, degree)));
}

}  // namespace cvsketch
