#pragma once

// k-universal polynomial hashing over the Mersenne prime 2^61 - 1, plus the
// explicit-table hash sources used by the enumeration oracle and by tests.

#include <concepts>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cvsketch/error.hpp"
#include "cvsketch/random.hpp"

namespace cvsketch {

inline constexpr std::uint64_t kMersenne61 = (std::uint64_t{1} << 61) - 1;

namespace detail {

inline std::uint64_t mulmod_mersenne61(std::uint64_t a, std::uint64_t b) noexcept {
  const unsigned __int128 product = static_cast<unsigned __int128>(a) * b;
  std::uint64_t r = static_cast<std::uint64_t>(product & kMersenne61) +
                    static_cast<std::uint64_t>(product >> 61);
  if (r >= kMersenne61) r -= kMersenne61;
  return r;
}

inline std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t p) noexcept {
  return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % p);
}

}  // namespace detail

/// h(x) = ((sum_{i<k} a_i x^i) mod p) mod l.
///
/// Coefficients are stored lowest degree first. Instances are immutable and
/// may be shared freely across threads.
class PolyHashFamily {
 public:
  /// Draws `degree` coefficients uniformly from [0, 2^61 - 1) with an
  /// mt19937_64 seeded by `seed`. The leading coefficient may be zero.
  static PolyHashFamily create(std::size_t degree, std::uint64_t range,
                               std::uint64_t universe, std::uint64_t seed) {
    if (degree < 2) {
      throw Error(ErrorKind::InvalidArgument,
                  "hash degree must be >= 2, got " + std::to_string(degree));
    }
    if (range < 2) {
      throw Error(ErrorKind::InvalidArgument,
                  "hash range must be >= 2, got " + std::to_string(range));
    }
    if (universe < 1 || universe >= kMersenne61 || range >= kMersenne61) {
      throw Error(ErrorKind::InvalidArgument, "universe and range must lie in [1, 2^61 - 1)");
    }
    Rng rng(seed);
    std::vector<std::uint64_t> coefficients(degree);
    for (auto& c : coefficients) c = uniform_below(rng, kMersenne61);
    return PolyHashFamily(std::move(coefficients), kMersenne61, range, universe, seed);
  }

  /// Explicit construction, mainly for tests. Any prime modulus is accepted;
  /// primality is the caller's responsibility.
  static PolyHashFamily from_coefficients(std::vector<std::uint64_t> coefficients,
                                          std::uint64_t prime, std::uint64_t range,
                                          std::uint64_t universe) {
    if (coefficients.empty()) {
      throw Error(ErrorKind::InvalidArgument, "at least one coefficient is required");
    }
    if (prime < 2 || range < 1 || prime > kMersenne61) {
      throw Error(ErrorKind::InvalidArgument, "prime must lie in [2, 2^61 - 1] and range >= 1");
    }
    for (auto c : coefficients) {
      if (c >= prime) throw Error(ErrorKind::InvalidArgument, "coefficient must be < prime");
    }
    return PolyHashFamily(std::move(coefficients), prime, range, universe, 0);
  }

  std::uint64_t evaluate(std::uint64_t x) const noexcept {
    const bool mersenne = prime_ == kMersenne61;
    const std::uint64_t xr = x % prime_;
    std::uint64_t acc = coefficients_.back();
    for (std::size_t i = coefficients_.size() - 1; i-- > 0;) {
      acc = mersenne ? detail::mulmod_mersenne61(acc, xr) : detail::mulmod(acc, xr, prime_);
      acc += coefficients_[i];
      if (acc >= prime_) acc -= prime_;
    }
    return acc % range_;
  }

  std::uint64_t operator()(std::uint64_t x) const noexcept { return evaluate(x); }
  std::uint64_t bucket(std::uint64_t x) const noexcept { return evaluate(x); }

  std::size_t degree() const noexcept { return coefficients_.size(); }
  std::uint64_t prime() const noexcept { return prime_; }
  std::uint64_t range() const noexcept { return range_; }
  std::uint64_t universe() const noexcept { return universe_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::span<const std::uint64_t> coefficients() const noexcept { return coefficients_; }

  friend bool operator==(const PolyHashFamily&, const PolyHashFamily&) = default;

 private:
  PolyHashFamily(std::vector<std::uint64_t> coefficients, std::uint64_t prime,
                 std::uint64_t range, std::uint64_t universe, std::uint64_t seed)
      : coefficients_(std::move(coefficients)),
        prime_(prime),
        range_(range),
        universe_(universe),
        seed_(seed) {}

  std::vector<std::uint64_t> coefficients_;
  std::uint64_t prime_;
  std::uint64_t range_;
  std::uint64_t universe_;
  std::uint64_t seed_;
};

/// Sign hash [n] -> {-1, +1} over a range-2 polynomial family; 0 maps to -1.
class PolySignHash {
 public:
  static constexpr std::size_t kDefaultDegree = 4;

  explicit PolySignHash(PolyHashFamily inner) : inner_(std::move(inner)) {
    if (inner_.range() != 2) {
      throw Error(ErrorKind::InvalidArgument, "sign hash requires a range-2 family");
    }
  }

  static PolySignHash create(std::uint64_t universe, std::uint64_t seed,
                             std::size_t degree = kDefaultDegree) {
    return PolySignHash(PolyHashFamily::create(degree, 2, universe, seed));
  }

  int sign(std::uint64_t x) const noexcept {
    return 2 * static_cast<int>(inner_.evaluate(x)) - 1;
  }
  int operator()(std::uint64_t x) const noexcept { return sign(x); }

  std::uint64_t universe() const noexcept { return inner_.universe(); }
  std::uint64_t seed() const noexcept { return inner_.seed(); }
  std::size_t degree() const noexcept { return inner_.degree(); }
  const PolyHashFamily& family() const noexcept { return inner_; }

 private:
  PolyHashFamily inner_;
};

/// Sign assignment given explicitly, one entry per item.
class TableSignHash {
 public:
  explicit TableSignHash(std::vector<int> signs) : signs_(std::move(signs)) {
    for (int s : signs_) {
      if (s != 1 && s != -1) throw Error(ErrorKind::InvalidArgument, "signs must be +-1");
    }
  }

  /// Bit i of `mask` selects the sign of item i (1 -> +1, 0 -> -1).
  static TableSignHash from_mask(std::uint64_t mask, std::size_t universe) {
    std::vector<int> signs(universe);
    for (std::size_t i = 0; i < universe; ++i) signs[i] = ((mask >> i) & 1U) ? 1 : -1;
    return TableSignHash(std::move(signs));
  }

  int sign(std::uint64_t x) const noexcept { return signs_[x]; }
  int operator()(std::uint64_t x) const noexcept { return sign(x); }
  std::uint64_t universe() const noexcept { return signs_.size(); }

 private:
  std::vector<int> signs_;
};

/// Bucket assignment given explicitly, one entry per item.
class TableBucketHash {
 public:
  TableBucketHash(std::vector<std::uint64_t> buckets, std::uint64_t range)
      : buckets_(std::move(buckets)), range_(range) {
    for (auto b : buckets_) {
      if (b >= range_) throw Error(ErrorKind::InvalidArgument, "bucket index out of range");
    }
  }

  std::uint64_t bucket(std::uint64_t x) const noexcept { return buckets_[x]; }
  std::uint64_t operator()(std::uint64_t x) const noexcept { return bucket(x); }
  std::uint64_t range() const noexcept { return range_; }
  std::uint64_t universe() const noexcept { return buckets_.size(); }

 private:
  std::vector<std::uint64_t> buckets_;
  std::uint64_t range_;
};

template <typename T>
concept SignSource = requires(const T& h, std::uint64_t x) {
  { h.sign(x) } -> std::convertible_to<int>;
  { h.universe() } -> std::convertible_to<std::uint64_t>;
};

template <typename T>
concept BucketSource = requires(const T& h, std::uint64_t x) {
  { h.bucket(x) } -> std::convertible_to<std::uint64_t>;
  { h.range() } -> std::convertible_to<std::uint64_t>;
  { h.universe() } -> std::convertible_to<std::uint64_t>;
};

}  // namespace cvsketch
