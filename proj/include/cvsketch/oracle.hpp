#pragma once

// Brute-force moment oracle for tiny universes.
//
// Tug-of-War moments are taken over all 2^n sign vectors with fully
// independent uniform signs; point-query moments over all k^n bucket maps
// (and all 2^n sign vectors for Count-Sketch). Every identity checked here
// involves at most fourth mixed moments of the signs, which agree with those
// of a 4-universal family. X and Z are computed from their definitions, not
// through the sketch classes.

#include <cstdint>
#include <cstdlib>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cvsketch/error.hpp"
#include "cvsketch/frequency_vector.hpp"
#include "cvsketch/moments.hpp"
#include "cvsketch/theory.hpp"

namespace cvsketch::oracle {

inline constexpr std::size_t kMaxSignUniverse = 20;
inline constexpr std::uint64_t kMaxAssignments = 1'000'000;

enum class TowEstimator { F2, IP };

struct OracleMoments {
  Rational mean;
  Rational variance;
  Rational cv_mean;
  Rational covariance_with_cv;
  Rational cv_variance;
  std::optional<Rational> corrected_mean;
  std::optional<Rational> corrected_variance;
  std::uint64_t assignments = 0;
};

/// -Cov / Var from the enumerated moments; 0 when Var[Z] = 0.
inline Rational optimal_coefficient(const OracleMoments& m) {
  if (m.cv_variance == 0) return Rational(0);
  return -m.covariance_with_cv / m.cv_variance;
}

namespace detail {

/// Streaming population moments of (X, Z) over equally likely outcomes.
class PairAccumulator {
 public:
  void add(const BigInt& x, const BigInt& z) {
    sx_ += x;
    sxx_ += x * x;
    sz_ += z;
    szz_ += z * z;
    sxz_ += x * z;
    ++count_;
  }

  void finish(OracleMoments& out, bool with_cv) const {
    const Rational n(count_);
    out.assignments = count_;
    out.mean = Rational(sx_) / n;
    out.variance = Rational(sxx_) / n - out.mean * out.mean;
    if (with_cv) {
      out.cv_mean = Rational(sz_) / n;
      out.cv_variance = Rational(szz_) / n - out.cv_mean * out.cv_mean;
      out.covariance_with_cv = Rational(sxz_) / n - out.mean * out.cv_mean;
    }
  }

 private:
  BigInt sx_, sxx_, sz_, szz_, sxz_;
  std::uint64_t count_ = 0;
};

/// Moments of Y = X + c (Z - E[Z]) using integer numerators
/// W = qD X + p (D Z - A) where c = p/q and E[Z] = A/D.
class CorrectedAccumulator {
 public:
  CorrectedAccumulator(const Rational& c, const Rational& mean_z)
      : p_(numerator(c)), q_(denominator(c)), a_(numerator(mean_z)), d_(denominator(mean_z)) {}

  void add(const BigInt& x, const BigInt& z) {
    const BigInt w = q_ * d_ * x + p_ * (d_ * z - a_);
    sw_ += w;
    sww_ += w * w;
    ++count_;
  }

  void finish(OracleMoments& out) const {
    const Rational scale = Rational(q_ * d_);
    const Rational n(count_);
    const Rational mean = Rational(sw_) / (n * scale);
    out.corrected_mean = mean;
    out.corrected_variance = Rational(sww_) / (n * scale * scale) - mean * mean;
  }

 private:
  BigInt p_, q_, a_, d_;
  BigInt sw_, sww_;
  std::uint64_t count_ = 0;
};

inline void require_small_mass(std::span<const std::int64_t> v) {
  std::int64_t mass = 0;
  for (const auto c : v) mass += std::llabs(c);
  if (mass > (std::int64_t{1} << 26)) {
    throw Error(ErrorKind::InvalidArgument, "oracle counts too large for exact enumeration");
  }
}

}  // namespace detail

/// Exact moments of X = x_f^2 (F2) or X = x_f x_g (IP), and with `with_cv`
/// of Z = (sum_i s_i)^2 - n (F2) or Z = x_f^2 + x_g^2 (IP). `fixed_c` adds the
/// moments of X + c (Z - E[Z]); it requires `with_cv`.
inline OracleMoments enumerate_tow(const FrequencyVector& f, const std::optional<FrequencyVector>& g,
                                   TowEstimator estimator, bool with_cv,
                                   const std::optional<Rational>& fixed_c = std::nullopt) {
  const std::size_t n = f.universe();
  if (n > kMaxSignUniverse) {
    throw Error(ErrorKind::BudgetExceeded,
                "sign enumeration limited to n <= 20, got " + std::to_string(n));
  }
  if (estimator == TowEstimator::IP && !g) {
    throw Error(ErrorKind::MissingVectors, "IP enumeration needs a second vector");
  }
  if (g && g->universe() != n) throw Error(ErrorKind::LengthMismatch, "vectors differ in universe");
  if (fixed_c && !with_cv) throw Error(ErrorKind::InvalidArgument, "fixed coefficient needs with_cv");
  detail::require_small_mass(f.counts());
  if (g) detail::require_small_mass(g->counts());

  const std::uint64_t total = std::uint64_t{1} << n;
  const auto value = [&](std::uint64_t mask, BigInt& x, BigInt& z) {
    std::int64_t xf = 0;
    std::int64_t xg = 0;
    std::int64_t s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::int64_t sign = ((mask >> i) & 1U) ? 1 : -1;
      xf += sign * f[i];
      if (g) xg += sign * (*g)[i];
      s += sign;
    }
    if (estimator == TowEstimator::F2) {
      x = BigInt(xf) * xf;
      z = BigInt(s) * s - static_cast<std::int64_t>(n);
    } else {
      x = BigInt(xf) * xg;
      z = BigInt(xf) * xf + BigInt(xg) * xg;
    }
  };

  detail::PairAccumulator acc;
  BigInt x, z;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    value(mask, x, z);
    acc.add(x, z);
  }
  OracleMoments out;
  acc.finish(out, with_cv);
  if (fixed_c) {
    detail::CorrectedAccumulator corr(*fixed_c, out.cv_mean);
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      value(mask, x, z);
      corr.add(x, z);
    }
    corr.finish(out);
  }
  return out;
}

/// Exact single-row moments for item `a` over all bucket maps [n] -> [k]
/// (and, for Count-Sketch, all sign vectors). Z counts a's bucket-mates
/// (Count-Min) or sums their signs times sign(a) (Count-Sketch).
inline OracleMoments enumerate_point_query(const FrequencyVector& f, std::uint64_t a,
                                           PointSketch sketch, std::uint64_t k, bool with_cv,
                                           const std::optional<Rational>& fixed_c = std::nullopt) {
  const std::size_t n = f.universe();
  if (a >= n) throw Error(ErrorKind::ItemOutOfRange, "query item outside universe");
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "need at least one bucket");
  if (fixed_c && !with_cv) throw Error(ErrorKind::InvalidArgument, "fixed coefficient needs with_cv");
  const std::uint64_t base = sketch == PointSketch::CountMin ? k : 2 * k;
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (total > kMaxAssignments / base) {
      throw Error(ErrorKind::BudgetExceeded, "more than 10^6 hash assignments");
    }
    total *= base;
  }

  // digit i encodes bucket (digit % k) and, for Count-Sketch, sign (digit / k).
  std::vector<std::uint64_t> digit(n, 0);
  const auto value = [&](BigInt& x, BigInt& z) {
    const std::uint64_t target = digit[a] % k;
    const std::int64_t sign_a = digit[a] / k == 0 ? -1 : 1;
    std::int64_t xs = 0;
    std::int64_t zs = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (digit[j] % k != target) continue;
      if (sketch == PointSketch::CountMin) {
        xs += f[j];
        zs += 1;
      } else {
        const std::int64_t sign = digit[j] / k == 0 ? -1 : 1;
        xs += sign_a * sign * f[j];
        zs += sign_a * sign;
      }
    }
    x = xs;
    z = zs;
  };
  const auto advance = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      if (++digit[i] < base) return;
      digit[i] = 0;
    }
  };

  detail::PairAccumulator acc;
  BigInt x, z;
  for (std::uint64_t t = 0; t < total; ++t) {
    value(x, z);
    acc.add(x, z);
    advance();
  }
  OracleMoments out;
  acc.finish(out, with_cv);
  if (fixed_c) {
    detail::CorrectedAccumulator corr(*fixed_c, out.cv_mean);
    std::fill(digit.begin(), digit.end(), 0);
    for (std::uint64_t t = 0; t < total; ++t) {
      value(x, z);
      corr.add(x, z);
      advance();
    }
    corr.finish(out);
  }
  return out;
}

}  // namespace cvsketch::oracle
