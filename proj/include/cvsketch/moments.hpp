#pragma once

// Exact frequency moments in 128-bit integer arithmetic.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

#include "cvsketch/error.hpp"
#include "cvsketch/frequency_vector.hpp"

namespace cvsketch {

using Wide = __int128;
using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline double to_double(const Rational& v) { return v.convert_to<double>(); }

inline double to_double(Wide v) noexcept { return static_cast<double>(v); }

inline std::string to_string(Wide v) {
  if (v == 0) return "0";
  const bool negative = v < 0;
  unsigned __int128 u = negative ? -static_cast<unsigned __int128>(v) : static_cast<unsigned __int128>(v);
  std::string out;
  while (u > 0) {
    out.push_back(static_cast<char>('0' + static_cast<int>(u % 10)));
    u /= 10;
  }
  if (negative) out.push_back('-');
  std::reverse(out.begin(), out.end());
  return out;
}

struct Moments {
  Wide f0 = 0;  // strictly positive entries
  Wide f1 = 0;
  Wide f2 = 0;
  Wide f4 = 0;

  friend bool operator==(const Moments&, const Moments&) = default;
};

inline Moments moments(std::span<const std::int64_t> counts) noexcept {
  Moments m;
  for (const auto c : counts) {
    const Wide v = c;
    if (v > 0) ++m.f0;
    m.f1 += v;
    m.f2 += v * v;
    m.f4 += v * v * v * v;
  }
  return m;
}

inline Moments moments(const FrequencyVector& v) noexcept { return moments(v.counts()); }

/// Mixed power sums of two vectors over the same universe.
struct PairMoments {
  Moments f;
  Moments g;
  Wide ip = 0;     // sum f_i g_i
  Wide f3g = 0;    // sum f_i^3 g_i
  Wide fg3 = 0;    // sum f_i g_i^3
  Wide f2g2 = 0;   // sum f_i^2 g_i^2
};

inline PairMoments pair_moments(std::span<const std::int64_t> f, std::span<const std::int64_t> g) {
  if (f.size() != g.size()) {
    throw Error(ErrorKind::LengthMismatch, "vectors have universes " + std::to_string(f.size()) +
                                                " and " + std::to_string(g.size()));
  }
  PairMoments p;
  p.f = moments(f);
  p.g = moments(g);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Wide a = f[i];
    const Wide b = g[i];
    p.ip += a * b;
    p.f3g += a * a * a * b;
    p.fg3 += a * b * b * b;
    p.f2g2 += a * a * b * b;
  }
  return p;
}

}  // namespace cvsketch
