#pragma once

// Closed-form moments and variance-reduction calculators, plus the
// theoretical ratio sweeps.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cvsketch/control_variates.hpp"
#include "cvsketch/error.hpp"
#include "cvsketch/format.hpp"
#include "cvsketch/frequency_vector.hpp"
#include "cvsketch/moments.hpp"
#include "cvsketch/random.hpp"

namespace cvsketch {

struct VarianceReport {
  double ams_var = 0.0;
  double cv_reduction = 0.0;
  double cv_var = 0.0;
  double ratio = 1.0;  // cv_var / ams_var, 1 when ams_var == 0
  bool negative_cv_var = false;
};

namespace detail {

/// Report from exact rationals so that ratio is exact up to one rounding.
inline VarianceReport make_report(const Rational& ams_var, const Rational& reduction) {
  VarianceReport r;
  const Rational cv_var = ams_var - reduction;
  r.ams_var = to_double(ams_var);
  r.cv_reduction = to_double(reduction);
  r.cv_var = to_double(cv_var);
  r.negative_cv_var = cv_var < 0;
  r.ratio = ams_var > 0 ? to_double(cv_var / ams_var) : 1.0;
  return r;
}

}  // namespace detail

inline Wide inner_product(std::span<const std::int64_t> f, std::span<const std::int64_t> g) {
  return pair_moments(f, g).ip;
}

/// 2 (F2^2 - F4).
inline Wide ams_f2_variance_exact(const FrequencyVector& v) {
  const Moments m = moments(v);
  return 2 * (m.f2 * m.f2 - m.f4);
}

inline double ams_f2_variance(const FrequencyVector& v) { return to_double(ams_f2_variance_exact(v)); }

/// Reduction 2 (F1^2 - F2)^2 / (n (n-1)) where n is the number of signs the
/// control variate sums over (default: the vector's universe). Zero for n < 2.
inline VarianceReport f2_cv_report(const FrequencyVector& v,
                                   std::optional<std::uint64_t> cv_universe = std::nullopt) {
  const Moments m = moments(v);
  const Rational ams = BigInt(2 * (m.f2 * m.f2 - m.f4));
  const std::uint64_t n = cv_universe.value_or(v.universe());
  if (n < 2) return detail::make_report(ams, Rational(0));
  const BigInt cov = BigInt(2) * BigInt(m.f1 * m.f1 - m.f2);
  const BigInt var_z = BigInt(2) * BigInt(n) * BigInt(n - 1);
  return detail::make_report(ams, Rational(cov * cov, var_z));
}

/// Var[X2] = sum_{i != j} f_i^2 g_j^2 + sum_{i != j} f_i g_i f_j g_j (ordered pairs).
inline Wide ip_variance_exact(std::span<const std::int64_t> f, std::span<const std::int64_t> g) {
  const PairMoments p = pair_moments(f, g);
  return (p.f.f2 * p.g.f2 - p.f2g2) + (p.ip * p.ip - p.f2g2);
}

inline double ip_variance(const FrequencyVector& f, const FrequencyVector& g) {
  return to_double(ip_variance_exact(f.counts(), g.counts()));
}

/// Gaussian mode: Var[X2] = F2 G2 + ip^2 and reduction
/// 2 (ip (F2 + G2))^2 / (2 ip^2 + F2^2 + G2^2), so ratio = 1 - corr(X2, Z2)^2.
/// Exact mode: finite-n Var[X2] and reduction Cov^2 / Var[Z2] from `vectors`.
inline VarianceReport ip_cv_report(double f2, double g2, double ip, IpMomentMode mode,
                                   const std::optional<VectorPair>& vectors = std::nullopt) {
  if (mode == IpMomentMode::Gaussian) {
    VarianceReport r;
    r.ams_var = f2 * g2 + ip * ip;
    const double denom = 2.0 * ip * ip + f2 * f2 + g2 * g2;
    const double cov = ip * (f2 + g2);
    r.cv_reduction = denom > 0.0 ? 2.0 * cov * cov / denom : 0.0;
    r.cv_var = r.ams_var - r.cv_reduction;
    r.negative_cv_var = r.cv_var < 0.0;
    const double num = (f2 * g2 + ip * ip) * denom - 2.0 * cov * cov;
    r.ratio = r.ams_var > 0.0 ? (ip == 0.0 ? 1.0 : num / (r.ams_var * denom)) : 1.0;
    return r;
  }
  if (!vectors) {
    throw Error(ErrorKind::MissingVectors, "exact IP report needs both frequency vectors");
  }
  const PairMoments p = pair_moments(vectors->f, vectors->g);
  const Rational ams = BigInt((p.f.f2 * p.g.f2 - p.f2g2) + (p.ip * p.ip - p.f2g2));
  const BigInt cov = BigInt(2) * (BigInt(p.f.f2) * BigInt(p.ip) - BigInt(p.f3g) +
                                  BigInt(p.ip) * BigInt(p.g.f2) - BigInt(p.fg3));
  const BigInt var_z =
      BigInt(2) * (BigInt(p.f.f2) * BigInt(p.f.f2) - BigInt(p.f.f4) + BigInt(p.g.f2) * BigInt(p.g.f2) -
                   BigInt(p.g.f4) + 2 * (BigInt(p.ip) * BigInt(p.ip) - BigInt(p.f2g2)));
  if (var_z == 0) return detail::make_report(ams, Rational(0));
  return detail::make_report(ams, Rational(cov * cov, var_z));
}

// ---------------------------------------------------------------------------
// Single-row point-query moments, exact.

enum class PointSketch { CountMin, CountSketch };

constexpr const char* to_string(PointSketch s) noexcept {
  return s == PointSketch::CountMin ? "cms" : "cs";
}

struct PointQueryMoments {
  Rational mean;
  Rational variance;
  Rational cv_mean;
  Rational cv_variance;
  Rational covariance;
  Rational reduction;           // covariance^2 / cv_variance, 0 when n < 2
  Rational corrected_variance;  // variance - reduction
};

/// Moments over a uniformly random bucket hash (and sign hash for
/// Count-Sketch) with k buckets, for the item `a` of a vector over [0, n).
inline PointQueryMoments point_query_moments(const FrequencyVector& v, std::uint64_t a,
                                             std::uint64_t k, PointSketch sketch) {
  if (a >= v.universe()) throw Error(ErrorKind::ItemOutOfRange, "query item outside universe");
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "need at least one bucket");
  const Moments m = moments(v);
  const BigInt fa = v[a];
  const BigInt rest1 = BigInt(m.f1) - fa;
  const BigInt rest2 = BigInt(m.f2) - fa * fa;
  const BigInt others = BigInt(v.universe()) - 1;
  const Rational inv_k(BigInt(1), BigInt(k));
  const Rational shrink = sketch == PointSketch::CountMin ? Rational(1) - inv_k : Rational(1);

  PointQueryMoments out;
  out.mean = sketch == PointSketch::CountMin ? Rational(fa) + Rational(rest1) * inv_k : Rational(fa);
  out.variance = Rational(rest2) * inv_k * shrink;
  out.cv_mean = sketch == PointSketch::CountMin ? Rational(1) + Rational(others) * inv_k : Rational(1);
  out.cv_variance = Rational(others) * inv_k * shrink;
  out.covariance = Rational(rest1) * inv_k * shrink;
  out.reduction = out.cv_variance > 0 ? out.covariance * out.covariance / out.cv_variance : Rational(0);
  out.corrected_variance = out.variance - out.reduction;
  return out;
}

// ---------------------------------------------------------------------------
// Ratio sweeps

struct SweepRow {
  std::string sweep;
  double param1 = 0.0;
  double param2 = 0.0;
  VarianceReport report;
};

inline constexpr const char* kSweepCsvHeader = "sweep,param1,param2,ams_var,cv_reduction,cv_var,ratio";

inline void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << kSweepCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.sweep << ',' << format_double(r.param1) << ',' << format_double(r.param2) << ','
        << format_double(r.report.ams_var) << ',' << format_double(r.report.cv_reduction) << ','
        << format_double(r.report.cv_var) << ',' << format_double(r.report.ratio) << '\n';
  }
}

struct F2SweepConfig {
  std::uint64_t universe = 1000;
  std::int64_t freq_lo = 1;
  std::int64_t freq_hi = 10;
  std::size_t points = 20;
  double growth_per_point = 1.0;  // F1/n added between consecutive points
  std::uint64_t seed = 1;
};

/// Starts from uniform frequencies in [freq_lo, freq_hi] and repeatedly adds
/// one occurrence to a random item; param1 = F1/n, param2 = n.
inline std::vector<SweepRow> ratio_sweep_f2(const F2SweepConfig& cfg) {
  if (cfg.universe < 1 || cfg.freq_lo < 0 || cfg.freq_lo > cfg.freq_hi || cfg.points < 1 ||
      !(cfg.growth_per_point >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "invalid F2 sweep configuration");
  }
  Rng rng(cfg.seed);
  std::vector<std::int64_t> counts(cfg.universe);
  for (auto& c : counts) c = uniform_int(rng, cfg.freq_lo, cfg.freq_hi);
  const auto step = static_cast<std::uint64_t>(
      std::llround(cfg.growth_per_point * static_cast<double>(cfg.universe)));

  std::vector<SweepRow> rows;
  for (std::size_t p = 0; p < cfg.points; ++p) {
    if (p > 0) {
      for (std::uint64_t s = 0; s < step; ++s) ++counts[uniform_below(rng, cfg.universe)];
    }
    const FrequencyVector v(counts);
    const Moments m = moments(v);
    rows.push_back({"f2", to_double(m.f1) / static_cast<double>(cfg.universe),
                    static_cast<double>(cfg.universe), f2_cv_report(v)});
  }
  return rows;
}

struct AnglePair {
  FrequencyVector f;
  FrequencyVector g;
  double cosine = 0.0;
  double norm_ratio = 0.0;  // F2 / G2
  std::size_t attempts = 0;
};

inline constexpr double kAngleTolerance = 0.02;
inline constexpr double kNormRatioTolerance = 0.02;
inline constexpr std::size_t kMaxPairAttempts = 100;

/// Integer vectors over 2n items with cos(f, g) ~ cos(theta) and F2/G2 ~
/// norm_ratio. f lives on [0, n), a second random direction h on [n, 2n),
/// and g = round(alpha f + beta h); theta = 90 gives ip exactly 0.
inline AnglePair make_angle_pair(std::uint64_t n, double theta_degrees, double norm_ratio,
                                 std::uint64_t seed, std::int64_t freq_lo = 1,
                                 std::int64_t freq_hi = 100) {
  if (n < 1 || !(theta_degrees >= 0.0 && theta_degrees <= 90.0) || !(norm_ratio > 0.0) ||
      freq_lo < 1 || freq_lo > freq_hi) {
    throw Error(ErrorKind::InvalidArgument, "invalid angle-pair parameters");
  }
  const double theta = theta_degrees * std::numbers::pi / 180.0;
  const double target_cos = theta_degrees == 90.0 ? 0.0 : std::cos(theta);
  const double target_sin = theta_degrees == 90.0 ? 1.0 : std::sin(theta);
  Rng rng(seed);
  for (std::size_t attempt = 1; attempt <= kMaxPairAttempts; ++attempt) {
    std::vector<std::int64_t> f(2 * n, 0);
    std::vector<std::int64_t> h(2 * n, 0);
    for (std::uint64_t i = 0; i < n; ++i) f[i] = uniform_int(rng, freq_lo, freq_hi);
    for (std::uint64_t i = n; i < 2 * n; ++i) h[i] = uniform_int(rng, freq_lo, freq_hi);
    const double nf = std::sqrt(to_double(moments(f).f2));
    const double nh = std::sqrt(to_double(moments(h).f2));
    const double ng = nf / std::sqrt(norm_ratio);
    const double alpha = target_cos * ng / nf;
    const double beta = target_sin * ng / nh;
    std::vector<std::int64_t> g(2 * n);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = std::llround(alpha * static_cast<double>(f[i]) + beta * static_cast<double>(h[i]));
    }
    const PairMoments p = pair_moments(f, g);
    if (p.g.f2 == 0) continue;
    const double cosine = to_double(p.ip) / std::sqrt(to_double(p.f.f2) * to_double(p.g.f2));
    const double ratio = to_double(p.f.f2) / to_double(p.g.f2);
    if (std::abs(cosine - target_cos) <= kAngleTolerance &&
        std::abs(ratio / norm_ratio - 1.0) <= kNormRatioTolerance) {
      return AnglePair{FrequencyVector(std::move(f)), FrequencyVector(std::move(g)), cosine, ratio,
                       attempt};
    }
  }
  throw Error(ErrorKind::InvalidArgument, "could not build a vector pair within tolerance");
}

struct IpSweepConfig {
  std::uint64_t universe = 1000;
  std::vector<double> thetas{10.0, 30.0, 60.0, 90.0};
  std::vector<double> norm_ratios{0.1, 0.4, 0.7, 1.0};
  IpMomentMode mode = IpMomentMode::Gaussian;
  std::uint64_t seed = 1;
};

/// One row per (theta, F2/G2) grid point; param1 = theta in degrees,
/// param2 = the requested F2/G2.
inline std::vector<SweepRow> ratio_sweep_ip(const IpSweepConfig& cfg) {
  std::vector<SweepRow> rows;
  std::uint64_t point = 0;
  for (const double theta : cfg.thetas) {
    for (const double ratio : cfg.norm_ratios) {
      const AnglePair pair = make_angle_pair(cfg.universe, theta, ratio, mix_seed(cfg.seed, point++));
      const PairMoments p = pair_moments(pair.f.counts(), pair.g.counts());
      const VectorPair vp{pair.f.counts(), pair.g.counts()};
      rows.push_back({"ip", theta, ratio,
                      ip_cv_report(to_double(p.f.f2), to_double(p.g.f2), to_double(p.ip), cfg.mode, vp)});
    }
  }
  return rows;
}

}  // namespace cvsketch
