#pragma once

// Control-variate corrected estimators for F2 and inner products.
//
// Given an estimator X and a variable Z with known mean, X + c (Z - E[Z]) is
// unbiased for every constant c and has minimal variance at
// c = -Cov[X, Z] / Var[Z], where the variance drops by Cov[X, Z]^2 / Var[Z].

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>

#include "cvsketch/error.hpp"
#include "cvsketch/hashing.hpp"
#include "cvsketch/moments.hpp"
#include "cvsketch/tug_of_war.hpp"

namespace cvsketch {

struct CvMomentSpec {
  double cov_xz = 0.0;
  double var_z = 0.0;
  double mean_z = 0.0;
};

struct CvEstimate {
  double raw = 0.0;
  double cv_value = 0.0;
  double cv_mean = 0.0;
  double coefficient = 0.0;
  double corrected = 0.0;
};

enum class IpMomentMode { Exact, Gaussian };

constexpr const char* to_string(IpMomentMode mode) noexcept {
  return mode == IpMomentMode::Exact ? "exact" : "gaussian";
}

/// Plug the sketch's own raw estimate into the coefficient.
struct UseRawEstimate {};
/// Plug a caller-supplied value (typically the exact moment) into the coefficient.
struct UseProvided {
  double value = 0.0;
};
using ProxyPolicy = std::variant<UseRawEstimate, UseProvided>;

inline double resolve_proxy(const ProxyPolicy& policy, double raw) noexcept {
  struct Visitor {
    double raw;
    double operator()(UseRawEstimate) const noexcept { return raw; }
    double operator()(const UseProvided& p) const noexcept { return p.value; }
  };
  return std::visit(Visitor{raw}, policy);
}

/// Optimal coefficient -cov/var. A zero-variance variable with zero
/// covariance yields 0.
inline double cv_coefficient(const CvMomentSpec& spec) {
  if (!(spec.var_z >= 0.0) || !std::isfinite(spec.var_z) || !std::isfinite(spec.cov_xz)) {
    throw Error(ErrorKind::InvalidMoments, "Var[Z] must be finite and non-negative");
  }
  if (spec.var_z == 0.0) {
    if (spec.cov_xz != 0.0) {
      throw Error(ErrorKind::InvalidMoments, "Var[Z] is zero but Cov[X, Z] is not");
    }
    return 0.0;
  }
  return -spec.cov_xz / spec.var_z;
}

inline CvEstimate cv_apply(double x, double z, double mean_z, double coefficient) noexcept {
  CvEstimate e;
  e.raw = x;
  e.cv_value = z;
  e.cv_mean = mean_z;
  e.coefficient = coefficient;
  e.corrected = coefficient == 0.0 ? x : x + coefficient * (z - mean_z);
  return e;
}

inline CvEstimate cv_correct(double x, const CvMomentSpec& spec, double z) {
  return cv_apply(x, z, spec.mean_z, cv_coefficient(spec));
}

// ---------------------------------------------------------------------------
// F2

/// Z = (sum_{i < universe} sign(i))^2 - universe. Depends only on the hash.
template <SignSource Hash>
double f2_control_variate(const Hash& hash, std::uint64_t universe) {
  if (universe < 1) throw Error(ErrorKind::InvalidArgument, "universe must be >= 1");
  if (universe > hash.universe()) {
    throw Error(ErrorKind::InvalidArgument, "control-variate universe exceeds the hash universe");
  }
  std::int64_t s = 0;
  for (std::uint64_t i = 0; i < universe; ++i) s += hash.sign(i);
  const auto sd = static_cast<double>(s);
  return sd * sd - static_cast<double>(universe);
}

/// Moments of Z over `f0` summed signs: E[Z] = 0, Var[Z] = 2 f0 (f0 - 1),
/// Cov[X, Z] = 2 (F1^2 - F2).
inline CvMomentSpec f2_cv_moments(double f1, double f2_proxy, std::uint64_t f0) {
  if (f0 < 2) {
    throw Error(ErrorKind::InvalidArgument,
                "control variate needs at least 2 items, got " + std::to_string(f0));
  }
  const auto n = static_cast<double>(f0);
  return CvMomentSpec{2.0 * (f1 * f1 - f2_proxy), 2.0 * n * (n - 1.0), 0.0};
}

/// Corrected F2 estimate. Z sums over items [0, cv_universe), which defaults
/// to the sketch universe; items outside that range must have zero count.
/// With fewer than two items the raw estimate is returned with coefficient 0.
template <SignSource Hash>
CvEstimate cv_estimate_f2(const TugOfWarSketch<Hash>& sketch, double f1, const ProxyPolicy& policy,
                          std::optional<std::uint64_t> cv_universe = std::nullopt) {
  const double x = sketch.estimate_f2();
  const std::uint64_t n = cv_universe.value_or(sketch.universe());
  if (n < 2) return cv_apply(x, 0.0, 0.0, 0.0);
  const double z = f2_control_variate(*sketch.hash(), n);
  return cv_correct(x, f2_cv_moments(f1, resolve_proxy(policy, x), n), z);
}

// ---------------------------------------------------------------------------
// Inner product

struct VectorPair {
  std::span<const std::int64_t> f;
  std::span<const std::int64_t> g;
};

/// Moments of Z2 = x_f^2 + x_g^2 against X2 = x_f x_g. E[Z2] = F2 + G2 in
/// both modes.
///
/// Gaussian: the large-n bivariate normal limit, needs only (F2, G2, ip).
/// Exact: finite-n moments from the full vectors; the scalar arguments other
/// than mean_z are ignored and recomputed from `vectors`.
inline CvMomentSpec ip_cv_moments(double f2, double g2, double ip_proxy,
                                  const std::optional<VectorPair>& vectors, IpMomentMode mode) {
  if (mode == IpMomentMode::Gaussian) {
    return CvMomentSpec{2.0 * ip_proxy * (f2 + g2),
                        2.0 * (2.0 * ip_proxy * ip_proxy + f2 * f2 + g2 * g2), f2 + g2};
  }
  if (!vectors) {
    throw Error(ErrorKind::MissingVectors, "exact IP moments need both frequency vectors");
  }
  const PairMoments p = pair_moments(vectors->f, vectors->g);
  const Wide cov = 2 * ((p.f.f2 * p.ip - p.f3g) + (p.ip * p.g.f2 - p.fg3));
  const Wide var = 2 * ((p.f.f2 * p.f.f2 - p.f.f4) + (p.g.f2 * p.g.f2 - p.g.f4) +
                        2 * (p.ip * p.ip - p.f2g2));
  return CvMomentSpec{to_double(cov), to_double(var), f2 + g2};
}

template <SignSource Hash>
double ip_control_variate(const TugOfWarSketch<Hash>& f, const TugOfWarSketch<Hash>& g) {
  require_shared_hash(f, g);
  const auto a = static_cast<double>(f.counter());
  const auto b = static_cast<double>(g.counter());
  return a * a + b * b;
}

template <SignSource Hash>
CvEstimate cv_estimate_ip(const TugOfWarSketch<Hash>& f, const TugOfWarSketch<Hash>& g, double f2,
                          double g2, const ProxyPolicy& policy, IpMomentMode mode,
                          const std::optional<VectorPair>& vectors = std::nullopt) {
  const double x = estimate_ip(f, g);
  const double z = ip_control_variate(f, g);
  return cv_correct(x, ip_cv_moments(f2, g2, resolve_proxy(policy, x), vectors, mode), z);
}

}  // namespace cvsketch
