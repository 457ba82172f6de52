#pragma once

// Cross-checks between the enumeration oracle and the closed-form moments,
// shared by the `verify` subcommand and the tests.

#include <cstdint>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cvsketch/control_variates.hpp"
#include "cvsketch/moments.hpp"
#include "cvsketch/oracle.hpp"
#include "cvsketch/random.hpp"
#include "cvsketch/theory.hpp"

namespace cvsketch {

struct VerifyCheck {
  std::string name;
  bool passed = true;
  std::size_t cases = 0;
  std::string detail;  // first failure
};

struct PointCase {
  FrequencyVector f;
  std::uint64_t item = 0;
  std::uint64_t buckets = 2;
};

struct VerifyCases {
  std::vector<FrequencyVector> f2;
  std::vector<std::pair<FrequencyVector, FrequencyVector>> ip;
  std::vector<PointCase> point;
};

/// Seeded random cases: universes in [2, max_n], counts in [0, max_count].
inline VerifyCases random_verify_cases(std::size_t count, std::uint64_t seed, std::size_t max_n = 10,
                                       std::int64_t max_count = 8) {
  VerifyCases c;
  Rng rng(seed);
  const auto vec = [&](std::size_t n) {
    std::vector<std::int64_t> v(n);
    for (auto& x : v) x = uniform_int(rng, 0, max_count);
    return FrequencyVector(std::move(v));
  };
  for (std::size_t i = 0; i < count; ++i) {
    const auto n = static_cast<std::size_t>(uniform_int(rng, 2, static_cast<std::int64_t>(max_n)));
    c.f2.push_back(vec(n));
    const auto m = static_cast<std::size_t>(uniform_int(rng, 2, static_cast<std::int64_t>(max_n)));
    c.ip.emplace_back(vec(m), vec(m));
    const auto p = static_cast<std::size_t>(uniform_int(rng, 1, 4));
    PointCase pc{vec(p), uniform_below(rng, p), static_cast<std::uint64_t>(uniform_int(rng, 2, 3))};
    c.point.push_back(std::move(pc));
  }
  return c;
}

/// {"f2": [[...]], "ip": [[[...], [...]]], "point": [{"f": [...], "a": 0, "k": 2}]}
inline VerifyCases verify_cases_from_json(const nlohmann::json& j) {
  VerifyCases c;
  try {
    for (const auto& v : j.value("f2", nlohmann::json::array())) {
      c.f2.emplace_back(v.get<std::vector<std::int64_t>>());
    }
    for (const auto& p : j.value("ip", nlohmann::json::array())) {
      c.ip.emplace_back(FrequencyVector(p.at(0).get<std::vector<std::int64_t>>()),
                        FrequencyVector(p.at(1).get<std::vector<std::int64_t>>()));
    }
    for (const auto& p : j.value("point", nlohmann::json::array())) {
      c.point.push_back({FrequencyVector(p.at("f").get<std::vector<std::int64_t>>()),
                         p.at("a").get<std::uint64_t>(), p.at("k").get<std::uint64_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedLine, std::string("verify cases: ") + e.what());
  }
  return c;
}

namespace detail {

inline bool rel_close(double a, double b, double tol = 1e-9) {
  return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

inline std::string describe(const FrequencyVector& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.universe(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s + ")";
}

class CheckBuilder {
 public:
  explicit CheckBuilder(std::string name) { check_.name = std::move(name); }
  void expect(bool ok, const std::string& what) {
    if (!ok && check_.passed) {
      check_.passed = false;
      check_.detail = what;
    }
  }
  void next_case() { ++check_.cases; }
  VerifyCheck done() { return std::move(check_); }

 private:
  VerifyCheck check_;
};

}  // namespace detail

inline std::vector<VerifyCheck> run_verification(const VerifyCases& cases) {
  using oracle::TowEstimator;
  std::vector<VerifyCheck> out;

  {
    detail::CheckBuilder b("tug-of-war F2 moments");
    for (const auto& f : cases.f2) {
      b.next_case();
      const auto o = oracle::enumerate_tow(f, std::nullopt, TowEstimator::F2, true);
      const Moments m = moments(f);
      const auto n = f.universe();
      const auto tag = detail::describe(f);
      b.expect(o.mean == Rational(BigInt(m.f2)), tag + ": E[X] != F2");
      b.expect(o.variance == Rational(BigInt(ams_f2_variance_exact(f))), tag + ": Var[X] != 2(F2^2-F4)");
      b.expect(o.cv_mean == 0, tag + ": E[Z] != 0");
      if (n >= 2) {
        const auto spec = f2_cv_moments(to_double(m.f1), to_double(m.f2), n);
        b.expect(to_double(o.cv_variance) == spec.var_z, tag + ": Var[Z] mismatch");
        b.expect(to_double(o.covariance_with_cv) == spec.cov_xz, tag + ": Cov[X,Z] mismatch");
        const auto c = oracle::enumerate_tow(f, std::nullopt, TowEstimator::F2, true,
                                             oracle::optimal_coefficient(o));
        b.expect(*c.corrected_mean == o.mean, tag + ": corrected estimator biased");
        b.expect(detail::rel_close(to_double(*c.corrected_variance), f2_cv_report(f).cv_var),
                 tag + ": corrected variance != Var[X] - reduction");
      }
    }
    out.push_back(b.done());
  }

  {
    detail::CheckBuilder b("tug-of-war inner-product moments");
    for (const auto& [f, g] : cases.ip) {
      b.next_case();
      const auto o = oracle::enumerate_tow(f, g, TowEstimator::IP, true);
      const PairMoments p = pair_moments(f.counts(), g.counts());
      const auto tag = detail::describe(f) + "," + detail::describe(g);
      b.expect(o.mean == Rational(BigInt(p.ip)), tag + ": E[X2] != <f,g>");
      b.expect(o.variance == Rational(BigInt(ip_variance_exact(f.counts(), g.counts()))),
               tag + ": Var[X2] mismatch");
      b.expect(o.cv_mean == Rational(BigInt(p.f.f2 + p.g.f2)), tag + ": E[Z2] != F2+G2");
      const VectorPair vp{f.counts(), g.counts()};
      const auto spec = ip_cv_moments(to_double(p.f.f2), to_double(p.g.f2), to_double(p.ip), vp,
                                      IpMomentMode::Exact);
      b.expect(to_double(o.covariance_with_cv) == spec.cov_xz, tag + ": exact Cov mismatch");
      b.expect(to_double(o.cv_variance) == spec.var_z, tag + ": exact Var[Z2] mismatch");
      const auto c = oracle::enumerate_tow(f, g, TowEstimator::IP, true, oracle::optimal_coefficient(o));
      b.expect(*c.corrected_mean == o.mean, tag + ": corrected estimator biased");
      const auto report = ip_cv_report(to_double(p.f.f2), to_double(p.g.f2), to_double(p.ip),
                                       IpMomentMode::Exact, vp);
      b.expect(detail::rel_close(to_double(*c.corrected_variance), report.cv_var),
               tag + ": corrected variance != Var[X2] - reduction");
    }
    out.push_back(b.done());
  }

  for (const auto sketch : {PointSketch::CountMin, PointSketch::CountSketch}) {
    detail::CheckBuilder b(sketch == PointSketch::CountMin ? "count-min row moments" : "count-sketch row moments");
    for (const auto& pc : cases.point) {
      b.next_case();
      const auto o = oracle::enumerate_point_query(pc.f, pc.item, sketch, pc.buckets, true);
      const auto t = point_query_moments(pc.f, pc.item, pc.buckets, sketch);
      const auto tag = detail::describe(pc.f) + " a=" + std::to_string(pc.item) + " k=" + std::to_string(pc.buckets);
      b.expect(o.mean == t.mean, tag + ": E[X] mismatch");
      b.expect(o.variance == t.variance, tag + ": Var[X] mismatch");
      b.expect(o.cv_mean == t.cv_mean, tag + ": E[Z] mismatch");
      b.expect(o.cv_variance == t.cv_variance, tag + ": Var[Z] mismatch");
      b.expect(o.covariance_with_cv == t.covariance, tag + ": Cov mismatch");
      if (pc.f.universe() >= 2) {
        const auto c = oracle::enumerate_point_query(pc.f, pc.item, sketch, pc.buckets, true,
                                                     oracle::optimal_coefficient(o));
        b.expect(*c.corrected_mean == o.mean, tag + ": corrected row biased");
        b.expect(*c.corrected_variance == t.corrected_variance, tag + ": corrected variance mismatch");
      }
    }
    out.push_back(b.done());
  }
  return out;
}

}  // namespace cvsketch
