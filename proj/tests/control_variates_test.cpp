#include <cmath>

#include "test_util.hpp"

using namespace cvsketch;

namespace {

using TableSketch = TugOfWarSketch<TableSignHash>;

TableSketch sketch_for(const FrequencyVector& v, std::uint64_t mask) {
  TableSketch s(std::make_shared<const TableSignHash>(TableSignHash::from_mask(mask, v.universe())));
  s.update(v);
  return s;
}

struct Stats {
  double mean = 0;
  double variance = 0;  // population
};

Stats population(const std::vector<double>& xs) {
  Stats s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  for (double x : xs) s.variance += (x - s.mean) * (x - s.mean);
  s.variance /= static_cast<double>(xs.size());
  return s;
}

}  // namespace

TEST(CvCorrect, ZeroCovarianceLeavesEstimate) {
  const auto e = cv_correct(10.0, CvMomentSpec{0.0, 5.0, 0.0}, 123.0);
  EXPECT_DOUBLE_EQ(e.coefficient, 0.0);
  EXPECT_DOUBLE_EQ(e.corrected, 10.0);
}

TEST(CvCorrect, ArithmeticIdentity) {
  const auto e = cv_correct(10.0, CvMomentSpec{22.0, 6.0, 0.0}, 6.0);
  EXPECT_DOUBLE_EQ(e.coefficient, -11.0 / 3.0);
  EXPECT_DOUBLE_EQ(e.corrected, -12.0);
  EXPECT_DOUBLE_EQ(e.raw, 10.0);
}

TEST(CvCorrect, DegenerateMoments) {
  EXPECT_ERROR_KIND(cv_coefficient(CvMomentSpec{1.0, 0.0, 0.0}), ErrorKind::InvalidMoments);
  EXPECT_ERROR_KIND(cv_coefficient(CvMomentSpec{1.0, -1.0, 0.0}), ErrorKind::InvalidMoments);
  EXPECT_ERROR_KIND(cv_coefficient(CvMomentSpec{NAN, 1.0, 0.0}), ErrorKind::InvalidMoments);
  EXPECT_DOUBLE_EQ(cv_coefficient(CvMomentSpec{0.0, 0.0, 0.0}), 0.0);
}

TEST(F2ControlVariate, SmallUniverses) {
  for (std::uint64_t mask : {0u, 1u}) {
    EXPECT_DOUBLE_EQ(f2_control_variate(TableSignHash::from_mask(mask, 1), 1), 0.0);
  }
  EXPECT_DOUBLE_EQ(f2_control_variate(TableSignHash({1, 1}), 2), 2.0);
  EXPECT_DOUBLE_EQ(f2_control_variate(TableSignHash({1, -1}), 2), -2.0);
  EXPECT_ERROR_KIND(f2_control_variate(TableSignHash({1, -1}), 3), ErrorKind::InvalidArgument);
}

TEST(F2ControlVariate, MeanAndVarianceOverAllSigns) {
  std::vector<double> zs;
  for (std::uint64_t mask = 0; mask < 8; ++mask) zs.push_back(f2_control_variate(TableSignHash::from_mask(mask, 3), 3));
  const auto s = population(zs);
  EXPECT_DOUBLE_EQ(s.mean, 0.0);
  EXPECT_DOUBLE_EQ(s.variance, 12.0);  // 2 n (n-1)
}

TEST(F2CvMoments, ExampleVector) {
  const auto spec = f2_cv_moments(6.0, 14.0, 3);
  EXPECT_DOUBLE_EQ(spec.cov_xz, 44.0);
  EXPECT_DOUBLE_EQ(spec.var_z, 12.0);
  EXPECT_DOUBLE_EQ(spec.mean_z, 0.0);
  EXPECT_DOUBLE_EQ(cv_coefficient(spec), -11.0 / 3.0);
}

TEST(F2CvMoments, UniformStream) {
  for (std::uint64_t n : {2u, 4u, 10u}) {
    const double d = static_cast<double>(n);
    const auto spec = f2_cv_moments(d, d, n);
    EXPECT_DOUBLE_EQ(spec.cov_xz, 2 * (d * d - d));
    EXPECT_DOUBLE_EQ(spec.var_z, 2 * d * (d - 1));
    EXPECT_DOUBLE_EQ(cv_coefficient(spec), -1.0);
  }
}

TEST(F2CvMoments, NeedsTwoItems) {
  EXPECT_ERROR_KIND(f2_cv_moments(5.0, 25.0, 1), ErrorKind::InvalidArgument);
}

TEST(CvEstimateF2, SingleItemFallsBackToRaw) {
  const FrequencyVector v{5};
  const auto e = cv_estimate_f2(sketch_for(v, 1), 5.0, UseRawEstimate{});
  EXPECT_DOUBLE_EQ(e.corrected, 25.0);
  EXPECT_DOUBLE_EQ(e.coefficient, 0.0);
}

TEST(CvEstimateF2, GroundTruthProxyOverAllSigns) {
  const FrequencyVector v{1, 2, 3};
  std::vector<double> raw, corrected;
  for (std::uint64_t mask = 0; mask < 8; ++mask) {
    const auto e = cv_estimate_f2(sketch_for(v, mask), 6.0, UseProvided{14.0});
    EXPECT_DOUBLE_EQ(e.coefficient, -11.0 / 3.0);
    raw.push_back(e.raw);
    corrected.push_back(e.corrected);
  }
  EXPECT_DOUBLE_EQ(population(raw).mean, 14.0);
  EXPECT_DOUBLE_EQ(population(raw).variance, 196.0);
  EXPECT_NEAR(population(corrected).mean, 14.0, 1e-12);
  EXPECT_NEAR(population(corrected).variance, 104.0 / 3.0, 1e-9);
}

TEST(CvEstimateF2, PolicyOnlyChangesCoefficient) {
  const FrequencyVector v{1, 2, 3};
  const auto s = sketch_for(v, 0b011);
  const auto provided = cv_estimate_f2(s, 6.0, UseProvided{14.0});
  const auto raw = cv_estimate_f2(s, 6.0, UseRawEstimate{});
  EXPECT_DOUBLE_EQ(provided.raw, raw.raw);
  EXPECT_DOUBLE_EQ(provided.cv_value, raw.cv_value);
  EXPECT_NE(provided.coefficient, raw.coefficient);
  EXPECT_DOUBLE_EQ(raw.coefficient, -(36.0 - raw.raw) / 6.0);
}

TEST(CvEstimateF2, ExplicitCvUniverse) {
  // items 2 and 3 never appear; Z restricted to the first two items
  const FrequencyVector v{3, 1, 0, 0};
  const auto s = sketch_for(v, 0b0001);
  const auto e = cv_estimate_f2(s, 4.0, UseProvided{10.0}, 2);
  EXPECT_DOUBLE_EQ(e.cv_value, -2.0);
  EXPECT_DOUBLE_EQ(e.coefficient, -2.0 * 6.0 / 4.0);
}

TEST(IpCvMoments, GaussianEqualVectors) {
  const auto spec = ip_cv_moments(2.0, 2.0, 2.0, std::nullopt, IpMomentMode::Gaussian);
  EXPECT_DOUBLE_EQ(spec.cov_xz, 16.0);
  EXPECT_DOUBLE_EQ(spec.var_z, 32.0);
  EXPECT_DOUBLE_EQ(spec.mean_z, 4.0);
  EXPECT_DOUBLE_EQ(cv_coefficient(spec), -0.5);
}

TEST(IpCvMoments, GaussianOrthogonal) {
  const auto spec = ip_cv_moments(1.0, 1.0, 0.0, std::nullopt, IpMomentMode::Gaussian);
  EXPECT_DOUBLE_EQ(spec.cov_xz, 0.0);
  EXPECT_DOUBLE_EQ(cv_coefficient(spec), 0.0);
}

TEST(IpCvMoments, ExactEqualVectors) {
  const std::vector<std::int64_t> f{1, 1};
  const auto spec = ip_cv_moments(2.0, 2.0, 2.0, VectorPair{f, f}, IpMomentMode::Exact);
  EXPECT_DOUBLE_EQ(spec.cov_xz, 8.0);
  EXPECT_DOUBLE_EQ(spec.var_z, 16.0);
  EXPECT_DOUBLE_EQ(spec.mean_z, 4.0);
  EXPECT_DOUBLE_EQ(cv_coefficient(spec), -0.5);
}

TEST(IpCvMoments, ExactNeedsVectors) {
  EXPECT_ERROR_KIND(ip_cv_moments(2.0, 2.0, 2.0, std::nullopt, IpMomentMode::Exact), ErrorKind::MissingVectors);
}

TEST(IpControlVariate, SumOfSquares) {
  const auto hash = std::make_shared<const TableSignHash>(TableSignHash({1}));
  TableSketch a(hash, 2), b(hash, -3);
  EXPECT_DOUBLE_EQ(ip_control_variate(a, b), 13.0);
  TableSketch empty(hash);
  EXPECT_DOUBLE_EQ(ip_control_variate(a, empty), a.estimate_f2());
}

TEST(CvEstimateIp, OrthogonalGroundTruthIsUncorrected) {
  const FrequencyVector f{1, 0}, g{0, 1};
  const auto hash = std::make_shared<const TableSignHash>(TableSignHash({1, -1}));
  TableSketch sf(hash), sg(hash);
  sf.update(f);
  sg.update(g);
  const auto e = cv_estimate_ip(sf, sg, 1.0, 1.0, UseProvided{0.0}, IpMomentMode::Gaussian);
  EXPECT_DOUBLE_EQ(e.corrected, e.raw);
}

TEST(CvEstimateIp, SelfInnerProductMatchesRaw) {
  const FrequencyVector f{3, 1, 2};
  const auto hash = std::make_shared<const PolySignHash>(PolySignHash::create(3, 4));
  TugOfWarSketch<PolySignHash> a(hash), b(hash);
  a.update(f);
  b.update(f);
  const auto e = cv_estimate_ip(a, b, 14.0, 14.0, UseProvided{14.0}, IpMomentMode::Gaussian);
  EXPECT_DOUBLE_EQ(e.raw, a.estimate_f2());
}

TEST(CvEstimateIp, ExactModeOverAllSigns) {
  const FrequencyVector f{1, 1};
  std::vector<double> raw, corrected;
  for (std::uint64_t mask = 0; mask < 4; ++mask) {
    const auto hash = std::make_shared<const TableSignHash>(TableSignHash::from_mask(mask, 2));
    TableSketch a(hash), b(hash);
    a.update(f);
    b.update(f);
    const auto e = cv_estimate_ip(a, b, 2.0, 2.0, UseProvided{2.0}, IpMomentMode::Exact,
                                  VectorPair{f.counts(), f.counts()});
    raw.push_back(e.raw);
    corrected.push_back(e.corrected);
  }
  EXPECT_DOUBLE_EQ(population(raw).mean, 2.0);
  EXPECT_DOUBLE_EQ(population(raw).variance, 4.0);
  EXPECT_DOUBLE_EQ(population(corrected).mean, 2.0);
  EXPECT_DOUBLE_EQ(population(corrected).variance, 0.0);
}

// Property: over all sign vectors, the fixed-coefficient corrected estimator
// is unbiased and never has larger variance than the raw one.
TEST(CvEstimateF2, PropertyUnbiasedAndNotWorse) {
  Rng rng(31);
  for (int c = 0; c < 40; ++c) {
    const auto n = static_cast<std::size_t>(uniform_int(rng, 2, 8));
    std::vector<std::int64_t> counts(n);
    for (auto& x : counts) x = uniform_int(rng, 0, 8);
    const FrequencyVector v(counts);
    const auto m = moments(v);
    std::vector<double> raw, corrected;
    for (std::uint64_t mask = 0; mask < (1u << n); ++mask) {
      const auto e = cv_estimate_f2(sketch_for(v, mask), to_double(m.f1), UseProvided{to_double(m.f2)});
      raw.push_back(e.raw);
      corrected.push_back(e.corrected);
    }
    const auto r = population(raw);
    const auto k = population(corrected);
    EXPECT_NEAR(k.mean, r.mean, 1e-9 * std::max(1.0, r.mean));
    EXPECT_LE(k.variance, r.variance * (1 + 1e-12) + 1e-9);
  }
}
