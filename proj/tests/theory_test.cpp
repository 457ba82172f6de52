#include <cmath>
#include <sstream>

#include "test_util.hpp"

using namespace cvsketch;

TEST(AmsVariance, Examples) {
  EXPECT_DOUBLE_EQ(ams_f2_variance(FrequencyVector{1, 2, 3}), 196.0);
  EXPECT_DOUBLE_EQ(ams_f2_variance(FrequencyVector{5}), 0.0);
  EXPECT_DOUBLE_EQ(ams_f2_variance(FrequencyVector{1, 1}), 4.0);
}

TEST(F2CvReport, ExampleVector) {
  const auto r = f2_cv_report(FrequencyVector{1, 2, 3});
  EXPECT_DOUBLE_EQ(r.ams_var, 196.0);
  EXPECT_DOUBLE_EQ(r.cv_reduction, 2.0 * 22.0 * 22.0 / 6.0);
  EXPECT_DOUBLE_EQ(r.cv_var, 104.0 / 3.0);
  EXPECT_FALSE(r.negative_cv_var);
}

TEST(F2CvReport, SingleItemNoReduction) {
  const auto r = f2_cv_report(FrequencyVector{5});
  EXPECT_DOUBLE_EQ(r.cv_reduction, 0.0);
  EXPECT_DOUBLE_EQ(r.ratio, 1.0);
}

TEST(F2CvReport, UniformStream) {
  // ams 2(16-4) = 24; reduction 2 (16-4)^2 / (4*3) = 24, X is affine in Z
  const auto r = f2_cv_report(FrequencyVector{1, 1, 1, 1});
  EXPECT_DOUBLE_EQ(r.ams_var, 24.0);
  EXPECT_DOUBLE_EQ(r.cv_reduction, 24.0);
  EXPECT_DOUBLE_EQ(r.ratio, 0.0);
}

TEST(IpVariance, Examples) {
  EXPECT_DOUBLE_EQ(ip_variance(FrequencyVector{1, 0}, FrequencyVector{0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(ip_variance(FrequencyVector{1, 1}, FrequencyVector{1, 1}), 4.0);
  const FrequencyVector f{3, 0, 2, 7};
  EXPECT_DOUBLE_EQ(ip_variance(f, f), ams_f2_variance(f));
}

TEST(IpCvReport, GaussianOrthogonalIsExactlyOne) {
  const auto r = ip_cv_report(5.0, 9.0, 0.0, IpMomentMode::Gaussian);
  EXPECT_DOUBLE_EQ(r.cv_reduction, 0.0);
  EXPECT_EQ(r.ratio, 1.0);
}

TEST(IpCvReport, GaussianEqualVectors) {
  // F2 = G2 = ip = s: reduction 2 (2 s^2)^2 / (4 s^2) = 2 s^2
  const auto r = ip_cv_report(2.0, 2.0, 2.0, IpMomentMode::Gaussian);
  EXPECT_DOUBLE_EQ(r.cv_reduction, 8.0);
  EXPECT_DOUBLE_EQ(r.ams_var, 8.0);
  EXPECT_DOUBLE_EQ(r.ratio, 0.0);
}

TEST(IpCvReport, ExactEqualVectors) {
  const std::vector<std::int64_t> f{1, 1};
  const auto r = ip_cv_report(2.0, 2.0, 2.0, IpMomentMode::Exact, VectorPair{f, f});
  EXPECT_DOUBLE_EQ(r.ams_var, 4.0);
  EXPECT_DOUBLE_EQ(r.cv_reduction, 4.0);
  EXPECT_DOUBLE_EQ(r.cv_var, 0.0);
  EXPECT_ERROR_KIND(ip_cv_report(2.0, 2.0, 2.0, IpMomentMode::Exact), ErrorKind::MissingVectors);
}

TEST(PointQueryMoments, CountMinExample) {
  const auto m = point_query_moments(FrequencyVector{4, 2, 2}, 0, 2, PointSketch::CountMin);
  EXPECT_EQ(m.mean, 6);
  EXPECT_EQ(m.variance, 2);
  EXPECT_EQ(m.cv_mean, 2);
  EXPECT_EQ(m.cv_variance, Rational(1, 2));
  EXPECT_EQ(m.covariance, 1);
  EXPECT_EQ(m.reduction, 2);
  EXPECT_EQ(m.corrected_variance, 0);
}

TEST(PointQueryMoments, CountSketchExample) {
  const auto m = point_query_moments(FrequencyVector{3, 1}, 0, 2, PointSketch::CountSketch);
  EXPECT_EQ(m.mean, 3);
  EXPECT_EQ(m.variance, Rational(1, 2));
  EXPECT_EQ(m.reduction, Rational(1, 2));
  EXPECT_EQ(m.corrected_variance, 0);
}

TEST(PointQueryMoments, SingleItem) {
  const auto m = point_query_moments(FrequencyVector{7}, 0, 3, PointSketch::CountMin);
  EXPECT_EQ(m.variance, 0);
  EXPECT_EQ(m.reduction, 0);
}

TEST(SweepF2, RatiosInUnitIntervalAndBelowOne) {
  F2SweepConfig cfg;
  cfg.universe = 200;
  cfg.points = 10;
  const auto rows = ratio_sweep_f2(cfg);
  ASSERT_EQ(rows.size(), 10u);
  for (const auto& r : rows) {
    EXPECT_GE(r.report.ratio, 0.0);
    EXPECT_LT(r.report.ratio, 1.0);
    EXPECT_EQ(r.sweep, "f2");
    EXPECT_EQ(r.param2, 200.0);
  }
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GT(rows[i].param1, rows[i - 1].param1);
}

TEST(SweepF2, DegenerateUniverse) {
  F2SweepConfig cfg;
  cfg.universe = 1;
  cfg.points = 3;
  for (const auto& r : ratio_sweep_f2(cfg)) EXPECT_EQ(r.report.ratio, 1.0);
}

TEST(AnglePair, HitsTargets) {
  for (double theta : {10.0, 45.0, 90.0}) {
    const auto p = make_angle_pair(300, theta, 0.4, 5);
    EXPECT_NEAR(p.cosine, std::cos(theta * std::numbers::pi / 180.0), kAngleTolerance);
    EXPECT_NEAR(p.norm_ratio / 0.4, 1.0, kNormRatioTolerance);
  }
  const auto o = make_angle_pair(50, 90.0, 1.0, 1);
  EXPECT_EQ(testutil::ll(pair_moments(o.f.counts(), o.g.counts()).ip), 0);
}

TEST(SweepIp, OrthogonalRowsAreOneAndSmallerAnglesReduceMore) {
  IpSweepConfig cfg;
  cfg.universe = 300;
  cfg.thetas = {90.0, 60.0, 30.0, 10.0};
  cfg.norm_ratios = {1.0};
  const auto rows = ratio_sweep_ip(cfg);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].report.ratio, 1.0);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i].report.ratio, rows[i - 1].report.ratio);
}

TEST(SweepIp, ExactModeAlsoOneAtOrthogonality) {
  IpSweepConfig cfg;
  cfg.universe = 100;
  cfg.thetas = {90.0};
  cfg.norm_ratios = {0.1, 1.0};
  cfg.mode = IpMomentMode::Exact;
  for (const auto& r : ratio_sweep_ip(cfg)) EXPECT_EQ(r.report.ratio, 1.0);
}

TEST(SweepCsv, HeaderAndRows) {
  std::vector<SweepRow> rows{{"ip", 90, 1, ip_cv_report(1, 1, 0, IpMomentMode::Gaussian)}};
  std::ostringstream out;
  write_sweep_csv(out, rows);
  EXPECT_EQ(out.str(), "sweep,param1,param2,ams_var,cv_reduction,cv_var,ratio\nip,90,1,1,0,1,1\n");
}

// Property: the corrected variance never exceeds the raw one and the ratio
// stays in [0, 1], for random vectors.
TEST(F2CvReport, PropertyRatioInUnitInterval) {
  Rng rng(8);
  for (int c = 0; c < 200; ++c) {
    std::vector<std::int64_t> v(static_cast<std::size_t>(uniform_int(rng, 2, 40)));
    for (auto& x : v) x = uniform_int(rng, 0, 50);
    const auto r = f2_cv_report(FrequencyVector(v));
    EXPECT_GE(r.ratio, 0.0);
    EXPECT_LE(r.ratio, 1.0);
    EXPECT_FALSE(r.negative_cv_var);
  }
}
