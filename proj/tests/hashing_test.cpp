#include <cmath>
#include <set>

#include "test_util.hpp"

using namespace cvsketch;

TEST(PolyHashFamily, SameSeedSameCoefficients) {
  const auto a = PolyHashFamily::create(4, 2, 10, 42);
  const auto b = PolyHashFamily::create(4, 2, 10, 42);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.degree(), 4u);
  EXPECT_EQ(a.prime(), kMersenne61);
}

TEST(PolyHashFamily, DifferentSeedsDiffer) {
  const auto a = PolyHashFamily::create(4, 2, 10, 42);
  const auto b = PolyHashFamily::create(4, 2, 10, 43);
  EXPECT_FALSE(std::equal(a.coefficients().begin(), a.coefficients().end(), b.coefficients().begin()));
}

TEST(PolyHashFamily, RejectsBadParameters) {
  EXPECT_ERROR_KIND(PolyHashFamily::create(1, 2, 10, 0), ErrorKind::InvalidArgument);
  EXPECT_ERROR_KIND(PolyHashFamily::create(4, 1, 10, 0), ErrorKind::InvalidArgument);
  EXPECT_ERROR_KIND(PolyHashFamily::create(4, 2, 0, 0), ErrorKind::InvalidArgument);
  EXPECT_ERROR_KIND(PolyHashFamily::from_coefficients({13}, 13, 2, 10), ErrorKind::InvalidArgument);
  EXPECT_ERROR_KIND(PolyHashFamily::from_coefficients({}, 13, 2, 10), ErrorKind::InvalidArgument);
}

TEST(PolyHashFamily, CoefficientsBelowPrime) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto h = PolyHashFamily::create(4, 2, 10, seed);
    for (auto c : h.coefficients()) EXPECT_LT(c, kMersenne61);
  }
}

TEST(PolyHashFamily, ConstantPolynomial) {
  const auto h = PolyHashFamily::from_coefficients({3, 0, 0, 0}, 13, 2, 100);
  for (std::uint64_t x : {0u, 1u, 7u, 99u}) EXPECT_EQ(h(x), 1u);
}

TEST(PolyHashFamily, LinearPolynomialSmallPrime) {
  const auto h = PolyHashFamily::from_coefficients({1, 1, 0, 0}, 13, 13, 100);
  EXPECT_EQ(h(5), 6u);
  EXPECT_EQ(h(12), 0u);
  EXPECT_EQ(h(18), 6u);  // 18 = 5 mod 13
}

TEST(PolyHashFamily, MersenneMulmodMatchesWideArithmetic) {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const auto a = uniform_below(rng, kMersenne61);
    const auto b = uniform_below(rng, kMersenne61);
    const auto wide = static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * b) % kMersenne61);
    ASSERT_EQ(detail::mulmod_mersenne61(a, b), wide);
  }
  EXPECT_EQ(detail::mulmod_mersenne61(kMersenne61 - 1, kMersenne61 - 1), 1u);
}

TEST(PolyHashFamily, HornerMatchesDirectPowerSum) {
  const auto h = PolyHashFamily::create(4, 1000003, 1u << 20, 9);
  const auto c = h.coefficients();
  for (std::uint64_t x : {0ull, 1ull, 17ull, 123456ull, 1048575ull}) {
    unsigned __int128 acc = 0;
    unsigned __int128 power = 1;
    for (auto coeff : c) {
      acc = (acc + static_cast<unsigned __int128>(coeff) * power) % kMersenne61;
      power = power * x % kMersenne61;
    }
    EXPECT_EQ(h(x), static_cast<std::uint64_t>(acc % 1000003));
  }
}

TEST(PolyHashFamily, OutputsInRange) {
  const auto h = PolyHashFamily::create(2, 7, 1000, 3);
  for (std::uint64_t x = 0; x < 1000; ++x) EXPECT_LT(h(x), 7u);
}

TEST(PolySignHash, MapsZeroToMinusOneAndOneToPlusOne) {
  const PolySignHash zero(PolyHashFamily::from_coefficients({0, 0, 0, 0}, 13, 2, 4));
  const PolySignHash one(PolyHashFamily::from_coefficients({1, 0, 0, 0}, 13, 2, 4));
  EXPECT_EQ(zero.sign(2), -1);
  EXPECT_EQ(one.sign(2), 1);
}

TEST(PolySignHash, RequiresRangeTwo) {
  EXPECT_ERROR_KIND(PolySignHash(PolyHashFamily::create(4, 3, 10, 0)), ErrorKind::InvalidArgument);
}

TEST(PolySignHash, BalancedOverLargeUniverse) {
  const auto h = PolySignHash::create(10000, 77);
  double sum = 0;
  for (std::uint64_t x = 0; x < 10000; ++x) sum += h.sign(x);
  EXPECT_NEAR(sum / 10000.0, 0.0, 0.05);
}

TEST(PolySignHash, FourWiseProductAveragesToZero) {
  constexpr int kFamilies = 100000;
  double sum = 0;
  for (int s = 0; s < kFamilies; ++s) {
    const auto h = PolySignHash::create(100, mix_seed(1234, s));
    sum += h.sign(3) * h.sign(17) * h.sign(42) * h.sign(99);
  }
  EXPECT_NEAR(sum / kFamilies, 0.0, 3.0 / std::sqrt(kFamilies));
}

TEST(PolySignHash, PairwiseProductAveragesToZero) {
  constexpr int kFamilies = 50000;
  double sum = 0;
  for (int s = 0; s < kFamilies; ++s) {
    const auto h = PolySignHash::create(10, mix_seed(99, s), 2);
    sum += h.sign(1) * h.sign(8);
  }
  EXPECT_NEAR(sum / kFamilies, 0.0, 4.0 / std::sqrt(kFamilies));
}

TEST(TableSignHash, FromMaskBits) {
  const auto h = TableSignHash::from_mask(0b101, 3);
  EXPECT_EQ(h.sign(0), 1);
  EXPECT_EQ(h.sign(1), -1);
  EXPECT_EQ(h.sign(2), 1);
  EXPECT_ERROR_KIND(TableSignHash({1, 0}), ErrorKind::InvalidArgument);
}

TEST(TableBucketHash, ValidatesRange) {
  EXPECT_ERROR_KIND(TableBucketHash({0, 2}, 2), ErrorKind::InvalidArgument);
  const TableBucketHash h({1, 0, 1}, 2);
  EXPECT_EQ(h.bucket(2), 1u);
  EXPECT_EQ(h.universe(), 3u);
}

TEST(Random, MixSeedSpreadsIndices) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(mix_seed(7, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(mix_seed(7, 3), mix_seed(7, 3));
}

TEST(Random, UniformIntCoversClosedRange) {
  Rng rng(1);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = uniform_int(rng, -2, 2);
    ASSERT_GE(v, -2);
    ASSERT_LE(v, 2);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 5u);
}
