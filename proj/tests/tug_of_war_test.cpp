#include <limits>

#include "test_util.hpp"

using namespace cvsketch;

namespace {

std::shared_ptr<const TableSignHash> table(std::vector<int> signs) {
  return std::make_shared<const TableSignHash>(std::move(signs));
}

}  // namespace

TEST(TugOfWar, SingleUpdate) {
  TugOfWarSketch<TableSignHash> s(table({1, 1, 1, 1, 1}));
  s.update(3, 5);
  EXPECT_EQ(s.counter(), 5);
}

TEST(TugOfWar, UpdatesCancel) {
  TugOfWarSketch<TableSignHash> s(table({1, -1, 1, 1}));
  s.update(3, 5);
  s.update(3, -5);
  EXPECT_EQ(s.counter(), 0);
}

TEST(TugOfWar, SignedSumOfStream) {
  TugOfWarSketch<TableSignHash> s(table({1, -1, 1}));
  s.update(FrequencyVector{1, 2, 3});
  EXPECT_EQ(s.counter(), 2);
  EXPECT_DOUBLE_EQ(s.estimate_f2(), 4.0);
}

TEST(TugOfWar, SingleItemSquaresForAnySign) {
  for (int sign : {-1, 1}) {
    TugOfWarSketch<TableSignHash> s(table({sign}));
    s.update(0, 5);
    EXPECT_DOUBLE_EQ(s.estimate_f2(), 25.0);
  }
}

TEST(TugOfWar, ItemOutOfRange) {
  auto s = make_tug_of_war(4, 1);
  EXPECT_ERROR_KIND(s.update(4, 1), ErrorKind::ItemOutOfRange);
}

TEST(TugOfWar, CounterOverflowIsReported) {
  TugOfWarSketch<TableSignHash> s(table({1}), std::numeric_limits<std::int64_t>::max());
  EXPECT_ERROR_KIND(s.update(0, 1), ErrorKind::Overflow);
}

TEST(TugOfWar, OrderIndependent) {
  const auto v = generate_synthetic(200, 1, 50, 4, 0, 0);
  const auto hash = std::make_shared<const PolySignHash>(PolySignHash::create(v.universe(), 8));
  TugOfWarSketch<PolySignHash> a(hash), b(hash);
  a.update(as_updates(v, UpdateOrder::ById));
  b.update(as_updates(v, UpdateOrder::Shuffled, 3));
  EXPECT_EQ(a.counter(), b.counter());
}

TEST(TugOfWar, MergeIsConcatenation) {
  const auto hash = std::make_shared<const PolySignHash>(PolySignHash::create(50, 3));
  TugOfWarSketch<PolySignHash> first(hash), second(hash), whole(hash);
  for (std::uint64_t i = 0; i < 50; ++i) {
    first.update(i, static_cast<std::int64_t>(i % 7));
    second.update(49 - i, 3);
    whole.update(i, static_cast<std::int64_t>(i % 7));
  }
  for (std::uint64_t i = 0; i < 50; ++i) whole.update(49 - i, 3);
  EXPECT_EQ(merge(first, second).counter(), whole.counter());
  EXPECT_EQ(merge(first, TugOfWarSketch<PolySignHash>(hash)).counter(), first.counter());
  TugOfWarSketch<PolySignHash> negated(hash);
  for (std::uint64_t i = 0; i < 50; ++i) negated.update(i, -static_cast<std::int64_t>(i % 7));
  EXPECT_EQ(merge(first, negated).counter(), 0);
}

TEST(TugOfWar, MergeNeedsSharedHash) {
  const auto a = make_tug_of_war(10, 1);
  const auto b = make_tug_of_war(10, 1);  // equal seed, distinct instance
  EXPECT_ERROR_KIND(merge(a, b), ErrorKind::MismatchedHash);
  EXPECT_ERROR_KIND(estimate_ip(a, b), ErrorKind::MismatchedHash);
}

TEST(TugOfWar, InnerProductOfStreamWithItselfIsF2) {
  const auto v = generate_synthetic(100, 1, 20, 2, 0, 0);
  const auto hash = std::make_shared<const PolySignHash>(PolySignHash::create(v.universe(), 5));
  TugOfWarSketch<PolySignHash> a(hash), b(hash);
  a.update(v);
  b.update(v);
  EXPECT_DOUBLE_EQ(estimate_ip(a, b), a.estimate_f2());
}

TEST(TugOfWar, UnbiasedOverSeeds) {
  const FrequencyVector v{1, 2, 3, 4, 5, 6, 7, 8};
  const double f2 = to_double(moments(v).f2);
  const double sd = std::sqrt(ams_f2_variance(v));
  constexpr int kTrials = 20000;
  double sum = 0;
  for (int t = 0; t < kTrials; ++t) {
    auto s = make_tug_of_war(v.universe(), mix_seed(17, t));
    s.update(v);
    sum += s.estimate_f2();
  }
  EXPECT_NEAR(sum / kTrials, f2, 4 * sd / std::sqrt(kTrials));
}

TEST(FrequencyVector, Basics) {
  FrequencyVector v(3);
  v.add(1, 4);
  v.add(1, 2);
  EXPECT_EQ(v[1], 6);
  EXPECT_ERROR_KIND(v.add(3, 1), ErrorKind::ItemOutOfRange);
  v.resize(5);
  EXPECT_EQ(v.universe(), 5u);
  EXPECT_EQ(v, (FrequencyVector{0, 6, 0, 0, 0}));
}

TEST(Moments, SmallVectors) {
  const auto m = moments(FrequencyVector{1, 2, 3});
  EXPECT_EQ(testutil::ll(m.f0), 3);
  EXPECT_EQ(testutil::ll(m.f1), 6);
  EXPECT_EQ(testutil::ll(m.f2), 14);
  EXPECT_EQ(testutil::ll(m.f4), 98);
  const auto z = moments(FrequencyVector{0, 0, 0});
  EXPECT_EQ(testutil::ll(z.f0 + z.f1 + z.f2 + z.f4), 0);
  const auto s = moments(FrequencyVector{5});
  EXPECT_EQ(testutil::ll(s.f0), 1);
  EXPECT_EQ(testutil::ll(s.f1), 5);
  EXPECT_EQ(testutil::ll(s.f2), 25);
  EXPECT_EQ(testutil::ll(s.f4), 625);
}

TEST(Moments, PairMomentsNeedEqualLengths) {
  const std::vector<std::int64_t> f{1, 2};
  const std::vector<std::int64_t> g{1};
  EXPECT_ERROR_KIND(pair_moments(f, g), ErrorKind::LengthMismatch);
  const std::vector<std::int64_t> h{3, 4};
  const auto p = pair_moments(f, h);
  EXPECT_EQ(testutil::ll(p.ip), 11);
  EXPECT_EQ(testutil::ll(p.f3g), 1 * 3 + 8 * 4);
  EXPECT_EQ(testutil::ll(p.fg3), 27 + 2 * 64);
  EXPECT_EQ(testutil::ll(p.f2g2), 9 + 4 * 16);
}
