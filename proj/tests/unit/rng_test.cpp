#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "nab/errors.hpp"
#include "nab/rng.hpp"

using namespace nab;

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformIndexStaysInRange) {
  Rng rng(7);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = rng.uniform_index(7);
    ASSERT_LT(v, 7u);
    ++hits[v];
  }
  for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Rng, UniformInHalfOpenUnitInterval) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, NormalHasRoughlyUnitMoments) {
  Rng rng(9);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.05);
  EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng rng(3);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(std::span<int>(v));
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(DeriveSeed, DistinctKeysGiveDistinctSeeds) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t k = 0; k < 1000; ++k) seen.insert(derive_seed(5, k));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_NE(derive_seed(5, 1, 2), derive_seed(5, 2, 1));
}

TEST(SelectByHash, ReturnsSortedSubsetOfRequestedSize) {
  std::vector<std::uint64_t> keys(100);
  std::iota(keys.begin(), keys.end(), 1000);
  const auto picked = select_by_hash(keys, 30, 11);
  ASSERT_EQ(picked.size(), 30u);
  EXPECT_TRUE(std::is_sorted(picked.begin(), picked.end()));
  for (auto k : picked) EXPECT_TRUE(std::binary_search(keys.begin(), keys.end(), k));
}

TEST(SelectByHash, IndependentOfKeyOrder) {
  std::vector<std::uint64_t> keys(200);
  std::iota(keys.begin(), keys.end(), 0);
  const auto a = select_by_hash(keys, 40, 5);
  Rng rng(1);
  rng.shuffle(std::span<std::uint64_t>(keys));
  EXPECT_EQ(select_by_hash(keys, 40, 5), a);
}

TEST(SelectByHash, TooManyIsAnError) {
  std::vector<std::uint64_t> keys{1, 2, 3};
  EXPECT_THROW(select_by_hash(keys, 4, 0), ArgumentError);
  EXPECT_TRUE(select_by_hash(keys, 0, 0).empty());
}

TEST(RoundCount, RoundsToNearest) {
  EXPECT_EQ(round_count(0.05, 10000), 500u);
  EXPECT_EQ(round_count(0.1, 4000), 400u);
  EXPECT_EQ(round_count(0.25, 2), 1u);  // 0.5 rounds away from zero
  EXPECT_EQ(round_count(0.0, 17), 0u);
}
