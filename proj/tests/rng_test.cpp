#include "gossim/rng.hpp"

#include <gtest/gtest.h>

#include <set>
#include <vector>

namespace gossim {
namespace {

TEST(Rng, DeterministicAcrossInstances) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DeriveSeedSeparatesStreams) {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t salt = 0; salt < 1000; ++salt)
    seeds.insert(derive_seed(7, salt));
  EXPECT_EQ(seeds.size(), 1000u);
  EXPECT_NE(derive_seed(7, 1), derive_seed(8, 1));
}

TEST(Rng, BoundedStaysInRange) {
  Rng r(1);
  for (std::uint64_t n : {1ull, 2ull, 3ull, 10ull, 1000ull, 12345678ull}) {
    for (int i = 0; i < 2000; ++i) ASSERT_LT(r.bounded(n), n);
  }
  EXPECT_EQ(r.bounded(1), 0u);
  EXPECT_EQ(r.bounded(0), 0u);
}

TEST(Rng, BoundedRoughlyUniform) {
  Rng r(3);
  std::vector<int> buckets(10, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) buckets[r.bounded(10)]++;
  for (int c : buckets) {
    EXPECT_GT(c, draws / 10 - 1000);
    EXPECT_LT(c, draws / 10 + 1000);
  }
}

TEST(Rng, Uniform01InRange) {
  Rng r(9);
  for (int i = 0; i < 10000; ++i) {
    double v = r.uniform01();
    ASSERT_GE(v, 0.0);
    ASSERT_LT(v, 1.0);
  }
}

TEST(Rng, ShuffleIsPermutation) {
  Rng r(5);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> orig = v;
  r.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, orig);
}

TEST(Rng, ShuffleDeterministic) {
  Rng a(11), b(11);
  std::vector<int> va{1, 2, 3, 4, 5, 6, 7}, vb{1, 2, 3, 4, 5, 6, 7};
  a.shuffle(va);
  b.shuffle(vb);
  EXPECT_EQ(va, vb);
}

TEST(Rng, SampleDistinctRespectsExclusionsAndCount) {
  Rng r(13);
  auto sample = r.sample_distinct(100, 10, [](std::uint32_t c) { return c % 2 == 0; });
  EXPECT_EQ(sample.size(), 10u);
  std::set<std::uint32_t> uniq(sample.begin(), sample.end());
  EXPECT_EQ(uniq.size(), 10u);
  for (auto v : sample) {
    EXPECT_LT(v, 100u);
    EXPECT_EQ(v % 2, 1u);
  }
}

TEST(Rng, SampleDistinctLargeK) {
  Rng r(17);
  auto sample = r.sample_distinct(10000, 600, [](std::uint32_t) { return false; });
  EXPECT_EQ(sample.size(), 600u);
  std::set<std::uint32_t> uniq(sample.begin(), sample.end());
  EXPECT_EQ(uniq.size(), 600u);
}

}  // namespace
}  // namespace gossim
