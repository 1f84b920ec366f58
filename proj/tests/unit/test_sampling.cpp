#include "slim/sampling.hpp"
#include "slim/types.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace slim;

TEST(Sampler, CyclicOrder) {
  Sampler s(SamplingScheme::cyclic, 3, 42);
  std::vector<std::size_t> seq;
  for (int k = 0; k < 7; ++k) seq.push_back(s.next_index());
  EXPECT_EQ(seq, (std::vector<std::size_t>{0, 1, 2, 0, 1, 2, 0}));
  EXPECT_EQ(s.draws(), 7u);
}

TEST(Sampler, RandomCyclicEpochsArePermutations) {
  Sampler s(SamplingScheme::random_cyclic, 4, 7);
  std::vector<std::size_t> epoch(4);
  for (auto& i : epoch) i = s.next_index();
  std::vector<std::size_t> sorted = epoch;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<std::size_t>{0, 1, 2, 3}));

  Sampler t(SamplingScheme::random_cyclic, 13, 99);
  std::vector<int> counts(13, 0);
  for (int e = 0; e < 25; ++e) {
    std::set<std::size_t> seen;
    for (int j = 0; j < 13; ++j) {
      const std::size_t i = t.next_index();
      EXPECT_TRUE(seen.insert(i).second);
      ++counts[i];
    }
  }
  for (int c : counts) EXPECT_EQ(c, 25);
}

TEST(Sampler, RandomCyclicReshufflesAcrossEpochs) {
  Sampler s(SamplingScheme::random_cyclic, 10, 3);
  std::set<std::vector<std::size_t>> perms;
  for (int e = 0; e < 5; ++e) {
    std::vector<std::size_t> p(10);
    for (auto& i : p) i = s.next_index();
    perms.insert(p);
  }
  EXPECT_GT(perms.size(), 1u);
}

TEST(Sampler, UniformIidFrequencies) {
  const std::size_t m = 100;
  const int draws = 1000000;
  Sampler s(SamplingScheme::uniform_iid, m, 2024);
  std::vector<int> counts(m, 0);
  for (int k = 0; k < draws; ++k) {
    const std::size_t i = s.next_index();
    ASSERT_LT(i, m);
    ++counts[i];
  }
  const double p = 1.0 / static_cast<double>(m);
  const double mean = draws * p;
  const double sd = std::sqrt(draws * p * (1 - p));
  double chi2 = 0.0;
  for (int c : counts) {
    EXPECT_LE(std::abs(c - mean), 5 * sd);
    chi2 += (c - mean) * (c - mean) / mean;
  }
  // 99 degrees of freedom: mean 99, sd ~14; 5 sd above the mean.
  EXPECT_LT(chi2, 99 + 5 * std::sqrt(2.0 * 99));
}

TEST(Sampler, SameSeedSameSequence) {
  for (auto scheme : {SamplingScheme::random_cyclic, SamplingScheme::uniform_iid}) {
    Sampler a(scheme, 17, 5), b(scheme, 17, 5), c(scheme, 17, 6);
    bool differs = false;
    for (int k = 0; k < 200; ++k) {
      const std::size_t x = a.next_index();
      EXPECT_EQ(x, b.next_index());
      differs = differs || x != c.next_index();
    }
    EXPECT_TRUE(differs);
  }
}

TEST(Sampler, SingleBlock) {
  for (auto scheme : {SamplingScheme::cyclic, SamplingScheme::random_cyclic, SamplingScheme::uniform_iid}) {
    Sampler s(scheme, 1, 0);
    for (int k = 0; k < 5; ++k) EXPECT_EQ(s.next_index(), 0u);
  }
  EXPECT_THROW(Sampler(SamplingScheme::cyclic, 0, 0), InvalidArgument);
}

TEST(Sampler, ParseNames) {
  EXPECT_EQ(parse_sampling_scheme("cyclic"), SamplingScheme::cyclic);
  EXPECT_EQ(parse_sampling_scheme("random_cyclic"), SamplingScheme::random_cyclic);
  EXPECT_EQ(parse_sampling_scheme("uniform_iid"), SamplingScheme::uniform_iid);
  EXPECT_EQ(parse_sampling_scheme("iid"), SamplingScheme::uniform_iid);
  EXPECT_THROW(parse_sampling_scheme("sorted"), InvalidArgument);
  EXPECT_EQ(to_string(SamplingScheme::random_cyclic), "random_cyclic");
}

TEST(Unbiasedness, HalvesOfIdentity) {
  EXPECT_EQ(unbiasedness_deviation({{0, 1}, {2, 3}}, 4), 0.0);
}

TEST(Unbiasedness, OverlapIsFlagged) {
  EXPECT_GT(unbiasedness_deviation({{0, 1}, {1, 2}}, 4), 0.0);
  EXPECT_GT(unbiasedness_deviation({{0, 1}, {2}}, 4), 0.0);
}

TEST(Unbiasedness, PaperPartition) {
  auto parts = uniform_partition(1000, 10);
  ASSERT_EQ(parts.size(), 100u);
  EXPECT_EQ(parts[3], (std::vector<std::size_t>{30, 31, 32, 33, 34, 35, 36, 37, 38, 39}));
  EXPECT_EQ(unbiasedness_deviation(parts, 1000), 0.0);
}
