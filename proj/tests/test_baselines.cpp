// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "rsort/bench.hpp"
#include "support.hpp"

using namespace rsort;
using rsort::test::cluster;

namespace {

RunResult run(std::string_view algo, int d, std::vector<std::vector<Word>> in, std::uint64_t seed = 1) {
  return run_algorithm<Word>(algo, cluster(d, seed), in, {});
}

}  // namespace

TEST(GatherMerge, Examples) {
  auto res = run_spmd<Word>(cluster(1), {{2}, {1}}, [](Comm& comm, std::vector<Word> a) {
    return gather_merge(comm, std::move(a));
  });
  EXPECT_EQ(res.outputs, (std::vector<std::vector<Word>>{{1, 2}, {}}));
  res = run_spmd<Word>(cluster(0), {{3, 1}}, [](Comm& comm, std::vector<Word> a) { return gather_merge(comm, std::move(a)); });
  EXPECT_EQ(res.outputs[0], (std::vector<Word>{1, 3}));
  const auto in = test::random_inputs(8, 9, 4, 100);
  res = run_spmd<Word>(cluster(3), in, [](Comm& comm, std::vector<Word> a) { return gather_merge(comm, std::move(a)); });
  EXPECT_EQ(res.outputs[0], test::sorted_concat(in));
}

TEST(GatherMerge, RootPathCarriesAllData) {
  const auto in = test::random_inputs(16, 32, 4);
  const auto r = run("gather", 4, in);
  EXPECT_EQ(r.ledger.words_recv[0], 15u * 32);
  EXPECT_DOUBLE_EQ(r.report.imbalance, 16.0);
}

TEST(AllGatherMergeSort, EveryPeHoldsEverything) {
  auto res = run_spmd<Word>(cluster(1), {{2}, {1}}, [](Comm& comm, std::vector<Word> a) {
    return all_gather_merge_sort(comm, std::move(a));
  });
  EXPECT_EQ(res.outputs, (std::vector<std::vector<Word>>{{1, 2}, {1, 2}}));
  const auto in = test::random_inputs(8, 5, 9, 30);
  const auto r = run("gatherall", 3, in);
  EXPECT_TRUE(r.report.sorted_ok && r.report.permutation_ok);
  for (int pe = 0; pe < 8; ++pe) EXPECT_EQ(r.ledger.words_recv[pe], 7u * 5);
}

TEST(Bitonic, Examples) {
  const auto in = test::random_inputs(4, 4, 2, 50);
  auto res = run_spmd<Word>(cluster(2), in, [](Comm& comm, std::vector<Word> a) { return bitonic_sort(comm, std::move(a)); });
  EXPECT_EQ(test::concat(res.outputs), test::sorted_concat(in));
  res = run_spmd<Word>(cluster(0), {{5, 2}}, [](Comm& comm, std::vector<Word> a) { return bitonic_sort(comm, std::move(a)); });
  EXPECT_EQ(res.outputs[0], (std::vector<Word>{2, 5}));
}

TEST(Bitonic, SparseOrUnequalInputIsUnsupported) {
  EXPECT_THROW(run("bitonic", 2, {{1}, {}, {2}, {3}}), Unsupported);
  EXPECT_THROW(run("bitonic", 2, {{1, 4}, {2}, {2}, {3}}), Unsupported);
  EXPECT_THROW(run("bitonic", 2, std::vector<std::vector<Word>>(4)), Unsupported);
}

TEST(Bitonic, VolumeFollowsLogSquared) {
  // Fixed n/p: doubling d from 3 to 6 scales the merge-split rounds by
  // d(d+1)/2, i.e. 21/6.
  auto words = [](int d) {
    return static_cast<double>(run("bitonic", d, test::random_inputs(1 << d, 64, 1)).report.words_max);
  };
  const double w3 = words(3), w6 = words(6);
  EXPECT_NEAR(w6 / w3, 21.0 / 6.0, 21.0 / 6.0 * 0.3);
  const auto r = run("bitonic", 4, test::random_inputs(16, 8, 1));
  EXPECT_EQ(r.report.startups_max, 4u + 4 * 5 / 2);
}

TEST(SampleSort, Examples) {
  const auto r = run("ssort", 1, {{9, 3, 7}, {1, 8, 2}});
  EXPECT_TRUE(r.report.sorted_ok && r.report.permutation_ok);
  const auto z = run("ssort", 4, generate_all<Word>({Instance::Zero, {64, 1}, 1}, 16));
  EXPECT_TRUE(z.report.sorted_ok && z.report.permutation_ok);
  RecordProperty("zero_imbalance", std::to_string(z.report.imbalance));
  const auto e = run("ssort", 2, std::vector<std::vector<Word>>(4));
  EXPECT_TRUE(e.report.sorted_ok && e.report.permutation_ok);
}

TEST(SampleSort, StartupsGrowLinearlyInP) {
  auto startups = [](int d) {
    const auto in = generate_all<Word>({Instance::Uniform, {(1u << 16) >> d, 1}, 1}, 1 << d);
    return static_cast<double>(run("ssort", d, in).report.startups_max);
  };
  const double s4 = startups(4), s6 = startups(6);
  EXPECT_NEAR(s6 / s4, 4.0, 4.0 * 0.3);
}

TEST(Baselines, MatchOracleOverSeeds) {
  for (int d = 1; d <= 4; ++d)
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
      const auto in = test::random_inputs(1 << d, 1 + seed % 6, seed, 64);
      const auto oracle = test::sorted_concat(in);
      for (auto algo : {"gather", "gatherall", "bitonic", "ssort"}) {
        const auto r = run_algorithm<Word>(algo, cluster(d, seed), in, {});
        EXPECT_TRUE(r.report.sorted_ok && r.report.permutation_ok) << algo << " d=" << d << " seed=" << seed;
      }
      auto res = run_spmd<Word>(cluster(d, seed), in, [](Comm& comm, std::vector<Word> a) {
        return simple_sample_sort(comm, std::move(a));
      });
      EXPECT_EQ(test::concat(res.outputs), oracle);
    }
}
