// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sstream>

#include "rsort/bench.hpp"

using namespace rsort;

namespace {

GridConfig grid(std::vector<std::string> algos, std::vector<std::string> insts, std::vector<int> log_p,
                std::vector<Rational> npp, int reps = 1) {
  GridConfig g;
  g.algos = std::move(algos);
  g.instances = std::move(insts);
  g.log_p = std::move(log_p);
  g.n_per_pe = std::move(npp);
  g.reps = reps;
  return g;
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Bench, WarmupRepetitionIsExcludedFromAggregates) {
  const auto rows = run_experiment(grid({"rquick"}, {"Uniform"}, {4}, {{256, 1}}, 6));
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_TRUE(rows[0].warmup);
  for (int i = 1; i < 6; ++i) EXPECT_FALSE(rows[i].warmup);
  const auto cells = summarize(rows);
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_EQ(cells[0].runs, 5);
  EXPECT_TRUE(cells[0].all_ok);
  double mean = 0;
  for (int i = 1; i < 6; ++i) mean += rows[i].modeled_time / 5;
  EXPECT_DOUBLE_EQ(cells[0].mean_modeled_time, mean);
}

TEST(Bench, EmptyGridGivesHeaderOnly) {
  const auto csv = to_csv(run_experiment(grid({}, {}, {}, {})));
  EXPECT_EQ(csv, std::string(csv_header) + "\n");
}

TEST(Bench, FailingCellsBecomeStatusRows) {
  const auto rows = run_experiment(grid({"bitonic", "rquick"}, {"Uniform"}, {3}, {{1, 4}}));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].status.rfind("unsupported", 0), 0u);
  EXPECT_EQ(rows[1].status, "ok");
  EXPECT_TRUE(rows[1].sorted_ok);
}

TEST(Bench, UnknownIdsAreUsageErrors) {
  try {
    run_experiment(grid({"quicksort"}, {"Uniform"}, {2}, {{1, 1}}));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("rquick"), std::string::npos);
  }
  EXPECT_THROW(run_experiment(grid({"rquick"}, {"Sorted"}, {2}, {{1, 1}})), ConfigError);
  EXPECT_THROW(run_experiment(grid({"rquick"}, {"Uniform"}, {2}, {{1, 1}}, 0)), ConfigError);
}

TEST(Bench, CsvIsByteStableAndOrdered) {
  auto g = grid({"rquick", "rams", "ssort"}, {"Zero", "Uniform"}, {2, 3}, {{1, 2}, {16, 1}}, 2);
  const auto a = to_csv(run_experiment(g));
  const auto b = to_csv(run_experiment(g));
  EXPECT_EQ(a, b);
  EXPECT_EQ(lines(a), 1u + 3 * 2 * 2 * 2 * 2);
  std::istringstream in(a);
  std::string header, prev, line;
  std::getline(in, header);
  while (std::getline(in, line)) {
    EXPECT_LE(prev, line);
    prev = line;
  }
  g.seed = 2;
  EXPECT_NE(to_csv(run_experiment(g)), a);
}

TEST(Bench, FloatKeys) {
  auto g = grid({"rquick", "rfis"}, {"Gaussian"}, {3}, {{8, 1}});
  g.float_keys = true;
  for (const auto& r : run_experiment(g)) EXPECT_TRUE(r.sorted_ok && r.permutation_ok);
}

TEST(Bench, FloatFormatting) {
  EXPECT_EQ(format_g(1.0), "1");
  EXPECT_EQ(format_g(1.23456789), "1.23457");
  EXPECT_EQ(format_g(1234567.0), "1.23457e+06");
}

TEST(Bench, ModeledTimeFollowsTheLedger) {
  const auto rows = run_experiment(grid({"rquick"}, {"Uniform"}, {3}, {{16, 1}}));
  EXPECT_DOUBLE_EQ(rows[0].modeled_time, 1000.0 * rows[0].startups_max + 1.0 * rows[0].words_max);
  EXPECT_EQ(rows[0].wall_time, 0.0);
}

TEST(Selector, Thresholds) {
  EXPECT_EQ(select_algorithm(256, 256), "rfis");
  EXPECT_EQ(select_algorithm(1024 * 256, 256), "rquick");
  EXPECT_EQ(select_algorithm(65536ull * 256, 256), "rams");
  EXPECT_EQ(select_algorithm(1, 256), "gather");
  EXPECT_EQ(select_algorithm(4 * 256, 256), "rfis");
  EXPECT_EQ(select_algorithm(16384ull * 256, 256), "rquick");
  SelectorThresholds th;
  th.rquick_max = 100;
  EXPECT_EQ(select_algorithm(1024 * 256, 256, th), "rams");
  EXPECT_THROW(select_algorithm(0, 4), ConfigError);
  EXPECT_THROW(select_algorithm(8, 3), ConfigError);
}

TEST(MedianError, TinyInputsStayInRange) {
  MedianErrorConfig cfg;
  cfg.ns = {4};
  cfg.trials = 200;
  const auto rows = median_error_experiment(cfg);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_GE(rows[0].max_error, 0.0);
  EXPECT_LE(rows[0].max_error, 0.5);
}

TEST(MedianError, BoundAndTruthfulnessOnModerateSizes) {
  MedianErrorConfig cfg;
  cfg.ns = {1 << 8, 1 << 12};
  cfg.ternary = true;
  for (const auto& r : median_error_experiment(cfg)) {
    EXPECT_TRUE(r.bound_ok) << r.n << ": " << r.max_error << " > " << r.bound;
    EXPECT_TRUE(r.truthful) << r.n;
    EXPECT_NEAR(r.ternary_curve, 2.0 * std::pow(static_cast<double>(r.n), -0.369), 1e-12);
    EXPECT_GE(r.ternary_max_error, 0.0);
  }
  const auto csv = median_error_csv(median_error_experiment(cfg));
  EXPECT_EQ(lines(csv), 3u);
}

TEST(MedianError, InvalidConfigurations) {
  MedianErrorConfig cfg;
  cfg.ns = {100};
  cfg.trials = 10;
  EXPECT_THROW(median_error_experiment(cfg), ConfigError);
  cfg.trials = 100;
  cfg.leaves = 3;
  EXPECT_THROW(median_error_experiment(cfg), ConfigError);
}
