// SPDX-License-Identifier: Apache-2.0
//
// Experiment harness: runs algorithm x instance x p x n/p grids on the
// simulated cluster, verifies every run and produces CSV.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "rsort/baselines.hpp"
#include "rsort/instances.hpp"
#include "rsort/median.hpp"
#include "rsort/netsim.hpp"
#include "rsort/rams.hpp"
#include "rsort/rfis.hpp"
#include "rsort/rquick.hpp"

namespace rsort {

inline constexpr std::array<std::string_view, 7> algorithm_ids{"gather", "gatherall", "rfis", "rquick",
                                                               "rams",   "bitonic",   "ssort"};

inline void check_algorithm(std::string_view id) {
  if (std::find(algorithm_ids.begin(), algorithm_ids.end(), id) != algorithm_ids.end()) return;
  std::string valid;
  for (auto a : algorithm_ids) valid += (valid.empty() ? "" : ", ") + std::string(a);
  throw ConfigError("unknown algorithm '" + std::string(id) + "' (valid: " + valid + ")");
}

struct AlgorithmOptions {
  RQuickConfig rquick;
  RfisConfig rfis;
  AmsConfig rams;
};

struct RunResult {
  SortReport report;
  CostLedger ledger;
  std::vector<std::vector<AmsLevelTrace>> rams_trace;  ///< per PE, rams only
};

/// Runs one algorithm on one set of inputs and verifies the output.
template <WordCodable T>
RunResult run_algorithm(std::string_view algo, const ClusterConfig& cfg, const std::vector<std::vector<T>>& inputs,
                        const AlgorithmOptions& opt = {}, SchedulePolicy policy = SchedulePolicy::forward) {
  check_algorithm(algo);
  RunResult rr;
  if (algo == "rams") rr.rams_trace.resize(cfg.pes());
  auto program = [&](Comm& comm, std::vector<T> a) -> std::vector<T> {
    if (algo == "gather") return gather_merge(comm, std::move(a));
    if (algo == "gatherall") return all_gather_merge_sort(comm, std::move(a));
    if (algo == "rfis") return rfis_sort(comm, std::move(a), opt.rfis);
    if (algo == "rquick") return rquick_sort(comm, std::move(a), opt.rquick);
    if (algo == "rams") return rams_sort(comm, std::move(a), opt.rams, &rr.rams_trace[comm.rank()]);
    if (algo == "bitonic") return bitonic_sort(comm, std::move(a));
    return simple_sample_sort(comm, std::move(a));
  };
  auto res = run_spmd<T>(cfg, inputs, program, policy);
  rr.report = algo == "gatherall" ? verify_replicated(inputs, res.outputs) : verify(inputs, res.outputs);
  rr.report.attach(res.ledger, cfg.alpha, cfg.beta);
  rr.ledger = std::move(res.ledger);
  return rr;
}

// ---------------------------------------------------------------------------

struct ExperimentRow {
  std::string algo;
  std::string instance;
  int p = 1;
  std::string n_per_pe;
  std::uint64_t seed = 0;
  int rep = 0;
  bool warmup = false;
  std::string status = "ok";
  bool sorted_ok = false;
  bool permutation_ok = false;
  double imbalance = 0;
  std::uint64_t startups_max = 0;
  std::uint64_t words_max = 0;
  double modeled_time = 0;
  double wall_time = 0;
};

struct GridConfig {
  std::vector<std::string> algos;
  std::vector<std::string> instances;
  std::vector<int> log_p;
  std::vector<Rational> n_per_pe;
  int reps = 1;
  std::uint64_t seed = 1;
  double alpha = 1000.0;
  double beta = 1.0;
  bool float_keys = false;
  bool measure_wall_time = false;  ///< off keeps the CSV byte-stable
  AlgorithmOptions options;
};

inline std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

namespace detail {

inline std::string csv_safe(std::string s) {
  for (auto& c : s)
    if (c == ',' || c == '\n' || c == '"') c = ';';
  return s;
}

template <class T>
void run_cell(const GridConfig& grid, const std::string& algo, Instance inst, int d, const Rational& npp, int rep,
              ExperimentRow& row) {
  const std::uint64_t seed = grid.seed + static_cast<std::uint64_t>(rep);
  ClusterConfig cfg{d, grid.alpha, grid.beta, seed};
  const auto inputs = generate_all<T>(InstanceSpec{inst, npp, seed}, cfg.pes());
  const auto t0 = std::chrono::steady_clock::now();
  auto rr = run_algorithm<T>(algo, cfg, inputs, grid.options);
  const auto t1 = std::chrono::steady_clock::now();
  row.sorted_ok = rr.report.sorted_ok;
  row.permutation_ok = rr.report.permutation_ok;
  row.imbalance = rr.report.imbalance;
  row.startups_max = rr.report.startups_max;
  row.words_max = rr.report.words_max;
  row.modeled_time = rr.report.modeled_time;
  if (grid.measure_wall_time) row.wall_time = std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace detail

/// One row per (cell, repetition). Repetition 0 is flagged as warmup. A
/// failing cell becomes a row with a status message; the grid continues.
inline std::vector<ExperimentRow> run_experiment(const GridConfig& grid) {
  for (const auto& a : grid.algos) check_algorithm(a);
  std::vector<Instance> insts;
  for (const auto& i : grid.instances) insts.push_back(parse_instance(i));
  for (int d : grid.log_p) ClusterConfig{d}.validate();
  if (grid.reps < 1) throw ConfigError("reps must be >= 1");

  std::vector<ExperimentRow> rows;
  for (const auto& algo : grid.algos)
    for (auto inst : insts)
      for (int d : grid.log_p)
        for (const auto& npp : grid.n_per_pe)
          for (int rep = 0; rep < grid.reps; ++rep) {
            ExperimentRow row;
            row.algo = algo;
            row.instance = std::string(to_string(inst));
            row.p = 1 << d;
            row.n_per_pe = npp.str();
            row.seed = grid.seed + static_cast<std::uint64_t>(rep);
            row.rep = rep;
            row.warmup = rep == 0;
            try {
              if (grid.float_keys) detail::run_cell<double>(grid, algo, inst, d, npp, rep, row);
              else detail::run_cell<std::uint64_t>(grid, algo, inst, d, npp, rep, row);
            } catch (const Unsupported& e) {
              row.status = "unsupported: " + detail::csv_safe(e.what());
            } catch (const DeadlockError& e) {
              row.status = "deadlock: " + detail::csv_safe(e.what());
            } catch (const std::exception& e) {
              row.status = "error: " + detail::csv_safe(e.what());
            }
            rows.push_back(std::move(row));
          }
  return rows;
}

inline constexpr std::string_view csv_header =
    "algo,instance,p,n_per_pe,seed,rep,warmup,status,sorted_ok,permutation_ok,imbalance,startups_max,words_max,"
    "modeled_time,wall_time";

inline std::string csv_line(const ExperimentRow& r) {
  std::string s;
  s += r.algo + "," + r.instance + "," + std::to_string(r.p) + "," + r.n_per_pe + "," + std::to_string(r.seed) + "," +
       std::to_string(r.rep) + "," + (r.warmup ? "1" : "0") + "," + r.status + "," + (r.sorted_ok ? "1" : "0") + "," +
       (r.permutation_ok ? "1" : "0") + "," + format_g(r.imbalance) + "," + std::to_string(r.startups_max) + "," +
       std::to_string(r.words_max) + "," + format_g(r.modeled_time) + "," + format_g(r.wall_time);
  return s;
}

/// Header plus rows in lexicographic order.
inline std::string to_csv(const std::vector<ExperimentRow>& rows) {
  std::vector<std::string> lines;
  lines.reserve(rows.size());
  for (const auto& r : rows) lines.push_back(csv_line(r));
  std::sort(lines.begin(), lines.end());
  std::string out(csv_header);
  out += '\n';
  for (const auto& l : lines) out += l + '\n';
  return out;
}

struct CellSummary {
  std::string algo, instance, n_per_pe;
  int p = 1;
  int runs = 0;  ///< non-warmup repetitions
  bool all_ok = true;
  double mean_modeled_time = 0;
  double max_imbalance = 0;
};

/// Aggregates over the non-warmup repetitions of every cell.
inline std::vector<CellSummary> summarize(const std::vector<ExperimentRow>& rows) {
  std::map<std::tuple<std::string, std::string, int, std::string>, CellSummary> cells;
  for (const auto& r : rows) {
    auto& c = cells[{r.algo, r.instance, r.p, r.n_per_pe}];
    c.algo = r.algo;
    c.instance = r.instance;
    c.p = r.p;
    c.n_per_pe = r.n_per_pe;
    if (r.warmup) continue;
    ++c.runs;
    c.all_ok = c.all_ok && r.status == "ok" && r.sorted_ok && r.permutation_ok;
    c.mean_modeled_time += r.modeled_time;
    c.max_imbalance = std::max(c.max_imbalance, r.imbalance);
  }
  std::vector<CellSummary> out;
  for (auto& [key, c] : cells) {
    if (c.runs > 0) c.mean_modeled_time /= c.runs;
    out.push_back(c);
  }
  return out;
}

inline std::string summary_csv(const std::vector<CellSummary>& cells) {
  std::string out = "algo,instance,p,n_per_pe,runs,all_ok,mean_modeled_time,max_imbalance\n";
  for (const auto& c : cells)
    out += c.algo + "," + c.instance + "," + std::to_string(c.p) + "," + c.n_per_pe + "," + std::to_string(c.runs) +
           "," + (c.all_ok ? "1" : "0") + "," + format_g(c.mean_modeled_time) + "," + format_g(c.max_imbalance) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Algorithm selection by elements per PE. The default thresholds are the
// crossover points measured on a large machine; they are not derived from
// the simulator.

struct SelectorThresholds {
  double gather_max = 1.0 / 27.0;
  double rfis_max = 4.0;
  double rquick_max = 16384.0;
};

inline std::string select_algorithm(std::uint64_t n, int p, const SelectorThresholds& th = {}) {
  if (n == 0 || p < 1 || !std::has_single_bit(static_cast<unsigned>(p)))
    throw ConfigError("select_algorithm needs n > 0 and p a power of two");
  const double npp = static_cast<double>(n) / p;
  if (npp <= th.gather_max) return "gather";
  if (npp <= th.rfis_max) return "rfis";
  if (npp <= th.rquick_max) return "rquick";
  return "rams";
}

// ---------------------------------------------------------------------------
// Median approximation quality.

struct MedianErrorRow {
  std::uint64_t n = 0;
  int trials = 0;
  double max_error = 0;
  double mean_rank = 0;
  double rank_stderr = 0;
  double error_variance = 0;
  double bound = 0;       ///< 1.44 n^-0.39 with 20% slack
  bool bound_ok = false;
  bool truthful = false;  ///< mean rank within 3 standard errors of (n-1)/2
  double ternary_curve = 0;       ///< 2 n^-0.369
  double ternary_max_error = -1;  ///< measured, if requested
};

struct MedianErrorConfig {
  std::vector<std::uint64_t> ns;
  int trials = 2000;
  int leaves = 16;
  std::size_t k = median::default_k;
  std::uint64_t seed = 1;
  bool ternary = false;
};

namespace detail {

/// Same window as median::local_window for the unsorted values of `leaf`,
/// selecting only the k central order statistics.
inline median::MedianWindow<std::uint64_t> leaf_window(std::vector<std::uint64_t>& leaf, std::size_t k, bool coin) {
  const auto m = static_cast<std::int64_t>(leaf.size());
  const std::int64_t center = m / 2 + ((m % 2 == 1 && coin) ? 1 : 0);
  const std::int64_t first = center - static_cast<std::int64_t>(k / 2) + 1;  // 1-based
  const std::int64_t lo = std::max<std::int64_t>(first, 1), hi = std::min<std::int64_t>(center + k / 2, m);
  median::MedianWindow<std::uint64_t> w;
  w.k = k;
  w.neg = static_cast<std::size_t>(std::max<std::int64_t>(0, 1 - first));
  if (lo <= hi) {
    std::nth_element(leaf.begin(), leaf.begin() + (lo - 1), leaf.end());
    std::partial_sort(leaf.begin() + (lo - 1), leaf.begin() + hi, leaf.end());
    w.values.assign(leaf.begin() + (lo - 1), leaf.begin() + hi);
  }
  return w;
}

/// Median of three children at every inner node, leaves are the elements.
inline std::uint64_t ternary_tree_median(std::vector<std::uint64_t> v) {
  while (v.size() > 1) {
    std::vector<std::uint64_t> up;
    up.reserve(v.size() / 3);
    for (std::size_t i = 0; i + 2 < v.size(); i += 3) {
      std::uint64_t a = v[i], b = v[i + 1], c = v[i + 2];
      up.push_back(std::max(std::min(a, b), std::min(std::max(a, b), c)));
    }
    v.swap(up);
  }
  return v.empty() ? 0 : v[0];
}

}  // namespace detail

/// Runs the reduction tree sequentially on random permutations of 0..n-1,
/// so the returned key is its own rank.
inline std::vector<MedianErrorRow> median_error_experiment(const MedianErrorConfig& cfg) {
  if (cfg.trials < 100) throw ConfigError("median-error needs at least 100 trials");
  if (cfg.leaves < 1 || !std::has_single_bit(static_cast<unsigned>(cfg.leaves)))
    throw ConfigError("leaf count must be a power of two");
  median::check_k(cfg.k);
  std::vector<MedianErrorRow> rows;
  for (std::uint64_t n : cfg.ns) {
    if (n < 2) throw ConfigError("median-error needs n >= 2");
    MedianErrorRow row;
    row.n = n;
    row.trials = cfg.trials;
    Rng rng(derive_seed(cfg.seed, n, 0x3d));
    std::bernoulli_distribution coin(0.5);
    std::vector<std::uint64_t> perm(n);
    double sum = 0, sum_sq = 0, err_sum = 0, err_sq = 0;
    for (int t = 0; t < cfg.trials; ++t) {
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<median::MedianWindow<std::uint64_t>> windows;
      windows.reserve(cfg.leaves);
      for (int l = 0; l < cfg.leaves; ++l) {
        std::vector<std::uint64_t> leaf(perm.begin() + static_cast<std::ptrdiff_t>(l * n / cfg.leaves),
                                        perm.begin() + static_cast<std::ptrdiff_t>((l + 1) * n / cfg.leaves));
        windows.push_back(detail::leaf_window(leaf, cfg.k, coin(rng)));
      }
      const auto root = median::reduce_tree(std::move(windows));
      const auto r = static_cast<double>(*median::pick_root(root, coin(rng)));
      const double err = std::abs(r / static_cast<double>(n - 1) - 0.5);
      row.max_error = std::max(row.max_error, err);
      sum += r;
      sum_sq += r * r;
      err_sum += err;
      err_sq += err * err;
    }
    const double T = cfg.trials;
    row.mean_rank = sum / T;
    const double var_rank = std::max(0.0, (sum_sq - sum * sum / T) / (T - 1));
    row.rank_stderr = std::sqrt(var_rank / T);
    row.error_variance = std::max(0.0, (err_sq - err_sum * err_sum / T) / (T - 1));
    row.bound = 1.44 * std::pow(static_cast<double>(n), -0.39) * 1.2;
    row.bound_ok = row.max_error <= row.bound;
    row.truthful = std::abs(row.mean_rank - static_cast<double>(n - 1) / 2) <= 3 * row.rank_stderr + 1e-12;
    row.ternary_curve = 2.0 * std::pow(static_cast<double>(n), -0.369);
    if (cfg.ternary) {
      std::uint64_t n3 = 1;
      while (n3 * 3 <= n) n3 *= 3;
      std::vector<std::uint64_t> v(n3);
      for (int t = 0; t < cfg.trials; ++t) {
        std::iota(v.begin(), v.end(), 0);
        std::shuffle(v.begin(), v.end(), rng);
        const double r = static_cast<double>(detail::ternary_tree_median(v));
        row.ternary_max_error = std::max(row.ternary_max_error, std::abs(r / static_cast<double>(n3 - 1) - 0.5));
      }
    }
    rows.push_back(row);
  }
  return rows;
}

inline std::string median_error_csv(const std::vector<MedianErrorRow>& rows) {
  std::string out =
      "n,trials,max_error,mean_rank,rank_stderr,error_variance,bound,bound_ok,truthful,ternary_curve,ternary_max_error\n";
  for (const auto& r : rows)
    out += std::to_string(r.n) + "," + std::to_string(r.trials) + "," + format_g(r.max_error) + "," +
           format_g(r.mean_rank) + "," + format_g(r.rank_stderr) + "," + format_g(r.error_variance) + "," +
           format_g(r.bound) + "," + (r.bound_ok ? "1" : "0") + "," + (r.truthful ? "1" : "0") + "," +
           format_g(r.ternary_curve) + "," + format_g(r.ternary_max_error) + "\n";
  return out;
}

}  // namespace rsort
