// SPDX-License-Identifier: Apache-2.0
//
// sortbench: run sorting experiments on the simulated cluster.
//
//   sortbench run --algo rquick,rams --instance Uniform --log-p 4,6 --n-per-pe 1/27,1,1024 --out grid.csv
//   sortbench median-error --n 256,4096 --trials 2000 --out median.csv
//   sortbench select --n 1048576 --log-p 8

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rsort/bench.hpp"

namespace {

void write_out(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw rsort::ConfigError("cannot open " + path);
  f << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed sorting on a simulated hypercube"};
  app.require_subcommand(1);

  rsort::GridConfig grid;
  std::vector<std::string> npp_text;
  std::string out = "-", summary_out;
  std::string dma = "auto";
  bool no_shuffle = false, no_tie_break = false;
  auto* run = app.add_subcommand("run", "Run an algorithm x instance x p x n/p grid");
  run->add_option("--algo", grid.algos, "Algorithms: gather, gatherall, rfis, rquick, rams, bitonic, ssort")
      ->delimiter(',')
      ->required();
  run->add_option("--instance", grid.instances, "Input instances")->delimiter(',')->required();
  run->add_option("--log-p", grid.log_p, "Hypercube dimensions")->delimiter(',')->required();
  run->add_option("--n-per-pe", npp_text, "Elements per PE, e.g. 1/27,1,2^10")->delimiter(',')->required();
  run->add_option("--reps", grid.reps, "Repetitions per cell; the first one is warmup")->capture_default_str();
  run->add_option("--seed", grid.seed, "Master seed")->capture_default_str();
  run->add_option("--alpha", grid.alpha, "Message startup cost")->capture_default_str();
  run->add_option("--beta", grid.beta, "Cost per word")->capture_default_str();
  run->add_option("--out", out, "CSV output file ('-' for stdout)");
  run->add_option("--summary", summary_out, "Write per-cell aggregates over non-warmup runs");
  run->add_flag("--float", grid.float_keys, "Use double keys instead of 64-bit integers");
  run->add_flag("--wall-time", grid.measure_wall_time, "Record wall-clock time (makes the CSV non-reproducible)");
  run->add_option("--median-k", grid.options.rquick.k, "rquick: median window size")->capture_default_str();
  run->add_flag("--no-shuffle", no_shuffle, "rquick: skip the initial shuffle");
  run->add_flag("--no-tie-break", no_tie_break, "rquick, rams: disable tie-breaking");
  run->add_option("--rfis-direct-below", grid.options.rfis.direct_threshold,
                  "rfis: deliver by direct messages below this n/p (default log p)");
  run->add_option("--ams-levels", grid.options.rams.levels, "rams: recursion levels")->capture_default_str();
  run->add_option("--ams-epsilon", grid.options.rams.epsilon, "rams: target imbalance")->capture_default_str();
  run->add_option("--ams-k", grid.options.rams.arities, "rams: log2 of k per level, e.g. 3,3,2")->delimiter(',');
  run->add_option("--ams-dma", dma, "rams: message assignment auto|on|off")
      ->check(CLI::IsMember({"auto", "on", "off"}))
      ->capture_default_str();

  rsort::MedianErrorConfig med;
  std::string med_out = "-";
  auto* merr = app.add_subcommand("median-error", "Rank error of the approximate median");
  merr->add_option("--n", med.ns, "Input sizes")->delimiter(',')->required();
  merr->add_option("--trials", med.trials, "Trials per size")->capture_default_str();
  merr->add_option("--leaves", med.leaves, "Leaves of the reduction tree")->capture_default_str();
  merr->add_option("--k", med.k, "Window size")->capture_default_str();
  merr->add_option("--seed", med.seed, "Seed")->capture_default_str();
  merr->add_flag("--ternary", med.ternary, "Also measure the ternary-tree estimator");
  merr->add_option("--out", med_out, "CSV output file ('-' for stdout)");

  std::uint64_t sel_n = 0;
  int sel_d = 0;
  rsort::SelectorThresholds th;
  auto* sel = app.add_subcommand("select", "Pick an algorithm for n elements on 2^d PEs");
  sel->add_option("--n", sel_n, "Total elements")->required();
  sel->add_option("--log-p", sel_d, "Hypercube dimension")->required();
  sel->add_option("--gather-max", th.gather_max, "Largest n/p for gather")->capture_default_str();
  sel->add_option("--rfis-max", th.rfis_max, "Largest n/p for rfis")->capture_default_str();
  sel->add_option("--rquick-max", th.rquick_max, "Largest n/p for rquick")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      for (const auto& t : npp_text) grid.n_per_pe.push_back(rsort::parse_rational(t));
      grid.options.rquick.shuffle = !no_shuffle;
      grid.options.rquick.tie_break = !no_tie_break;
      grid.options.rams.tie_break = !no_tie_break;
      grid.options.rams.dma = dma == "on" ? rsort::DmaMode::on : dma == "off" ? rsort::DmaMode::off : rsort::DmaMode::automatic;
      const auto rows = rsort::run_experiment(grid);
      write_out(out, rsort::to_csv(rows));
      if (!summary_out.empty()) write_out(summary_out, rsort::summary_csv(rsort::summarize(rows)));
    } else if (*merr) {
      write_out(med_out, rsort::median_error_csv(rsort::median_error_experiment(med)));
    } else if (*sel) {
      std::cout << rsort::select_algorithm(sel_n, 1 << sel_d, th) << "\n";
    }
  } catch (const rsort::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
