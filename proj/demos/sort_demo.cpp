// SPDX-License-Identifier: Apache-2.0
//
// Sorts one instance with every algorithm on a 64-PE simulated hypercube and
// prints the cost ledger of each run.

#include <cstdio>
#include <string>

#include "rsort/bench.hpp"

int main(int argc, char** argv) {
  const std::string instance = argc > 1 ? argv[1] : "Uniform";
  const rsort::Rational npp = rsort::parse_rational(argc > 2 ? argv[2] : "256");
  const int d = 6;
  rsort::ClusterConfig cfg;
  cfg.dim = d;
  cfg.seed = 7;
  const auto inputs = rsort::generate_all<rsort::Word>({rsort::parse_instance(instance), npp, cfg.seed}, 1 << d);
  std::printf("%-10s %10s %12s %10s %9s %s\n", "algo", "startups", "words", "time", "imbal", "sorted");
  for (const char* algo : {"gather", "gatherall", "rfis", "rquick", "rams", "bitonic", "ssort"}) {
    try {
      const auto r = rsort::run_algorithm<rsort::Word>(algo, cfg, inputs).report;
      std::printf("%-10s %10llu %12llu %10.0f %9.3f %s\n", algo, static_cast<unsigned long long>(r.startups_max),
                  static_cast<unsigned long long>(r.words_max), r.modeled_time, r.imbalance,
                  r.sorted_ok && r.permutation_ok ? "yes" : "NO");
    } catch (const rsort::Unsupported& e) {
      std::printf("%-10s unsupported: %s\n", algo, e.what());
    }
  }
}
