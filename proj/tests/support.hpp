// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "rsort/netsim.hpp"

namespace rsort::test {

inline ClusterConfig cluster(int d, std::uint64_t seed = 1) {
  ClusterConfig cfg;
  cfg.dim = d;
  cfg.seed = seed;
  return cfg;
}

template <class T>
std::vector<T> concat(const std::vector<std::vector<T>>& parts) {
  std::vector<T> all;
  for (const auto& v : parts) all.insert(all.end(), v.begin(), v.end());
  return all;
}

template <class T>
std::vector<T> sorted_concat(const std::vector<std::vector<T>>& parts) {
  auto all = concat(parts);
  std::sort(all.begin(), all.end());
  return all;
}

/// `per` keys per PE drawn from [0, range).
inline std::vector<std::vector<Word>> random_inputs(int p, std::size_t per, std::uint64_t seed,
                                                    Word range = ~Word{0}) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Word> dist(0, range - 1);
  std::vector<std::vector<Word>> in(p);
  for (auto& v : in)
    for (std::size_t i = 0; i < per; ++i) v.push_back(dist(rng));
  return in;
}

inline std::vector<std::vector<Word>> sorted_each(std::vector<std::vector<Word>> in) {
  for (auto& v : in) std::sort(v.begin(), v.end());
  return in;
}

/// A permutation of 0..n-1 dealt out in blocks of n/p.
inline std::vector<std::vector<Word>> permutation_inputs(int p, std::size_t n, std::mt19937_64& rng) {
  std::vector<Word> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<Word>> in(p);
  for (std::size_t i = 0; i < n; ++i) in[i * p / n].push_back(perm[i]);
  return in;
}

}  // namespace rsort::test
