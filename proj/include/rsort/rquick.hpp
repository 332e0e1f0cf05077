// SPDX-License-Identifier: Apache-2.0
//
// Robust hypercube quicksort.
//
// The input is randomly shuffled, sorted locally and then split recursively
// along the hypercube dimensions, highest first. Splitters come from the
// single-reduction approximate median; copies of the splitter are divided
// between the two halves so that every local split is as even as possible,
// which keeps duplicate-heavy inputs balanced without any extra data.

#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "rsort/collectives.hpp"
#include "rsort/median.hpp"
#include "rsort/netsim.hpp"

namespace rsort {

struct RQuickConfig {
  bool shuffle = true;
  bool tie_break = true;
  std::size_t k = median::default_k;
};

/// Number of elements of sorted `a` that go to the low side for splitter s.
/// With tie-breaking, x of the m copies of s join the low side, x chosen so
/// that |L| is closest to |a|/2 (ties toward the smaller |L|). Without it,
/// L is just the keys below s.
template <class T>
std::size_t split_point(std::span<const T> a, const T& s, bool tie_break = true) {
  const auto lo = static_cast<std::size_t>(std::lower_bound(a.begin(), a.end(), s) - a.begin());
  if (!tie_break) return lo;
  const auto hi = static_cast<std::size_t>(std::upper_bound(a.begin() + lo, a.end(), s) - a.begin());
  const std::size_t half = a.size() / 2;
  return std::clamp(half, lo, hi);
}

template <class T>
std::pair<std::vector<T>, std::vector<T>> split_with_ties(std::span<const T> a, const T& s) {
  const std::size_t x = split_point(a, s);
  return {std::vector<T>(a.begin(), a.begin() + x), std::vector<T>(a.begin() + x, a.end())};
}

template <WordCodable T>
std::vector<T> rquick_sort(Comm& comm, std::vector<T> a, const RQuickConfig& cfg = {}) {
  const PeId me = comm.rank();
  const int d = comm.dim();
  if (cfg.shuffle) a = random_shuffle(comm, Cube::full(d), std::move(a));
  std::sort(a.begin(), a.end());
  comm.charge_work(sort_cost(a.size()));

  std::vector<T> merged_buf;
  for (int j = d - 1; j >= 0; --j) {
    const Cube cube = Cube::low(me, j + 1);
    const auto s = median::approx_median<T>(comm, cube, a, cfg.k, static_cast<std::uint64_t>(j));
    if (!s) return a;  // no elements in this subcube

    const std::size_t x = split_point<T>(a, *s, cfg.tie_break);
    const PeId partner = me ^ (1 << j);
    const bool low_side = ((me >> j) & 1) == 0;
    std::span<const T> keep = low_side ? std::span<const T>(a).first(x) : std::span<const T>(a).subspan(x);
    std::span<const T> give = low_side ? std::span<const T>(a).subspan(x) : std::span<const T>(a).first(x);
    comm.send(partner, to_words(give), tags::exchange);
    auto in = comm.recv_items<T>(partner, tags::exchange);

    merged_buf.clear();
    merged_buf.reserve(keep.size() + in.size());
    std::merge(keep.begin(), keep.end(), in.begin(), in.end(), std::back_inserter(merged_buf));
    comm.charge_work(merged_buf.size());
    a.swap(merged_buf);
  }
  return a;
}

}  // namespace rsort
