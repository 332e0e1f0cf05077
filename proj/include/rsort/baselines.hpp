// SPDX-License-Identifier: Apache-2.0
//
// Comparison algorithms: gather-merge, all-gather-merge, bitonic sort and a
// single-level samplesort with p-1 splitters.

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "rsort/collectives.hpp"
#include "rsort/exchange.hpp"
#include "rsort/netsim.hpp"

namespace rsort {

namespace tags {
inline constexpr Tag bitonic = 30;
}  // namespace tags

/// Binomial-tree gather with merging towards `cube` member 0. Returns the
/// sorted union there and an empty list elsewhere. `a` must be sorted.
template <WordCodable T>
std::vector<T> gather_merge_to_root(Comm& comm, const Cube& cube, std::vector<T> a) {
  const PeId me = comm.rank();
  const int r = cube.local_rank(me);
  std::vector<T> tmp;
  for (int t = 0; t < cube.dim(); ++t) {
    const PeId partner = cube.partner(me, t);
    if ((r >> t) & 1) {
      comm.send(partner, to_words<T>(a), tags::gather);
      return {};
    }
    auto in = comm.recv_items<T>(partner, tags::gather);
    tmp.clear();
    tmp.reserve(a.size() + in.size());
    std::merge(a.begin(), a.end(), in.begin(), in.end(), std::back_inserter(tmp));
    comm.charge_work(tmp.size());
    a.swap(tmp);
  }
  return a;
}

template <WordCodable T>
std::vector<T> gather_merge(Comm& comm, std::vector<T> a) {
  std::sort(a.begin(), a.end());
  comm.charge_work(sort_cost(a.size()));
  return gather_merge_to_root(comm, Cube::full(comm.dim()), std::move(a));
}

/// Every PE ends up with the complete sorted input.
template <WordCodable T>
std::vector<T> all_gather_merge_sort(Comm& comm, std::vector<T> a) {
  std::sort(a.begin(), a.end());
  comm.charge_work(sort_cost(a.size()));
  return all_gather_merge(comm, Cube::full(comm.dim()), std::move(a));
}

/// Block bitonic sort with merge-split steps. Needs the same nonzero number
/// of elements on every PE.
template <WordCodable T>
std::vector<T> bitonic_sort(Comm& comm, std::vector<T> a) {
  const PeId me = comm.rank();
  const int d = comm.dim();
  const Cube all = Cube::full(d);
  const Word m = a.size();
  const auto lo_hi = all_reduce_elementwise<Word>(comm, all, {m, ~m}, [](Word x, Word y) { return std::max(x, y); });
  const Word max_size = lo_hi[0], min_size = ~lo_hi[1];
  if (min_size != max_size || min_size == 0)
    throw Unsupported("bitonic sort needs the same nonzero number of elements on every PE");

  std::sort(a.begin(), a.end());
  comm.charge_work(sort_cost(a.size()));
  std::vector<T> merged_buf;
  for (int i = 0; i < d; ++i) {
    const bool ascending = ((me >> (i + 1)) & 1) == 0;
    for (int j = i; j >= 0; --j) {
      const PeId partner = me ^ (1 << j);
      auto in = sendrecv<T>(comm, partner, a, tags::bitonic);
      merged_buf.clear();
      merged_buf.reserve(a.size() + in.size());
      std::merge(a.begin(), a.end(), in.begin(), in.end(), std::back_inserter(merged_buf));
      comm.charge_work(a.size());
      const bool keep_low = (((me >> j) & 1) == 0) == ascending;
      if (keep_low) a.assign(merged_buf.begin(), merged_buf.begin() + static_cast<std::ptrdiff_t>(m));
      else a.assign(merged_buf.end() - static_cast<std::ptrdiff_t>(m), merged_buf.end());
    }
  }
  return a;
}

/// Samplesort with 16 log p random samples per PE, splitter selection on
/// PE 0 and direct delivery to all p buckets. Equal keys are not split.
template <WordCodable T>
std::vector<T> simple_sample_sort(Comm& comm, std::vector<T> a) {
  const PeId me = comm.rank();
  const int d = comm.dim();
  const int p = comm.size();
  const Cube all = Cube::full(d);
  std::sort(a.begin(), a.end());
  comm.charge_work(sort_cost(a.size()));
  if (p == 1) return a;

  auto rng = comm.rng(phase::ssort);
  std::vector<T> samples;
  if (!a.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, a.size() - 1);
    for (int s = 0; s < 16 * d; ++s) samples.push_back(a[pick(rng)]);
    std::sort(samples.begin(), samples.end());
  }
  samples = gather_merge_to_root(comm, all, std::move(samples));
  std::vector<T> splitters;
  if (me == 0 && !samples.empty())
    for (int i = 1; i < p; ++i) splitters.push_back(samples[i * samples.size() / p]);
  splitters = from_words<T>(broadcast(comm, all, to_words<T>(splitters)));

  std::vector<Outgoing> out;
  std::size_t begin = 0;
  for (int dest = 0; dest < p; ++dest) {
    const std::size_t end =
        dest + 1 < p && !splitters.empty() ? static_cast<std::size_t>(std::lower_bound(a.begin() + begin, a.end(), splitters[dest]) - a.begin())
                     : a.size();
    if (end > begin) out.push_back({dest, to_words(std::span<const T>(a).subspan(begin, end - begin))});
    begin = end;
  }
  comm.charge_work(static_cast<std::uint64_t>(p) * std::bit_width(a.size() + 1));
  auto in = sparse_exchange(comm, all, std::move(out));
  std::vector<std::vector<T>> runs;
  for (auto& msg : in) runs.push_back(from_words<T>(msg.payload));
  return merge_runs(std::move(runs));
}

}  // namespace rsort
