// SPDX-License-Identifier: Apache-2.0
//
// Approximate median selection with a single binary-tree reduction.
//
// Every PE contributes the k elements around its local median. Inner tree
// nodes merge two windows and keep the k center candidates; the root picks
// one of the two middle candidates by a coin flip. Positions that fall off
// either end of the data are sentinels that compare below/above every key.

#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "rsort/collectives.hpp"
#include "rsort/netsim.hpp"

namespace rsort::median {

inline constexpr std::size_t default_k = 16;

/// A window of k candidates: `neg` leading -inf sentinels, the sorted real
/// `values`, and k - neg - values.size() trailing +inf sentinels.
template <class T>
struct MedianWindow {
  std::size_t k = 0;
  std::size_t neg = 0;
  std::vector<T> values;

  std::size_t pos() const { return k - neg - values.size(); }
  bool all_sentinels() const { return values.empty(); }

  bool operator==(const MedianWindow&) const = default;
};

/// Candidate i (0-based) of a window, or nullopt for a sentinel.
template <class T>
std::optional<T> candidate(const MedianWindow<T>& w, std::size_t i) {
  if (i < w.neg || i >= w.neg + w.values.size()) return std::nullopt;
  return w.values[i - w.neg];
}

inline void check_k(std::size_t k) {
  if (k < 2 || k % 2 != 0) throw ContractViolation("median window size k must be even and >= 2");
}

/// The k entries centered on the median of sorted `a`. For odd lengths
/// `coin` selects the ceil-centered window, otherwise the floor-centered one.
template <class T>
MedianWindow<T> local_window(std::span<const T> a, std::size_t k, bool coin) {
  check_k(k);
  const auto m = static_cast<std::int64_t>(a.size());
  std::int64_t center = m / 2;
  if (m % 2 == 1 && coin) center += 1;
  const auto half = static_cast<std::int64_t>(k / 2);
  // 1-based positions center-half+1 .. center+half
  const std::int64_t first = center - half + 1;
  const std::int64_t last = center + half;
  MedianWindow<T> w;
  w.k = k;
  w.neg = static_cast<std::size_t>(std::max<std::int64_t>(0, 1 - first));
  const std::int64_t lo = std::max<std::int64_t>(first, 1);
  const std::int64_t hi = std::min<std::int64_t>(last, m);
  if (lo <= hi) w.values.assign(a.begin() + (lo - 1), a.begin() + hi);
  return w;
}

/// Merges two windows of the same k and re-centers to k candidates. The
/// merged sequence always has even length 2k, so no coin is involved.
template <class T>
MedianWindow<T> merge_windows(const MedianWindow<T>& w1, const MedianWindow<T>& w2) {
  if (w1.k != w2.k) throw ContractViolation("merge_windows: windows of different k");
  const std::size_t k = w1.k;
  std::vector<T> vals;
  vals.reserve(w1.values.size() + w2.values.size());
  std::merge(w1.values.begin(), w1.values.end(), w2.values.begin(), w2.values.end(), std::back_inserter(vals));
  const std::size_t neg = w1.neg + w2.neg;
  // keep merged positions [k/2, 3k/2)
  const std::size_t first = k / 2, last = first + k;
  MedianWindow<T> out;
  out.k = k;
  out.neg = neg > first ? std::min(neg, last) - first : 0;
  const std::size_t lo = std::max(first, neg), hi = std::min(last, neg + vals.size());
  if (lo < hi) out.values.assign(vals.begin() + (lo - neg), vals.begin() + (hi - neg));
  return out;
}

/// Root selection: candidate k/2 or k/2+1 (1-based) by coin. If the chosen
/// slot is a sentinel the nearest real candidate is returned instead; an
/// all-sentinel window means the reduced data was empty.
template <class T>
std::optional<T> pick_root(const MedianWindow<T>& w, bool coin) {
  if (w.values.empty()) return std::nullopt;
  const std::size_t slot = w.k / 2 - 1 + (coin ? 1 : 0);
  if (slot < w.neg) return w.values.front();
  if (slot >= w.neg + w.values.size()) return w.values.back();
  return w.values[slot - w.neg];
}

/// Wire format: k raw values when the window holds no sentinel, otherwise
/// a header word (neg | pos << 32) followed by the real values. A header
/// form that would be exactly k words long gets one padding word so the
/// two forms stay distinguishable by length.
template <class T>
std::vector<Word> encode(const MedianWindow<T>& w) {
  if (w.values.size() == w.k) return to_words<T>(w.values);
  std::vector<Word> out;
  out.reserve(w.values.size() + 2);
  out.push_back(static_cast<Word>(w.neg) | (static_cast<Word>(w.pos()) << 32));
  auto vals = to_words<T>(w.values);
  out.insert(out.end(), vals.begin(), vals.end());
  if (out.size() == w.k) out.push_back(0);
  return out;
}

template <class T>
MedianWindow<T> decode(std::span<const Word> msg, std::size_t k) {
  MedianWindow<T> w;
  w.k = k;
  if (msg.size() == k) {
    w.values = from_words<T>(msg);
    return w;
  }
  if (msg.empty() || msg.size() > k + 1) throw ContractViolation("median window message is malformed");
  if (msg.size() == k + 1) msg = msg.first(k);
  w.neg = static_cast<std::size_t>(msg[0] & 0xffffffffu);
  w.values = from_words<T>(msg.subspan(1));
  if (w.neg + w.values.size() > k) throw ContractViolation("median window message is malformed");
  return w;
}

/// Sequential evaluation of the reduction tree over `leaves` (one local
/// window per leaf, in PE order), using the same binomial tree as the
/// distributed version. Leaf count must be a power of two.
template <class T>
MedianWindow<T> reduce_tree(std::vector<MedianWindow<T>> leaves) {
  if (leaves.empty() || !std::has_single_bit(leaves.size()))
    throw ContractViolation("reduce_tree needs a power-of-two number of leaves");
  for (std::size_t stride = 1; stride < leaves.size(); stride *= 2)
    for (std::size_t i = 0; i + stride < leaves.size(); i += 2 * stride)
      leaves[i] = merge_windows(leaves[i], leaves[i + stride]);
  return std::move(leaves[0]);
}

/// Distributed approximate median over `cube`. `a` must be sorted. Returns
/// the same key on every PE of the cube, or nullopt if the cube holds no
/// element. `round` keys the coin flips so repeated calls use fresh coins.
template <WordCodable T>
std::optional<T> approx_median(Comm& comm, const Cube& cube, std::span<const T> a,
                               std::size_t k = default_k, std::uint64_t round = 0) {
  check_k(k);
  auto rng = comm.rng(phase::median, round);
  std::bernoulli_distribution coin(0.5);
  const PeId me = comm.rank();
  const int r = cube.local_rank(me);
  const int D = cube.dim();

  auto window = local_window(a, k, coin(rng));
  // Reduce towards local rank 0: in round t a PE with bit t set hands its
  // window to the partner and drops out.
  int t = 0;
  for (; t < D; ++t) {
    const PeId partner = cube.partner(me, t);
    if ((r >> t) & 1) {
      comm.send(partner, encode(window), tags::median);
      break;
    }
    auto msg = comm.recv(partner, tags::median);
    window = merge_windows(window, decode<T>(msg, k));
    comm.charge_work(2 * k);
  }

  std::vector<Word> result;
  if (r == 0) {
    const bool root_coin = coin(rng);
    if (auto s = pick_root(window, root_coin)) result = to_words<T>(std::span<const T>(&*s, 1));
  }
  // Broadcast back down the same tree.
  result = broadcast(comm, cube, std::move(result));
  if (result.empty()) return std::nullopt;
  return from_words<T>(result)[0];
}

}  // namespace rsort::median
