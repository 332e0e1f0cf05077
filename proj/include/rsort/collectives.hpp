// SPDX-License-Identifier: Apache-2.0
//
// Hypercube-pattern collectives. Every collective runs over a Cube, i.e. the
// set of PEs that agree on all bits outside a dimension mask. Rows, columns
// and recursive subcubes of the sorting algorithms are all Cubes.

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <iterator>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "rsort/netsim.hpp"

namespace rsort {

/// A subcube: the PEs whose ids agree with `base` outside `mask`.
class Cube {
 public:
  Cube() = default;
  Cube(PeId member, std::uint32_t mask) : base_(static_cast<std::uint32_t>(member) & ~mask), mask_(mask) {}

  static Cube full(int d) { return Cube(0, d == 0 ? 0u : ((1u << d) - 1u)); }

  /// The j-dimensional subcube containing `pe` (PEs sharing bits j..d-1).
  static Cube low(PeId pe, int j) { return Cube(pe, j == 0 ? 0u : ((1u << j) - 1u)); }

  int dim() const { return std::popcount(mask_); }
  int size() const { return 1 << dim(); }
  std::uint32_t mask() const { return mask_; }

  /// Global bit position of local dimension t.
  int dim_bit(int t) const {
    std::uint32_t m = mask_;
    for (int i = 0; i < t; ++i) m &= m - 1;
    return std::countr_zero(m);
  }

  bool contains(PeId pe) const { return (static_cast<std::uint32_t>(pe) & ~mask_) == base_; }

  /// Rank of `pe` within the cube (bits under the mask, compacted).
  int local_rank(PeId pe) const {
    int r = 0, out = 0;
    for (std::uint32_t m = mask_; m != 0; m &= m - 1, ++out) {
      const int bit = std::countr_zero(m);
      r |= ((pe >> bit) & 1) << out;
    }
    return r;
  }

  PeId member(int local) const {
    std::uint32_t id = base_;
    int in = 0;
    for (std::uint32_t m = mask_; m != 0; m &= m - 1, ++in) {
      const int bit = std::countr_zero(m);
      id |= static_cast<std::uint32_t>((local >> in) & 1) << bit;
    }
    return static_cast<PeId>(id);
  }

  PeId partner(PeId pe, int t) const { return pe ^ (1 << dim_bit(t)); }

  /// Subcube of `pe` spanned by the lowest `count` local dimensions.
  Cube lower(PeId pe, int count) const {
    std::uint32_t m = mask_, keep = 0;
    for (int i = 0; i < count; ++i) {
      keep |= m & (~m + 1);
      m &= m - 1;
    }
    return Cube(pe, keep);
  }

  /// Subcube of `pe` spanned by the highest `count` local dimensions.
  Cube upper(PeId pe, int count) const {
    const int skip = dim() - count;
    std::uint32_t m = mask_;
    for (int i = 0; i < skip; ++i) m &= m - 1;
    return Cube(pe, m);
  }

 private:
  std::uint32_t base_ = 0;
  std::uint32_t mask_ = 0;
};

enum class Direction { high_to_low, low_to_high };

/// Message tags of the collectives. Matching is FIFO per (source, tag), so a
/// tag only needs to differ between operations that may interleave.
namespace tags {
inline constexpr Tag reduce = 10;
inline constexpr Tag bcast = 11;
inline constexpr Tag gather = 12;
inline constexpr Tag route = 13;
inline constexpr Tag shuffle = 14;
inline constexpr Tag scan = 15;
inline constexpr Tag median = 16;
inline constexpr Tag exchange = 17;
}  // namespace tags

/// The hypercube communication pattern: calls step(t, partner) once per
/// cube dimension, highest first or lowest first.
template <class Step>
void hypercube_loop(const Comm& comm, const Cube& cube, Direction dir, Step&& step) {
  const int D = cube.dim();
  for (int i = 0; i < D; ++i) {
    const int t = dir == Direction::high_to_low ? D - 1 - i : i;
    step(t, cube.partner(comm.rank(), t));
  }
}

/// Exchanges `mine` with `partner` and returns what the partner sent.
template <WordCodable T>
std::vector<T> sendrecv(Comm& comm, PeId partner, std::span<const T> mine, Tag tag) {
  comm.send(partner, to_words(mine), tag);
  return comm.recv_items<T>(partner, tag);
}

/// All-reduce with an associative (not necessarily commutative) combiner:
/// combine(lower_side, higher_side) -> merged value.
template <WordCodable T, class Combine>
std::vector<T> all_reduce(Comm& comm, const Cube& cube, std::vector<T> value, Combine&& combine) {
  const PeId me = comm.rank();
  hypercube_loop(comm, cube, Direction::low_to_high, [&](int, PeId partner) {
    auto other = sendrecv<T>(comm, partner, value, tags::reduce);
    if (other.size() != value.size())
      throw ContractViolation("all_reduce: value shapes differ between PEs");
    value = partner < me ? combine(other, value) : combine(value, other);
  });
  return value;
}

template <WordCodable T, class Op>
std::vector<T> all_reduce_elementwise(Comm& comm, const Cube& cube, std::vector<T> value, Op op) {
  return all_reduce(comm, cube, std::move(value), [op](const std::vector<T>& lo, const std::vector<T>& hi) {
    std::vector<T> out(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i) out[i] = op(lo[i], hi[i]);
    return out;
  });
}

template <WordCodable T>
std::vector<T> all_reduce_sum(Comm& comm, const Cube& cube, std::vector<T> value) {
  return all_reduce_elementwise(comm, cube, std::move(value), std::plus<T>{});
}

inline Word all_reduce_sum(Comm& comm, const Cube& cube, Word value) {
  return all_reduce_sum<Word>(comm, cube, std::vector<Word>{value})[0];
}

inline Word all_reduce_max(Comm& comm, const Cube& cube, Word value) {
  return all_reduce_elementwise<Word>(comm, cube, {value}, [](Word a, Word b) { return std::max(a, b); })[0];
}

/// Binomial-tree broadcast from the cube member with local rank 0.
inline std::vector<Word> broadcast(Comm& comm, const Cube& cube, std::vector<Word> value) {
  const PeId me = comm.rank();
  const int r = cube.local_rank(me);
  const int D = cube.dim();
  // A PE receives across its lowest set bit and forwards below it.
  int t = D - 1;
  if (r != 0) {
    const int lb = std::countr_zero(static_cast<unsigned>(r));
    value = comm.recv(cube.partner(me, lb), tags::bcast);
    t = lb - 1;
  }
  for (; t >= 0; --t) comm.send(cube.partner(me, t), std::span<const Word>(value), tags::bcast);
  return value;
}

/// Exclusive prefix sum over local-rank order; also returns the cube total.
template <class V>
struct ScanResult {
  V prefix;
  V total;
};

inline ScanResult<std::vector<Word>> prefix_sum_with_total(Comm& comm, const Cube& cube,
                                                           const std::vector<Word>& value) {
  const PeId me = comm.rank();
  std::vector<Word> prefix(value.size(), 0), total = value;
  hypercube_loop(comm, cube, Direction::low_to_high, [&](int, PeId partner) {
    auto other = sendrecv<Word>(comm, partner, total, tags::scan);
    if (other.size() != total.size()) throw ContractViolation("prefix_sum: value shapes differ between PEs");
    for (std::size_t i = 0; i < total.size(); ++i) {
      if (partner < me) prefix[i] += other[i];
      total[i] += other[i];
    }
  });
  return {std::move(prefix), std::move(total)};
}

inline Word prefix_sum(Comm& comm, const Cube& cube, Word value) {
  return prefix_sum_with_total(comm, cube, {value}).prefix[0];
}

// ---------------------------------------------------------------------------
// All-gather-merge.

/// Result of a direction-tracking all-gather-merge: the elements that
/// originated at lower-ranked PEs, at this PE and at higher-ranked PEs.
/// Each bucket is sorted; among equal keys it is ordered by origin rank.
template <class T>
struct DirectedRuns {
  std::vector<T> lower;
  std::vector<T> own;
  std::vector<T> higher;

  std::size_t size() const { return lower.size() + own.size() + higher.size(); }
};

enum class Origin : std::uint8_t { lower, own, higher };

/// Visits the elements of `runs` in canonical order (key, then origin rank),
/// calling visit(element, origin, index_within_bucket).
template <class T, class Less, class Visit>
void for_each_canonical(const DirectedRuns<T>& runs, Less less, Visit&& visit) {
  std::size_t i = 0, j = 0, h = 0;
  const auto& L = runs.lower;
  const auto& O = runs.own;
  const auto& H = runs.higher;
  while (i < L.size() || j < O.size() || h < H.size()) {
    // Pick the smallest; ties prefer lower, then own, then higher.
    int pick = -1;
    const T* best = nullptr;
    if (i < L.size()) { best = &L[i]; pick = 0; }
    if (j < O.size() && (!best || less(O[j], *best))) { best = &O[j]; pick = 1; }
    if (h < H.size() && (!best || less(H[h], *best))) { best = &H[h]; pick = 2; }
    switch (pick) {
      case 0: visit(L[i], Origin::lower, i); ++i; break;
      case 1: visit(O[j], Origin::own, j); ++j; break;
      default: visit(H[h], Origin::higher, h); ++h; break;
    }
  }
}

template <class T, class Less = std::less<T>>
std::vector<T> merged(const DirectedRuns<T>& runs, Less less = {}) {
  std::vector<T> out;
  out.reserve(runs.size());
  for_each_canonical(runs, less, [&](const T& x, Origin, std::size_t) { out.push_back(x); });
  return out;
}

/// Every PE obtains the sorted union of all local sequences in the cube.
/// The local sequence must be sorted. Runs lowest dimension first so that
/// each received block lies entirely on one side of this PE.
template <WordCodable T, class Less = std::less<T>>
DirectedRuns<T> all_gather_merge_directed(Comm& comm, const Cube& cube, std::vector<T> local, Less less = {}) {
  if (!std::is_sorted(local.begin(), local.end(), less))
    throw ContractViolation("all_gather_merge: local input is not sorted");
  const PeId me = comm.rank();
  DirectedRuns<T> runs;
  runs.own = std::move(local);
  std::vector<T> all = runs.own;
  std::vector<T> tmp;
  hypercube_loop(comm, cube, Direction::low_to_high, [&](int, PeId partner) {
    auto block = sendrecv<T>(comm, partner, all, tags::gather);
    comm.charge_work(all.size() + block.size());
    auto merge_into = [&](std::vector<T>& dst, const std::vector<T>& first, const std::vector<T>& second) {
      tmp.clear();
      tmp.reserve(first.size() + second.size());
      std::merge(first.begin(), first.end(), second.begin(), second.end(), std::back_inserter(tmp), less);
      dst.swap(tmp);
    };
    if (partner < me) {
      merge_into(runs.lower, block, std::vector<T>(runs.lower));
      merge_into(all, block, std::vector<T>(all));
    } else {
      merge_into(runs.higher, std::vector<T>(runs.higher), block);
      merge_into(all, std::vector<T>(all), block);
    }
  });
  return runs;
}

template <WordCodable T, class Less = std::less<T>>
std::vector<T> all_gather_merge(Comm& comm, const Cube& cube, std::vector<T> local, Less less = {}) {
  if (!std::is_sorted(local.begin(), local.end(), less))
    throw ContractViolation("all_gather_merge: local input is not sorted");
  const PeId me = comm.rank();
  std::vector<T> all = std::move(local), tmp;
  hypercube_loop(comm, cube, Direction::low_to_high, [&](int, PeId partner) {
    auto block = sendrecv<T>(comm, partner, all, tags::gather);
    comm.charge_work(all.size() + block.size());
    tmp.clear();
    tmp.reserve(all.size() + block.size());
    if (partner < me)
      std::merge(block.begin(), block.end(), all.begin(), all.end(), std::back_inserter(tmp), less);
    else
      std::merge(all.begin(), all.end(), block.begin(), block.end(), std::back_inserter(tmp), less);
    all.swap(tmp);
  });
  return all;
}

// ---------------------------------------------------------------------------
// Routing and shuffling.

template <class T>
struct Routed {
  T value;
  Word dest;  ///< global PE id
};

/// Bit-fixing hypercube routing, highest dimension first. Each item ends up
/// at its destination PE; every PE sends and receives once per dimension.
template <WordCodable T>
std::vector<T> hypercube_route(Comm& comm, const Cube& cube, std::vector<Routed<T>> items) {
  static_assert(WordCodable<Routed<T>>);
  const PeId me = comm.rank();
  for (const auto& it : items)
    if (!cube.contains(static_cast<PeId>(it.dest))) throw ContractViolation("hypercube_route: destination outside cube");
  hypercube_loop(comm, cube, Direction::high_to_low, [&](int t, PeId partner) {
    const Word bit = Word{1} << cube.dim_bit(t);
    auto keep_end = std::stable_partition(items.begin(), items.end(), [&](const Routed<T>& x) {
      return (x.dest & bit) == (static_cast<Word>(me) & bit);
    });
    std::vector<Routed<T>> out(std::make_move_iterator(keep_end), std::make_move_iterator(items.end()));
    items.erase(keep_end, items.end());
    auto in = sendrecv<Routed<T>>(comm, partner, out, tags::route);
    items.insert(items.end(), in.begin(), in.end());
  });
  std::vector<T> values;
  values.reserve(items.size());
  for (auto& it : items) values.push_back(it.value);
  return values;
}

/// Random redistribution: in every round each PE splits its current items
/// into two random halves and exchanges one half with its partner. With an
/// odd count a fair coin decides which half gets the extra element.
template <WordCodable T>
std::vector<T> random_shuffle(Comm& comm, const Cube& cube, std::vector<T> items,
                              std::uint64_t round_tag = 0) {
  auto rng = comm.rng(phase::shuffle, round_tag);
  hypercube_loop(comm, cube, Direction::high_to_low, [&](int, PeId partner) {
    std::shuffle(items.begin(), items.end(), rng);
    std::size_t send_count = items.size() / 2;
    if (items.size() % 2 == 1 && std::bernoulli_distribution(0.5)(rng)) ++send_count;
    std::vector<T> out(items.end() - static_cast<std::ptrdiff_t>(send_count), items.end());
    items.resize(items.size() - send_count);
    auto in = sendrecv<T>(comm, partner, out, tags::shuffle);
    items.insert(items.end(), in.begin(), in.end());
  });
  return items;
}

}  // namespace rsort
