// SPDX-License-Identifier: Apache-2.0
//
// Robust fast work-inefficient sorting.
//
// The PEs form a grid. Every PE all-gather-merges its row and its column and
// ranks the row elements among the column elements; summing these counts
// along the row yields global ranks. Duplicates are ranked as if each
// element were the tuple (key, row, column, local position); the gathers
// only remember whether an element came from a lower PE, this PE or a
// higher PE, which is enough to evaluate that order.

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rsort/collectives.hpp"
#include "rsort/netsim.hpp"

namespace rsort {

/// Grid over a cube: a row spans the low floor(D/2) dimensions, a column the
/// remaining ones, so pe = r * cols + c for the full cube.
struct Grid {
  Cube row;
  Cube col;

  static Grid of(const Cube& cube, PeId pe) {
    const int D = cube.dim();
    return {cube.lower(pe, D / 2), cube.upper(pe, D - D / 2)};
  }

  int rows() const { return col.size(); }
  int cols() const { return row.size(); }
};

/// Row labels: from the left, here, from the right. Column labels: from
/// above, here, from below. Left and above mean lower PE ids.
enum class RowLabel : std::uint8_t { left, here, right };
enum class ColLabel : std::uint8_t { above, here, below };

/// Whether row element a (label ca, local position i) is greater than column
/// element b (label rb, local position j) on a PE. Positions only matter
/// when both labels are `here`.
template <class T, class Less = std::less<T>>
bool tie_compare(const T& a, RowLabel ca, std::size_t i, const T& b, ColLabel rb, std::size_t j, Less less = {}) {
  switch (rb) {
    case ColLabel::above:
      return !less(a, b);
    case ColLabel::below:
      return less(b, a);
    case ColLabel::here:
      switch (ca) {
        case RowLabel::left: return less(b, a);
        case RowLabel::here: return i > j;
        case RowLabel::right: return !less(a, b);
      }
  }
  return false;
}

/// Ranks of the row elements, in canonical row order.
template <class T>
struct FirResult {
  std::vector<T> keys;        ///< row elements, sorted
  std::vector<Origin> origin; ///< where each row element came from
  std::vector<Word> rank;     ///< global rank, unique in 0..n-1
  Word n = 0;
};

/// Computes global ranks of all elements in `cube`. `a` is sorted locally
/// by `less` on entry. Every PE ends up with the ranks of all elements of
/// its row; each column jointly holds every element exactly once.
template <WordCodable T, class Less = std::less<T>>
FirResult<T> fir_rank(Comm& comm, const Cube& cube, std::vector<T> a, Less less = {}) {
  const Grid grid = Grid::of(cube, comm.rank());
  std::sort(a.begin(), a.end(), less);
  comm.charge_work(sort_cost(a.size()));

  auto row = all_gather_merge_directed(comm, grid.row, a, less);
  auto col = all_gather_merge_directed(comm, grid.col, std::move(a), less);
  const std::vector<T>& here = col.own;

  // For every row element, count the column elements below it.
  FirResult<T> res;
  res.keys.reserve(row.size());
  res.origin.reserve(row.size());
  std::vector<Word> counts;
  counts.reserve(row.size() + 1);
  auto lb = [&](const std::vector<T>& v, const T& x) {
    return static_cast<Word>(std::lower_bound(v.begin(), v.end(), x, less) - v.begin());
  };
  auto ub = [&](const std::vector<T>& v, const T& x) {
    return static_cast<Word>(std::upper_bound(v.begin(), v.end(), x, less) - v.begin());
  };
  for_each_canonical(row, less, [&](const T& x, Origin o, std::size_t i) {
    Word c = ub(col.lower, x) + lb(col.higher, x);
    switch (o) {
      case Origin::lower: c += lb(here, x); break;
      case Origin::own: c += static_cast<Word>(i); break;
      case Origin::higher: c += ub(here, x); break;
    }
    res.keys.push_back(x);
    res.origin.push_back(o);
    counts.push_back(c);
  });
  const std::size_t logc = std::bit_width(col.size() + 1);
  comm.charge_work(row.size() * logc * 3);

  counts.push_back(col.size());
  counts = all_reduce_sum<Word>(comm, grid.row, std::move(counts));
  res.n = counts.back();
  counts.pop_back();
  res.rank = std::move(counts);
  return res;
}

/// PE (local rank within the cube) that receives rank i of n.
inline int rank_destination(Word i, Word n, int p) {
  return static_cast<int>(static_cast<unsigned __int128>(i) * static_cast<unsigned>(p) / n);
}

/// Number of ranks that map to local PE q.
inline Word rank_share(int q, Word n, int p) {
  auto first = [&](int x) {
    return static_cast<Word>((static_cast<unsigned __int128>(x) * n + static_cast<unsigned>(p) - 1) / static_cast<unsigned>(p));
  };
  return first(q + 1) - first(q);
}

struct RfisConfig {
  /// Deliver by direct messages when n/p is below this; hypercube routing
  /// otherwise. Negative: log2(p), the default crossover.
  double direct_threshold = -1.0;
};

/// Moves every ranked element to PE floor(rank * p / n) of the cube. Each
/// PE keeps only the elements destined for its own column and the column
/// routes them to the right row.
template <WordCodable T>
std::vector<T> deliver_by_rank(Comm& comm, const Cube& cube, const FirResult<T>& ranked,
                               const RfisConfig& cfg = {}) {
  const PeId me = comm.rank();
  const Grid grid = Grid::of(cube, me);
  const int P = cube.size();
  const Word n = ranked.n;
  if (n == 0) return {};

  std::vector<Routed<T>> mine;
  for (std::size_t q = 0; q < ranked.keys.size(); ++q) {
    if (ranked.rank[q] >= n) throw ContractViolation("deliver_by_rank: rank out of range");
    const PeId dest = cube.member(rank_destination(ranked.rank[q], n, P));
    if (grid.col.contains(dest)) mine.push_back({ranked.keys[q], static_cast<Word>(dest)});
  }

  const double threshold = cfg.direct_threshold < 0 ? static_cast<double>(cube.dim()) : cfg.direct_threshold;
  std::vector<T> out;
  if (static_cast<double>(n) / P < threshold) {
    // One message per destination; receivers know their share.
    std::stable_sort(mine.begin(), mine.end(), [](const auto& x, const auto& y) { return x.dest < y.dest; });
    const Word expect = rank_share(cube.local_rank(me), n, P);
    for (std::size_t s = 0; s < mine.size();) {
      std::size_t e = s;
      std::vector<T> batch;
      while (e < mine.size() && mine[e].dest == mine[s].dest) batch.push_back(mine[e++].value);
      if (static_cast<PeId>(mine[s].dest) == me)
        out.insert(out.end(), batch.begin(), batch.end());
      else
        comm.send(static_cast<PeId>(mine[s].dest), to_words<T>(batch), tags::route);
      s = e;
    }
    while (out.size() < expect) {
      auto msg = comm.recv_any(tags::route);
      auto items = from_words<T>(msg.payload);
      out.insert(out.end(), items.begin(), items.end());
    }
    if (out.size() != expect) throw ContractViolation("deliver_by_rank: ranks are not unique");
  } else {
    out = hypercube_route(comm, grid.col, std::move(mine));
    if (out.size() != rank_share(cube.local_rank(me), n, P))
      throw ContractViolation("deliver_by_rank: ranks are not unique");
  }
  std::sort(out.begin(), out.end());
  comm.charge_work(sort_cost(out.size()));
  return out;
}

template <WordCodable T>
std::vector<T> rfis_sort(Comm& comm, std::vector<T> a, const RfisConfig& cfg = {}) {
  const Cube cube = Cube::full(comm.dim());
  auto ranked = fir_rank(comm, cube, std::move(a));
  return deliver_by_rank(comm, cube, ranked, cfg);
}

}  // namespace rsort
