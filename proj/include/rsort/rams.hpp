// SPDX-License-Identifier: Apache-2.0
//
// Robust multi-level samplesort.
//
// Each level splits the current cube into k groups. Random samples, tagged
// with their (PE, local index) position, are ranked with fir_rank and b*k-1
// splitters are picked from them. A classifier in the style of super scalar
// samplesort assigns every element to a bucket, comparing positions when
// keys equal the splitter key. Contiguous bucket ranges are packed into the
// k groups, and within a group the data is spread evenly over the members.
// When many small pieces would converge on one PE, a deterministic message
// assignment rewrites the plan so that every PE exchanges O(k) messages.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "rsort/collectives.hpp"
#include "rsort/exchange.hpp"
#include "rsort/netsim.hpp"
#include "rsort/rfis.hpp"

namespace rsort {

namespace tags {
inline constexpr Tag dma_descriptor = 20;
inline constexpr Tag dma_address = 21;
}  // namespace tags

enum class DmaMode { automatic, on, off };

struct AmsConfig {
  int levels = 1;
  double epsilon = 0.2;
  int b = 0;                   ///< splitters per group; 0 derives it from epsilon and levels
  double sample_factor = 2;    ///< samples per bucket
  bool tie_break = true;
  DmaMode dma = DmaMode::automatic;
  int dma_factor = 4;          ///< automatic mode uses DMA if some PE would receive > dma_factor * k messages
  std::vector<int> arities;    ///< log2 of k per level; empty: split d evenly over `levels`
};

/// ceil(2 / ((1+eps)^(1/l) - 1)).
inline int default_oversampling(double epsilon, int levels) {
  if (!(epsilon > 0) || levels < 1) throw ConfigError("epsilon must be positive and levels >= 1");
  const double b = 2.0 / (std::pow(1.0 + epsilon, 1.0 / levels) - 1.0);
  return std::max(1, static_cast<int>(std::ceil(b - 1e-9)));
}

/// Splits d into `levels` chunks that differ by at most one, larger first.
/// Chunks of size zero are dropped.
inline std::vector<int> arity_schedule(int d, int levels) {
  if (levels < 1) throw ConfigError("levels must be >= 1");
  std::vector<int> out;
  for (int i = 0; i < levels; ++i) {
    const int c = d / levels + (i < d % levels ? 1 : 0);
    if (c > 0) out.push_back(c);
  }
  return out;
}

/// A splitter or sample: key plus its position (pe << 40 | local index).
template <class T>
struct Tagged {
  T key;
  Word tag;

  friend bool operator<(const Tagged& a, const Tagged& b) {
    if (a.key < b.key) return true;
    if (b.key < a.key) return false;
    return a.tag < b.tag;
  }
  friend bool operator==(const Tagged&, const Tagged&) = default;
};

inline Word position_tag(PeId pe, std::size_t idx) {
  return (static_cast<Word>(pe) << 40) | static_cast<Word>(idx);
}

// ---------------------------------------------------------------------------
// Classification.

/// Bucket of element (x, tag): the number of splitters below it. With
/// tie_break off only keys are compared and equal keys go left.
template <class T>
class Classifier {
 public:
  Classifier(std::vector<Tagged<T>> splitters, bool tie_break) : tie_break_(tie_break) {
    keys_.reserve(splitters.size());
    tags_.reserve(splitters.size());
    for (const auto& s : splitters) {
      keys_.push_back(s.key);
      tags_.push_back(s.tag);
    }
  }

  std::size_t buckets() const { return keys_.size() + 1; }

  std::size_t operator()(const T& x, Word tag) const {
    const std::size_t i = branchless_lower_bound(x);
    if (!tie_break_ || i == keys_.size() || x < keys_[i]) return i;
    // x equals keys_[i]: search the equal-key splitters by position.
    std::size_t j = i;
    while (j < keys_.size() && !(x < keys_[j])) ++j;
    return static_cast<std::size_t>(std::lower_bound(tags_.begin() + i, tags_.begin() + j, tag) - tags_.begin());
  }

 private:
  std::size_t branchless_lower_bound(const T& x) const {
    const T* base = keys_.data();
    std::size_t n = keys_.size();
    if (n == 0) return 0;
    while (n > 1) {
      const std::size_t half = n / 2;
      base = base[half - 1] < x ? base + half : base;
      n -= half;
    }
    return static_cast<std::size_t>(base - keys_.data()) + (*base < x ? 1 : 0);
  }

  std::vector<T> keys_;
  std::vector<Word> tags_;
  bool tie_break_;
};

/// Distributes `a` (local data of PE `pe`, element i carrying position i)
/// over the buckets defined by sorted `splitters`.
template <class T>
std::vector<std::vector<T>> partition_with_ties(std::span<const T> a, const std::vector<Tagged<T>>& splitters, PeId pe,
                                                bool tie_break = true) {
  const Classifier<T> cls(splitters, tie_break);
  std::vector<std::vector<T>> out(cls.buckets());
  for (std::size_t i = 0; i < a.size(); ++i) out[cls(a[i], position_tag(pe, i))].push_back(a[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Group assignment.

/// Packs the buckets into k contiguous groups so that the largest group is
/// as small as possible. Returns k+1 boundaries into the bucket array.
inline std::vector<std::size_t> assign_groups(const std::vector<Word>& sizes, int k) {
  auto groups_needed = [&](Word cap) {
    int g = 1;
    Word load = 0;
    for (Word s : sizes) {
      if (load + s > cap) {
        ++g;
        load = 0;
      }
      load += s;
    }
    return g;
  };
  Word lo = sizes.empty() ? 0 : *std::max_element(sizes.begin(), sizes.end());
  Word hi = std::accumulate(sizes.begin(), sizes.end(), Word{0});
  while (lo < hi) {
    const Word mid = lo + (hi - lo) / 2;
    if (groups_needed(mid) <= k) hi = mid;
    else lo = mid + 1;
  }
  std::vector<std::size_t> bounds{0};
  Word load = 0;
  for (std::size_t b = 0; b < sizes.size(); ++b) {
    if (load + sizes[b] > lo && static_cast<int>(bounds.size()) < k) {
      bounds.push_back(b);
      load = 0;
    }
    load += sizes[b];
  }
  while (static_cast<int>(bounds.size()) <= k) bounds.push_back(sizes.size());
  return bounds;
}

// ---------------------------------------------------------------------------

/// Per-level statistics as seen by one PE.
struct AmsLevelTrace {
  int level = 0;
  int k = 0;
  bool dma = false;
  double group_imbalance = 1.0;  ///< max group load over total / k
  std::uint64_t data_sent = 0;   ///< data messages of the exchange
  std::uint64_t data_recv = 0;
  std::uint64_t data_words = 0;  ///< words of data sent to other PEs
  std::uint64_t msgs_sent = 0;   ///< all messages of the level
  std::uint64_t msgs_recv = 0;
  std::uint64_t elements = 0;    ///< local elements after the level
};

namespace detail {

/// A piece of a source's data handed to one receiver.
struct Slice {
  PeId dest;
  Word count;
};

/// Cuts [offset, offset + size) along the boundaries bounds[0..R] and maps
/// part u to receiver `member(u)`.
template <class Member>
void cut(Word offset, Word size, const std::vector<Word>& bounds, Member&& member, std::vector<Slice>& out) {
  if (size == 0) return;
  const Word end = offset + size;
  auto u = static_cast<std::size_t>(std::upper_bound(bounds.begin(), bounds.end(), offset) - bounds.begin()) - 1;
  for (Word pos = offset; pos < end; ++u) {
    const Word stop = std::min(end, bounds[u + 1]);
    if (stop > pos) out.push_back({member(static_cast<int>(u)), stop - pos});
    pos = std::max(pos, stop);
  }
}

inline std::vector<Word> even_bounds(Word total, int parts) {
  std::vector<Word> b(parts + 1);
  for (int u = 0; u <= parts; ++u) b[u] = static_cast<Word>(static_cast<unsigned __int128>(total) * u / parts);
  return b;
}

}  // namespace detail

/// Draws samples, ranks them and returns the sorted splitters, identical
/// on all PEs of the cube.
template <WordCodable T>
std::vector<Tagged<T>> select_splitters(Comm& comm, const Cube& cube, std::span<const T> a, int buckets,
                                        double sample_factor, std::uint64_t round) {
  const PeId me = comm.rank();
  auto rng = comm.rng(phase::sampling, round);
  const auto want = static_cast<std::size_t>(std::ceil(sample_factor * buckets / cube.size()));
  // Selection sampling keeps the samples in local order.
  std::vector<Tagged<T>> samples;
  std::size_t need = std::min(want, a.size());
  samples.reserve(need);
  for (std::size_t i = 0; i < a.size() && need > 0; ++i) {
    if (std::uniform_int_distribution<std::size_t>(0, a.size() - i - 1)(rng) < need) {
      samples.push_back({a[i], position_tag(me, i)});
      --need;
    }
  }

  auto ranked = fir_rank(comm, cube, std::move(samples));
  const Word S = ranked.n;
  const auto B = static_cast<Word>(buckets);
  // Rank r is a splitter if ceil(i*S/B) - 1 == r for some i in 1..B-1.
  auto chosen = [&](Word r) {
    const Word i = static_cast<Word>(static_cast<unsigned __int128>(r + 1) * B / S);
    return i >= 1 && i <= B - 1 && static_cast<unsigned __int128>(i) * S > static_cast<unsigned __int128>(r) * B;
  };
  std::vector<Tagged<T>> mine;
  for (std::size_t q = 0; q < ranked.keys.size(); ++q)
    if (ranked.origin[q] == Origin::own && chosen(ranked.rank[q])) mine.push_back(ranked.keys[q]);
  return all_gather_merge(comm, cube, std::move(mine));
}

/// Sorts with `cfg.levels` (or the explicit arity schedule) levels of
/// k-way partitioning. `trace`, if given, receives one entry per level.
template <WordCodable T>
std::vector<T> rams_sort(Comm& comm, std::vector<T> a, const AmsConfig& cfg = {},
                         std::vector<AmsLevelTrace>* trace = nullptr) {
  const PeId me = comm.rank();
  const auto schedule = cfg.arities.empty() ? arity_schedule(comm.dim(), cfg.levels) : cfg.arities;
  if (std::accumulate(schedule.begin(), schedule.end(), 0) != comm.dim())
    throw ConfigError("arity schedule must multiply to p");
  const int nlevels = static_cast<int>(schedule.size());
  const int b = cfg.b > 0 ? cfg.b : default_oversampling(cfg.epsilon, std::max(1, nlevels));

  std::sort(a.begin(), a.end());
  comm.charge_work(sort_cost(a.size()));

  Cube cube = Cube::full(comm.dim());
  for (int level = 0; level < nlevels; ++level) {
    const std::uint64_t sent0 = comm.messages_sent(), recv0 = comm.messages_received();
    const int D = cube.dim();
    const int dk = schedule[level];
    const int k = 1 << dk;
    const int R = 1 << (D - dk);  // members per group
    AmsLevelTrace tr;
    tr.level = level + 1;
    tr.k = k;

    const Word n_local = a.size();
    const Word n_cube = all_reduce_sum(comm, cube, n_local);
    if (n_cube == 0) {
      tr.elements = a.size();
      if (trace) trace->push_back(tr);
      cube = cube.lower(me, D - dk);
      continue;
    }

    // Splitters and local bucket sizes. The data is sorted, so every bucket
    // is a contiguous range.
    const auto splitters = select_splitters<T>(comm, cube, a, b * k, cfg.sample_factor, level);
    const Classifier<T> cls(splitters, cfg.tie_break);
    std::vector<Word> counts(cls.buckets(), 0);
    for (std::size_t i = 0; i < a.size(); ++i) ++counts[cls(a[i], position_tag(me, i))];
    comm.charge_work(a.size() * std::bit_width(splitters.size() + 1));

    const auto scan = prefix_sum_with_total(comm, cube, counts);
    const auto bounds = assign_groups(scan.total, k);

    std::vector<Word> piece(k), offset(k), group_total(k);
    Word max_group = 0;
    for (int g = 0; g < k; ++g) {
      for (std::size_t bk = bounds[g]; bk < bounds[g + 1]; ++bk) {
        piece[g] += counts[bk];
        offset[g] += scan.prefix[bk];
        group_total[g] += scan.total[bk];
      }
      max_group = std::max(max_group, group_total[g]);
    }
    tr.group_imbalance = static_cast<double>(max_group) * k / static_cast<double>(n_cube);

    auto group_member = [&](int g, int u) { return cube.member(g * R + u); };

    // Naive plan: member u of group g takes the u-th even share of the
    // group's elements in source order.
    auto naive_plan = [&] {
      std::vector<std::vector<detail::Slice>> plan(k);
      for (int g = 0; g < k; ++g)
        detail::cut(offset[g], piece[g], detail::even_bounds(group_total[g], R),
                    [&](int u) { return group_member(g, u); }, plan[g]);
      return plan;
    };

    bool use_dma = R > 1 && cfg.dma == DmaMode::on;
    std::vector<std::vector<detail::Slice>> plan;
    if (R > 1 && cfg.dma == DmaMode::automatic) {
      plan = naive_plan();
      std::vector<Word> indeg(cube.size(), 0);
      for (const auto& sl : plan)
        for (const auto& s : sl)
          if (s.dest != me) indeg[cube.local_rank(s.dest)] = 1;
      indeg = all_reduce_sum<Word>(comm, cube, std::move(indeg));
      const Word worst = *std::max_element(indeg.begin(), indeg.end());
      use_dma = worst > static_cast<Word>(cfg.dma_factor) * k;
    }
    tr.dma = use_dma;

    if (use_dma) {
      plan.assign(k, {});
      const int src = cube.local_rank(me);
      const int my_group = src / R, my_member = src % R;
      const Cube group = cube.lower(me, D - dk);

      // 1. Every source reports its piece size to member (src mod R) of
      //    each group; member t thus hears from sources t, t+R, t+2R, ...
      std::vector<Word> desc(k, 0);
      for (int g = 0; g < k; ++g) {
        const PeId to = group_member(g, src % R);
        if (to == me) desc[g] = piece[g];
        else comm.send(to, std::vector<Word>{piece[g]}, tags::dma_descriptor);
      }
      std::vector<Word> sizes(k);
      for (int q = 0; q < k; ++q) {
        const PeId from = cube.member(my_member + q * R);
        sizes[q] = from == me ? desc[my_group] : comm.recv(from, tags::dma_descriptor)[0];
      }

      // 2. Small pieces go whole to receivers (t + j) mod R; large pieces
      //    fill the rest of every receiver's even share.
      const Word T_g = group_total[my_group];
      const double theta = static_cast<double>(T_g) / (2.0 * R * k);
      std::vector<Word> vec(R + 1, 0);
      std::vector<int> small_dest(k, -1);
      int j = 0;
      for (int q = 0; q < k; ++q) {
        if (sizes[q] == 0) continue;
        if (static_cast<double>(sizes[q]) < theta) {
          small_dest[q] = (my_member + j++) % R;
          vec[1 + small_dest[q]] += sizes[q];
        } else {
          vec[0] += sizes[q];
        }
      }
      const auto gs = prefix_sum_with_total(comm, group, vec);
      const auto even = detail::even_bounds(T_g, R);
      std::vector<Word> large_bounds(R + 1, 0);
      for (int u = 0; u < R; ++u) {
        const Word target = even[u + 1] - even[u];
        const Word rem = target > gs.total[1 + u] ? target - gs.total[1 + u] : 0;
        large_bounds[u + 1] = std::min(large_bounds[u] + rem, gs.total[0]);
      }
      large_bounds[R] = gs.total[0];

      // 3. Send every source its addresses.
      Word large_pos = gs.prefix[0];
      std::vector<Word> reply_to_me;
      for (int q = 0; q < k; ++q) {
        std::vector<detail::Slice> sl;
        if (small_dest[q] >= 0) {
          sl.push_back({group.member(small_dest[q]), sizes[q]});
        } else if (sizes[q] > 0) {
          detail::cut(large_pos, sizes[q], large_bounds, [&](int u) { return group.member(u); }, sl);
          large_pos += sizes[q];
        }
        std::vector<Word> words;
        for (const auto& s : sl) {
          words.push_back(static_cast<Word>(s.dest));
          words.push_back(s.count);
        }
        const PeId from = cube.member(my_member + q * R);
        if (from == me) reply_to_me = std::move(words);
        else comm.send(from, std::move(words), tags::dma_address);
      }
      for (int g = 0; g < k; ++g) {
        const PeId from = group_member(g, src % R);
        const auto words = from == me ? reply_to_me : comm.recv(from, tags::dma_address);
        for (std::size_t w = 0; w + 1 < words.size(); w += 2)
          plan[g].push_back({static_cast<PeId>(words[w]), words[w + 1]});
      }
    } else if (plan.empty()) {
      plan = naive_plan();
    }

    // Data exchange. Group g's data starts at bucket bounds[g].
    std::vector<Outgoing> out;
    std::size_t pos = 0;
    for (int g = 0; g < k; ++g) {
      Word planned = 0;
      for (const auto& s : plan[g]) {
        out.push_back({s.dest, to_words(std::span<const T>(a).subspan(pos, s.count))});
        pos += s.count;
        planned += s.count;
      }
      if (planned != piece[g]) throw ContractViolation("rams: message plan does not cover the data");
    }
    for (const auto& m : out)
      if (m.dest != me) {
        ++tr.data_sent;
        tr.data_words += m.payload.size();
      }
    auto in = sparse_exchange(comm, cube, std::move(out));
    std::vector<std::vector<T>> runs;
    runs.reserve(in.size());
    for (auto& m : in) {
      tr.data_recv += m.src != me;
      runs.push_back(from_words<T>(m.payload));
    }
    std::size_t received = 0;
    for (const auto& r : runs) received += r.size();
    a = merge_runs(std::move(runs));
    comm.charge_work(received * std::bit_width(in.size() + 1));

    tr.msgs_sent = comm.messages_sent() - sent0;
    tr.msgs_recv = comm.messages_received() - recv0;
    tr.elements = a.size();
    if (trace) trace->push_back(tr);
    cube = cube.lower(me, D - dk);
  }
  return a;
}

}  // namespace rsort
