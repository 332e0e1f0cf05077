// SPDX-License-Identifier: Apache-2.0
//
// Irregular data exchange where receivers do not know their in-degree.

#pragma once

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <vector>

#include "rsort/collectives.hpp"
#include "rsort/netsim.hpp"

namespace rsort {

// Sparse data exchange: synchronous sends plus a nonblocking barrier. A PE
// joins the barrier once all its sends were received; when the barrier
// completes no message is in flight anywhere in the cube.

struct Outgoing {
  PeId dest;
  std::vector<Word> payload;
};

struct Incoming {
  PeId src;
  std::vector<Word> payload;
};

namespace tags {
inline constexpr Tag nbx_base = 1000;
}  // namespace tags

/// Delivers `msgs` within `cube`. Messages to the calling PE are handed
/// over locally. Results are ordered by source.
inline std::vector<Incoming> sparse_exchange(Comm& comm, const Cube& cube, std::vector<Outgoing> msgs) {
  const PeId me = comm.rank();
  const std::uint64_t epoch = comm.next_epoch();
  const Tag data_tag = tags::nbx_base + static_cast<Tag>(2 * epoch);
  const Tag barrier_tag = data_tag + 1;
  const int D = cube.dim();

  std::vector<Incoming> in;
  std::vector<std::uint64_t> pending;
  for (auto& m : msgs) {
    if (!cube.contains(m.dest)) throw ContractViolation("sparse_exchange: destination outside cube");
    if (m.dest == me) in.push_back({me, std::move(m.payload)});
    else pending.push_back(comm.issend(m.dest, std::move(m.payload), data_tag));
  }
  auto all_sent = [&] {
    return std::all_of(pending.begin(), pending.end(), [&](auto h) { return comm.send_done(h); });
  };

  bool in_barrier = false;
  int round = 0;
  for (;;) {
    while (auto m = comm.try_recv_any(data_tag)) in.push_back({m->src, std::move(m->payload)});
    if (!in_barrier && all_sent()) {
      in_barrier = true;
      if (D > 0) comm.send(cube.partner(me, 0), std::vector<Word>{}, barrier_tag);
    }
    if (in_barrier) {
      while (round < D && comm.has_message(cube.partner(me, round), barrier_tag)) {
        comm.recv(cube.partner(me, round), barrier_tag);
        if (++round < D) comm.send(cube.partner(me, round), std::vector<Word>{}, barrier_tag);
      }
      if (round == D) break;
    }
    comm.wait_until([&] {
      if (comm.has_message_any(data_tag)) return true;
      if (!in_barrier) return all_sent();
      return comm.has_message(cube.partner(me, round), barrier_tag);
    });
  }
  std::stable_sort(in.begin(), in.end(), [](const Incoming& a, const Incoming& b) { return a.src < b.src; });
  return in;
}

/// Merges sorted runs pairwise.
template <class T>
std::vector<T> merge_runs(std::vector<std::vector<T>> runs) {
  if (runs.empty()) return {};
  while (runs.size() > 1) {
    std::vector<std::vector<T>> next;
    next.reserve((runs.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < runs.size(); i += 2) {
      std::vector<T> m;
      m.reserve(runs[i].size() + runs[i + 1].size());
      std::merge(runs[i].begin(), runs[i].end(), runs[i + 1].begin(), runs[i + 1].end(), std::back_inserter(m));
      next.push_back(std::move(m));
    }
    if (runs.size() % 2 == 1) next.push_back(std::move(runs.back()));
    runs.swap(next);
  }
  return std::move(runs[0]);
}

}  // namespace rsort
