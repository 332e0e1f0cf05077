// SPDX-License-Identifier: Apache-2.0
//
// Deterministic simulated message-passing cluster.
//
// Every PE of a p = 2^d machine runs the same program as a cooperatively
// scheduled fiber. Messages are buffered point-to-point transfers between
// PEs; each transfer is charged to a CostLedger so that algorithms can be
// evaluated in the alpha + l*beta model without a real network.

#pragma once

#include <algorithm>
#include <bit>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <boost/context/fiber.hpp>
#include <boost/context/fixedsize_stack.hpp>

namespace rsort {

using Word = std::uint64_t;
using PeId = int;
using Tag = std::uint32_t;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a collective is called with inconsistent arguments.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised by algorithms that reject an input layout (e.g. bitonic on sparse input).
class Unsupported : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DeadlockError : public std::runtime_error {
 public:
  explicit DeadlockError(std::vector<PeId> blocked)
      : std::runtime_error(describe(blocked)), blocked_(std::move(blocked)) {}

  const std::vector<PeId>& blocked() const noexcept { return blocked_; }

 private:
  static std::string describe(const std::vector<PeId>& blocked) {
    std::string s = "deadlock: no message in flight, blocked PEs:";
    for (auto pe : blocked) s += " " + std::to_string(pe);
    return s;
  }

  std::vector<PeId> blocked_;
};

// ---------------------------------------------------------------------------
// Word codec. One element is one machine word; composite records are
// transmitted as their raw words.

template <class T>
concept WordCodable = std::is_trivially_copyable_v<T> && sizeof(T) % sizeof(Word) == 0;

template <class T>
  requires WordCodable<T>
inline constexpr std::size_t words_per = sizeof(T) / sizeof(Word);

template <WordCodable T>
std::vector<Word> to_words(std::span<const T> items) {
  std::vector<Word> out(items.size() * words_per<T>);
  if (!items.empty()) std::memcpy(out.data(), items.data(), items.size_bytes());
  return out;
}

template <WordCodable T>
std::vector<T> from_words(std::span<const Word> words) {
  if (words.size() % words_per<T> != 0)
    throw ContractViolation("message length is not a multiple of the record size");
  std::vector<T> out(words.size() / words_per<T>);
  if (!out.empty()) std::memcpy(out.data(), words.data(), words.size_bytes());
  return out;
}

// ---------------------------------------------------------------------------

struct ClusterConfig {
  int dim = 0;  ///< hypercube dimension d, p = 2^d
  double alpha = 1000.0;
  double beta = 1.0;
  std::uint64_t seed = 1;

  int pes() const { return 1 << dim; }

  void validate() const {
    if (dim < 0 || dim > 20) throw ConfigError("hypercube dimension must be in 0..20");
    if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ConfigError("alpha and beta must be non-negative");
  }
};

/// Per-PE communication and work counters.
///
/// `startups` counts messages sent, `msgs_recv` messages received. In the
/// single-ported full-duplex model a PE pays for whichever side is busier,
/// so the reported maxima take the larger of the two directions.
struct CostLedger {
  std::vector<std::uint64_t> startups;
  std::vector<std::uint64_t> words_sent;
  std::vector<std::uint64_t> words_recv;
  std::vector<std::uint64_t> msgs_recv;
  std::vector<std::uint64_t> local_work;

  CostLedger() = default;
  explicit CostLedger(int p)
      : startups(p), words_sent(p), words_recv(p), msgs_recv(p), local_work(p) {}

  int pes() const { return static_cast<int>(startups.size()); }

  static std::uint64_t sum(const std::vector<std::uint64_t>& v) {
    std::uint64_t s = 0;
    for (auto x : v) s += x;
    return s;
  }

  std::uint64_t total_words_sent() const { return sum(words_sent); }
  std::uint64_t total_words_recv() const { return sum(words_recv); }
  std::uint64_t total_startups() const { return sum(startups); }

  std::uint64_t startups_of(PeId pe) const { return std::max(startups[pe], msgs_recv[pe]); }
  std::uint64_t words_of(PeId pe) const { return std::max(words_sent[pe], words_recv[pe]); }

  std::uint64_t startups_max() const {
    std::uint64_t m = 0;
    for (int pe = 0; pe < pes(); ++pe) m = std::max(m, startups_of(pe));
    return m;
  }

  std::uint64_t words_max() const {
    std::uint64_t m = 0;
    for (int pe = 0; pe < pes(); ++pe) m = std::max(m, words_of(pe));
    return m;
  }

  double modeled_time(double alpha, double beta) const {
    return alpha * static_cast<double>(startups_max()) + beta * static_cast<double>(words_max());
  }
};

/// splitmix64 finalizer, used to derive independent per-PE streams.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(mix64(mix64(seed) ^ a) ^ (b * 0xd6e8feb86659fd93ULL));
}

using Rng = std::mt19937_64;

/// Well-known phase tags for the per-PE random streams.
namespace phase {
inline constexpr std::uint64_t shuffle = 1;
inline constexpr std::uint64_t median = 2;
inline constexpr std::uint64_t sampling = 3;
inline constexpr std::uint64_t ssort = 4;
inline constexpr std::uint64_t user = 100;
}  // namespace phase

enum class SchedulePolicy { forward, reverse };

struct Message {
  PeId src = 0;
  Tag tag = 0;
  std::vector<Word> payload;
  std::uint64_t send_id = 0;  ///< nonzero for synchronous sends
};

class Cluster;

/// Handle through which a PE program talks to the simulated network.
class Comm {
 public:
  PeId rank() const { return pe_; }
  int size() const;
  int dim() const;
  const ClusterConfig& config() const;

  /// Buffered send; returns immediately.
  void send(PeId dest, std::span<const Word> payload, Tag tag);
  void send(PeId dest, std::vector<Word>&& payload, Tag tag);

  /// Synchronous-mode send: the returned handle tests complete once the
  /// receiver has consumed the message.
  std::uint64_t issend(PeId dest, std::vector<Word>&& payload, Tag tag);
  bool send_done(std::uint64_t handle) const;

  /// Blocking receive of the oldest message from `src` carrying `tag`.
  std::vector<Word> recv(PeId src, Tag tag);
  /// Blocking receive of the oldest message carrying `tag` from any source.
  Message recv_any(Tag tag);
  std::optional<Message> try_recv_any(Tag tag);
  std::optional<std::vector<Word>> try_recv(PeId src, Tag tag);
  bool has_message(PeId src, Tag tag) const;
  bool has_message_any(Tag tag) const;

  /// Yields to the scheduler until `ready` holds. `ready` must depend only on
  /// this PE's inbox or the delivery state of its synchronous sends.
  void wait_until(std::function<bool()> ready);

  template <WordCodable T>
  void send_items(PeId dest, std::span<const T> items, Tag tag) {
    send(dest, to_words(items), tag);
  }

  template <WordCodable T>
  std::vector<T> recv_items(PeId src, Tag tag) {
    return from_words<T>(recv(src, tag));
  }

  /// Fresh random stream for (master seed, pe, phase, round).
  Rng rng(std::uint64_t phase_tag, std::uint64_t round = 0) const {
    Rng g(derive_seed(config().seed, static_cast<std::uint64_t>(pe_) + 1,
                      phase_tag * 0x100000001ULL + round));
    return g;
  }

  void charge_work(std::uint64_t comparisons);

  /// This PE's own message counters so far in the current run.
  std::uint64_t messages_sent() const;
  std::uint64_t messages_received() const;

  /// Increments a per-PE epoch counter; all PEs of a collective must call it
  /// the same number of times so that the values agree.
  std::uint64_t next_epoch() { return ++epoch_; }

 private:
  friend class Cluster;
  Comm(Cluster* cluster, PeId pe) : cluster_(cluster), pe_(pe) {}

  Cluster* cluster_;
  PeId pe_;
  std::uint64_t epoch_ = 0;
};

class Cluster {
 public:
  explicit Cluster(ClusterConfig cfg, SchedulePolicy policy = SchedulePolicy::forward)
      : cfg_(cfg), policy_(policy) {
    cfg_.validate();
  }

  const ClusterConfig& config() const { return cfg_; }
  int pes() const { return cfg_.pes(); }

  /// Runs `program(comm)` on every PE to completion and returns the ledger.
  CostLedger run(const std::function<void(Comm&)>& program) {
    const int p = pes();
    ledger_ = CostLedger(p);
    states_.clear();
    states_.reserve(p);
    for (int pe = 0; pe < p; ++pe) states_.push_back(std::make_unique<PeState>(this, pe));
    first_error_ = nullptr;
    next_send_id_ = 1;

    namespace ctx = boost::context;
    for (int pe = 0; pe < p; ++pe) {
      PeState* st = states_[pe].get();
      st->fiber = ctx::fiber(std::allocator_arg, ctx::fixedsize_stack(kStackBytes),
                             [this, st, &program](ctx::fiber&& sched) {
                               st->scheduler = std::move(sched);
                               try {
                                 program(st->comm);
                               } catch (const ctx::detail::forced_unwind&) {
                                 throw;
                               } catch (...) {
                                 if (!first_error_) first_error_ = std::current_exception();
                               }
                               st->status = Status::done;
                               return std::move(st->scheduler);
                             });
    }

    bool any_alive = true;
    while (any_alive && !first_error_) {
      bool progressed = false;
      any_alive = false;
      for (int i = 0; i < p; ++i) {
        const int pe = policy_ == SchedulePolicy::forward ? i : p - 1 - i;
        PeState& st = *states_[pe];
        if (st.status == Status::done) continue;
        any_alive = true;
        if (st.status == Status::blocked && !st.ready()) continue;
        st.status = Status::running;
        st.fiber = std::move(st.fiber).resume();
        progressed = true;
        if (first_error_) break;
      }
      if (first_error_) break;
      if (any_alive && !progressed) {
        std::vector<PeId> blocked;
        for (int pe = 0; pe < p; ++pe)
          if (states_[pe]->status == Status::blocked) blocked.push_back(pe);
        teardown();
        throw DeadlockError(std::move(blocked));
      }
    }

    if (first_error_) {
      auto err = first_error_;
      teardown();
      std::rethrow_exception(err);
    }

    for (int pe = 0; pe < p; ++pe) {
      if (!states_[pe]->inbox.empty()) {
        teardown();
        throw ContractViolation("PE " + std::to_string(pe) + " finished with unconsumed messages");
      }
    }
    teardown();
    return std::move(ledger_);
  }

 private:
  friend class Comm;

  static constexpr std::size_t kStackBytes = 256 * 1024;

  enum class Status { running, blocked, done };

  struct PeState {
    PeState(Cluster* c, PeId pe) : comm(c, pe) {}

    Comm comm;
    Status status = Status::running;
    boost::context::fiber fiber;
    boost::context::fiber scheduler;
    std::deque<Message> inbox;
    std::function<bool()> wait;
    std::vector<std::uint64_t> pending_ssends;  // sorted ids not yet consumed

    bool ready() const { return !wait || wait(); }
  };

  void teardown() {
    // Destroying a suspended fiber unwinds its stack.
    states_.clear();
  }

  PeState& state(PeId pe) { return *states_[pe]; }

  void check_peer(PeId self, PeId peer) const {
    if (peer < 0 || peer >= pes())
      throw ConfigError("PE " + std::to_string(peer) + " out of range 0.." + std::to_string(pes() - 1));
    if (peer == self) throw ConfigError("PE " + std::to_string(self) + " cannot message itself");
  }

  std::uint64_t post(PeId src, PeId dest, std::vector<Word>&& payload, Tag tag, bool sync) {
    check_peer(src, dest);
    ledger_.startups[src] += 1;
    ledger_.words_sent[src] += payload.size();
    Message m{src, tag, std::move(payload), 0};
    if (sync) {
      m.send_id = next_send_id_++;
      state(src).pending_ssends.push_back(m.send_id);
    }
    const auto id = m.send_id;
    state(dest).inbox.push_back(std::move(m));
    return id;
  }

  template <class Pred>
  std::optional<Message> take(PeId self, Pred&& match) {
    auto& box = state(self).inbox;
    auto it = std::find_if(box.begin(), box.end(), match);
    if (it == box.end()) return std::nullopt;
    Message m = std::move(*it);
    box.erase(it);
    ledger_.msgs_recv[self] += 1;
    ledger_.words_recv[self] += m.payload.size();
    if (m.send_id != 0) {
      auto& pend = state(m.src).pending_ssends;
      auto pos = std::lower_bound(pend.begin(), pend.end(), m.send_id);
      if (pos != pend.end() && *pos == m.send_id) pend.erase(pos);
    }
    return m;
  }

  void block(PeId self, std::function<bool()> ready) {
    PeState& st = state(self);
    st.wait = std::move(ready);
    st.status = Status::blocked;
    st.scheduler = std::move(st.scheduler).resume();
    st.wait = nullptr;
    st.status = Status::running;
  }

  ClusterConfig cfg_;
  SchedulePolicy policy_;
  CostLedger ledger_;
  std::vector<std::unique_ptr<PeState>> states_;
  std::exception_ptr first_error_;
  std::uint64_t next_send_id_ = 1;
};

// ---------------------------------------------------------------------------
// Comm implementation

inline int Comm::size() const { return cluster_->pes(); }
inline int Comm::dim() const { return cluster_->config().dim; }
inline const ClusterConfig& Comm::config() const { return cluster_->config(); }

inline void Comm::send(PeId dest, std::span<const Word> payload, Tag tag) {
  cluster_->post(pe_, dest, std::vector<Word>(payload.begin(), payload.end()), tag, false);
}

inline void Comm::send(PeId dest, std::vector<Word>&& payload, Tag tag) {
  cluster_->post(pe_, dest, std::move(payload), tag, false);
}

inline std::uint64_t Comm::issend(PeId dest, std::vector<Word>&& payload, Tag tag) {
  return cluster_->post(pe_, dest, std::move(payload), tag, true);
}

inline bool Comm::send_done(std::uint64_t handle) const {
  const auto& pend = cluster_->state(pe_).pending_ssends;
  return !std::binary_search(pend.begin(), pend.end(), handle);
}

inline bool Comm::has_message(PeId src, Tag tag) const {
  const auto& box = cluster_->state(pe_).inbox;
  return std::any_of(box.begin(), box.end(),
                     [&](const Message& m) { return m.src == src && m.tag == tag; });
}

inline bool Comm::has_message_any(Tag tag) const {
  const auto& box = cluster_->state(pe_).inbox;
  return std::any_of(box.begin(), box.end(), [&](const Message& m) { return m.tag == tag; });
}

inline std::optional<std::vector<Word>> Comm::try_recv(PeId src, Tag tag) {
  auto m = cluster_->take(pe_, [&](const Message& x) { return x.src == src && x.tag == tag; });
  if (!m) return std::nullopt;
  return std::move(m->payload);
}

inline std::vector<Word> Comm::recv(PeId src, Tag tag) {
  cluster_->check_peer(pe_, src);
  for (;;) {
    if (auto m = try_recv(src, tag)) return std::move(*m);
    cluster_->block(pe_, [this, src, tag] { return has_message(src, tag); });
  }
}

inline std::optional<Message> Comm::try_recv_any(Tag tag) {
  return cluster_->take(pe_, [&](const Message& x) { return x.tag == tag; });
}

inline Message Comm::recv_any(Tag tag) {
  for (;;) {
    if (auto m = try_recv_any(tag)) return std::move(*m);
    cluster_->block(pe_, [this, tag] { return has_message_any(tag); });
  }
}

inline void Comm::wait_until(std::function<bool()> ready) {
  if (ready()) return;
  cluster_->block(pe_, std::move(ready));
}

inline void Comm::charge_work(std::uint64_t comparisons) {
  cluster_->ledger_.local_work[pe_] += comparisons;
}

inline std::uint64_t Comm::messages_sent() const { return cluster_->ledger_.startups[pe_]; }
inline std::uint64_t Comm::messages_received() const { return cluster_->ledger_.msgs_recv[pe_]; }

// ---------------------------------------------------------------------------

template <class T>
struct SpmdResult {
  std::vector<std::vector<T>> outputs;
  CostLedger ledger;
};

/// Runs `program(comm, local_input) -> local_output` on every PE.
template <class T, class Program>
SpmdResult<T> run_spmd(const ClusterConfig& cfg, std::vector<std::vector<T>> inputs, Program&& program,
                       SchedulePolicy policy = SchedulePolicy::forward) {
  cfg.validate();
  if (static_cast<int>(inputs.size()) != cfg.pes())
    throw ConfigError("run_spmd needs exactly one input list per PE");
  SpmdResult<T> result;
  result.outputs.resize(inputs.size());
  Cluster cluster(cfg, policy);
  result.ledger = cluster.run([&](Comm& comm) {
    const auto pe = comm.rank();
    result.outputs[pe] = program(comm, std::move(inputs[pe]));
  });
  return result;
}

/// Number of comparisons charged for sorting m elements.
inline std::uint64_t sort_cost(std::size_t m) {
  if (m < 2) return 0;
  return static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(std::bit_width(m - 1));
}

}  // namespace rsort
