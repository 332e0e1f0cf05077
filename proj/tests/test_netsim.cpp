// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>

#include "rsort/rquick.hpp"
#include "support.hpp"

using namespace rsort;
using rsort::test::cluster;

TEST(Netsim, SinglePeSortsLocallyWithoutCommunication) {
  auto res = run_spmd<Word>(cluster(0), {{3, 1, 2}}, [](Comm&, std::vector<Word> a) {
    std::sort(a.begin(), a.end());
    return a;
  });
  EXPECT_EQ(res.outputs, (std::vector<std::vector<Word>>{{1, 2, 3}}));
  EXPECT_EQ(res.ledger.total_startups(), 0u);
  EXPECT_EQ(res.ledger.total_words_sent(), 0u);
  EXPECT_EQ(res.ledger.total_words_recv(), 0u);
}

TEST(Netsim, PairExchangeCountsOneStartupAndOneWordEach) {
  auto res = run_spmd<Word>(cluster(1), {{10}, {20}}, [](Comm& comm, std::vector<Word> a) {
    const PeId other = comm.rank() ^ 1;
    comm.send(other, std::span<const Word>(a), 0);
    return comm.recv(other, 0);
  });
  EXPECT_EQ(res.outputs, (std::vector<std::vector<Word>>{{20}, {10}}));
  for (int pe = 0; pe < 2; ++pe) {
    EXPECT_EQ(res.ledger.startups[pe], 1u);
    EXPECT_EQ(res.ledger.words_sent[pe], 1u);
    EXPECT_EQ(res.ledger.words_recv[pe], 1u);
  }
}

TEST(Netsim, UnmatchedReceiveIsReportedAsDeadlockNamingThePe) {
  try {
    run_spmd<Word>(cluster(2), std::vector<std::vector<Word>>(4), [](Comm& comm, std::vector<Word> a) {
      if (comm.rank() == 1) comm.recv(0, 5);
      return a;
    });
    FAIL() << "expected a deadlock";
  } catch (const DeadlockError& e) {
    EXPECT_EQ(e.blocked(), std::vector<PeId>{1});
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(Netsim, SendDeliversPayloadAndChargesSender) {
  auto res = run_spmd<Word>(cluster(1), {{}, {}}, [](Comm& comm, std::vector<Word>) {
    if (comm.rank() == 0) {
      comm.send(1, std::vector<Word>{7, 9}, 3);
      return std::vector<Word>{};
    }
    return comm.recv(0, 3);
  });
  EXPECT_EQ(res.outputs[1], (std::vector<Word>{7, 9}));
  EXPECT_EQ(res.ledger.startups[0], 1u);
  EXPECT_EQ(res.ledger.words_sent[0], 2u);
  EXPECT_EQ(res.ledger.words_recv[1], 2u);
  EXPECT_EQ(res.ledger.msgs_recv[1], 1u);
}

TEST(Netsim, MessagesBetweenAPairArriveInOrder) {
  auto res = run_spmd<Word>(cluster(1), {{}, {}}, [](Comm& comm, std::vector<Word>) {
    if (comm.rank() == 0) {
      comm.send(1, std::vector<Word>{41}, 0);
      comm.send(1, std::vector<Word>{42}, 0);
      return std::vector<Word>{};
    }
    auto first = comm.recv(0, 0);
    auto second = comm.recv(0, 0);
    return std::vector<Word>{first[0], second[0]};
  });
  EXPECT_EQ(res.outputs[1], (std::vector<Word>{41, 42}));
}

TEST(Netsim, SelfSendIsAConfigurationError) {
  EXPECT_THROW(run_spmd<Word>(cluster(1), {{}, {}},
                              [](Comm& comm, std::vector<Word> a) {
                                comm.send(comm.rank(), std::vector<Word>{1}, 0);
                                return a;
                              }),
               ConfigError);
}

TEST(Netsim, OutOfRangeDestinationIsAConfigurationError) {
  EXPECT_THROW(run_spmd<Word>(cluster(1), {{}, {}},
                              [](Comm& comm, std::vector<Word> a) {
                                if (comm.rank() == 0) comm.send(2, std::vector<Word>{1}, 0);
                                return a;
                              }),
               ConfigError);
}

TEST(Netsim, InvalidConfigurationsAreRejected) {
  ClusterConfig cfg = cluster(2);
  cfg.alpha = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = cluster(-1);
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(run_spmd<Word>(cluster(2), {{}, {}}, [](Comm&, std::vector<Word> a) { return a; }), ConfigError);
}

TEST(Netsim, LeftoverMessagesAreAContractViolation) {
  EXPECT_THROW(run_spmd<Word>(cluster(1), {{}, {}},
                              [](Comm& comm, std::vector<Word> a) {
                                if (comm.rank() == 0) comm.send(1, std::vector<Word>{1}, 0);
                                return a;
                              }),
               ContractViolation);
}

TEST(Netsim, ErrorsInsideAPeAreRethrown) {
  EXPECT_THROW(run_spmd<Word>(cluster(2), std::vector<std::vector<Word>>(4),
                              [](Comm& comm, std::vector<Word> a) -> std::vector<Word> {
                                if (comm.rank() == 2) throw Unsupported("nope");
                                return a;
                              }),
               Unsupported);
}

TEST(Netsim, SynchronousSendCompletesOnlyWhenReceived) {
  auto res = run_spmd<Word>(cluster(1), {{}, {}}, [](Comm& comm, std::vector<Word>) {
    if (comm.rank() == 0) {
      const auto h = comm.issend(1, std::vector<Word>{5}, 0);
      const bool before = comm.send_done(h);
      comm.wait_until([&] { return comm.send_done(h); });
      return std::vector<Word>{before ? Word{1} : Word{0}};
    }
    return comm.recv(0, 0);
  });
  EXPECT_EQ(res.outputs[0], std::vector<Word>{0});
  EXPECT_EQ(res.outputs[1], std::vector<Word>{5});
}

TEST(Netsim, ReceiveFromAnySourceAndProbes) {
  auto res = run_spmd<Word>(cluster(2), std::vector<std::vector<Word>>(4), [](Comm& comm, std::vector<Word>) {
    if (comm.rank() != 0) {
      comm.send(0, std::vector<Word>{static_cast<Word>(comm.rank())}, 4);
      return std::vector<Word>{};
    }
    EXPECT_FALSE(comm.try_recv_any(9).has_value());
    std::vector<Word> got;
    for (int i = 0; i < 3; ++i) {
      auto m = comm.recv_any(4);
      EXPECT_EQ(m.payload[0], static_cast<Word>(m.src));
      got.push_back(m.payload[0]);
    }
    std::sort(got.begin(), got.end());
    return got;
  });
  EXPECT_EQ(res.outputs[0], (std::vector<Word>{1, 2, 3}));
}

namespace {

SpmdResult<Word> rquick_run(SchedulePolicy policy) {
  ClusterConfig cfg = cluster(4, 77);
  auto in = test::random_inputs(cfg.pes(), 40, 5, 1000);
  return run_spmd<Word>(cfg, in, [](Comm& comm, std::vector<Word> a) { return rquick_sort(comm, std::move(a)); },
                        policy);
}

}  // namespace

TEST(Netsim, ResultsDoNotDependOnSchedulingOrder) {
  const auto fwd = rquick_run(SchedulePolicy::forward);
  const auto rev = rquick_run(SchedulePolicy::reverse);
  const auto again = rquick_run(SchedulePolicy::forward);
  EXPECT_EQ(fwd.outputs, rev.outputs);
  EXPECT_EQ(fwd.ledger.startups, rev.ledger.startups);
  EXPECT_EQ(fwd.ledger.words_sent, rev.ledger.words_sent);
  EXPECT_EQ(fwd.ledger.words_recv, rev.ledger.words_recv);
  EXPECT_EQ(fwd.ledger.local_work, rev.ledger.local_work);
  EXPECT_EQ(fwd.outputs, again.outputs);
  EXPECT_EQ(fwd.ledger.startups, again.ledger.startups);
}

TEST(Netsim, WordsAreConservedAndModeledTimeBoundsEveryPe) {
  const auto r = rquick_run(SchedulePolicy::forward);
  const auto& L = r.ledger;
  EXPECT_EQ(L.total_words_sent(), L.total_words_recv());
  EXPECT_EQ(L.total_startups(), CostLedger::sum(L.msgs_recv));
  const double alpha = 1000, beta = 1;
  const double t = L.modeled_time(alpha, beta);
  EXPECT_DOUBLE_EQ(t, alpha * L.startups_max() + beta * L.words_max());
  for (int pe = 0; pe < L.pes(); ++pe) EXPECT_GE(t, alpha * L.startups[pe] + beta * L.words_sent[pe]);
}

TEST(Netsim, PeStreamsDependOnSeedPeAndPhase) {
  auto res = run_spmd<Word>(cluster(1, 9), {{}, {}}, [](Comm& comm, std::vector<Word>) {
    return std::vector<Word>{comm.rng(phase::user)(), comm.rng(phase::user)(), comm.rng(phase::user, 1)()};
  });
  EXPECT_EQ(res.outputs[0][0], res.outputs[0][1]);
  EXPECT_NE(res.outputs[0][0], res.outputs[0][2]);
  EXPECT_NE(res.outputs[0][0], res.outputs[1][0]);
}

TEST(Netsim, WordCodecRoundTripsDoubles) {
  const std::vector<double> v{1.5, -2.25, 0.0};
  EXPECT_EQ(from_words<double>(to_words<double>(v)), v);
  EXPECT_EQ(sort_cost(0), 0u);
  EXPECT_EQ(sort_cost(1), 0u);
  EXPECT_EQ(sort_cost(8), 24u);
}
