#include "gossim/node.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "gossim/message.hpp"

namespace gossim {
namespace {

// Full-discovery candidate pool: every node except self and the mesh.
std::vector<PeerId> all_known(PeerId self, const std::vector<PeerId>& mesh,
                              std::uint32_t n_nodes) {
  std::vector<PeerId> out;
  for (PeerId p = 0; p < n_nodes; ++p) {
    if (p == self) continue;
    if (std::find(mesh.begin(), mesh.end(), p) != mesh.end()) continue;
    out.push_back(p);
  }
  return out;
}

struct Fixture {
  MeshParams mp;
  Features feat;  // defaults: idontwant on, stagger/fragmentation off
  MetricsLedger ledger{16, 64, 32};

  NodeState make_node(PeerId self, std::vector<PeerId> mesh,
                      std::uint32_t n_nodes = 16) {
    std::vector<PeerId> known = all_known(self, mesh, n_nodes);
    return NodeState(self, std::move(mesh), std::move(known), mp, feat,
                     derive_seed(77, self), &ledger);
  }

  Message big(std::uint64_t k = 0, PeerId pub = 15) {
    Message m = make_message(make_message_id(1, k), 200000, pub, 0.0);
    return m;
  }

  Message small_msg(std::uint64_t k = 0) {
    return make_message(make_message_id(1, k), 100, 15, 0.0);
  }
};

std::vector<PeerId> start_targets(const NodeState& n, const Actions& a) {
  std::vector<PeerId> out;
  for (const JobStart& js : a.start)
    out.push_back(n.relay(js.msg)->jobs[js.job_index].target);
  std::sort(out.begin(), out.end());
  return out;
}

TEST(Node, FirstReceptionEmitsIdontwantAndForwards) {
  Fixture fx;
  NodeState n = fx.make_node(0, {1, 2, 3});
  Message m = fx.big();
  fx.ledger.on_publish(m, false, {m});
  Actions a = n.on_message(m, 1, 10.0);
  ASSERT_EQ(a.controls.size(), 1u);
  EXPECT_EQ(a.controls[0].kind, RpcKind::IDONTWANT);
  EXPECT_EQ(a.controls[0].ids, std::vector<MessageId>{m.id});
  EXPECT_EQ(a.controls[0].targets, (std::vector<PeerId>{2, 3}));
  EXPECT_EQ(start_targets(n, a), (std::vector<PeerId>{2, 3}));
  EXPECT_TRUE(n.has_seen(m.id));
  // Full (unfragmented) message delivers on reception.
  EXPECT_FALSE(std::isnan(fx.ledger.messages()[0].completion[0]));
}

TEST(Node, DuplicateCountedOnceNoReforward) {
  Fixture fx;
  NodeState n = fx.make_node(0, {1, 2, 3});
  Message m = fx.big();
  fx.ledger.on_publish(m, false, {m});
  n.on_message(m, 1, 10.0);
  Actions dup = n.on_message(m, 2, 11.0);
  EXPECT_TRUE(dup.controls.empty());
  EXPECT_TRUE(dup.start.empty());
  EXPECT_EQ(fx.ledger.messages()[0].duplicates, 1u);
  EXPECT_EQ(fx.ledger.node_duplicates()[0], 1u);
}

TEST(Node, DuplicateCancelsQueuedSendTowardItsSender) {
  Fixture fx;
  NodeState n = fx.make_node(0, {1, 2, 3});
  Message m = fx.big();
  fx.ledger.on_publish(m, false, {m});
  n.on_message(m, 1, 10.0);  // jobs to 2 and 3, both still queued
  n.on_message(m, 2, 11.0);  // duplicate: 2 evidently has the payload
  const RelayPlan* plan = n.relay(m.id);
  ASSERT_NE(plan, nullptr);
  for (const SendJob& j : plan->jobs) {
    if (j.target == 2) {
      EXPECT_EQ(j.state, JobState::canceled);
    }
    if (j.target == 3) {
      EXPECT_EQ(j.state, JobState::queued);
    }
  }
  EXPECT_EQ(fx.ledger.messages()[0].canceled_jobs, 1u);
}

TEST(Node, DuplicateCancelRequiresIdontwantFeature) {
  Fixture fx;
  fx.feat.idontwant = false;
  NodeState n = fx.make_node(0, {1, 2, 3});
  Message m = fx.big();
  fx.ledger.on_publish(m, false, {m});
  n.on_message(m, 1, 10.0);
  n.on_message(m, 2, 11.0);
  const RelayPlan* plan = n.relay(m.id);
  ASSERT_NE(plan, nullptr);
  for (const SendJob& j : plan->jobs)
    EXPECT_EQ(j.state, JobState::queued);
  EXPECT_EQ(fx.ledger.messages()[0].canceled_jobs, 0u);
}

TEST(Node, SmallMessageNeverIdontwant) {
  Fixture fx;
  NodeState n = fx.make_node(0, {1, 2, 3});
  Message m = fx.small_msg();
  fx.ledger.on_publish(m, false, {m});
  Actions a = n.on_message(m, 1, 10.0);
  EXPECT_TRUE(a.controls.empty());  // below threshold: no IDONTWANT
  EXPECT_EQ(start_targets(n, a), (std::vector<PeerId>{2, 3}));
}

TEST(Node, IdontwantDisabledByFeatureFlag) {
  Fixture fx;
  fx.feat.idontwant = false;
  NodeState n = fx.make_node(0, {1, 2, 3});
  Message m = fx.big();
  fx.ledger.on_publish(m, false, {m});
  Actions a = n.on_message(m, 1, 10.0);
  EXPECT_TRUE(a.controls.empty());
}

TEST(Node, IdontwantCancelsQueuedJobOnly) {
  Fixture fx;
  NodeState n = fx.make_node(0, {1, 2, 3});
  Message m = fx.big();
  fx.ledger.on_publish(m, false, {m});
  Actions a = n.on_message(m, 1, 10.0);
  ASSERT_EQ(a.start.size(), 2u);
  // Start only the job towards 2; leave 3 queued.
  for (const JobStart& js : a.start) {
    if (n.relay(js.msg)->jobs[js.job_index].target == 2)
      n.mark_started(js.msg, js.job_index, 10.0);
  }
  n.on_idontwant({m.id}, 3, 12.0);
  n.on_idontwant({m.id}, 2, 12.0);
  const RelayPlan* plan = n.relay(m.id);
  ASSERT_NE(plan, nullptr);
  for (const SendJob& j : plan->jobs) {
    if (j.target == 3) {
      EXPECT_EQ(j.state, JobState::canceled);
    }
    if (j.target == 2) {
      EXPECT_EQ(j.state, JobState::in_flight);
    }
  }
  EXPECT_EQ(fx.ledger.messages()[0].canceled_jobs, 1u);
}

TEST(Node, IdontwantBeforeMessageSuppressesForwardAndAnnouncement) {
  Fixture fx;
  NodeState n = fx.make_node(0, {1, 2, 3});
  Message m = fx.big();
  fx.ledger.on_publish(m, false, {m});
  n.on_idontwant({m.id}, 3, 5.0);  // announcement precedes the payload
  Actions a = n.on_message(m, 1, 10.0);
  ASSERT_EQ(a.controls.size(), 1u);
  EXPECT_EQ(a.controls[0].targets, std::vector<PeerId>{2});
  EXPECT_EQ(start_targets(n, a), std::vector<PeerId>{2});
}

TEST(Node, IhaveTriggersIwantWithDedupWindow) {
  Fixture fx;
  NodeState n = fx.make_node(0, {1, 2, 3});
  MessageId id = make_message_id(1, 9);
  Actions a1 = n.on_ihave({id}, 5, 100.0);
  ASSERT_EQ(a1.controls.size(), 1u);
  EXPECT_EQ(a1.controls[0].kind, RpcKind::IWANT);
  EXPECT_EQ(a1.controls[0].targets, std::vector<PeerId>{5});
  EXPECT_EQ(fx.ledger.iwant_requests(), 1u);
  // Second announcement within one heartbeat: suppressed.
  Actions a2 = n.on_ihave({id}, 6, 600.0);
  EXPECT_TRUE(a2.controls.empty());
  EXPECT_EQ(fx.ledger.iwant_requests(), 1u);
  // Past the window: re-requested.
  Actions a3 = n.on_ihave({id}, 6, 1100.0);
  ASSERT_EQ(a3.controls.size(), 1u);
  EXPECT_EQ(fx.ledger.iwant_requests(), 2u);
}

TEST(Node, IhaveForSeenIdIgnored) {
  Fixture fx;
  NodeState n = fx.make_node(0, {1, 2, 3});
  Message m = fx.big();
  fx.ledger.on_publish(m, false, {m});
  n.on_message(m, 1, 10.0);
  Actions a = n.on_ihave({m.id}, 5, 20.0);
  EXPECT_TRUE(a.controls.empty());
}

TEST(Node, IwantServedFromMcacheUntilAged) {
  Fixture fx;
  NodeState n = fx.make_node(0, {1, 2, 3});
  Message m = fx.big();
  fx.ledger.on_publish(m, false, {m});
  n.on_message(m, 1, 10.0);
  Actions served = n.on_iwant({m.id}, 9, 20.0);
  ASSERT_EQ(served.respond.size(), 1u);
  EXPECT_EQ(served.respond[0].first.id, m.id);
  EXPECT_EQ(served.respond[0].second, 9u);
  // Unknown id: silently ignored.
  EXPECT_TRUE(n.on_iwant({make_message_id(1, 8)}, 9, 20.0).respond.empty());
  // Age out of the history window (5 heartbeats).
  for (int h = 0; h < 5; ++h) n.heartbeat(1000.0 * (h + 1));
  EXPECT_TRUE(n.on_iwant({m.id}, 9, 6000.0).respond.empty());
}

TEST(Node, HeartbeatGossipTargetRule) {
  Fixture fx;
  MetricsLedger big_ledger(1000, 64, 32);
  std::vector<PeerId> mesh{1, 2, 3, 4, 5, 6, 7, 8};
  // Full discovery at N=1000: 991 non-mesh candidates.
  NodeState n(0, mesh, all_known(0, mesh, 1000), fx.mp, fx.feat,
              derive_seed(77, 0), &big_ledger);
  Message m = fx.big();
  big_ledger.on_publish(m, false, {m});
  n.on_message(m, 1, 10.0);
  Actions a = n.heartbeat(500.0);
  // max(d_lazy=6, ceil(0.05 * 991)) = 50 targets, none of them mesh/self.
  ASSERT_EQ(a.controls.size(), 1u);
  EXPECT_EQ(a.controls[0].kind, RpcKind::IHAVE);
  EXPECT_EQ(a.controls[0].targets.size(), 50u);
  EXPECT_EQ(a.controls[0].ids, std::vector<MessageId>{m.id});
  std::set<PeerId> uniq(a.controls[0].targets.begin(), a.controls[0].targets.end());
  EXPECT_EQ(uniq.size(), 50u);
  for (PeerId t : a.controls[0].targets) {
    EXPECT_NE(t, 0u);
    EXPECT_FALSE(n.in_mesh(t));
  }
}

TEST(Node, HeartbeatDLazyFloor) {
  Fixture fx;
  // 17 nodes, mesh of 6: 10 non-mesh known -> max(6, ceil(0.5)) = 6 targets.
  MetricsLedger led(17, 64, 32);
  std::vector<PeerId> mesh{1, 2, 3, 4, 5, 6};
  NodeState n(0, mesh, all_known(0, mesh, 17), fx.mp, fx.feat,
              derive_seed(77, 0), &led);
  Message m = fx.big();
  led.on_publish(m, false, {m});
  n.on_message(m, 1, 10.0);
  Actions a = n.heartbeat(500.0);
  ASSERT_EQ(a.controls.size(), 1u);
  EXPECT_EQ(a.controls[0].targets.size(), 6u);
}

TEST(Node, HeartbeatGossipBoundedByKnownPeers) {
  Fixture fx;
  // A node that has discovered only 16 non-mesh peers gossips to
  // max(d_lazy=6, ceil(0.05 * 16)) = 6 of them, never beyond the pool.
  MetricsLedger led(1000, 64, 32);
  std::vector<PeerId> mesh{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<PeerId> known{20, 31, 42, 53, 64,  75,  86,  97,
                            108, 119, 130, 141, 152, 163, 174, 185};
  NodeState n(0, mesh, known, fx.mp, fx.feat, derive_seed(77, 0), &led);
  Message m = fx.big();
  led.on_publish(m, false, {m});
  n.on_message(m, 1, 10.0);
  Actions a = n.heartbeat(500.0);
  ASSERT_EQ(a.controls.size(), 1u);
  EXPECT_EQ(a.controls[0].targets.size(), 6u);
  for (PeerId t : a.controls[0].targets)
    EXPECT_TRUE(std::find(known.begin(), known.end(), t) != known.end());
}

TEST(Node, HeartbeatQuietWhenMcacheEmpty) {
  Fixture fx;
  NodeState n = fx.make_node(0, {1, 2, 3});
  EXPECT_TRUE(n.heartbeat(500.0).controls.empty());
}

TEST(Node, AnnounceWindowIsThreeHeartbeats) {
  Fixture fx;
  NodeState n = fx.make_node(0, {1, 2, 3});
  Message m = fx.big();
  fx.ledger.on_publish(m, false, {m});
  n.on_message(m, 1, 10.0);
  for (int h = 1; h <= 5; ++h) {
    Actions a = n.heartbeat(1000.0 * h);
    if (h <= 3) {
      ASSERT_EQ(a.controls.size(), 1u) << "heartbeat " << h;
    } else {
      EXPECT_TRUE(a.controls.empty()) << "heartbeat " << h;
    }
  }
}

TEST(Node, FragmentReassemblyCompletesOnLastIndex) {
  Fixture fx;
  NodeState n = fx.make_node(0, {1, 2, 3});
  Message parent = make_message(make_message_id(1, 4), 100000, 15, 0.0);
  auto frags = fragment_message(parent, 4);
  fx.ledger.on_publish(parent, false, frags);
  // Deliver out of order; completion stamps at the last arrival.
  n.on_message(frags[2], 1, 10.0);
  n.on_message(frags[0], 1, 20.0);
  n.on_message(frags[3], 1, 30.0);
  EXPECT_TRUE(std::isnan(fx.ledger.messages()[0].completion[0]));
  n.on_message(frags[1], 1, 40.0);
  EXPECT_DOUBLE_EQ(fx.ledger.messages()[0].completion[0], 40.0);
  // Each fragment forwarded independently.
  for (const auto& f : frags) EXPECT_NE(n.relay(f.id), nullptr);
}

TEST(Node, FragmentDuplicateRollsUpToParent) {
  Fixture fx;
  NodeState n = fx.make_node(0, {1, 2, 3});
  Message parent = make_message(make_message_id(1, 4), 100000, 15, 0.0);
  auto frags = fragment_message(parent, 4);
  fx.ledger.on_publish(parent, false, frags);
  n.on_message(frags[0], 1, 10.0);
  n.on_message(frags[0], 2, 12.0);
  EXPECT_EQ(fx.ledger.messages()[0].duplicates, 1u);
}

TEST(Node, PublishFragmentsWhenEnabled) {
  Fixture fx;
  fx.feat.fragmentation = true;
  fx.mp.fragment_count = 4;
  NodeState n = fx.make_node(0, {1, 2, 3});
  Message whole = make_message(make_message_id(1, 6), 1048576, 0, 0.0);
  Actions a = n.publish(whole, 0.0);
  ASSERT_EQ(a.published.size(), 4u);
  // 4 fragments x 3 mesh peers, all starting immediately (no staggering).
  EXPECT_EQ(a.start.size(), 12u);
  for (const Message& f : a.published) EXPECT_TRUE(n.has_seen(f.id));
}

TEST(Node, PublishBelowThresholdStaysWhole) {
  Fixture fx;
  fx.feat.fragmentation = true;
  NodeState n = fx.make_node(0, {1, 2, 3});
  Message whole = make_message(make_message_id(1, 6), 1000, 0, 0.0);
  Actions a = n.publish(whole, 0.0);
  ASSERT_EQ(a.published.size(), 1u);
  EXPECT_FALSE(a.published[0].is_fragment());
}

TEST(Node, NonNeighborPayloadIsFatalUnlessDirect) {
  Fixture fx;
  NodeState n = fx.make_node(0, {1, 2, 3});
  Message m = fx.big();
  fx.ledger.on_publish(m, false, {m});
  EXPECT_THROW(n.on_message(m, 9, 10.0), std::logic_error);
  EXPECT_NO_THROW(n.on_message(m, 9, 10.0, /*direct=*/true));
}

TEST(Node, JobStateLifecycle) {
  Fixture fx;
  NodeState n = fx.make_node(0, {1, 2, 3});
  Message m = fx.big();
  fx.ledger.on_publish(m, false, {m});
  Actions a = n.on_message(m, 1, 10.0);
  for (const JobStart& js : a.start) {
    EXPECT_EQ(n.relay(js.msg)->jobs[js.job_index].state, JobState::queued);
    n.mark_started(js.msg, js.job_index, 10.0);
    EXPECT_EQ(n.relay(js.msg)->jobs[js.job_index].state, JobState::in_flight);
    n.on_job_acked(js.msg, js.job_index, 40.0);
    EXPECT_EQ(n.relay(js.msg)->jobs[js.job_index].state, JobState::done);
  }
}

}  // namespace
}  // namespace gossim
