#pragma once

// Per-node protocol state machine: mesh forwarding, IDONTWANT suppression,
// heartbeat gossip (IHAVE/IWANT), fragmentation/reassembly, and staggered
// relay with node-wide rotation across queued messages.
//
// Pure state machine: no time-keeping, no I/O. The caller (event engine or a
// test driver) owns time and executes the returned actions. Send jobs returned
// in Actions::start stay `queued` until the caller invokes mark_started when
// the transfer actually reaches the wire; while a released job still waits
// behind other transfers an IDONTWANT can cancel it.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <unordered_map>
#include <vector>

#include "gossim/message.hpp"
#include "gossim/metrics.hpp"
#include "gossim/params.hpp"
#include "gossim/rng.hpp"
#include "gossim/util.hpp"

namespace gossim {

// One control RPC (same id list) addressed to one or more peers; byte
// accounting is per target.
struct ControlOut {
  RpcKind kind;
  std::vector<MessageId> ids;
  std::vector<PeerId> targets;
};

enum class JobState : std::uint8_t { queued, in_flight, canceled, done };

struct SendJob {
  PeerId target = 0;
  JobState state = JobState::queued;
  std::uint32_t group = 0;
  TimeMs enqueue_time = 0.0;
  TimeMs start_time = -1.0;
};

// Relay plan for one message at one node; jobs are laid out group-contiguous.
struct RelayPlan {
  MessageId id = 0;
  bool staggered = false;
  std::uint32_t next_group = 0;
  std::vector<SendJob> jobs;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> groups;  // [begin,end)
};

struct JobStart {
  MessageId msg = 0;
  std::uint32_t job_index = 0;
};

struct Actions {
  std::vector<ControlOut> controls;
  std::vector<JobStart> start;                       // begin these transfers
  std::vector<std::pair<Message, PeerId>> respond;   // IWANT replies (direct)
  std::vector<Message> published;                    // new wire messages
  // Arm a stagger timer: (release sequence, fire time).
  std::optional<std::pair<std::uint64_t, TimeMs>> arm_stagger;
};

class NodeState {
 public:
  // `gossip_peers` is the non-mesh candidate pool this node may gossip to
  // (its discovered peers); heartbeat IHAVE targets are sampled from it.
  NodeState(PeerId self, std::vector<PeerId> mesh,
            std::vector<PeerId> gossip_peers, const MeshParams& mp,
            const Features& features, std::uint64_t node_seed,
            MetricsLedger* ledger)
      : self_(self),
        mesh_(std::move(mesh)),
        gossip_peers_(std::move(gossip_peers)),
        mp_(mp),
        features_(features),
        rng_(node_seed),
        ledger_(ledger) {
    std::sort(mesh_.begin(), mesh_.end());
    heartbeat_jitter_ = rng_.uniform(0.0, mp_.heartbeat_interval_ms);
  }

  PeerId id() const { return self_; }
  const std::vector<PeerId>& mesh() const { return mesh_; }
  TimeMs heartbeat_jitter() const { return heartbeat_jitter_; }
  bool in_mesh(PeerId p) const {
    return std::binary_search(mesh_.begin(), mesh_.end(), p);
  }
  bool has_seen(MessageId id) const { return seen_.count(id) != 0; }
  const RelayPlan* relay(MessageId id) const {
    auto it = relays_.find(id);
    return it == relays_.end() ? nullptr : &it->second;
  }
  std::size_t mcache_size() const { return mcache_.size(); }

  // Publish a whole message: fragment if configured, then relay to the mesh.
  Actions publish(const Message& whole, TimeMs now) {
    Actions out;
    bool frag = features_.fragmentation && mp_.fragment_count > 1 &&
                whole.size >= mp_.large_msg_threshold;
    out.published =
        frag ? fragment_message(whole, mp_.fragment_count)
             : std::vector<Message>{whole};
    for (const Message& m : out.published) {
      remember(m, now);
      schedule_forwards(m, mesh_, now, out);
    }
    return out;
  }

  // A transfer of msg from `from` completed at `now`. `direct` marks an
  // IWANT response, which may legitimately arrive from a non-mesh peer.
  Actions on_message(const Message& msg, PeerId from, TimeMs now,
                     bool direct = false) {
    if (!direct && !in_mesh(from))
      throw std::logic_error("gossim: payload from non-neighbor");
    Actions out;
    if (has_seen(msg.id)) {
      if (ledger_) ledger_->on_duplicate(self_, msg.id);
      // Suppression treats the payload as an implicit IDONTWANT: the sender
      // evidently has the message, so a queued send back to it is redundant.
      if (features_.idontwant) note_peer_has(msg.id, from, now, out);
      return out;
    }
    remember(msg, now);
    if (msg.is_fragment()) {
      track_fragment(msg, now);
    } else if (ledger_) {
      ledger_->on_complete(self_, msg.id, now);
    }
    const std::vector<PeerId>& dw = dontwant(msg.id);
    std::vector<PeerId> others;  // mesh minus sender minus IDONTWANT senders
    others.reserve(mesh_.size());
    for (PeerId p : mesh_) {
      if (p == from) continue;
      if (std::find(dw.begin(), dw.end(), p) != dw.end()) continue;
      others.push_back(p);
    }
    if (features_.idontwant && msg.size >= mp_.large_msg_threshold &&
        !others.empty()) {
      out.controls.push_back({RpcKind::IDONTWANT, {msg.id}, others});
    }
    schedule_forwards(msg, others, now, out);
    return out;
  }

  Actions on_idontwant(const std::vector<MessageId>& ids, PeerId from,
                       TimeMs now) {
    Actions out;
    for (MessageId id : ids) note_peer_has(id, from, now, out);
    return out;
  }

  Actions on_ihave(const std::vector<MessageId>& ids, PeerId from, TimeMs now) {
    Actions out;
    std::vector<MessageId> wants;
    for (MessageId id : ids) {
      if (has_seen(id)) continue;
      auto it = iwant_last_.find(id);
      if (it != iwant_last_.end() &&
          now - it->second < mp_.heartbeat_interval_ms)
        continue;
      iwant_last_[id] = now;
      wants.push_back(id);
    }
    if (!wants.empty()) {
      if (ledger_) ledger_->add_iwant_requests(wants.size());
      out.controls.push_back({RpcKind::IWANT, std::move(wants), {from}});
    }
    return out;
  }

  Actions on_iwant(const std::vector<MessageId>& ids, PeerId from, TimeMs now) {
    (void)now;
    Actions out;
    for (MessageId id : ids) {
      auto it = mcache_.find(id);
      if (it != mcache_.end()) out.respond.emplace_back(it->second, from);
    }
    return out;
  }

  // Heartbeat: age the mcache and gossip IHAVE for recent ids to a random
  // non-mesh sample.
  Actions heartbeat(TimeMs now) {
    (void)now;
    Actions out;
    ++hb_counter_;
    while (!mcache_age_.empty() &&
           mcache_age_.front().second + mp_.mcache_history <= hb_counter_) {
      mcache_.erase(mcache_age_.front().first);
      mcache_age_.pop_front();
    }
    std::vector<MessageId> ids;
    for (const auto& [id, born] : mcache_age_)
      if (born + mp_.mcache_gossip_window >= hb_counter_) ids.push_back(id);
    if (ids.empty()) return out;
    const std::uint64_t non_mesh = gossip_peers_.size();
    if (non_mesh == 0) return out;
    std::uint64_t want = std::max<std::int64_t>(
        mp_.d_lazy, ceil_eps(mp_.gossip_factor * static_cast<double>(non_mesh)));
    if (want > non_mesh) want = non_mesh;
    if (want == 0) return out;
    auto picks = rng_.sample_distinct(static_cast<std::uint32_t>(non_mesh),
                                      static_cast<std::size_t>(want),
                                      [](std::uint32_t) { return false; });
    std::vector<PeerId> targets;
    targets.reserve(picks.size());
    for (std::uint32_t i : picks) targets.push_back(gossip_peers_[i]);
    out.controls.push_back({RpcKind::IHAVE, std::move(ids), std::move(targets)});
    return out;
  }

  // Transport ack: the sender now knows this job's transfer completed.
  Actions on_job_acked(MessageId msg, std::uint32_t job_index, TimeMs now) {
    Actions out;
    auto it = relays_.find(msg);
    if (it == relays_.end()) return out;
    SendJob& job = it->second.jobs[job_index];
    job.state = JobState::done;
    if (release_active_ && msg == active_msg_ && job.group == active_group_) {
      if (--active_pending_ == 0) release_next(now, out);
    }
    return out;
  }

  Actions on_stagger_timeout(std::uint64_t seq, TimeMs now) {
    Actions out;
    if (release_active_ && seq == release_seq_) release_next(now, out);
    return out;
  }

  void mark_started(MessageId msg, std::uint32_t job_index, TimeMs now) {
    SendJob& job = relays_.at(msg).jobs[job_index];
    job.state = JobState::in_flight;
    job.start_time = now;
  }

  const std::vector<PeerId>& dontwant(MessageId id) const {
    static const std::vector<PeerId> kEmpty;
    auto it = dontwant_.find(id);
    return it == dontwant_.end() ? kEmpty : it->second;
  }

 private:
  void remember(const Message& m, TimeMs now) {
    seen_.emplace(m.id, now);
    mcache_.emplace(m.id, m);
    mcache_age_.emplace_back(m.id, hb_counter_);
  }

  // Record that `from` holds message `id` (explicit IDONTWANT or an observed
  // duplicate) and cancel any still-queued send toward it.
  void note_peer_has(MessageId id, PeerId from, TimeMs now, Actions& out) {
    auto& dw = dontwant_[id];
    if (std::find(dw.begin(), dw.end(), from) == dw.end()) dw.push_back(from);
    auto it = relays_.find(id);
    if (it == relays_.end()) return;
    for (SendJob& job : it->second.jobs) {
      if (job.target == from && job.state == JobState::queued) {
        job.state = JobState::canceled;
        if (ledger_) ledger_->on_canceled(id, 1);
        // A canceled job ends the wait for it just like a completion
        // would; move the release chain along once the group drains.
        if (release_active_ && id == active_msg_ &&
            job.group == active_group_) {
          if (--active_pending_ == 0) release_next(now, out);
        }
      }
    }
  }

  void track_fragment(const Message& msg, TimeMs now) {
    auto& re = reassembly_[msg.parent];
    if (re.got.empty()) re.got.assign(msg.fragment_total, false);
    if (!re.got[msg.fragment_index]) {
      re.got[msg.fragment_index] = true;
      ++re.received;
    }
    if (re.received == msg.fragment_total) {
      if (ledger_) ledger_->on_complete(self_, msg.parent, now);
      reassembly_.erase(msg.parent);
    }
  }

  void schedule_forwards(const Message& msg, const std::vector<PeerId>& succ,
                         TimeMs now, Actions& out) {
    if (succ.empty()) return;
    bool staggered = features_.stagger && msg.size >= mp_.large_msg_threshold;
    RelayPlan plan;
    plan.id = msg.id;
    plan.staggered = staggered;
    std::vector<PeerId> order = succ;
    if (staggered) rng_.shuffle(order);
    plan.jobs.reserve(order.size());
    const std::uint32_t k =
        staggered ? static_cast<std::uint32_t>(mp_.stagger_group_size)
                  : static_cast<std::uint32_t>(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      SendJob job;
      job.target = order[i];
      job.group = static_cast<std::uint32_t>(i / k);
      job.enqueue_time = now;
      plan.jobs.push_back(job);
    }
    for (std::uint32_t b = 0; b < plan.jobs.size(); b += k) {
      std::uint32_t e = std::min<std::uint32_t>(b + k,
                                                static_cast<std::uint32_t>(plan.jobs.size()));
      plan.groups.emplace_back(b, e);
    }
    auto [it, fresh] = relays_.emplace(msg.id, std::move(plan));
    if (!fresh) return;  // one relay plan per message per node
    if (!staggered) {
      for (std::uint32_t i = 0; i < it->second.jobs.size(); ++i)
        out.start.push_back({msg.id, i});
      return;
    }
    ring_.push_back(msg.id);
    if (!release_active_) release_next(now, out);
  }

  // Release the next stagger group, rotating round-robin across messages:
  // the message whose turn just ended re-enters at the back, behind any
  // messages that queued while it was active.
  void release_next(TimeMs now, Actions& out) {
    if (release_active_) {
      RelayPlan& prev = relays_.at(active_msg_);
      if (prev.next_group < prev.groups.size()) ring_.push_back(active_msg_);
      release_active_ = false;
    }
    while (!ring_.empty()) {
      MessageId m = ring_.front();
      ring_.pop_front();
      RelayPlan& plan = relays_.at(m);
      std::uint32_t pending = 0;
      std::uint32_t g = 0;
      while (plan.next_group < plan.groups.size()) {
        g = plan.next_group++;
        auto [b, e] = plan.groups[g];
        for (std::uint32_t i = b; i < e; ++i)
          if (plan.jobs[i].state == JobState::queued) {
            out.start.push_back({m, i});
            ++pending;
          }
        if (pending) break;  // fully-canceled groups are skipped
      }
      if (!pending) continue;
      release_active_ = true;
      ++release_seq_;
      active_msg_ = m;
      active_group_ = g;
      active_pending_ = pending;
      out.arm_stagger = {{release_seq_, now + mp_.stagger_interval_ms}};
      return;
    }
  }

  struct Reassembly {
    std::vector<bool> got;
    std::uint32_t received = 0;
  };

  PeerId self_;
  std::vector<PeerId> mesh_;
  std::vector<PeerId> gossip_peers_;  // non-mesh peers this node knows
  MeshParams mp_;
  Features features_;
  Rng rng_;
  MetricsLedger* ledger_;
  TimeMs heartbeat_jitter_ = 0.0;

  std::unordered_map<MessageId, TimeMs> seen_;
  std::unordered_map<MessageId, Message> mcache_;
  std::deque<std::pair<MessageId, std::uint32_t>> mcache_age_;  // (id, born hb)
  std::unordered_map<MessageId, std::vector<PeerId>> dontwant_;
  std::unordered_map<MessageId, TimeMs> iwant_last_;
  std::unordered_map<MessageId, Reassembly> reassembly_;
  std::unordered_map<MessageId, RelayPlan> relays_;
  std::uint32_t hb_counter_ = 0;

  // Node-wide stagger rotation: one serialized release chain shared by all
  // staggered relay plans on this node.
  std::deque<MessageId> ring_;
  bool release_active_ = false;
  std::uint64_t release_seq_ = 0;
  MessageId active_msg_ = 0;
  std::uint32_t active_group_ = 0;
  std::uint32_t active_pending_ = 0;
};

}  // namespace gossim
