#pragma once

// Deterministic discrete-event engine. Drives NodeState protocol logic over
// the flow-level transport: per-link FIFO transfers, receiver-count bandwidth
// splitting with uplink water-filling, per-RTT congestion window growth, and
// latency-only control RPC delivery. Event order is (time, insertion seq), so
// identical inputs replay identically.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "gossim/message.hpp"
#include "gossim/metrics.hpp"
#include "gossim/node.hpp"
#include "gossim/params.hpp"
#include "gossim/topology.hpp"
#include "gossim/transport.hpp"

namespace gossim {

struct PublishPlan {
  PeerId publisher = 0;
  std::uint64_t size = 0;
  TimeMs at = 0.0;
  bool warmup = false;
};

struct JobTraceRow {
  PeerId node = 0;
  MessageId msg = 0;
  PeerId target = 0;
  std::uint32_t group = 0;
  TimeMs start = 0.0;
};

struct EngineOptions {
  double horizon_ms = 0.0;
  std::vector<PublishPlan> publishes;
  std::vector<JobTraceRow>* job_trace = nullptr;  // optional diagnostics
};

class Engine {
 public:
  Engine(const Network& net, const MeshParams& mesh, const TransportParams& tp,
         const Features& features, std::uint64_t seed, MetricsLedger& ledger,
         EngineOptions opts)
      : net_(net),
        mesh_(mesh),
        tp_(tp),
        features_(features),
        seed_(seed),
        ledger_(ledger),
        horizon_(opts.horizon_ms),
        publishes_(std::move(opts.publishes)),
        trace_(opts.job_trace) {
    mesh_.validate();
    tp_.validate();
    if (mesh_.flood_publish)
      throw ConfigError("mesh.flood_publish: true is out of model scope");
    nodes_.reserve(net_.n_nodes);
    const bool has_pools = net_.gossip_candidates.size() == net_.n_nodes;
    for (PeerId p = 0; p < net_.n_nodes; ++p) {
      nodes_.emplace_back(p, net_.adj[p],
                          has_pools ? net_.gossip_candidates[p]
                                    : std::vector<PeerId>{},
                          mesh_, features_,
                          derive_seed(seed_, 0x4e0d0000ULL + p), &ledger_);
    }
    out_.assign(net_.n_nodes, {});
    in_.assign(net_.n_nodes, {});
    for (std::uint32_t i = 0; i < publishes_.size(); ++i) {
      Event e;
      e.kind = Ev::publish;
      e.t = publishes_[i].at;
      e.a = i;
      push(std::move(e));
    }
    for (PeerId p = 0; p < net_.n_nodes; ++p) {
      Event e;
      e.kind = Ev::heartbeat;
      e.t = nodes_[p].heartbeat_jitter();
      e.a = p;
      push(std::move(e));
    }
  }

  // Runs to quiescence or the horizon. True when the event queue drained
  // before the horizon.
  bool run() {
    while (!heap_.empty()) {
      Event e = pop();
      if (e.t > horizon_) {
        horizon_hit_ = true;
        break;
      }
      dispatch(e);
    }
    return !horizon_hit_;
  }

  MetricsLedger& ledger() { return ledger_; }
  NodeState& node(PeerId p) { return nodes_[p]; }
  TimeMs now() const { return now_; }

  double link_cwnd(PeerId a, PeerId b) const {
    auto it = links_.find(link_key(a, b));
    return it == links_.end() ? 0.0 : it->second.cwnd;
  }

  std::pair<std::uint64_t, std::uint64_t> link_bytes(PeerId a, PeerId b) const {
    auto it = links_.find(link_key(a, b));
    if (it == links_.end()) return {0, 0};
    return {it->second.bytes_sent, it->second.bytes_delivered};
  }

  // After a natural (non-horizon) finish every byte sent was delivered.
  bool links_conserve_bytes() const {
    for (const auto& [k, l] : links_)
      if (l.bytes_sent != l.bytes_delivered) return false;
    return true;
  }

  // (sent, delivered) summed over every directed link, including links used
  // only by direct pull responses outside the mesh.
  std::pair<std::uint64_t, std::uint64_t> total_link_bytes() const {
    std::uint64_t sent = 0, delivered = 0;
    for (const auto& [k, l] : links_) {
      sent += l.bytes_sent;
      delivered += l.bytes_delivered;
    }
    return {sent, delivered};
  }

 private:
  enum class Ev : std::uint8_t {
    publish,
    sender_done,
    deliver,
    job_ack,
    cwnd_tick,
    control,
    heartbeat,
    stagger_timeout
  };

  struct ControlBatch {
    RpcKind kind;
    std::vector<MessageId> ids;
    std::vector<PeerId> targets;
  };

  struct Event {
    TimeMs t = 0.0;
    std::uint64_t seq = 0;
    Ev kind = Ev::publish;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    std::uint64_t x = 0;
    std::uint64_t y = 0;
    bool flag = false;
    std::unique_ptr<ControlBatch> ctl;
  };

  struct EventAfter {
    bool operator()(const Event& l, const Event& r) const {
      if (l.t != r.t) return l.t > r.t;
      return l.seq > r.seq;
    }
  };

  static std::uint64_t link_key(PeerId a, PeerId b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
  }

  void push(Event e) {
    e.seq = next_seq_++;
    if (e.kind != Ev::heartbeat) ++pending_work_;
    heap_.push_back(std::move(e));
    std::push_heap(heap_.begin(), heap_.end(), EventAfter{});
  }

  Event pop() {
    std::pop_heap(heap_.begin(), heap_.end(), EventAfter{});
    Event e = std::move(heap_.back());
    heap_.pop_back();
    if (e.kind != Ev::heartbeat) --pending_work_;
    return e;
  }

  LinkState& link(PeerId src, PeerId dst) {
    auto [it, fresh] = links_.try_emplace(link_key(src, dst));
    if (fresh) {
      it->second.src = src;
      it->second.dst = dst;
      it->second.cwnd = static_cast<double>(tp_.initial_cwnd);
    }
    return it->second;
  }

  void dispatch(Event& e) {
    now_ = e.t;
    switch (e.kind) {
      case Ev::publish: {
        const PublishPlan& p = publishes_[e.a];
        Message whole =
            make_message(make_message_id(seed_, e.a), p.size, p.publisher, e.t);
        Actions acts = nodes_[p.publisher].publish(whole, e.t);
        ledger_.on_publish(whole, p.warmup, acts.published);
        ++publishes_issued_;
        apply_actions(p.publisher, std::move(acts), e.t);
        break;
      }
      case Ev::sender_done: {
        auto it = transfers_.find(e.x);
        if (it == transfers_.end() || it->second.epoch != e.y) break;
        complete_transfer(e.x, e.t);
        break;
      }
      case Ev::deliver: {
        const Message& m = registry_.at(e.x);
        link(e.a, e.b).bytes_delivered += m.size;
        const bool dup = nodes_[e.b].has_seen(m.id);
        Actions acts = nodes_[e.b].on_message(m, e.a, e.t, e.flag);
        apply_actions(e.b, std::move(acts), e.t);
        // A duplicate acts as an implicit IDONTWANT from the sender; drop any
        // send back to it the cancel just caught while still in the queue.
        if (dup && features_.idontwant) purge_canceled_sends(e.b, e.a, {m.id});
        break;
      }
      case Ev::job_ack: {
        Actions acts = nodes_[e.a].on_job_acked(
            e.x, static_cast<std::uint32_t>(e.y), e.t);
        apply_actions(e.a, std::move(acts), e.t);
        break;
      }
      case Ev::cwnd_tick: {
        LinkState& l = link(e.a, e.b);
        if (!l.active_tid) {
          l.ticking = false;  // dormant; re-armed on next activation
          break;
        }
        cwnd_grow(l, tp_);
        Event next;
        next.kind = Ev::cwnd_tick;
        next.t = e.t + tp_.rtt_ms();
        next.a = e.a;
        next.b = e.b;
        push(std::move(next));
        recompute({e.a}, e.t);
        break;
      }
      case Ev::control: {
        const ControlBatch& batch = *e.ctl;
        for (PeerId target : batch.targets) {
          Actions acts;
          switch (batch.kind) {
            case RpcKind::IHAVE:
              acts = nodes_[target].on_ihave(batch.ids, e.a, e.t);
              break;
            case RpcKind::IWANT:
              acts = nodes_[target].on_iwant(batch.ids, e.a, e.t);
              break;
            case RpcKind::IDONTWANT:
              acts = nodes_[target].on_idontwant(batch.ids, e.a, e.t);
              purge_canceled_sends(target, e.a, batch.ids);
              break;
          }
          apply_actions(target, std::move(acts), e.t);
        }
        break;
      }
      case Ev::heartbeat: {
        Actions acts = nodes_[e.a].heartbeat(e.t);
        bool quiet = acts.controls.empty() && acts.start.empty() &&
                     acts.respond.empty();
        apply_actions(e.a, std::move(acts), e.t);
        bool done = quiet && publishes_issued_ == publishes_.size() &&
                    pending_work_ == 0 && ledger_.all_complete();
        if (!done) {
          Event next;
          next.kind = Ev::heartbeat;
          next.t = e.t + mesh_.heartbeat_interval_ms;
          next.a = e.a;
          push(std::move(next));
        }
        break;
      }
      case Ev::stagger_timeout: {
        Actions acts = nodes_[e.a].on_stagger_timeout(e.x, e.t);
        apply_actions(e.a, std::move(acts), e.t);
        break;
      }
    }
  }

  void apply_actions(PeerId node, Actions&& acts, TimeMs now) {
    for (Message& m : acts.published) registry_.emplace(m.id, std::move(m));
    for (ControlOut& c : acts.controls) {
      for (std::size_t i = 0; i < c.targets.size(); ++i)
        ledger_.add_control(c.kind, c.ids.size());
      Event e;
      e.kind = Ev::control;
      e.t = now + tp_.latency_ms;
      e.a = node;
      e.ctl = std::make_unique<ControlBatch>(
          ControlBatch{c.kind, std::move(c.ids), std::move(c.targets)});
      push(std::move(e));
    }
    for (const JobStart& js : acts.start) {
      const RelayPlan* plan = nodes_[node].relay(js.msg);
      const SendJob& job = plan->jobs[js.job_index];
      if (trace_)
        trace_->push_back({node, js.msg, job.target, job.group, now});
      // The job stays `queued` until its transfer reaches the wire; while it
      // waits in the link queue an IDONTWANT can still cancel it.
      enqueue_send(node, job.target, js.msg, true, js.job_index, false, now);
    }
    for (const auto& [msg, to] : acts.respond)
      enqueue_send(node, to, msg.id, false, 0, true, now);
    if (acts.arm_stagger) {
      Event e;
      e.kind = Ev::stagger_timeout;
      e.t = acts.arm_stagger->second;
      e.a = node;
      e.x = acts.arm_stagger->first;
      push(std::move(e));
    }
  }

  // After an IDONTWANT from `dst` cancels jobs at `src`, drop the matching
  // sends still waiting in the link queue so they never reach the wire.
  void purge_canceled_sends(PeerId src, PeerId dst,
                            const std::vector<MessageId>& ids) {
    auto it = links_.find(link_key(src, dst));
    if (it == links_.end()) return;
    auto& fifo = it->second.fifo;
    auto canceled = [&](const PendingSend& p) {
      if (!p.has_job) return false;
      if (std::find(ids.begin(), ids.end(), p.msg) == ids.end()) return false;
      const RelayPlan* plan = nodes_[src].relay(p.msg);
      return plan && plan->jobs[p.job_index].state == JobState::canceled;
    };
    fifo.erase(std::remove_if(fifo.begin(), fifo.end(), canceled), fifo.end());
  }

  void enqueue_send(PeerId src, PeerId dst, MessageId msg, bool has_job,
                    std::uint32_t job_index, bool direct, TimeMs now) {
    LinkState& l = link(src, dst);
    PendingSend p{msg, has_job, job_index, direct};
    if (l.active_tid) {
      l.fifo.push_back(p);
      return;
    }
    activate(l, p, now);
    recompute_around(src, dst, now);
  }

  void activate(LinkState& l, const PendingSend& p, TimeMs now) {
    if (p.has_job) nodes_[l.src].mark_started(p.msg, p.job_index, now);
    if (tp_.idle_reset && l.last_activity > -1e17 &&
        now - l.last_activity > tp_.idle_timeout_ms)
      l.cwnd = static_cast<double>(tp_.initial_cwnd);
    l.last_activity = now;
    const Message& m = registry_.at(p.msg);
    std::uint64_t tid = ++tid_counter_;
    Transfer t;
    t.tid = tid;
    t.src = l.src;
    t.dst = l.dst;
    t.msg = p.msg;
    t.total = static_cast<double>(m.size);
    t.last_update = now;
    t.has_job = p.has_job;
    t.job_index = p.job_index;
    t.direct = p.direct;
    transfers_.emplace(tid, t);
    l.active_tid = tid;
    out_[l.src].push_back(tid);
    in_[l.dst].push_back(tid);
    if (!l.ticking) {
      l.ticking = true;
      Event e;
      e.kind = Ev::cwnd_tick;
      e.t = now + tp_.rtt_ms();
      e.a = l.src;
      e.b = l.dst;
      push(std::move(e));
    }
  }

  void complete_transfer(std::uint64_t tid, TimeMs now) {
    Transfer t = transfers_.at(tid);
    LinkState& l = link(t.src, t.dst);
    std::uint64_t bytes = static_cast<std::uint64_t>(t.total);
    ledger_.add_payload(bytes);
    l.bytes_sent += bytes;
    Event d;
    d.kind = Ev::deliver;
    d.t = now + tp_.latency_ms;
    d.a = t.src;
    d.b = t.dst;
    d.x = t.msg;
    d.flag = t.direct;
    push(std::move(d));
    if (t.has_job) {
      Event a;
      a.kind = Ev::job_ack;
      a.t = now + tp_.rtt_ms();
      a.a = t.src;
      a.x = t.msg;
      a.y = t.job_index;
      push(std::move(a));
    }
    auto drop = [](std::vector<std::uint64_t>& v, std::uint64_t id) {
      for (auto& e : v) {
        if (e == id) {
          e = v.back();
          v.pop_back();
          return;
        }
      }
    };
    drop(out_[t.src], tid);
    drop(in_[t.dst], tid);
    transfers_.erase(tid);
    l.active_tid = 0;
    l.last_activity = now;
    if (!l.fifo.empty()) {
      PendingSend p = l.fifo.front();
      l.fifo.pop_front();
      activate(l, p, now);
    }
    recompute_around(t.src, t.dst, now);
  }

  // An event on link (a,b) changes a's uplink contention and b's receiver
  // count; the sources needing new water levels are a plus every sender
  // currently transmitting into b.
  void recompute_around(PeerId a, PeerId b, TimeMs now) {
    scratch_sources_.clear();
    scratch_sources_.push_back(a);
    for (std::uint64_t tid : in_[b])
      scratch_sources_.push_back(transfers_.at(tid).src);
    std::sort(scratch_sources_.begin(), scratch_sources_.end());
    scratch_sources_.erase(
        std::unique(scratch_sources_.begin(), scratch_sources_.end()),
        scratch_sources_.end());
    recompute(scratch_sources_, now);
  }

  // Re-derive rates for every outgoing transfer of each source: cap by the
  // receiver's equal downlink split and the link cwnd/RTT, then water-fill
  // the sender uplink. Reschedules completion only when the rate moved.
  void recompute(const std::vector<PeerId>& sources, TimeMs now) {
    const double uplink = tp_.bytes_per_ms();
    for (PeerId s : sources) {
      auto& outs = out_[s];
      if (outs.empty()) continue;
      scratch_caps_.clear();
      for (std::uint64_t tid : outs) {
        Transfer& t = transfers_.at(tid);
        double share =
            uplink / static_cast<double>(in_[t.dst].size());
        double window = link(t.src, t.dst).cwnd / tp_.rtt_ms();
        scratch_caps_.push_back(share < window ? share : window);
      }
      double theta = waterfill_level(uplink, scratch_caps_);
      for (std::size_t i = 0; i < outs.size(); ++i) {
        Transfer& t = transfers_.at(outs[i]);
        double rate = scratch_caps_[i] < theta ? scratch_caps_[i] : theta;
        t.sent += t.rate * (now - t.last_update);
        if (t.sent > t.total) t.sent = t.total;
        t.last_update = now;
        double scale = t.rate > rate ? t.rate : rate;
        if (std::abs(t.rate - rate) <= 1e-12 * scale) continue;
        t.rate = rate;
        ++t.epoch;
        double dur = (t.total - t.sent) / rate;
        if (dur < 0) dur = 0;
        Event e;
        e.kind = Ev::sender_done;
        e.t = now + dur;
        e.x = t.tid;
        e.y = t.epoch;
        push(std::move(e));
      }
    }
  }

  const Network& net_;
  MeshParams mesh_;
  TransportParams tp_;
  Features features_;
  std::uint64_t seed_;
  MetricsLedger& ledger_;
  double horizon_;
  std::vector<PublishPlan> publishes_;
  std::vector<JobTraceRow>* trace_;

  std::vector<NodeState> nodes_;
  std::vector<Event> heap_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t pending_work_ = 0;  // scheduled non-heartbeat events
  std::uint32_t publishes_issued_ = 0;
  TimeMs now_ = 0.0;
  bool horizon_hit_ = false;

  std::unordered_map<MessageId, Message> registry_;
  std::unordered_map<std::uint64_t, LinkState> links_;
  std::unordered_map<std::uint64_t, Transfer> transfers_;
  std::uint64_t tid_counter_ = 0;
  std::vector<std::vector<std::uint64_t>> out_;  // active tids per sender
  std::vector<std::vector<std::uint64_t>> in_;   // active tids per receiver
  std::vector<PeerId> scratch_sources_;
  std::vector<double> scratch_caps_;
};

}  // namespace gossim
