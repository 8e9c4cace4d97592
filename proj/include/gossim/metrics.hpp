#pragma once

// Run bookkeeping: per-message coverage latency, duplicate and cancellation
// counts, byte accounting by category, and the closed-form latency estimator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "gossim/message.hpp"
#include "gossim/topology.hpp"
#include "gossim/util.hpp"

namespace gossim {

enum class RpcKind { IHAVE, IWANT, IDONTWANT };

struct MessageStats {
  MessageId id = 0;
  PeerId publisher = 0;
  TimeMs publish_time = 0.0;
  bool warmup = false;
  std::uint32_t fragment_total = 1;
  std::uint32_t complete_count = 0;
  std::uint64_t duplicates = 0;      // receptions of already-seen ids
  std::uint64_t canceled_jobs = 0;   // queued sends canceled by IDONTWANT
  std::vector<TimeMs> completion;    // per node; NaN until delivered
};

// Byte counters by category; total() is the B_N aggregate.
struct ByteCounters {
  std::uint64_t payload = 0;
  std::uint64_t ihave = 0;
  std::uint64_t iwant = 0;
  std::uint64_t idontwant = 0;
  std::uint64_t framing = 0;
  std::uint64_t total() const {
    return payload + ihave + iwant + idontwant + framing;
  }
};

class MetricsLedger {
 public:
  MetricsLedger(std::uint32_t n_nodes, std::uint64_t rpc_framing_bytes,
                std::uint64_t id_wire_bytes)
      : n_nodes_(n_nodes),
        framing_bytes_(rpc_framing_bytes),
        id_bytes_(id_wire_bytes),
        node_duplicates_(n_nodes, 0) {}

  // Parent message plus the fragments it travels as (parent itself when
  // unfragmented). The publisher counts as covered at publish time.
  void on_publish(const Message& parent, bool warmup,
                  const std::vector<Message>& wire_msgs) {
    MessageStats st;
    st.id = parent.id;
    st.publisher = parent.publisher;
    st.publish_time = parent.publish_time;
    st.warmup = warmup;
    st.fragment_total = static_cast<std::uint32_t>(wire_msgs.size());
    st.completion.assign(n_nodes_, std::numeric_limits<double>::quiet_NaN());
    st.completion[parent.publisher] = parent.publish_time;
    st.complete_count = 1;
    std::size_t idx = messages_.size();
    index_[parent.id] = idx;
    for (const Message& m : wire_msgs) index_[m.id] = idx;
    messages_.push_back(std::move(st));
  }

  void on_complete(PeerId node, MessageId parent_id, TimeMs now) {
    MessageStats& st = messages_[index_.at(parent_id)];
    if (!std::isnan(st.completion[node])) return;  // publisher or bug; keep first
    st.completion[node] = now;
    ++st.complete_count;
  }

  void on_duplicate(PeerId node, MessageId any_id) {
    messages_[index_.at(any_id)].duplicates += 1;
    node_duplicates_[node] += 1;
  }

  void on_canceled(MessageId any_id, std::uint64_t count) {
    messages_[index_.at(any_id)].canceled_jobs += count;
  }

  void add_payload(std::uint64_t bytes) { bytes_.payload += bytes; }

  // One control RPC to one peer.
  void add_control(RpcKind kind, std::size_t n_ids) {
    bytes_.framing += framing_bytes_;
    std::uint64_t idb = id_bytes_ * n_ids;
    switch (kind) {
      case RpcKind::IHAVE: bytes_.ihave += idb; break;
      case RpcKind::IWANT: bytes_.iwant += idb; break;
      case RpcKind::IDONTWANT: bytes_.idontwant += idb; break;
    }
  }

  void add_iwant_requests(std::uint64_t n) { iwant_requests_ += n; }

  const std::vector<MessageStats>& messages() const { return messages_; }
  const ByteCounters& bytes() const { return bytes_; }
  std::uint64_t iwant_requests() const { return iwant_requests_; }
  const std::vector<std::uint64_t>& node_duplicates() const {
    return node_duplicates_;
  }
  std::uint32_t n_nodes() const { return n_nodes_; }

  bool message_complete(std::size_t idx) const {
    return messages_[idx].complete_count == n_nodes_;
  }
  bool all_complete() const {
    for (std::size_t i = 0; i < messages_.size(); ++i)
      if (!message_complete(i)) return false;
    return true;
  }

  std::uint64_t total_duplicates() const {
    std::uint64_t t = 0;
    for (const auto& m : messages_) t += m.duplicates;
    return t;
  }
  std::uint64_t total_canceled() const {
    std::uint64_t t = 0;
    for (const auto& m : messages_) t += m.canceled_jobs;
    return t;
  }

  // L_cov^{percent}: time until the ceil(percent% * N)-th node holds the full
  // message, relative to publish. nullopt while coverage is insufficient.
  std::optional<double> coverage_ms(std::size_t msg_idx, int percent) const {
    const MessageStats& st = messages_[msg_idx];
    std::uint64_t k = ceil_div(static_cast<std::uint64_t>(percent) * n_nodes_, 100);
    if (k == 0) k = 1;
    if (st.complete_count < k) return std::nullopt;
    std::vector<double> times;
    times.reserve(st.complete_count);
    for (double t : st.completion)
      if (!std::isnan(t)) times.push_back(t);
    std::nth_element(times.begin(), times.begin() + (k - 1), times.end());
    return times[k - 1] - st.publish_time;
  }

  // Same metric in 100 ms interval units.
  std::optional<std::int64_t> coverage_intervals(std::size_t msg_idx,
                                                 int percent) const {
    auto ms = coverage_ms(msg_idx, percent);
    if (!ms) return std::nullopt;
    return ceil_eps(*ms / 100.0);
  }

 private:
  std::uint32_t n_nodes_;
  std::uint64_t framing_bytes_;
  std::uint64_t id_bytes_;
  std::vector<MessageStats> messages_;
  std::unordered_map<MessageId, std::size_t> index_;
  ByteCounters bytes_;
  std::uint64_t iwant_requests_ = 0;
  std::vector<std::uint64_t> node_duplicates_;
};

// Per-message row for CSV output; latencies NaN when the run ended early.
struct MessageRow {
  MessageId id = 0;
  PeerId publisher = 0;
  double publish_ms = 0.0;
  double l15_ms = std::numeric_limits<double>::quiet_NaN();
  double l85_ms = std::numeric_limits<double>::quiet_NaN();
  double l100_ms = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t duplicates = 0;
  bool warmup = false;
};

struct RunSummary {
  bool complete = false;
  std::uint32_t published = 0;
  std::uint32_t measured = 0;  // non-warmup messages with full coverage
  double mean_l15 = std::numeric_limits<double>::quiet_NaN();
  double mean_l85 = std::numeric_limits<double>::quiet_NaN();
  double mean_l100 = std::numeric_limits<double>::quiet_NaN();
  double median_l100 = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> stddev_l100;  // absent below 3 measured messages
  double mean_l100_intervals = std::numeric_limits<double>::quiet_NaN();
  ByteCounters bytes;
  std::uint64_t iwant_requests = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t canceled_jobs = 0;
  std::vector<MessageRow> rows;
};

inline RunSummary summarize(const MetricsLedger& ledger) {
  RunSummary s;
  s.complete = ledger.all_complete();
  s.published = static_cast<std::uint32_t>(ledger.messages().size());
  s.bytes = ledger.bytes();
  s.iwant_requests = ledger.iwant_requests();
  s.duplicates = ledger.total_duplicates();
  s.canceled_jobs = ledger.total_canceled();

  std::vector<double> l15, l85, l100, intervals;
  for (std::size_t i = 0; i < ledger.messages().size(); ++i) {
    const MessageStats& st = ledger.messages()[i];
    MessageRow row;
    row.id = st.id;
    row.publisher = st.publisher;
    row.publish_ms = st.publish_time;
    row.duplicates = st.duplicates;
    row.warmup = st.warmup;
    if (auto v = ledger.coverage_ms(i, 15)) row.l15_ms = *v;
    if (auto v = ledger.coverage_ms(i, 85)) row.l85_ms = *v;
    if (auto v = ledger.coverage_ms(i, 100)) row.l100_ms = *v;
    s.rows.push_back(row);
    if (!st.warmup && ledger.message_complete(i)) {
      l15.push_back(row.l15_ms);
      l85.push_back(row.l85_ms);
      l100.push_back(row.l100_ms);
      intervals.push_back(static_cast<double>(*ledger.coverage_intervals(i, 100)));
    }
  }
  s.measured = static_cast<std::uint32_t>(l100.size());
  auto mean = [](const std::vector<double>& v) {
    double t = 0;
    for (double x : v) t += x;
    return v.empty() ? std::numeric_limits<double>::quiet_NaN() : t / v.size();
  };
  s.mean_l15 = mean(l15);
  s.mean_l85 = mean(l85);
  s.mean_l100 = mean(l100);
  s.mean_l100_intervals = mean(intervals);
  if (!l100.empty()) {
    std::vector<double> sorted = l100;
    std::sort(sorted.begin(), sorted.end());
    std::size_t n = sorted.size();
    s.median_l100 = n % 2 ? sorted[n / 2]
                          : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  }
  if (l100.size() >= 3) {
    double m = s.mean_l100, acc = 0;
    for (double x : l100) acc += (x - m) * (x - m);
    s.stddev_l100 = std::sqrt(acc / (l100.size() - 1));
  }
  return s;
}

// Closed-form hop-model estimates: baseline dissemination latency, the
// fragmentation pipeline bound, and the stagger coverage growth sequence.
struct StaggerGrowthRow {
  int round = 0;
  std::uint64_t added = 0;
  std::uint64_t cumulative = 0;  // peers holding the message, incl. publisher
};

struct Estimate {
  int hops = 0;
  double tau_tx_ms = 0.0;
  double baseline_ms = 0.0;
  double fragmented_tx_ms = 0.0;
  double fragmented_total_ms = 0.0;
  std::vector<StaggerGrowthRow> growth;
};

inline Estimate analytical_estimate(std::uint64_t size_bytes, double rate_mbps,
                                    double tau_p_ms, std::uint64_t n_nodes,
                                    int d, int n_fragments) {
  if (size_bytes == 0) throw ConfigError("estimate: size must be > 0");
  if (rate_mbps <= 0) throw ConfigError("estimate: rate must be > 0");
  if (n_fragments < 1) throw ConfigError("estimate: fragments must be >= 1");
  Estimate e;
  e.hops = diameter_estimate(n_nodes, d);
  // Hop-model transmission term: 8 * S / R with R in bytes/ms.
  e.tau_tx_ms = 8.0 * static_cast<double>(size_bytes) / (rate_mbps * 125.0);
  e.baseline_ms = (tau_p_ms + e.tau_tx_ms) * e.hops;
  e.fragmented_tx_ms =
      e.tau_tx_ms * (2.0 * e.hops - 1.0) / static_cast<double>(n_fragments);
  e.fragmented_total_ms = tau_p_ms * e.hops + e.fragmented_tx_ms;

  // Stagger growth: peers reached per stagger round with K=1.
  std::vector<std::uint64_t> lambda;
  std::uint64_t cum = 1;
  for (int x = 0; cum < n_nodes && x < 4096; ++x) {
    std::uint64_t added;
    if (x < d && x < 63) {
      added = 1ULL << x;
    } else {
      added = 0;
      for (int k = x - d; k < x; ++k)
        if (k >= 0) added += lambda[static_cast<std::size_t>(k)];
    }
    std::uint64_t room = n_nodes - cum;
    if (added > room) added = room;
    lambda.push_back(added);
    cum += added;
    e.growth.push_back({x, added, cum});
  }
  return e;
}

}  // namespace gossim
