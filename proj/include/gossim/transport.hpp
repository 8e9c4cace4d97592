#pragma once

// Flow-level transport primitives: per-directed-link state with a simplified
// loss-free congestion window, transfer records, and the max-min bandwidth
// sharing rule (water-filling) used to assign transfer rates.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <vector>

#include "gossim/message.hpp"
#include "gossim/params.hpp"

namespace gossim {

struct PendingSend {
  MessageId msg = 0;
  bool has_job = false;
  std::uint32_t job_index = 0;
  bool direct = false;  // IWANT response
};

struct Transfer {
  std::uint64_t tid = 0;
  PeerId src = 0;
  PeerId dst = 0;
  MessageId msg = 0;
  double total = 0.0;  // bytes
  double sent = 0.0;
  double rate = 0.0;  // bytes/ms
  TimeMs last_update = 0.0;
  std::uint64_t epoch = 0;  // invalidates superseded completion events
  bool has_job = false;
  std::uint32_t job_index = 0;
  bool direct = false;
};

// One direction of a peer connection. A link carries at most one active
// transfer; further sends queue FIFO behind it. The congestion window
// persists across transfers and grows once per RTT while the link is busy.
struct LinkState {
  PeerId src = 0;
  PeerId dst = 0;
  double cwnd = 0.0;  // bytes
  TimeMs last_activity = -std::numeric_limits<double>::infinity();
  bool ticking = false;
  std::uint64_t active_tid = 0;  // 0 = idle
  std::deque<PendingSend> fifo;
  std::uint64_t bytes_sent = 0;       // counted at sender completion
  std::uint64_t bytes_delivered = 0;  // counted at receiver delivery
};

inline void cwnd_grow(LinkState& link, const TransportParams& tp) {
  if (link.cwnd < static_cast<double>(tp.ssthresh)) {
    link.cwnd *= 2.0;  // slow start: double per RTT
  } else {
    link.cwnd += static_cast<double>(tp.mss);  // congestion avoidance
  }
  if (link.cwnd > static_cast<double>(tp.cwnd_max))
    link.cwnd = static_cast<double>(tp.cwnd_max);
}

// Max-min fair water level: rate_i = min(cap_i, theta) where theta is chosen
// so the rates sum to min(capacity, sum of caps). Caps must be positive.
inline double waterfill_level(double capacity, std::vector<double> caps) {
  std::sort(caps.begin(), caps.end());
  double remaining = capacity;
  std::size_t n = caps.size();
  for (std::size_t i = 0; i < n; ++i) {
    double share = remaining / static_cast<double>(n - i);
    if (caps[i] <= share) {
      remaining -= caps[i];
    } else {
      return share;
    }
  }
  return std::numeric_limits<double>::infinity();  // uplink not saturated
}

}  // namespace gossim
