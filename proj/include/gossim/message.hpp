#pragma once

// Message and fragment model. Messages are metadata-only (id, size, lineage);
// payload bytes exist solely as transfer durations and byte counters.

#include <cstdint>
#include <string>
#include <vector>

#include "gossim/params.hpp"
#include "gossim/rng.hpp"

namespace gossim {

using PeerId = std::uint32_t;
using MessageId = std::uint64_t;
using TimeMs = double;

struct Message {
  MessageId id = 0;
  std::string topic = "t0";
  std::uint64_t size = 0;  // bytes
  PeerId publisher = 0;
  TimeMs publish_time = 0.0;
  // Fragment lineage; parent == id for whole messages.
  MessageId parent = 0;
  std::uint32_t fragment_index = 0;
  std::uint32_t fragment_total = 1;  // 1 = unfragmented

  bool is_fragment() const { return fragment_total > 1; }
};

inline Message make_message(MessageId id, std::uint64_t size, PeerId publisher,
                            TimeMs publish_time) {
  Message m;
  m.id = id;
  m.size = size;
  m.publisher = publisher;
  m.publish_time = publish_time;
  m.parent = id;
  return m;
}

// Ids are derived, not sequential, so that fragment ids never collide with
// future message ids regardless of publish order.
inline MessageId make_message_id(std::uint64_t run_seed, std::uint64_t k) {
  return derive_seed(run_seed ^ 0xa5a5a5a5a5a5a5a5ULL, k * 2 + 1) | 1ULL;
}

inline MessageId make_fragment_id(MessageId parent, std::uint32_t index) {
  std::uint64_t s = parent;
  return splitmix64(s) + index;
}

// Split into n fragments of ceil(size/n) bytes each except a smaller tail.
// Example: 10 bytes in 4 fragments -> 3,3,3,1. Rejects any n that would leave
// an empty fragment (covers n > size).
inline std::vector<Message> fragment_message(const Message& msg, int n) {
  if (n < 1) throw ConfigError("fragment_count: must be >= 1");
  if (n == 1) return {msg};
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t chunk = (msg.size + un - 1) / un;
  if (un > msg.size || chunk * (un - 1) >= msg.size)
    throw ConfigError("fragment_count: message too small, would create an empty fragment");
  std::vector<Message> out;
  out.reserve(un);
  std::uint64_t remaining = msg.size;
  for (std::uint32_t k = 0; k < un; ++k) {
    Message f = msg;
    f.id = make_fragment_id(msg.id, k);
    f.size = remaining < chunk ? remaining : chunk;
    f.parent = msg.id;
    f.fragment_index = k;
    f.fragment_total = static_cast<std::uint32_t>(un);
    remaining -= f.size;
    out.push_back(f);
  }
  return out;
}

}  // namespace gossim
