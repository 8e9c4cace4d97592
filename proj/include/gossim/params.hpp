#pragma once

// Protocol and transport parameter blocks plus strict JSON (de)serialization.
// Parsing is strict: unknown keys and type mismatches fail with the full field
// path so config typos never silently fall back to defaults.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include <json.hpp>

namespace gossim {

using Json = nlohmann::json;

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Guarded accessor for one JSON object level. Tracks which keys were consumed
// so finish() can reject unknown ones.
class JsonObj {
 public:
  JsonObj(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  void get_or(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!j_.at(key).is_number()) throw ConfigError("");
        out = j_.at(key).get<double>();
      } else {
        out = j_.at(key).get<T>();
      }
    } catch (const std::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  template <typename T>
  void require(const std::string& key, T& out) {
    if (!j_.contains(key)) throw ConfigError(path_ + "." + key + ": missing");
    get_or(key, out);
  }

  const Json* sub(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    used_.insert(key);
    return &j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key()))
        throw ConfigError(path_ + "." + it.key() + ": unknown key");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::unordered_set<std::string> used_;
};

// Mesh / gossip parameters (per-node protocol constants).
struct MeshParams {
  int d = 8;
  int d_low = 6;
  int d_high = 12;
  int d_lazy = 6;
  int d_out = 3;  // parsed and validated; inert in the static-mesh model
  double gossip_factor = 0.05;
  double heartbeat_interval_ms = 1000.0;
  double stagger_interval_ms = 200.0;
  int stagger_group_size = 1;  // K: parallel sends per stagger group
  std::uint64_t large_msg_threshold = 16384;  // bytes; 16 KiB
  int fragment_count = 4;  // n, applied only when fragmentation is enabled
  bool flood_publish = false;
  int mcache_history = 5;        // heartbeats a message stays retrievable
  int mcache_gossip_window = 3;  // heartbeats a message stays announced
  // Peers a node knows about (mesh neighbors plus discovered extras); gossip
  // targets are drawn from the non-mesh part. 0 means full discovery: every
  // node knows the whole network.
  std::uint32_t known_peers_cap = 24;

  void validate() const {
    if (d_low > d || d > d_high)
      throw ConfigError("mesh: requires d_low <= d <= d_high");
    if (d_low < 1) throw ConfigError("mesh.d_low: must be >= 1");
    if (d_out > d_low) throw ConfigError("mesh.d_out: must be <= d_low");
    if (d_lazy < 0) throw ConfigError("mesh.d_lazy: must be >= 0");
    if (gossip_factor < 0.0 || gossip_factor > 1.0)
      throw ConfigError("mesh.gossip_factor: must be in [0,1]");
    if (heartbeat_interval_ms <= 0)
      throw ConfigError("mesh.heartbeat_interval_ms: must be > 0");
    if (stagger_interval_ms <= 0)
      throw ConfigError("mesh.stagger_interval_ms: must be > 0");
    if (stagger_group_size < 1)
      throw ConfigError("mesh.stagger_group_size: must be >= 1");
    if (large_msg_threshold < 1)
      throw ConfigError("mesh.large_msg_threshold: must be >= 1");
    if (fragment_count < 1)
      throw ConfigError("mesh.fragment_count: must be >= 1");
    if (mcache_history < 1)
      throw ConfigError("mesh.mcache_history: must be >= 1");
    if (mcache_gossip_window < 1 || mcache_gossip_window > mcache_history)
      throw ConfigError("mesh.mcache_gossip_window: must be in [1, mcache_history]");
    if (known_peers_cap != 0 &&
        known_peers_cap < static_cast<std::uint32_t>(d_high))
      throw ConfigError("mesh.known_peers_cap: must be 0 or >= d_high");
  }

  void from_json(const Json& j, const std::string& path) {
    JsonObj o(j, path);
    o.get_or("d", d);
    o.get_or("d_low", d_low);
    o.get_or("d_high", d_high);
    o.get_or("d_lazy", d_lazy);
    o.get_or("d_out", d_out);
    o.get_or("gossip_factor", gossip_factor);
    o.get_or("heartbeat_interval_ms", heartbeat_interval_ms);
    o.get_or("stagger_interval_ms", stagger_interval_ms);
    o.get_or("stagger_group_size", stagger_group_size);
    o.get_or("large_msg_threshold", large_msg_threshold);
    o.get_or("fragment_count", fragment_count);
    o.get_or("flood_publish", flood_publish);
    o.get_or("mcache_history", mcache_history);
    o.get_or("mcache_gossip_window", mcache_gossip_window);
    o.get_or("known_peers_cap", known_peers_cap);
    o.finish();
  }

  Json to_json() const {
    return Json{{"d", d},
                {"d_low", d_low},
                {"d_high", d_high},
                {"d_lazy", d_lazy},
                {"d_out", d_out},
                {"gossip_factor", gossip_factor},
                {"heartbeat_interval_ms", heartbeat_interval_ms},
                {"stagger_interval_ms", stagger_interval_ms},
                {"stagger_group_size", stagger_group_size},
                {"large_msg_threshold", large_msg_threshold},
                {"fragment_count", fragment_count},
                {"flood_publish", flood_publish},
                {"mcache_history", mcache_history},
                {"mcache_gossip_window", mcache_gossip_window},
                {"known_peers_cap", known_peers_cap}};
  }
};

// Link/transport model parameters.
struct TransportParams {
  double bandwidth_mbps = 50.0;  // per node, each direction
  double latency_ms = 100.0;     // one-way propagation delay tau_p
  std::uint64_t mss = 1460;
  std::uint64_t initial_cwnd = 14600;  // 10 x MSS
  std::uint64_t ssthresh = 65536;      // 64 KiB
  std::uint64_t cwnd_max = 1048576;    // 1 MiB
  bool idle_reset = false;
  double idle_timeout_ms = 1000.0;
  std::uint64_t rpc_framing_bytes = 64;
  std::uint64_t id_wire_bytes = 32;

  double bytes_per_ms() const { return bandwidth_mbps * 125.0; }
  double rtt_ms() const { return 2.0 * latency_ms; }

  void validate() const {
    if (bandwidth_mbps <= 0)
      throw ConfigError("transport.bandwidth_mbps: must be > 0");
    if (latency_ms <= 0) throw ConfigError("transport.latency_ms: must be > 0");
    if (mss < 1) throw ConfigError("transport.mss: must be >= 1");
    if (initial_cwnd < mss)
      throw ConfigError("transport.initial_cwnd: must be >= mss");
    if (cwnd_max < initial_cwnd)
      throw ConfigError("transport.cwnd_max: must be >= initial_cwnd");
    if (idle_timeout_ms <= 0)
      throw ConfigError("transport.idle_timeout_ms: must be > 0");
  }

  void from_json(const Json& j, const std::string& path) {
    JsonObj o(j, path);
    o.get_or("bandwidth_mbps", bandwidth_mbps);
    o.get_or("latency_ms", latency_ms);
    o.get_or("mss", mss);
    o.get_or("initial_cwnd", initial_cwnd);
    o.get_or("ssthresh", ssthresh);
    o.get_or("cwnd_max", cwnd_max);
    o.get_or("idle_reset", idle_reset);
    o.get_or("idle_timeout_ms", idle_timeout_ms);
    o.get_or("rpc_framing_bytes", rpc_framing_bytes);
    o.get_or("id_wire_bytes", id_wire_bytes);
    o.finish();
  }

  Json to_json() const {
    return Json{{"bandwidth_mbps", bandwidth_mbps},
                {"latency_ms", latency_ms},
                {"mss", mss},
                {"initial_cwnd", initial_cwnd},
                {"ssthresh", ssthresh},
                {"cwnd_max", cwnd_max},
                {"idle_reset", idle_reset},
                {"idle_timeout_ms", idle_timeout_ms},
                {"rpc_framing_bytes", rpc_framing_bytes},
                {"id_wire_bytes", id_wire_bytes}};
  }
};

// Which of the three large-message extensions are active.
struct Features {
  bool idontwant = true;
  bool stagger = false;
  bool fragmentation = false;

  void from_json(const Json& j, const std::string& path) {
    JsonObj o(j, path);
    o.get_or("idontwant", idontwant);
    o.get_or("stagger", stagger);
    o.get_or("fragmentation", fragmentation);
    o.finish();
  }

  Json to_json() const {
    return Json{{"idontwant", idontwant},
                {"stagger", stagger},
                {"fragmentation", fragmentation}};
  }
};

}  // namespace gossim
