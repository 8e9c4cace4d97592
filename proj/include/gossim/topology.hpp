#pragma once

// Random regular-ish mesh construction via the configuration model (stub
// pairing) with edge-rewire repair, plus the hop-count estimate used by the
// analytical latency model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <unordered_set>
#include <vector>

#include "gossim/message.hpp"
#include "gossim/params.hpp"
#include "gossim/rng.hpp"
#include "gossim/util.hpp"

namespace gossim {

struct Network {
  std::uint32_t n_nodes = 0;
  std::vector<std::vector<PeerId>> adj;  // sorted neighbor lists
  // Non-mesh peers each node knows about (sorted): the candidate pool for
  // heartbeat gossip. Sized by MeshParams::known_peers_cap at build time.
  std::vector<std::vector<PeerId>> gossip_candidates;

  std::size_t degree(PeerId p) const { return adj[p].size(); }

  std::vector<std::pair<PeerId, PeerId>> edges() const {
    std::vector<std::pair<PeerId, PeerId>> out;
    for (PeerId a = 0; a < n_nodes; ++a)
      for (PeerId b : adj[a])
        if (a < b) out.emplace_back(a, b);
    return out;
  }

  bool connected() const {
    if (n_nodes == 0) return false;
    std::vector<char> vis(n_nodes, 0);
    std::queue<PeerId> q;
    q.push(0);
    vis[0] = 1;
    std::uint32_t seen = 1;
    while (!q.empty()) {
      PeerId u = q.front();
      q.pop();
      for (PeerId v : adj[u]) {
        if (!vis[v]) {
          vis[v] = 1;
          ++seen;
          q.push(v);
        }
      }
    }
    return seen == n_nodes;
  }

  bool degrees_within(int lo, int hi) const {
    for (const auto& nb : adj) {
      if (static_cast<int>(nb.size()) < lo || static_cast<int>(nb.size()) > hi)
        return false;
    }
    return true;
  }

  double mean_degree() const {
    std::uint64_t total = 0;
    for (const auto& nb : adj) total += nb.size();
    return n_nodes ? static_cast<double>(total) / n_nodes : 0.0;
  }

  std::uint64_t fingerprint() const {
    std::uint64_t h = fnv1a_init();
    fnv1a_add(h, n_nodes);
    for (PeerId a = 0; a < n_nodes; ++a)
      for (PeerId b : adj[a])
        if (a < b) fnv1a_add(h, (static_cast<std::uint64_t>(a) << 32) | b);
    return h;
  }
};

// Estimated overlay hop count H = ceil(ln N / ln d).
inline int diameter_estimate(std::uint64_t n_nodes, int d) {
  if (n_nodes < 1) throw ConfigError("diameter_estimate: n_nodes must be >= 1");
  if (d < 2) throw ConfigError("diameter_estimate: d must be >= 2");
  if (n_nodes == 1) return 0;
  return static_cast<int>(
      ceil_eps(std::log(static_cast<double>(n_nodes)) / std::log(static_cast<double>(d))));
}

namespace detail {

inline std::uint64_t edge_key(PeerId a, PeerId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

// One full construction attempt. Returns an empty network on failure.
inline Network try_build(std::uint32_t n, int d, Rng& rng) {
  Network net;
  net.n_nodes = n;
  net.adj.assign(n, {});
  std::unordered_set<std::uint64_t> edge_set;
  edge_set.reserve(static_cast<std::size_t>(n) * d);
  std::vector<std::pair<PeerId, PeerId>> edge_list;
  edge_list.reserve(static_cast<std::size_t>(n) * d / 2);

  auto add_edge = [&](PeerId a, PeerId b) {
    edge_set.insert(edge_key(a, b));
    edge_list.emplace_back(a, b);
    net.adj[a].push_back(b);
    net.adj[b].push_back(a);
  };
  auto ok = [&](PeerId a, PeerId b) {
    return a != b && !edge_set.count(edge_key(a, b));
  };

  std::vector<PeerId> stubs;
  stubs.reserve(static_cast<std::size_t>(n) * d);
  for (PeerId p = 0; p < n; ++p)
    for (int k = 0; k < d; ++k) stubs.push_back(p);

  // Repeated pairing passes: shuffle, pair adjacent stubs, carry rejects.
  for (int pass = 0; pass < 20 && stubs.size() > 1; ++pass) {
    rng.shuffle(stubs);
    std::vector<PeerId> rejected;
    for (std::size_t i = 0; i + 1 < stubs.size(); i += 2) {
      PeerId a = stubs[i], b = stubs[i + 1];
      if (ok(a, b)) {
        add_edge(a, b);
      } else {
        rejected.push_back(a);
        rejected.push_back(b);
      }
    }
    if (stubs.size() % 2) rejected.push_back(stubs.back());
    stubs.swap(rejected);
  }

  // Rewire repair: for a stuck stub pair (a,b), pick an existing edge (x,y)
  // and replace it with (a,x) and (b,y) when all constraints hold.
  auto remove_edge = [&](std::size_t idx) {
    auto [x, y] = edge_list[idx];
    edge_set.erase(edge_key(x, y));
    edge_list[idx] = edge_list.back();
    edge_list.pop_back();
    auto drop = [&](std::vector<PeerId>& v, PeerId p) {
      v.erase(std::find(v.begin(), v.end(), p));
    };
    drop(net.adj[x], y);
    drop(net.adj[y], x);
  };
  while (stubs.size() > 1) {
    PeerId a = stubs[stubs.size() - 1];
    PeerId b = stubs[stubs.size() - 2];
    bool placed = false;
    for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
      std::size_t idx = static_cast<std::size_t>(rng.bounded(edge_list.size()));
      auto [x, y] = edge_list[idx];
      if (ok(a, x) && ok(b, y) && x != b && y != a) {
        remove_edge(idx);
        add_edge(a, x);
        add_edge(b, y);
        placed = true;
      } else if (ok(a, y) && ok(b, x) && y != b && x != a) {
        remove_edge(idx);
        add_edge(a, y);
        add_edge(b, x);
        placed = true;
      }
    }
    if (!placed) return Network{};  // give up this attempt
    stubs.pop_back();
    stubs.pop_back();
  }

  for (auto& nb : net.adj) std::sort(nb.begin(), nb.end());
  return net;
}

// Fill per-node gossip candidate pools: each node knows its mesh neighbors
// plus enough random non-mesh peers to reach known_peers_cap known peers in
// total (cap 0 = the node knows everyone). Deterministic in (net, cap, seed).
inline void fill_gossip_candidates(Network& net, std::uint32_t cap,
                                   std::uint64_t seed) {
  net.gossip_candidates.assign(net.n_nodes, {});
  for (PeerId p = 0; p < net.n_nodes; ++p) {
    const auto& mesh = net.adj[p];
    const std::uint64_t pool = net.n_nodes - 1 - mesh.size();
    if (pool == 0) continue;
    auto in_mesh = [&](PeerId c) {
      return std::binary_search(mesh.begin(), mesh.end(), c);
    };
    std::uint64_t want = pool;
    if (cap != 0 && cap > mesh.size()) want = std::min<std::uint64_t>(pool, cap - mesh.size());
    if (cap != 0 && cap <= mesh.size()) want = 0;
    auto& out = net.gossip_candidates[p];
    if (want == pool) {
      out.reserve(pool);
      for (PeerId c = 0; c < net.n_nodes; ++c)
        if (c != p && !in_mesh(c)) out.push_back(c);
      continue;
    }
    if (want == 0) continue;
    Rng rng(derive_seed(seed, 0x6b6e6f77ULL + p));
    out = rng.sample_distinct(net.n_nodes, static_cast<std::size_t>(want),
                              [&](std::uint32_t c) { return c == p || in_mesh(c); });
    std::sort(out.begin(), out.end());
  }
}

}  // namespace detail

// Build an undirected mesh where every node has degree d (configuration
// model), repaired and retried until connected with degrees in
// [d_low, d_high]. Deterministic in (n, params, seed).
inline Network build_network(std::uint32_t n_nodes, const MeshParams& mesh,
                             std::uint64_t seed) {
  mesh.validate();
  if (n_nodes < 2) throw ConfigError("n_nodes: must be >= 2");
  if (static_cast<std::uint64_t>(mesh.d_low) > n_nodes - 1)
    throw ConfigError("n_nodes: too small for mesh.d_low");

  // Dense corner: with d >= N-1 the complete graph is the only candidate.
  if (static_cast<std::uint64_t>(mesh.d) >= n_nodes - 1) {
    Network net;
    net.n_nodes = n_nodes;
    net.adj.assign(n_nodes, {});
    for (PeerId a = 0; a < n_nodes; ++a)
      for (PeerId b = 0; b < n_nodes; ++b)
        if (a != b) net.adj[a].push_back(b);
    if (!net.degrees_within(mesh.d_low, mesh.d_high))
      throw ConfigError("n_nodes: complete graph degree outside [d_low, d_high]");
    detail::fill_gossip_candidates(net, mesh.known_peers_cap, seed);
    return net;
  }

  if ((static_cast<std::uint64_t>(n_nodes) * mesh.d) % 2 != 0)
    throw ConfigError("n_nodes: N * d must be even for a d-regular mesh");

  Rng rng(derive_seed(seed, 0x70704f10ULL));
  for (int attempt = 0; attempt < 32; ++attempt) {
    Network net = detail::try_build(n_nodes, mesh.d, rng);
    if (net.n_nodes == 0) continue;
    if (!net.degrees_within(mesh.d_low, mesh.d_high)) continue;
    if (!net.connected()) continue;
    detail::fill_gossip_candidates(net, mesh.known_peers_cap, seed);
    return net;
  }
  throw ConfigError("topology: failed to build a connected mesh after 32 attempts");
}

}  // namespace gossim
