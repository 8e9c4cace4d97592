#pragma once

// Scenario orchestration: config schema (strict JSON), single-run execution,
// CSV/JSON output emission, experiment presets, and parameter sweeps.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gossim/engine.hpp"
#include "gossim/message.hpp"
#include "gossim/metrics.hpp"
#include "gossim/params.hpp"
#include "gossim/topology.hpp"

namespace gossim {

struct ScenarioConfig {
  std::uint32_t n_nodes = 1000;
  std::uint32_t n_publishers = 12;
  std::int32_t n_messages = -1;  // -1: one message per publisher
  std::uint64_t message_size = 200000;  // bytes
  double inter_message_delay_ms = 4000.0;
  std::uint32_t warmup_count = 2;
  std::uint64_t seed = 1;
  double horizon_ms = -1.0;  // -1: publish span + 60 s
  bool emit_edges = false;
  bool collect_job_trace = false;
  MeshParams mesh;
  TransportParams transport;
  Features features;

  std::uint32_t effective_messages() const {
    return n_messages < 0 ? n_publishers
                          : static_cast<std::uint32_t>(n_messages);
  }

  double publish_span_ms() const {
    std::uint32_t m = effective_messages();
    return m > 0 ? (m - 1) * inter_message_delay_ms : 0.0;
  }

  double effective_horizon() const {
    return horizon_ms < 0 ? publish_span_ms() + 60000.0 : horizon_ms;
  }

  void validate() const {
    if (n_nodes < 2) throw ConfigError("n_nodes: must be >= 2");
    if (n_publishers < 1 || n_publishers > n_nodes)
      throw ConfigError("n_publishers: must be in [1, n_nodes]");
    if (n_messages == 0 || n_messages < -1)
      throw ConfigError("n_messages: must be -1 or >= 1");
    if (message_size < 1) throw ConfigError("message_size: must be >= 1");
    if (inter_message_delay_ms <= 0)
      throw ConfigError("inter_message_delay_ms: must be > 0");
    if (horizon_ms >= 0 && horizon_ms <= publish_span_ms())
      throw ConfigError("horizon_ms: must exceed the publish span");
    mesh.validate();
    transport.validate();
    if (mesh.flood_publish)
      throw ConfigError("mesh.flood_publish: true is out of model scope");
  }

  static ScenarioConfig from_json(const Json& j) {
    ScenarioConfig c;
    JsonObj o(j, "config");
    o.get_or("n_nodes", c.n_nodes);
    o.get_or("n_publishers", c.n_publishers);
    o.get_or("n_messages", c.n_messages);
    o.get_or("message_size", c.message_size);
    o.get_or("inter_message_delay_ms", c.inter_message_delay_ms);
    o.get_or("warmup_count", c.warmup_count);
    o.get_or("seed", c.seed);
    o.get_or("horizon_ms", c.horizon_ms);
    o.get_or("emit_edges", c.emit_edges);
    o.get_or("collect_job_trace", c.collect_job_trace);
    if (const Json* m = o.sub("mesh")) c.mesh.from_json(*m, "config.mesh");
    if (const Json* t = o.sub("transport"))
      c.transport.from_json(*t, "config.transport");
    if (const Json* f = o.sub("features"))
      c.features.from_json(*f, "config.features");
    o.finish();
    c.validate();
    return c;
  }

  Json to_json() const {
    return Json{{"n_nodes", n_nodes},
                {"n_publishers", n_publishers},
                {"n_messages", n_messages},
                {"message_size", message_size},
                {"inter_message_delay_ms", inter_message_delay_ms},
                {"warmup_count", warmup_count},
                {"seed", seed},
                {"horizon_ms", horizon_ms},
                {"emit_edges", emit_edges},
                {"collect_job_trace", collect_job_trace},
                {"mesh", mesh.to_json()},
                {"transport", transport.to_json()},
                {"features", features.to_json()}};
  }
};

// Apply "dotted.path=value" overrides on top of a config JSON document.
inline Json apply_overrides(Json j, const std::vector<std::string>& kvs) {
  for (const std::string& kv : kvs) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override '" + kv + "': expected key=value");
    std::string path = kv.substr(0, eq);
    std::string raw = kv.substr(eq + 1);
    Json val = Json::parse(raw, nullptr, false);
    if (val.is_discarded()) val = raw;  // bare strings allowed
    Json* cur = &j;
    std::size_t pos = 0;
    while (true) {
      auto dot = path.find('.', pos);
      std::string tok = path.substr(pos, dot - pos);
      if (tok.empty()) throw ConfigError("override '" + kv + "': bad path");
      if (dot == std::string::npos) {
        (*cur)[tok] = val;
        break;
      }
      cur = &(*cur)[tok];
      pos = dot + 1;
    }
  }
  return j;
}

struct RunResult {
  ScenarioConfig cfg;
  RunSummary summary;
  MetricsLedger ledger{0, 0, 0};
  Network net;
  std::vector<JobTraceRow> trace;
};

inline RunResult run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  RunResult r;
  r.cfg = cfg;
  r.net = build_network(cfg.n_nodes, cfg.mesh, cfg.seed);

  Rng pub_rng(derive_seed(cfg.seed, 0x9b15c0deULL));
  auto pubs = pub_rng.sample_distinct(cfg.n_nodes, cfg.n_publishers,
                                      [](std::uint32_t) { return false; });
  EngineOptions opts;
  opts.horizon_ms = cfg.effective_horizon();
  std::uint32_t m = cfg.effective_messages();
  for (std::uint32_t j = 0; j < m; ++j) {
    PublishPlan p;
    p.publisher = pubs[j % pubs.size()];
    p.size = cfg.message_size;
    p.at = j * cfg.inter_message_delay_ms;
    p.warmup = j < cfg.warmup_count;
    opts.publishes.push_back(p);
  }
  if (cfg.collect_job_trace) opts.job_trace = &r.trace;

  r.ledger = MetricsLedger(cfg.n_nodes, cfg.transport.rpc_framing_bytes,
                           cfg.transport.id_wire_bytes);
  Engine eng(r.net, cfg.mesh, cfg.transport, cfg.features, cfg.seed, r.ledger,
             std::move(opts));
  eng.run();
  r.summary = summarize(r.ledger);
  return r;
}

// ---- output emission ----

inline std::string format_ms(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

inline std::string format_msg_id(MessageId id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, id);
  return buf;
}

inline std::string messages_csv(const RunSummary& s) {
  std::string out =
      "msg_id,publisher,publish_ms,l15_ms,l85_ms,l100_ms,duplicates,warmup\n";
  for (const MessageRow& r : s.rows) {
    out += format_msg_id(r.id);
    out += ',' + std::to_string(r.publisher);
    out += ',' + format_ms(r.publish_ms);
    out += ',' + format_ms(r.l15_ms);
    out += ',' + format_ms(r.l85_ms);
    out += ',' + format_ms(r.l100_ms);
    out += ',' + std::to_string(r.duplicates);
    out += r.warmup ? ",1\n" : ",0\n";
  }
  return out;
}

inline Json summary_json(const ScenarioConfig& cfg, const RunSummary& s) {
  auto num_or_null = [](double v) {
    return std::isnan(v) ? Json() : Json(v);
  };
  Json latency{{"mean_l15", num_or_null(s.mean_l15)},
               {"mean_l85", num_or_null(s.mean_l85)},
               {"mean_l100", num_or_null(s.mean_l100)},
               {"median_l100", num_or_null(s.median_l100)},
               {"stddev_l100",
                s.stddev_l100 ? Json(*s.stddev_l100) : Json()},
               {"mean_l100_intervals", num_or_null(s.mean_l100_intervals)}};
  Json bytes{{"payload", s.bytes.payload},
             {"ihave", s.bytes.ihave},
             {"iwant", s.bytes.iwant},
             {"idontwant", s.bytes.idontwant},
             {"framing", s.bytes.framing},
             {"total", s.bytes.total()}};
  return Json{{"config", cfg.to_json()},
              {"seed", cfg.seed},
              {"summary", Json{{"complete", s.complete},
                               {"published", s.published},
                               {"measured", s.measured},
                               {"latency_ms", latency},
                               {"bytes", bytes},
                               {"iwant_requests", s.iwant_requests},
                               {"duplicates", s.duplicates},
                               {"canceled_jobs", s.canceled_jobs}}}};
}

inline void write_file(const std::filesystem::path& p, const std::string& data) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << data;
}

inline void write_outputs(const std::filesystem::path& dir, const RunResult& r) {
  std::filesystem::create_directories(dir);
  write_file(dir / "messages.csv", messages_csv(r.summary));
  write_file(dir / "summary.json",
             summary_json(r.cfg, r.summary).dump(2) + "\n");
  if (r.cfg.emit_edges) {
    std::string edges;
    for (auto [a, b] : r.net.edges()) {
      edges += std::to_string(a);
      edges += ' ';
      edges += std::to_string(b);
      edges += '\n';
    }
    write_file(dir / "edges.txt", edges);
  }
}

// ---- presets ----

struct SweepCell {
  std::string name;
  ScenarioConfig cfg;
};

namespace presets {

inline ScenarioConfig scenario_base() {
  ScenarioConfig c;
  c.n_nodes = 1000;
  c.n_publishers = 12;
  c.message_size = 200000;
  c.inter_message_delay_ms = 4000.0;
  c.features.idontwant = true;
  return c;
}

// Scaling: N grows, 200 KB messages, 12 publishers, 3 s apart.
inline std::vector<SweepCell> scenario1(std::uint64_t seed) {
  std::vector<SweepCell> cells;
  for (std::uint32_t n = 2000; n <= 12000; n += 2000) {
    ScenarioConfig c = scenario_base();
    c.n_nodes = n;
    c.inter_message_delay_ms = 3000.0;
    c.seed = seed;
    cells.push_back({"n" + std::to_string(n), c});
  }
  return cells;
}

// Message size: 1000 nodes, 200 KB .. 1 MB, 12 publishers, 4 s apart.
inline std::vector<SweepCell> scenario2(std::uint64_t seed) {
  std::vector<SweepCell> cells;
  for (std::uint64_t kb = 200; kb <= 1000; kb += 200) {
    ScenarioConfig c = scenario_base();
    c.message_size = kb * 1000;
    c.seed = seed;
    cells.push_back({"size" + std::to_string(kb) + "kb", c});
  }
  return cells;
}

// Publisher load: 1000 nodes, 50 KB, short 100 ms spacing.
inline std::vector<SweepCell> scenario3(std::uint64_t seed,
                                        bool alt_publishers = false) {
  std::vector<SweepCell> cells;
  for (std::uint32_t k = 0; k < 5; ++k) {
    std::uint32_t pubs = (alt_publishers ? 20 : 22) + 20 * k;
    ScenarioConfig c = scenario_base();
    c.n_publishers = pubs;
    c.message_size = 50000;
    c.inter_message_delay_ms = 100.0;
    c.seed = seed;
    cells.push_back({"pubs" + std::to_string(pubs), c});
  }
  return cells;
}

// Latency table: sizes x propagation delays, single publisher with a long
// warm-up, duplicate-suppression baseline vs. +staggering (K=1).
inline std::vector<SweepCell> table3_latency(std::uint64_t seed) {
  std::vector<SweepCell> cells;
  const double lats[] = {25.0, 50.0, 100.0};
  for (std::uint64_t kb = 200; kb <= 1000; kb += 200) {
    for (double lat : lats) {
      for (int stagger = 0; stagger < 2; ++stagger) {
        ScenarioConfig c = scenario_base();
        c.n_publishers = 1;
        c.n_messages = 18;
        c.warmup_count = 15;
        c.message_size = kb * 1000;
        c.transport.latency_ms = lat;
        c.features.stagger = stagger != 0;
        c.mesh.stagger_group_size = 1;
        c.seed = seed;
        std::string name = "s" + std::to_string(kb) + "kb_l" +
                           std::to_string(static_cast<int>(lat)) +
                           (stagger ? "_stagger" : "_idw");
        cells.push_back({name, c});
      }
    }
  }
  return cells;
}

// Extension combinations at the heaviest message size.
inline std::vector<SweepCell> feature_matrix(std::uint64_t seed) {
  std::vector<SweepCell> cells;
  auto base = [&] {
    ScenarioConfig c = scenario_base();
    c.message_size = 1000000;
    c.seed = seed;
    return c;
  };
  {
    ScenarioConfig c = base();
    c.features = {false, false, false};
    cells.push_back({"baseline", c});
  }
  {
    ScenarioConfig c = base();
    c.features = {true, false, false};
    cells.push_back({"idontwant", c});
  }
  for (int k = 1; k <= 4; ++k) {
    ScenarioConfig c = base();
    c.features = {true, true, false};
    c.mesh.stagger_group_size = k;
    cells.push_back({"stagger_k" + std::to_string(k), c});
  }
  {
    ScenarioConfig c = base();
    c.features = {false, false, true};
    c.mesh.fragment_count = 4;
    cells.push_back({"fragment_n4", c});
  }
  {
    ScenarioConfig c = base();
    c.features = {true, true, true};
    c.mesh.stagger_group_size = 3;
    c.mesh.fragment_count = 4;
    cells.push_back({"all", c});
  }
  return cells;
}

inline std::vector<SweepCell> by_name(const std::string& name,
                                      std::uint64_t seed) {
  if (name == "table1-scenario1") return scenario1(seed);
  if (name == "table1-scenario2") return scenario2(seed);
  if (name == "table1-scenario3") return scenario3(seed);
  if (name == "table1-scenario3-alt") return scenario3(seed, true);
  if (name == "table3-latency-sweep") return table3_latency(seed);
  if (name == "feature-matrix") return feature_matrix(seed);
  throw ConfigError(
      "unknown preset '" + name +
      "' (expected table1-scenario1|table1-scenario2|table1-scenario3|"
      "table1-scenario3-alt|table3-latency-sweep|feature-matrix)");
}

}  // namespace presets

// ---- sweep ----

inline std::string combined_csv_header() {
  return "cell,n_nodes,n_publishers,n_messages,message_size,latency_ms,"
         "idontwant,stagger,stagger_k,fragmentation,fragment_n,seed,complete,"
         "measured,mean_l15_ms,mean_l85_ms,mean_l100_ms,median_l100_ms,"
         "stddev_l100_ms,bytes_total,bytes_payload,bytes_ihave,bytes_iwant,"
         "bytes_idontwant,bytes_framing,iwant_requests,duplicates,"
         "canceled_jobs\n";
}

inline std::string combined_csv_row(const std::string& cell,
                                    const ScenarioConfig& c,
                                    const RunSummary& s) {
  std::string row = cell;
  row += ',' + std::to_string(c.n_nodes);
  row += ',' + std::to_string(c.n_publishers);
  row += ',' + std::to_string(c.effective_messages());
  row += ',' + std::to_string(c.message_size);
  row += ',' + format_ms(c.transport.latency_ms);
  row += c.features.idontwant ? ",1" : ",0";
  row += c.features.stagger ? ",1" : ",0";
  row += ',' + std::to_string(c.mesh.stagger_group_size);
  row += c.features.fragmentation ? ",1" : ",0";
  row += ',' + std::to_string(c.mesh.fragment_count);
  row += ',' + std::to_string(c.seed);
  row += s.complete ? ",1" : ",0";
  row += ',' + std::to_string(s.measured);
  row += ',' + format_ms(s.mean_l15);
  row += ',' + format_ms(s.mean_l85);
  row += ',' + format_ms(s.mean_l100);
  row += ',' + format_ms(s.median_l100);
  row += ',' + (s.stddev_l100 ? format_ms(*s.stddev_l100) : std::string());
  row += ',' + std::to_string(s.bytes.total());
  row += ',' + std::to_string(s.bytes.payload);
  row += ',' + std::to_string(s.bytes.ihave);
  row += ',' + std::to_string(s.bytes.iwant);
  row += ',' + std::to_string(s.bytes.idontwant);
  row += ',' + std::to_string(s.bytes.framing);
  row += ',' + std::to_string(s.iwant_requests);
  row += ',' + std::to_string(s.duplicates);
  row += ',' + std::to_string(s.canceled_jobs);
  row += '\n';
  return row;
}

// Runs each cell sequentially (deterministic regardless of --jobs), writing
// per-cell outputs plus combined.csv. Per-cell failures are recorded and do
// not abort the sweep. Returns the number of failed/incomplete cells.
inline int run_sweep(const std::vector<SweepCell>& cells,
                     const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::string combined = combined_csv_header();
  int failures = 0;
  for (const SweepCell& cell : cells) {
    try {
      RunResult r = run_scenario(cell.cfg);
      write_outputs(out_dir / cell.name, r);
      combined += combined_csv_row(cell.name, cell.cfg, r.summary);
      if (!r.summary.complete) ++failures;
    } catch (const std::exception& e) {
      combined += cell.name;
      combined += ",error\n";
      std::fprintf(stderr, "cell %s failed: %s\n", cell.name.c_str(), e.what());
      ++failures;
    }
  }
  write_file(out_dir / "combined.csv", combined);
  return failures;
}

}  // namespace gossim
