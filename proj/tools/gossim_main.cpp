// gossim CLI: single runs, preset sweeps, and the closed-form estimator.

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gossim/metrics.hpp"
#include "gossim/scenario.hpp"

namespace {

// "1MB" / "200KB" / "16KiB" / "12345" (bytes). Decimal suffixes unless Ki/Mi.
std::uint64_t parse_size(const std::string& s) {
  std::size_t pos = 0;
  while (pos < s.size() && (std::isdigit(static_cast<unsigned char>(s[pos]))))
    ++pos;
  if (pos == 0) throw gossim::ConfigError("size '" + s + "': expected digits");
  std::uint64_t base = std::stoull(s.substr(0, pos));
  std::string suffix = s.substr(pos);
  for (auto& c : suffix) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (suffix.empty() || suffix == "b") return base;
  if (suffix == "kb") return base * 1000ULL;
  if (suffix == "mb") return base * 1000000ULL;
  if (suffix == "gb") return base * 1000000000ULL;
  if (suffix == "kib") return base * 1024ULL;
  if (suffix == "mib") return base * 1048576ULL;
  throw gossim::ConfigError("size '" + s + "': unknown suffix");
}

std::string fmt_num(double v) {
  char buf[64];
  if (std::abs(v - std::llround(v)) < 1e-9) {
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(std::llround(v)));
  } else {
    std::snprintf(buf, sizeof(buf), "%.3f", v);
  }
  return buf;
}

int cmd_run(const std::string& config_path, bool seed_set, std::uint64_t seed,
            const std::string& out_dir,
            const std::vector<std::string>& overrides) {
  std::ifstream f(config_path);
  if (!f) {
    std::fprintf(stderr, "error: cannot open config %s\n", config_path.c_str());
    return 1;
  }
  gossim::Json j = gossim::Json::parse(f, nullptr, false);
  if (j.is_discarded()) {
    std::fprintf(stderr, "error: %s is not valid JSON\n", config_path.c_str());
    return 1;
  }
  // A previous summary.json is itself a valid input: reuse its config echo.
  if (j.is_object() && j.contains("config")) j = j["config"];
  j = gossim::apply_overrides(j, overrides);
  gossim::ScenarioConfig cfg = gossim::ScenarioConfig::from_json(j);
  if (seed_set) cfg.seed = seed;
  gossim::RunResult r = gossim::run_scenario(cfg);
  gossim::write_outputs(out_dir, r);
  std::printf(
      "published=%u complete=%s mean_l100_ms=%s bytes_total=%" PRIu64 "\n",
      r.summary.published, r.summary.complete ? "true" : "false",
      fmt_num(r.summary.mean_l100).c_str(), r.summary.bytes.total());
  return r.summary.complete ? 0 : 2;
}

int cmd_sweep(const std::string& preset, const std::string& out_dir,
              std::uint64_t seed) {
  auto cells = gossim::presets::by_name(preset, seed);
  int failures = gossim::run_sweep(cells, out_dir);
  std::printf("cells=%zu failures=%d\n", cells.size(), failures);
  return failures == 0 ? 0 : 2;
}

int cmd_estimate(const std::string& size_str, double rate, double latency,
                 std::uint64_t nodes, int degree, int fragments) {
  std::uint64_t size = parse_size(size_str);
  gossim::Estimate e =
      gossim::analytical_estimate(size, rate, latency, nodes, degree, fragments);
  std::printf("nodes=%" PRIu64 "\n", nodes);
  std::printf("degree=%d\n", degree);
  std::printf("size_bytes=%" PRIu64 "\n", size);
  std::printf("rate_mbps=%s\n", fmt_num(rate).c_str());
  std::printf("tau_p_ms=%s\n", fmt_num(latency).c_str());
  std::printf("H=%d\n", e.hops);
  std::printf("tau_tx_ms=%s\n", fmt_num(e.tau_tx_ms).c_str());
  std::printf("baseline_ms=%s\n", fmt_num(e.baseline_ms).c_str());
  std::printf("fragments=%d\n", fragments);
  std::printf("fragmented_tx_ms=%s\n", fmt_num(e.fragmented_tx_ms).c_str());
  std::printf("fragmented_total_ms=%s\n", fmt_num(e.fragmented_total_ms).c_str());
  std::string added, cum;
  for (const auto& row : e.growth) {
    if (!added.empty()) {
      added += ',';
      cum += ',';
    }
    added += std::to_string(row.added);
    cum += std::to_string(row.cumulative);
  }
  std::printf("stagger_added=%s\n", added.c_str());
  std::printf("stagger_cumulative=%s\n", cum.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gossim: gossip overlay large-message simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "execute one scenario run");
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  run->add_option("--config", config_path, "scenario config JSON (or a prior summary.json)")
      ->required();
  auto* seed_opt = run->add_option("--seed", seed, "override the config seed");
  run->add_option("--out", out_dir, "output directory (default .)");
  run->add_option("--override", overrides,
                  "dotted config override, e.g. features.stagger=true");

  auto* sweep = app.add_subcommand("sweep", "run an experiment preset");
  std::string preset;
  std::string sweep_out;
  std::uint64_t sweep_seed = 1;
  int jobs = 1;
  sweep->add_option("--preset", preset,
                    "table1-scenario1|table1-scenario2|table1-scenario3|"
                    "table1-scenario3-alt|table3-latency-sweep|feature-matrix")
      ->required();
  sweep->add_option("--out", sweep_out, "output directory")->required();
  sweep->add_option("--seed", sweep_seed, "seed applied to every cell");
  sweep->add_option("--jobs", jobs, "accepted for compatibility; runs serially")
      ->check(CLI::PositiveNumber);

  auto* est = app.add_subcommand("estimate", "closed-form latency estimate");
  std::string size_str = "1MB";
  double rate = 50.0, latency = 100.0;
  std::uint64_t nodes = 1000;
  int degree = 8, fragments = 1;
  est->add_option("--size", size_str, "message size (bytes, or KB/MB suffix)");
  est->add_option("--rate", rate, "bandwidth in Mbps");
  est->add_option("--latency", latency, "one-way link latency ms");
  est->add_option("--nodes", nodes, "network size N");
  est->add_option("--degree", degree, "mesh degree D");
  est->add_option("--fragments", fragments, "fragment count n");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(config_path, seed_opt->count() > 0, seed, out_dir,
                     overrides);
    if (sweep->parsed()) return cmd_sweep(preset, sweep_out, sweep_seed);
    if (est->parsed())
      return cmd_estimate(size_str, rate, latency, nodes, degree, fragments);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
