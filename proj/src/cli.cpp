#include "orbitguard/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <ostream>
#include <sstream>

#include "orbitguard/ingest.hpp"
#include "orbitguard/partition.hpp"

namespace orbitguard::cli {

namespace {

using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

struct Catalog {
  std::vector<CatalogEntry> entries;
  std::vector<std::pair<ObjectId, ObjectId>> removed;
  bool from_tle = false;
};

// Strict parsing: a bad record is an error, not a skipped object.
Catalog load(const RunConfig& cfg) {
  LoadedCatalog loaded =
      load_catalog(cfg.input, cfg.radius_m.value_or(1.0), ParseMode::strict);
  Catalog c;
  c.from_tle = loaded.from_tle;
  if (!c.from_tle && cfg.radius_m) {
    for (CatalogEntry& e : loaded.entries) e.radius = *cfg.radius_m;
  }
  if (cfg.dedupe) {
    DedupeResult d = dedupe(loaded.entries);
    c.entries = std::move(d.kept);
    c.removed = std::move(d.removed);
  } else {
    c.entries = std::move(loaded.entries);
  }
  return c;
}

// Writes to the configured path, or to `fallback` when the path is empty.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (path.empty()) return;
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*file_) throw std::runtime_error("cannot open " + path + " for writing");
    out_ = file_.get();
  }
  std::ostream& operator*() { return *out_; }
  void close(const std::string& path) {
    if (!file_) return;
    file_->close();
    if (!*file_) throw std::runtime_error("failed writing " + path);
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* out_;
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

Json telemetry_json(const Telemetry& t) {
  return Json{{"iterations", t.iterations},         {"tree_queries", t.tree_queries},
              {"tree_inserts", t.tree_inserts},     {"tree_updates", t.tree_updates},
              {"tree_removes", t.tree_removes},     {"tree_rotations", t.tree_rotations},
              {"queue_ops", t.queue_ops},           {"resolve_passes", t.resolve_passes},
              {"raised_min", t.raised_min},         {"shrunk_other", t.shrunk_other},
              {"shrunk_self", t.shrunk_self},       {"max_tree_height", t.max_tree_height}};
}

struct Run {
  std::optional<CollisionWitness> witness;
  Telemetry telemetry;
  double seconds = 0.0;
};

// Times detection only; the instance is already built.
Run timed_detect(const ProblemInstance& p, Algorithm algo, std::size_t partitions,
                 std::size_t workers, const EngineOptions& engine) {
  Run r;
  const auto start = Clock::now();
  if (partitions == 1) {
    DetectResult d = detect(algo, p, engine);
    r.witness = d.witness;
    r.telemetry = d.telemetry;
  } else {
    PartitionOptions opts;
    opts.algorithm = algo;
    opts.workers = workers;
    opts.engine = engine;
    PartitionedResult d = detect_partitioned(p, partitions, opts);
    r.witness = d.witness;
    r.telemetry = d.telemetry;
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

std::vector<CatalogEntry> resized(const std::vector<CatalogEntry>& entries,
                                  const RunConfig& cfg) {
  if (cfg.n_values.empty()) return entries;
  return scale_catalog(entries, cfg.n_values.front(), cfg.seed);
}

std::string config_name(Algorithm algo, std::size_t p) {
  std::string s(to_string(algo));
  if (p > 1) s += "_p" + std::to_string(p);
  return s;
}

}  // namespace

void RunConfig::validate() const {
  if (input.empty()) throw UsageError("--input is required");
  ProblemInstance grid;
  grid.horizon_s = horizon_s;
  grid.step_s = step_s;
  try {
    grid.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (radius_m && !(*radius_m >= 0.0 && std::isfinite(*radius_m))) {
    throw UsageError("--radius-m must be a non-negative number");
  }
  if (partitions.empty()) throw UsageError("--partitions needs at least one value");
  for (std::size_t p : partitions) {
    if (p == 0) throw UsageError("--partitions values must be at least 1");
  }
  if (algorithms.empty()) throw UsageError("--algo needs at least one value");
  switch (command) {
    case Command::detect:
      if (algorithms.size() != 1) throw UsageError("detect takes exactly one --algo");
      if (partitions.size() != 1) throw UsageError("detect takes exactly one --partitions");
      if (n_values.size() > 1) throw UsageError("detect takes at most one --n");
      break;
    case Command::gen:
      if (out.empty()) throw UsageError("gen requires --out");
      if (n_values.size() != 1) throw UsageError("gen requires exactly one --n");
      break;
    case Command::bench:
      break;
    case Command::partition_stats:
      if (partitions.size() != 1) throw UsageError("partition-stats takes one --partitions");
      for (std::size_t p : sweep) {
        if (p == 0) throw UsageError("--sweep values must be at least 1");
      }
      break;
  }
}

int cmd_detect(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const Catalog cat = load(cfg);
  const ProblemInstance p = make_instance(resized(cat.entries, cfg), cfg.horizon_s, cfg.step_s);

  EngineOptions engine;
  engine.verify = cfg.verify;
  Sink trace(cfg.telemetry_out, out);
  if (!cfg.telemetry_out.empty()) {
    engine.on_iteration = [&](const IterationRecord& r) {
      *trace << Json{{"iteration", r.iteration},   {"object", r.object},
                     {"t_prime", r.t_prime},       {"tree_size", r.tree_size},
                     {"queue_ops", r.queue_ops},   {"resolve_passes", r.resolve_passes}}
                    .dump()
             << '\n';
    };
  }
  const Algorithm algo = cfg.algorithms.front();
  const std::size_t parts = cfg.partitions.front();
  const Run r = timed_detect(p, algo, parts, cfg.workers, engine);
  trace.close(cfg.telemetry_out);

  if (r.witness) {
    out << "collision " << r.witness->a << ' ' << r.witness->b << " step " << r.witness->step
        << " time_s " << fmt("%.17g", r.witness->time_s) << '\n';
  } else {
    out << "none\n";
  }

  if (!cfg.out.empty()) {
    Json report{{"schema_version", kSchemaVersion},
                {"command", "detect"},
                {"input", cfg.input},
                {"algorithm", std::string(to_string(algo))},
                {"objects", p.objects.size()},
                {"horizon_s", cfg.horizon_s},
                {"step_s", cfg.step_s},
                {"total_steps", p.total_steps()},
                {"partitions", parts},
                {"verify", cfg.verify}};
    report["witness"] = r.witness ? Json{{"a", r.witness->a},
                                         {"b", r.witness->b},
                                         {"step", r.witness->step},
                                         {"time_s", r.witness->time_s}}
                                  : Json(nullptr);
    report["wall_time_s"] = r.seconds;
    report["telemetry"] = telemetry_json(r.telemetry);
    Json removed = Json::array();
    for (const auto& [gone, kept] : cat.removed) removed.push_back({{"id", gone}, {"duplicate_of", kept}});
    report["dedupe_removed"] = removed;
    std::ostringstream body;
    body << report.dump(2) << '\n';
    Sink sink(cfg.out, out);
    *sink << body.str();
    sink.close(cfg.out);
  }
  return static_cast<int>(r.witness ? ExitCode::witness : ExitCode::none);
}

int cmd_bench(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const Catalog cat = load(cfg);

  std::vector<std::pair<Algorithm, std::size_t>> configs;
  for (Algorithm a : cfg.algorithms) {
    for (std::size_t p : cfg.partitions) configs.emplace_back(a, p);
  }

  std::ostringstream table;
  std::ostringstream plot;
  table << 'n';
  for (const auto& [a, p] : configs) table << ',' << config_name(a, p);
  table << '\n';
  plot << "n,config,seconds,iterations,witness_step,log10_n,log10_seconds\n";

  EngineOptions engine;
  engine.verify = cfg.verify;
  for (std::size_t n : cfg.n_values) {
    const ProblemInstance p =
        make_instance(scale_catalog(cat.entries, n, cfg.seed), cfg.horizon_s, cfg.step_s);
    table << n;
    for (const auto& [algo, parts] : configs) {
      const Run r = timed_detect(p, algo, parts, cfg.workers, engine);
      table << ',' << fmt("%.6f", r.seconds);
      plot << n << ',' << config_name(algo, parts) << ',' << fmt("%.6f", r.seconds) << ','
           << r.telemetry.iterations << ',' << (r.witness ? std::to_string(r.witness->step) : "")
           << ',' << fmt("%.6f", std::log10(static_cast<double>(n))) << ','
           << fmt("%.6f", std::log10(std::max(r.seconds, 1e-9))) << '\n';
    }
    table << '\n';
  }

  Sink sink(cfg.out, out);
  *sink << table.str();
  sink.close(cfg.out);
  if (!cfg.plot_out.empty()) {
    Sink p(cfg.plot_out, out);
    *p << plot.str();
    p.close(cfg.plot_out);
  }
  return static_cast<int>(ExitCode::none);
}

int cmd_gen(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const Catalog cat = load(cfg);
  const std::vector<CatalogEntry> scaled = scale_catalog(cat.entries, cfg.n_values.front(), cfg.seed);
  Sink sink(cfg.out, out);
  write_catalog(*sink, scaled);
  sink.close(cfg.out);
  out << "wrote " << scaled.size() << " objects to " << cfg.out << '\n';
  return static_cast<int>(ExitCode::none);
}

int cmd_partition_stats(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const Catalog cat = load(cfg);
  const ProblemInstance p = make_instance(resized(cat.entries, cfg), cfg.horizon_s, cfg.step_s);
  const PotentialCollisionGraph graph = build_graph(p);

  std::ostringstream sweep;
  sweep << "p,max_band_count,min_band_count,memberships\n";
  for (std::size_t parts : cfg.sweep) {
    const PartitionSet set = build_bands(graph, parts);
    std::size_t lo = set.bands.empty() ? 0 : set.bands.front().members.size();
    std::size_t total = 0;
    for (const Band& b : set.bands) {
      lo = std::min(lo, b.members.size());
      total += b.members.size();
    }
    sweep << parts << ',' << max_band_count(set) << ',' << lo << ',' << total << '\n';
  }
  Sink sink(cfg.out, out);
  *sink << sweep.str();
  sink.close(cfg.out);

  if (!cfg.bands_out.empty()) {
    Sink bands(cfg.bands_out, out);
    write_partition_stats_csv(*bands, partition_stats(build_bands(graph, cfg.partitions.front())));
    bands.close(cfg.bands_out);
  }
  return static_cast<int>(ExitCode::none);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Broad-phase collision prediction for orbital catalogs", "orbitguard"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::vector<std::string> algos;
  std::optional<double> radius;
  std::vector<std::size_t> partitions;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--input", cfg.input, "TLE text or canonical catalog")->required();
    sub->add_option("--horizon-s", cfg.horizon_s, "time horizon T in seconds");
    sub->add_option("--step-s", cfg.step_s, "time step in seconds; must divide T");
    sub->add_option("--radius-m", radius, "object radius in meters (default 1 for TLE input)");
    sub->add_option("--seed", cfg.seed, "seed for catalog scaling");
    sub->add_option("--n", cfg.n_values, "object count(s); comma-separated for bench")
        ->delimiter(',');
    sub->add_option("--out", cfg.out, "output path");
    sub->add_flag("--dedupe,!--no-dedupe", cfg.dedupe, "drop objects with identical elements");
  };
  auto engine_opts = [&](CLI::App* sub) {
    sub->add_option("--algo", algos, "brute, basic-aabb or aabb-4d")->delimiter(',');
    sub->add_option("--partitions", partitions, "altitude band count(s)")->delimiter(',');
    sub->add_option("--workers", cfg.workers, "worker threads (default ORBITGUARD_WORKERS)");
    sub->add_flag("--verify", cfg.verify, "check loop invariants at every iteration");
  };

  CLI::App* detect_cmd = app.add_subcommand("detect", "report the first collision, if any");
  common(detect_cmd);
  engine_opts(detect_cmd);
  detect_cmd->add_option("--telemetry", cfg.telemetry_out, "per-iteration JSON lines");

  CLI::App* bench_cmd = app.add_subcommand("bench", "wall time per n and configuration");
  common(bench_cmd);
  engine_opts(bench_cmd);
  bench_cmd->add_option("--plot-out", cfg.plot_out, "long-form log-log data CSV");

  CLI::App* gen_cmd = app.add_subcommand("gen", "write a canonical catalog of --n objects");
  common(gen_cmd);

  CLI::App* stats_cmd =
      app.add_subcommand("partition-stats", "band counts over a partition sweep");
  common(stats_cmd);
  stats_cmd->add_option("--partitions", partitions, "band count for --bands-out (default 16)")
      ->delimiter(',');
  stats_cmd->add_option("--sweep", cfg.sweep, "partition counts to sweep")->delimiter(',');
  stats_cmd->add_option("--bands-out", cfg.bands_out, "per-band counts CSV");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "orbitguard: " << e.what() << '\n';
    return static_cast<int>(ExitCode::error);
  }

  cfg.radius_m = radius;
  try {
    if (!algos.empty()) {
      cfg.algorithms.clear();
      for (const std::string& a : algos) cfg.algorithms.push_back(parse_algorithm(a));
    }
  } catch (const std::exception& e) {
    err << "orbitguard: " << e.what() << '\n';
    return static_cast<int>(ExitCode::error);
  }

  try {
    if (detect_cmd->parsed()) {
      cfg.command = Command::detect;
      if (!partitions.empty()) cfg.partitions = partitions;
      return cmd_detect(cfg, out);
    }
    if (bench_cmd->parsed()) {
      cfg.command = Command::bench;
      if (!partitions.empty()) cfg.partitions = partitions;
      return cmd_bench(cfg, out);
    }
    if (gen_cmd->parsed()) {
      cfg.command = Command::gen;
      return cmd_gen(cfg, out);
    }
    cfg.command = Command::partition_stats;
    cfg.partitions = partitions.empty() ? std::vector<std::size_t>{16} : partitions;
    return cmd_partition_stats(cfg, out);
  } catch (const UsageError& e) {
    err << "orbitguard: usage: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "orbitguard: error: " << e.what() << '\n';
  }
  return static_cast<int>(ExitCode::error);
}

}  // namespace orbitguard::cli
