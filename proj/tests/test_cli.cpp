#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "orbitguard/cli.hpp"
#include "orbitguard/ingest.hpp"
#include "support.hpp"

using namespace orbitguard;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() /
          ("orbitguard_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_entries(const std::string& path, const std::vector<CatalogEntry>& entries) {
  std::ofstream out(path);
  write_catalog(out, entries);
}

// Two crossing LEO orbits meeting at step 37 of a 0.1 s horizon, plus two
// objects far away.
std::vector<CatalogEntry> crafted() {
  auto e = testing::crossing_pair(1, 7e6, 37, 1e-3, 1.0);
  OrbitalElements geo;
  geo.a = 4.2164e7;
  e.push_back({10, geo, 1.0});
  geo.nu0 = 3.0;
  e.push_back({11, geo, 1.0});
  return e;
}

// Drops the named CSV columns.
std::string without_columns(const std::string& csv, const std::vector<std::string>& drop) {
  std::istringstream in(csv);
  std::string line;
  std::vector<bool> keep;
  std::ostringstream out;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (keep.empty()) {
      for (const std::string& h : cells) {
        keep.push_back(std::find(drop.begin(), drop.end(), h) == drop.end());
      }
    }
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k >= keep.size() || keep[k]) out << cells[k] << ';';
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace

TEST_CASE("detect: crafted crossing reports the analytic step with exit 2") {
  Scratch s;
  write_entries(s.path("pair.cat"), crafted());
  // Independent check of the fixture.
  const ProblemInstance p = make_instance(crafted(), 0.1, 1e-3);
  REQUIRE(testing::first_collision_step(p) == Step{37});

  for (const std::string algo : {"brute", "basic-aabb", "aabb-4d"}) {
    const Outcome o = run({"detect", "--input", s.path("pair.cat"), "--horizon-s", "0.1",
                           "--step-s", "0.001", "--algo", algo, "--out", s.path("r.json")});
    CHECK(o.code == 2);
    CHECK(o.out.find("step 37 ") != std::string::npos);
    const auto report = nlohmann::json::parse(slurp(s.path("r.json")));
    CHECK(report["schema_version"] == cli::kSchemaVersion);
    CHECK(report["witness"]["step"] == 37);
    CHECK(report["witness"]["time_s"].get<double>() == doctest::Approx(0.037).epsilon(1e-12));
    const std::set<int> ids{report["witness"]["a"].get<int>(), report["witness"]["b"].get<int>()};
    CHECK(ids == std::set<int>{1, 2});
  }
  const Outcome parts = run({"detect", "--input", s.path("pair.cat"), "--horizon-s", "0.1",
                             "--partitions", "2", "--workers", "2"});
  CHECK(parts.code == 2);
  CHECK(parts.out.find("step 37 ") != std::string::npos);
}

TEST_CASE("detect: collision-free catalog exits 0 and prints none") {
  Scratch s;
  auto entries = crafted();
  entries.erase(entries.begin());  // one of the crossing pair
  write_entries(s.path("free.cat"), entries);
  const Outcome o = run({"detect", "--input", s.path("free.cat"), "--horizon-s", "0.1",
                         "--verify", "--telemetry", s.path("t.jsonl"), "--out", s.path("r.json")});
  CHECK(o.code == 0);
  CHECK(o.out == "none\n");
  const auto report = nlohmann::json::parse(slurp(s.path("r.json")));
  CHECK(report["witness"].is_null());
  const std::string trace = slurp(s.path("t.jsonl"));
  CHECK(std::count(trace.begin(), trace.end(), '\n') ==
        report["telemetry"]["iterations"].get<long>());
  CHECK(nlohmann::json::parse(trace.substr(0, trace.find('\n'))).contains("t_prime"));
}

TEST_CASE("exit status 1: usage and input errors") {
  Scratch s;
  write_entries(s.path("pair.cat"), crafted());
  const std::string in = s.path("pair.cat");
  const std::vector<std::vector<std::string>> bad{
      {"detect", "--input", in, "--horizon-s", "10", "--step-s", "0.003"},
      {"detect", "--input", in, "--partitions", "0"},
      {"detect", "--input", in, "--algo", "octree"},
      {"detect", "--input", in, "--algo", "brute,aabb-4d"},
      {"detect", "--input", s.path("missing.tle")},
      {"detect"},
      {"gen", "--input", in, "--n", "10"},
      {"frobnicate"},
  };
  for (const auto& args : bad) {
    const Outcome o = run(args);
    CHECK(o.code == 1);
    CHECK_FALSE(o.err.empty());
  }

  std::ofstream(s.path("broken.tle")) << "ISS\n"
      << "1 25544U 98067A   08264.51782528 -.00002182  00000-0 -11606-4 0  2927\n"
      << "2 25544  51.6416 247.4627 0006703 130.5360 325.0288 15.72125391563538\n";
  const Outcome o = run({"detect", "--input", s.path("broken.tle")});
  CHECK(o.code == 1);
  CHECK(o.err.find("line 3") != std::string::npos);
}

TEST_CASE("detect: duplicate TLEs collide at step 0 unless deduplicated") {
  Scratch s;
  const TleRecord iss = parse_tle_record(
      "ISS", "1 25544U 98067A   08264.51782528 -.00002182  00000-0 -11606-4 0  2927",
      "2 25544  51.6416 247.4627 0006703 130.5360 325.0288 15.72125391563537", 1);
  const TleRecord copy = format_tle(49044, "ISS OBJECT", fields_of(iss), iss.epoch_year,
                                    iss.epoch_day);
  std::ofstream(s.path("dup.tle")) << iss.name << '\n' << iss.line1 << '\n' << iss.line2 << '\n'
                                   << copy.name << '\n' << copy.line1 << '\n' << copy.line2 << '\n';
  const Outcome raw = run({"detect", "--input", s.path("dup.tle"), "--no-dedupe",
                           "--horizon-s", "1"});
  CHECK(raw.code == 2);
  CHECK(raw.out.find("step 0 ") != std::string::npos);
  const Outcome kept = run({"detect", "--input", s.path("dup.tle"), "--horizon-s", "1",
                            "--out", s.path("r.json")});
  CHECK(kept.code == 0);
  const auto report = nlohmann::json::parse(slurp(s.path("r.json")));
  REQUIRE(report["dedupe_removed"].size() == 1);
  CHECK(report["dedupe_removed"][0]["id"] == 49044);
  CHECK(report["dedupe_removed"][0]["duplicate_of"] == 25544);
}

TEST_CASE("gen: exact counts, seed determinism") {
  Scratch s;
  write_entries(s.path("src.cat"), crafted());
  for (const std::string n : {"2", "4", "50"}) {
    REQUIRE(run({"gen", "--input", s.path("src.cat"), "--n", n, "--seed", "9", "--out",
                 s.path("a.cat")}).code == 0);
    REQUIRE(run({"gen", "--input", s.path("src.cat"), "--n", n, "--seed", "9", "--out",
                 s.path("b.cat")}).code == 0);
    std::ifstream in(s.path("a.cat"));
    CHECK(read_catalog(in).size() == std::stoul(n));
    CHECK(slurp(s.path("a.cat")) == slurp(s.path("b.cat")));
  }
  REQUIRE(run({"gen", "--input", s.path("src.cat"), "--n", "50", "--seed", "10", "--out",
               s.path("c.cat")}).code == 0);
  CHECK(slurp(s.path("a.cat")) != slurp(s.path("c.cat")));
}

TEST_CASE("bench: table shape, empty n list, deterministic non-timing columns") {
  Scratch s;
  write_entries(s.path("src.cat"), crafted());
  const Outcome empty = run({"bench", "--input", s.path("src.cat"), "--algo",
                             "basic-aabb,aabb-4d"});
  CHECK(empty.code == 0);
  CHECK(empty.out == "n,basic-aabb,aabb-4d\n");

  std::vector<std::string> args{"bench", "--input", s.path("src.cat"), "--n", "4,30",
                                "--algo", "basic-aabb,aabb-4d", "--partitions", "1,2",
                                "--horizon-s", "0.05", "--seed", "3", "--out",
                                s.path("t.csv"), "--plot-out", s.path("p1.csv")};
  REQUIRE(run(args).code == 0);
  const std::string table = slurp(s.path("t.csv"));
  CHECK(table.rfind("n,basic-aabb,basic-aabb_p2,aabb-4d,aabb-4d_p2\n", 0) == 0);
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);
  args.back() = s.path("p2.csv");
  REQUIRE(run(args).code == 0);
  const std::vector<std::string> timing{"seconds", "log10_seconds"};
  CHECK(without_columns(slurp(s.path("p1.csv")), timing) ==
        without_columns(slurp(s.path("p2.csv")), timing));
  // At n = 4 the catalog is the crafted one; its pair meets at step 37.
  const std::string plot = without_columns(slurp(s.path("p1.csv")), timing);
  const std::size_t row = plot.find("\n4;aabb-4d;");
  REQUIRE(row != std::string::npos);
  CHECK(plot.substr(row, plot.find('\n', row + 1) - row).find(";37;") != std::string::npos);
}

TEST_CASE("partition-stats: sweep and per-band CSV are deterministic") {
  Scratch s;
  std::mt19937_64 rng(4);
  std::vector<CatalogEntry> entries;
  for (ObjectId k = 0; k < 300; ++k) {
    entries.push_back({k, testing::random_elements(rng, 6.7e6, 4.3e7, 0.7), 1.0});
  }
  write_entries(s.path("src.cat"), entries);
  std::vector<std::string> args{"partition-stats", "--input", s.path("src.cat"), "--sweep",
                                "1,2,6", "--partitions", "4", "--bands-out", s.path("b.csv")};
  const Outcome first = run(args);
  REQUIRE(first.code == 0);
  const std::string bands = slurp(s.path("b.csv"));
  CHECK(first.out.rfind("p,max_band_count,min_band_count,memberships\n1,300,300,300\n", 0) == 0);
  CHECK(std::count(first.out.begin(), first.out.end(), '\n') == 4);
  CHECK(bands.rfind("band_index,alt_lo_m,alt_hi_m,count\n", 0) == 0);
  CHECK(std::count(bands.begin(), bands.end(), '\n') == 5);
  const Outcome second = run(args);
  CHECK(second.out == first.out);
  CHECK(slurp(s.path("b.csv")) == bands);
}
