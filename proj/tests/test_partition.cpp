#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "orbitguard/ingest.hpp"
#include "orbitguard/partition.hpp"
#include "support.hpp"

using namespace orbitguard;
using orbitguard::testing::first_collision_step;
using orbitguard::testing::pair_collides;
using orbitguard::testing::random_elements;
using orbitguard::testing::random_kepler_instance;
using orbitguard::testing::random_linear_instance;
using orbitguard::testing::uniform;
using orbitguard::testing::uniform_int;

namespace {

WorldObject kepler(ObjectId id, double a, double e, double r, double nu0 = 0.0) {
  OrbitalElements el;
  el.a = a;
  el.e = e;
  el.nu0 = nu0;
  return {id, std::make_shared<KeplerModel>(el), r};
}

ProblemInstance instance(std::vector<WorldObject> objects) {
  ProblemInstance p;
  p.step_s = 1.0;
  p.horizon_s = 10.0;
  p.objects = std::move(objects);
  return p;
}

std::set<ObjectId> ids(const ProblemInstance& p, const Band& b) {
  std::set<ObjectId> out;
  for (std::size_t s : b.members) out.insert(p.objects[s].id);
  return out;
}

}  // namespace

TEST_CASE("build_bands: p = 1 holds everything") {
  const ProblemInstance p =
      instance({kepler(1, 7e6, 0, 1), kepler(2, 8e6, 0.1, 1), kepler(3, 4e7, 0.7, 1)});
  const PartitionSet set = build_bands(build_graph(p), 1);
  REQUIRE(set.bands.size() == 1);
  CHECK(set.bands[0].members.size() == 3);
  CHECK(partition_stats(set)[0].count == 3);
}

TEST_CASE("build_bands: separated circular orbits split into disjoint singletons") {
  const ProblemInstance p = instance({kepler(1, 7e6, 0, 5), kepler(2, 4.2e7, 0, 5)});
  const PartitionSet set = build_bands(build_graph(p), 2);
  REQUIRE(set.bands.size() == 2);
  CHECK(ids(p, set.bands[0]) == std::set<ObjectId>{1});
  CHECK(ids(p, set.bands[1]) == std::set<ObjectId>{2});
  CHECK(set.bands[0].hi <= set.bands[1].lo);
}

TEST_CASE("build_bands: an eccentric orbit straddling the edge joins both bands") {
  // Keys 7e6, 8e6, 2.45e7, 4.2e7, 4.3e7 with d = 3 put the edge at 3.325e7;
  // the e = 0.75 orbit spans 6.1e6 to 4.29e7.
  const ProblemInstance p =
      instance({kepler(1, 7e6, 0, 1), kepler(2, 8e6, 0, 1), kepler(3, 2.45e7, 0.75, 1),
                kepler(4, 4.2e7, 0, 1), kepler(5, 4.3e7, 0, 1)});
  const PartitionSet set = build_bands(build_graph(p), 2);
  REQUIRE(set.bands.size() == 2);
  CHECK(set.bands[0].hi == 3.325e7);
  CHECK(ids(p, set.bands[0]).count(3) == 1);
  CHECK(ids(p, set.bands[1]).count(3) == 1);
  CHECK(ids(p, set.bands[0]).count(1) == 1);
  CHECK(ids(p, set.bands[1]).count(1) == 0);
  CHECK(ids(p, set.bands[1]).count(5) == 1);
  CHECK(ids(p, set.bands[0]).count(5) == 0);
}

TEST_CASE("build_bands: equal keys across a boundary duplicate the objects") {
  std::vector<WorldObject> objs;
  for (ObjectId k = 0; k < 8; ++k) objs.push_back(kepler(k, 7e6, 0, 1, 0.1 * k));
  const ProblemInstance p = instance(objs);
  const PartitionSet set = build_bands(build_graph(p), 4);
  for (const Band& b : set.bands) CHECK(b.members.size() == 8);
  CHECK_NOTHROW(partition_edge_cover_check(build_graph(p), set));
}

TEST_CASE("edge cover: hand-built bands missing a pair are rejected") {
  const ProblemInstance p =
      instance({kepler(1, 7e6, 0, 1), kepler(2, 7.000003e6, 0, 1), kepler(3, 4e7, 0, 1)});
  const PotentialCollisionGraph g = build_graph(p);
  CHECK(g.has_edge(0, 1));
  CHECK_FALSE(g.has_edge(0, 2));
  PartitionSet bad;
  bad.bands.push_back({0, 1e8, {0, 2}});
  bad.bands.push_back({0, 1e8, {1}});
  CHECK_THROWS_AS(partition_edge_cover_check(g, bad), UncoveredEdge);
  bad.bands[1].members = {0, 1};
  CHECK_NOTHROW(partition_edge_cover_check(g, bad));
}

TEST_CASE("edge cover: random catalogs and p in [1, 16]") {
  std::mt19937_64 rng(71);
  for (int k = 0; k < 1000; ++k) {
    ProblemInstance p;
    p.step_s = 1;
    p.horizon_s = 10;
    const int n = uniform_int(rng, 1, 60);
    for (int i = 0; i < n; ++i) {
      p.objects.push_back({static_cast<ObjectId>(i),
                           std::make_shared<KeplerModel>(random_elements(rng, 6.6e6, 4.5e7, 0.8)),
                           uniform(rng, 0, 5e5)});
    }
    const PotentialCollisionGraph g = build_graph(p);
    const PartitionSet set = build_bands(g, static_cast<std::size_t>(uniform_int(rng, 1, 16)));
    REQUIRE_NOTHROW(partition_edge_cover_check(g, set));
    std::size_t total = 0;
    for (std::size_t b = 0; b < set.bands.size(); ++b) {
      total += set.bands[b].members.size();
      if (b > 0) REQUIRE(set.bands[b].lo >= set.bands[b - 1].lo);
      REQUIRE(set.bands[b].lo <= set.bands[b].hi);
    }
    REQUIRE(total >= p.objects.size());
    // Equality iff no object straddles a boundary.
    bool straddles = false;
    for (std::size_t s = 0; s < p.objects.size(); ++s) {
      int count = 0;
      for (const Band& b : set.bands) {
        count += std::count(b.members.begin(), b.members.end(), s) > 0;
      }
      REQUIRE(count >= 1);
      straddles = straddles || count > 1;
    }
    REQUIRE((total == p.objects.size()) == !straddles);
  }
}

TEST_CASE("graph edges: sweep matches the pairwise definition") {
  std::mt19937_64 rng(5);
  PotentialCollisionGraph g;
  for (int i = 0; i < 200; ++i) {
    const double lo = uniform(rng, 0, 100);
    g.vertices.push_back(static_cast<ObjectId>(i));
    g.ranges.push_back({lo, lo + uniform(rng, 0, 5)});
  }
  std::set<std::pair<std::size_t, std::size_t>> want;
  for (std::size_t u = 0; u < g.size(); ++u) {
    for (std::size_t v = u + 1; v < g.size(); ++v) {
      if (g.has_edge(u, v)) want.insert({u, v});
    }
  }
  const auto got = g.edges();
  CHECK(std::set<std::pair<std::size_t, std::size_t>>(got.begin(), got.end()) == want);
  CHECK(got.size() == want.size());
}

TEST_CASE("detect_partitioned: agrees with the unpartitioned time on random instances") {
  std::mt19937_64 rng(2024);
  int hits = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const ProblemInstance p =
        inst % 2 == 0 ? random_linear_instance(rng) : random_kepler_instance(rng);
    const auto oracle = first_collision_step(p);
    for (std::size_t parts : {1u, 2u, 4u}) {
      PartitionOptions opts;
      opts.workers = 2;
      const PartitionedResult r = detect_partitioned(p, parts, opts);
      REQUIRE(r.witness.has_value() == oracle.has_value());
      if (oracle) {
        REQUIRE(r.witness->step == *oracle);
        REQUIRE(pair_collides(p, r.witness->a, r.witness->b, r.witness->step));
      }
    }
    hits += oracle.has_value();
  }
  CHECK(hits > 30);
}

TEST_CASE("detect_partitioned: a pair duplicated in two bands is reported once") {
  // Two objects on the same eccentric orbit, one step apart in phase, both
  // straddling every band edge.
  std::vector<WorldObject> objs{kepler(1, 2.1e7, 0.66, 1e5, 0.0), kepler(2, 2.1e7, 0.66, 1e5, 0.0),
                                kepler(3, 7e6, 0, 1), kepler(4, 4.2e7, 0, 1)};
  objs[1].dynamics = objs[0].dynamics;
  const ProblemInstance p = instance(objs);
  const PartitionedResult r = detect_partitioned(p, 2);
  REQUIRE(r.witness);
  CHECK(r.witness->step == 0);
  CHECK(std::minmax(r.witness->a, r.witness->b) == std::minmax(ObjectId{1}, ObjectId{2}));
  int band_hits = 0;
  for (const BandResult& b : r.bands) band_hits += b.witness.has_value();
  CHECK(band_hits == 2);
}

TEST_CASE("detect_partitioned: collision-free catalog yields nothing anywhere") {
  const ProblemInstance p = instance(
      {kepler(1, 7e6, 0, 1), kepler(2, 8e6, 0, 1), kepler(3, 2.6e7, 0.7, 1), kepler(4, 4.2e7, 0, 1)});
  for (std::size_t parts : {1u, 2u, 3u}) {
    const PartitionedResult r = detect_partitioned(p, parts);
    CHECK_FALSE(r.witness);
    for (const BandResult& b : r.bands) CHECK_FALSE(b.witness);
  }
}

TEST_CASE("worker count defaults and stats CSV") {
  CHECK(default_worker_count() >= 1);
  const ProblemInstance p = instance({kepler(1, 7e6, 0, 1), kepler(2, 4.2e7, 0, 1)});
  std::ostringstream out;
  write_partition_stats_csv(out, partition_stats(build_bands(build_graph(p), 2)));
  const std::string csv = out.str();
  CHECK(csv.rfind("band_index,alt_lo_m,alt_hi_m,count\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
