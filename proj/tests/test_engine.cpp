#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "orbitguard/engine.hpp"
#include "support.hpp"

using namespace orbitguard;
using orbitguard::testing::first_collision_step;
using orbitguard::testing::pair_collides;
using orbitguard::testing::random_kepler_instance;
using orbitguard::testing::random_linear_instance;
using orbitguard::testing::uniform_int;

namespace {

WorldObject linear(ObjectId id, Vec3 origin, Vec3 velocity, double r) {
  return {id, std::make_shared<LinearModel>(origin, velocity), r};
}

// A: moves from x = 10 toward the origin at 1 m/s. B: parked at the origin.
ProblemInstance approach_instance() {
  ProblemInstance p;
  p.step_s = 1.0;
  p.horizon_s = 20.0;
  p.objects.push_back(linear(1, {10, 0, 0}, {-1, 0, 0}, 1.0));
  p.objects.push_back(linear(2, {0, 0, 0}, {0, 0, 0}, 1.0));
  return p;
}

}  // namespace

TEST_CASE("occ: cube around the position") {
  const WorldObject o = linear(1, {1, 2, 3}, {1, 0, 0}, 0.5);
  auto prop = o.dynamics->make_propagator(2.0);
  const Box3 b = occ(o, *prop, 3);
  CHECK(b.lo == Vec3{6.5, 1.5, 2.5});
  CHECK(b.hi == Vec3{7.5, 2.5, 3.5});
  const WorldObject point = linear(2, {0, 0, 0}, {0, 0, 0}, 0.0);
  auto pp = point.dynamics->make_propagator(1.0);
  CHECK(occ(point, *pp, 0).lo == occ(point, *pp, 0).hi);
}

TEST_CASE("occ_4d: space sweep inflated by r times the step interval") {
  Engine4d engine(approach_instance());
  REQUIRE_FALSE(engine.initialize_tree());
  engine.set_interval(0, {2, 5});
  const Box4 b = engine.occ_4d(0);
  CHECK(b.lo == std::array<double, 4>{4, -1, -1, 2});
  CHECK(b.hi == std::array<double, 4>{9, 1, 1, 5});
}

TEST_CASE("problem validation") {
  ProblemInstance p = approach_instance();
  CHECK_NOTHROW(p.validate());
  CHECK(p.total_steps() == 20);
  p.horizon_s = 20.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = approach_instance();
  p.objects[1].id = 1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = approach_instance();
  p.objects[0].radius = -1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = approach_instance();
  p.step_s = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("fewer than two objects never collide") {
  ProblemInstance p = approach_instance();
  p.objects.resize(1);
  for (Algorithm a : {Algorithm::brute, Algorithm::basic_aabb, Algorithm::aabb_4d}) {
    CHECK_FALSE(detect(a, p).witness);
  }
  p.objects.clear();
  CHECK_FALSE(detect_4d(p).witness);
}

TEST_CASE("all algorithms find the analytic contact step") {
  // Contact when 10 - t <= 2, i.e. the first grid step 8.
  const ProblemInstance p = approach_instance();
  for (Algorithm a : {Algorithm::brute, Algorithm::basic_aabb, Algorithm::aabb_4d}) {
    const auto w = detect(a, p).witness;
    REQUIRE(w);
    CHECK(w->step == 8);
    CHECK(w->time_s == 8.0);
    CHECK(std::min(w->a, w->b) == 1);
    CHECK(std::max(w->a, w->b) == 2);
  }
}

TEST_CASE("brute force: separated objects and a collision at time zero") {
  ProblemInstance p;
  p.step_s = 0.5;
  p.horizon_s = 5;
  p.objects.push_back(linear(10, {0, 0, 0}, {0, 0, 0}, 1));
  p.objects.push_back(linear(11, {100, 0, 0}, {0, 0, 0}, 1));
  CHECK_FALSE(detect_brute(p).witness);
  CHECK_FALSE(detect_4d(p).witness);
  p.objects.push_back(linear(12, {1.5, 0, 0}, {0, 0, 0}, 1));
  const auto w = detect_brute(p).witness;
  REQUIRE(w);
  CHECK(w->step == 0);
  CHECK(w->a == 10);
  CHECK(w->b == 12);
  const auto w4 = detect_4d(p).witness;
  REQUIRE(w4);
  CHECK(w4->step == 0);
}

TEST_CASE("advance_time: doubling from the examples") {
  CHECK(advance_time({0, 0}, 100) == StepInterval{1, 2});
  CHECK(advance_time({1, 2}, 100) == StepInterval{3, 5});
  CHECK(advance_time({3, 5}, 6) == StepInterval{6, 6});
  CHECK(advance_time({3, 5}, 100) == StepInterval{6, 10});
  CHECK(advance_time({7, 7}, 100) == StepInterval{8, 9});
}

TEST_CASE("initialize_tree: reports the first pair overlapping at time zero") {
  ProblemInstance p;
  p.step_s = 1;
  p.horizon_s = 4;
  p.objects.push_back(linear(1, {0, 0, 0}, {0, 0, 0}, 1));
  p.objects.push_back(linear(2, {50, 0, 0}, {0, 0, 0}, 1));
  p.objects.push_back(linear(3, {51, 0, 0}, {0, 0, 0}, 1));
  Engine4d engine(p);
  const auto pair = engine.initialize_tree();
  REQUIRE(pair);
  CHECK(pair->first == 2);
  CHECK(pair->second == 1);

  p.objects.pop_back();
  Engine4d clean(p);
  CHECK_FALSE(clean.initialize_tree());
  CHECK(clean.tree().size() == 2);
  CHECK(clean.interval(0) == StepInterval{0, 0});
  CHECK(clean.queue().size() == 2);
}

TEST_CASE("resolve_collisions: each branch") {
  SUBCASE("equal starts, v shorter: halve y") {
    Engine4d e(approach_instance());
    REQUIRE_FALSE(e.initialize_tree());
    e.set_interval(1, {1, 12});
    e.set_interval(0, {1, 1});
    CHECK_FALSE(e.resolve_collisions(1));
    CHECK(e.interval(1) == StepInterval{1, 12});
    CHECK(e.telemetry().shrunk_self == 0);
  }
  SUBCASE("y starts earlier: raise y, then halve y") {
    Engine4d e(approach_instance());
    REQUIRE_FALSE(e.initialize_tree());
    e.set_interval(0, {0, 10});
    e.set_interval(1, {2, 2});
    CHECK_FALSE(e.resolve_collisions(1));
    CHECK(e.interval(0) == StepInterval{2, 6});
    CHECK(e.telemetry().raised_min == 1);
    CHECK(e.telemetry().shrunk_other == 1);
  }
  SUBCASE("v longer than y: halve v") {
    Engine4d e(approach_instance());
    REQUIRE_FALSE(e.initialize_tree());
    e.set_interval(0, {1, 9});
    e.set_interval(1, {1, 1});
    CHECK_FALSE(e.resolve_collisions(0));
    CHECK(e.interval(0) == StepInterval{1, 5});
    CHECK(e.telemetry().shrunk_self == 1);
  }
  SUBCASE("both points overlapping: collision") {
    Engine4d e(approach_instance());
    REQUIRE_FALSE(e.initialize_tree());
    e.set_interval(0, {9, 9});
    e.set_interval(1, {9, 9});
    const auto u = e.resolve_collisions(0);
    REQUIRE(u);
    CHECK(*u == 1);
  }
  SUBCASE("no overlap: nothing changes") {
    Engine4d e(approach_instance());
    REQUIRE_FALSE(e.initialize_tree());
    e.set_interval(0, {1, 2});
    e.set_interval(1, {1, 2});
    CHECK_FALSE(e.resolve_collisions(0));
    CHECK(e.interval(0) == StepInterval{1, 2});
    CHECK(e.interval(1) == StepInterval{1, 2});
  }
}

TEST_CASE("iteration callback and telemetry") {
  ProblemInstance p = approach_instance();
  p.objects[0] = linear(1, {100, 0, 0}, {-1, 0, 0}, 1.0);
  EngineOptions opts;
  std::vector<IterationRecord> records;
  opts.on_iteration = [&](const IterationRecord& r) { records.push_back(r); };
  const DetectResult r = detect_4d(p, opts);
  CHECK_FALSE(r.witness);
  CHECK(records.size() == r.telemetry.iterations);
  REQUIRE_FALSE(records.empty());
  for (std::size_t k = 1; k < records.size(); ++k) {
    CHECK(records[k].t_prime >= records[k - 1].t_prime);
  }
  CHECK(r.telemetry.tree_inserts == 2);
  CHECK(r.telemetry.queue_ops > 0);
}

TEST_CASE("random suite: the three algorithms agree on the first collision time") {
  std::mt19937_64 rng(1234);
  int collisions = 0;
  for (int inst = 0; inst < 300; ++inst) {
    const ProblemInstance p =
        inst % 2 == 0 ? random_linear_instance(rng) : random_kepler_instance(rng);
    const auto oracle = first_collision_step(p);
    const auto b = detect_brute(p).witness;
    const auto a3 = detect_basic_aabb(p).witness;
    EngineOptions verify;
    verify.verify = true;
    const auto a4 = detect_4d(p, verify).witness;
    REQUIRE(b.has_value() == oracle.has_value());
    REQUIRE(a3.has_value() == oracle.has_value());
    REQUIRE(a4.has_value() == oracle.has_value());
    if (oracle) {
      ++collisions;
      REQUIRE(b->step == *oracle);
      REQUIRE(a3->step == *oracle);
      REQUIRE(a4->step == *oracle);
      REQUIRE(pair_collides(p, a4->a, a4->b, a4->step));
      REQUIRE(pair_collides(p, a3->a, a3->b, a3->step));
    }
  }
  // The generator should exercise both outcomes.
  CHECK(collisions > 50);
  CHECK(collisions < 250);
}

TEST_CASE("verify mode: clean runs pass and each seeded fault is caught") {
  const FaultInjection faults[] = {
      FaultInjection::advance_keeps_max, FaultInjection::advance_skips_step,
      FaultInjection::resolve_overshoots_min, FaultInjection::resolve_skips_requery};
  for (FaultInjection fault : faults) {
    std::mt19937_64 rng(77);
    int violations = 0;
    for (int inst = 0; inst < 200; ++inst) {
      const ProblemInstance p =
          inst % 2 == 0 ? random_linear_instance(rng) : random_kepler_instance(rng);
      EngineOptions opts;
      opts.verify = true;
      opts.fault = fault;
      try {
        detect_4d(p, opts);
      } catch (const InvariantViolation& v) {
        ++violations;
        CHECK_FALSE(v.dump().empty());
      }
    }
    INFO("fault " << static_cast<int>(fault));
    CHECK(violations > 0);
  }
}

TEST_CASE("MaxTimeQueue: matches a multiset under random operations") {
  std::mt19937_64 rng(5);
  MaxTimeQueue q;
  std::map<std::size_t, Step> keys;
  for (int op = 0; op < 20000; ++op) {
    const auto slot = static_cast<std::size_t>(uniform_int(rng, 0, 63));
    const Step t = uniform_int(rng, 0, 40);
    const int kind = uniform_int(rng, 0, 2);
    if (kind == 0 && !keys.count(slot)) {
      q.push(slot, t, 1000 + slot);
      keys[slot] = t;
    } else if (kind == 1 && keys.count(slot)) {
      q.update(slot, t);
      keys[slot] = t;
    } else if (kind == 2 && keys.count(slot)) {
      q.remove(slot);
      keys.erase(slot);
    }
    REQUIRE(q.size() == keys.size());
    if (!keys.empty()) {
      // Ties go to the smaller id, and ids increase with slot here.
      std::pair<Step, std::size_t> best{INT64_MAX, 0};
      for (const auto& [s, k] : keys) best = std::min(best, std::pair<Step, std::size_t>{k, s});
      REQUIRE(q.top_key() == best.first);
      REQUIRE(q.top() == best.second);
    }
  }
  CHECK_THROWS_AS(q.update(999, 1), std::invalid_argument);
}

TEST_CASE("witness ordering and algorithm names") {
  CHECK(witness_before({5, 1, 2, 0}, {0, 1, 3, 0}));
  CHECK(witness_before({2, 1, 3, 0}, {3, 1, 3, 0}));
  CHECK_FALSE(witness_before({1, 2, 3, 0}, {2, 1, 3, 0}));
  for (Algorithm a : {Algorithm::brute, Algorithm::basic_aabb, Algorithm::aabb_4d}) {
    CHECK(parse_algorithm(to_string(a)) == a);
  }
  CHECK_THROWS_AS(parse_algorithm("octree"), std::invalid_argument);
}
