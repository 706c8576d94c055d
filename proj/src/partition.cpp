#include "orbitguard/partition.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>

namespace orbitguard {

namespace {

bool share_band(const std::vector<std::size_t>& x, const std::vector<std::size_t>& y) {
  auto i = x.begin();
  auto j = y.begin();
  while (i != x.end() && j != y.end()) {
    if (*i == *j) return true;
    if (*i < *j) {
      ++i;
    } else {
      ++j;
    }
  }
  return false;
}

void verify_witness(const ProblemInstance& p, const CollisionWitness& w) {
  const WorldObject* a = nullptr;
  const WorldObject* b = nullptr;
  for (const WorldObject& o : p.objects) {
    if (o.id == w.a) a = &o;
    if (o.id == w.b) b = &o;
  }
  if (a && b && a != b) {
    auto pa = a->dynamics->make_propagator(p.step_s);
    auto pb = b->dynamics->make_propagator(p.step_s);
    if (occ(*a, *pa, w.step).overlaps(occ(*b, *pb, w.step))) return;
  }
  throw std::logic_error("band witness (" + std::to_string(w.a) + ", " + std::to_string(w.b) +
                         ") at step " + std::to_string(w.step) +
                         " failed re-verification against exact occupancies");
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> PotentialCollisionGraph::edges() const {
  std::vector<std::size_t> order(ranges.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return ranges[x].lo < ranges[y].lo; });
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t p = 0; p < order.size(); ++p) {
    const RadialRange& r = ranges[order[p]];
    for (std::size_t q = p + 1; q < order.size() && ranges[order[q]].lo <= r.hi; ++q) {
      out.emplace_back(std::min(order[p], order[q]), std::max(order[p], order[q]));
    }
  }
  return out;
}

PotentialCollisionGraph build_graph(const ProblemInstance& p) {
  PotentialCollisionGraph g;
  double r_max = 0.0;
  for (const WorldObject& o : p.objects) r_max = std::max(r_max, o.radius);
  g.adjustment = 2.0 * r_max;
  g.vertices.reserve(p.objects.size());
  g.ranges.reserve(p.objects.size());
  for (const WorldObject& o : p.objects) {
    const Interval r = o.dynamics->radial_range(p.horizon_s);
    g.vertices.push_back(o.id);
    g.ranges.push_back({r.lo() - g.adjustment, r.hi() + g.adjustment});
  }
  return g;
}

PartitionSet build_bands(const PotentialCollisionGraph& graph, std::size_t p) {
  if (p == 0) throw std::invalid_argument("partition count must be at least 1");
  PartitionSet out;
  const std::size_t n = graph.size();
  if (n == 0) return out;

  std::vector<double> keys(n);
  double lo = INFINITY;
  double hi = -INFINITY;
  for (std::size_t k = 0; k < n; ++k) {
    const RadialRange& r = graph.ranges[k];
    // Equals the semi-major axis for a Kepler orbit.
    keys[k] = 0.5 * (r.lo + r.hi);
    lo = std::min(lo, r.lo);
    hi = std::max(hi, r.hi);
  }
  std::sort(keys.begin(), keys.end());

  const std::size_t d = (n + p - 1) / p;
  std::vector<double> edges{lo};
  // Each edge sits between the last key of one group and the first of the
  // next; equal keys give an edge on that shared value.
  for (std::size_t k = d; k < n; k += d) edges.push_back(0.5 * (keys[k - 1] + keys[k]));
  edges.push_back(hi);
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
    out.bands.push_back({edges[b], edges[b + 1], {}});
  }

  const std::size_t count = out.bands.size();
  for (std::size_t k = 0; k < n; ++k) {
    const RadialRange& r = graph.ranges[k];
    // First band whose upper edge reaches r.lo; bands are sorted.
    std::size_t b = static_cast<std::size_t>(
        std::lower_bound(out.bands.begin(), out.bands.end(), r.lo,
                         [](const Band& band, double x) { return band.hi < x; }) -
        out.bands.begin());
    for (; b < count && out.bands[b].lo <= r.hi; ++b) out.bands[b].members.push_back(k);
  }
  return out;
}

void partition_edge_cover_check(const PotentialCollisionGraph& graph, const PartitionSet& set) {
  const std::size_t n = graph.size();
  std::vector<std::vector<std::size_t>> bands_of(n);
  for (std::size_t b = 0; b < set.bands.size(); ++b) {
    for (std::size_t slot : set.bands[b].members) {
      if (slot >= n) throw std::out_of_range("band member outside the graph");
      bands_of[slot].push_back(b);
    }
  }
  for (auto& v : bands_of) std::sort(v.begin(), v.end());

  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return graph.ranges[x].lo < graph.ranges[y].lo;
  });
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t u = order[p];
    const double hi = graph.ranges[u].hi;
    for (std::size_t q = p + 1; q < n && graph.ranges[order[q]].lo <= hi; ++q) {
      const std::size_t v = order[q];
      if (!share_band(bands_of[u], bands_of[v])) {
        throw UncoveredEdge(graph.vertices[u], graph.vertices[v]);
      }
    }
  }
}

std::size_t default_worker_count() {
  if (const char* env = std::getenv("ORBITGUARD_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

PartitionedResult detect_partitioned(const ProblemInstance& p, const PartitionSet& set,
                                     const PartitionOptions& options) {
  p.validate();
  PartitionedResult result;
  const std::size_t nb = set.bands.size();
  result.bands.resize(nb);
  if (p.objects.size() < 2 || nb == 0) return result;
  if (options.check_cover) partition_edge_cover_check(build_graph(p), set);

  // Largest bands first, so the slowest work starts early.
  std::vector<std::size_t> order(nb);
  for (std::size_t b = 0; b < nb; ++b) order[b] = b;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return set.bands[x].members.size() > set.bands[y].members.size();
  });

  EngineOptions engine = options.engine;
  std::mutex callback_mutex;
  if (options.engine.on_iteration) {
    engine.on_iteration = [&](const IterationRecord& r) {
      std::lock_guard<std::mutex> lock(callback_mutex);
      options.engine.on_iteration(r);
    };
  }

  std::vector<Telemetry> telemetry(nb);
  std::vector<std::exception_ptr> errors(nb);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= nb) return;
      const std::size_t b = order[k];
      try {
        ProblemInstance sub;
        sub.horizon_s = p.horizon_s;
        sub.step_s = p.step_s;
        sub.objects.reserve(set.bands[b].members.size());
        for (std::size_t slot : set.bands[b].members) sub.objects.push_back(p.objects.at(slot));
        const auto start = std::chrono::steady_clock::now();
        DetectResult r = detect(options.algorithm, sub, engine);
        const auto stop = std::chrono::steady_clock::now();
        result.bands[b].objects = sub.objects.size();
        result.bands[b].witness = r.witness;
        result.bands[b].seconds = std::chrono::duration<double>(stop - start).count();
        telemetry[b] = r.telemetry;
      } catch (...) {
        errors[b] = std::current_exception();
      }
    }
  };

  const std::size_t workers =
      std::min(nb, options.workers > 0 ? options.workers : default_worker_count());
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (std::size_t b = 0; b < nb; ++b) {
    result.telemetry += telemetry[b];
    const auto& w = result.bands[b].witness;
    if (w && (!result.witness || witness_before(*w, *result.witness))) result.witness = w;
  }
  if (result.witness) verify_witness(p, *result.witness);
  return result;
}

PartitionedResult detect_partitioned(const ProblemInstance& p, std::size_t partitions,
                                     const PartitionOptions& options) {
  p.validate();
  return detect_partitioned(p, build_bands(build_graph(p), partitions), options);
}

std::vector<BandStats> partition_stats(const PartitionSet& set) {
  std::vector<BandStats> out;
  out.reserve(set.bands.size());
  for (std::size_t b = 0; b < set.bands.size(); ++b) {
    out.push_back({b, set.bands[b].lo, set.bands[b].hi, set.bands[b].members.size()});
  }
  return out;
}

std::size_t max_band_count(const PartitionSet& set) {
  std::size_t m = 0;
  for (const Band& b : set.bands) m = std::max(m, b.members.size());
  return m;
}

void write_partition_stats_csv(std::ostream& out, const std::vector<BandStats>& stats) {
  out << "band_index,alt_lo_m,alt_hi_m,count\n";
  char buf[128];
  for (const BandStats& s : stats) {
    std::snprintf(buf, sizeof buf, "%zu,%.3f,%.3f,%zu\n", s.index, s.lo, s.hi, s.count);
    out << buf;
  }
}

}  // namespace orbitguard
