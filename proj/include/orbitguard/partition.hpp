#ifndef ORBITGUARD_PARTITION_HPP
#define ORBITGUARD_PARTITION_HPP

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "orbitguard/engine.hpp"

namespace orbitguard {

/// Closed range of distances from the origin (meters).
struct RadialRange {
  double lo = 0.0;
  double hi = 0.0;

  bool overlaps(const RadialRange& o) const { return lo <= o.hi && o.lo <= hi; }
};

/// Altitude-based potential-collision graph: u and v share an edge iff their
/// radius-adjusted radial ranges overlap. Absence of an edge proves the pair
/// cannot collide within the horizon.
struct PotentialCollisionGraph {
  std::vector<ObjectId> vertices;
  std::vector<RadialRange> ranges;  // adjusted, parallel to vertices
  double adjustment = 0.0;          // added on both sides of each range

  std::size_t size() const { return vertices.size(); }
  bool has_edge(std::size_t u, std::size_t v) const {
    return u != v && ranges[u].overlaps(ranges[v]);
  }
  /// All edges (u < v, object slots), by a sort-and-sweep over ranges.
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;
};

/// Each object's range widened by 2 * r_max on both sides, where r_max is
/// the largest radius in the instance.
PotentialCollisionGraph build_graph(const ProblemInstance& p);

struct Band {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> members;  // object slots, ascending
};

struct PartitionSet {
  std::vector<Band> bands;
};

/// Altitude bands over sorted range midpoints in groups of d = ceil(n / p);
/// band edges lie halfway between neighbouring groups.
/// The outer bands extend to the extreme adjusted radii, so the bands tile
/// every object's range; each object joins every band its range touches.
PartitionSet build_bands(const PotentialCollisionGraph& graph, std::size_t p);

class UncoveredEdge : public std::logic_error {
 public:
  UncoveredEdge(ObjectId a, ObjectId b)
      : std::logic_error("potential-collision edge (" + std::to_string(a) + ", " +
                         std::to_string(b) + ") is not covered by any band"),
        a_(a), b_(b) {}
  ObjectId a() const { return a_; }
  ObjectId b() const { return b_; }

 private:
  ObjectId a_;
  ObjectId b_;
};

/// Throws UncoveredEdge unless every graph edge has both endpoints in some
/// common band.
void partition_edge_cover_check(const PotentialCollisionGraph& graph, const PartitionSet& bands);

/// ORBITGUARD_WORKERS if set and positive, else the hardware thread count.
std::size_t default_worker_count();

struct PartitionOptions {
  Algorithm algorithm = Algorithm::aabb_4d;
  std::size_t workers = 0;  // 0: default_worker_count()
  EngineOptions engine;
  bool check_cover = true;
};

struct BandResult {
  std::size_t objects = 0;
  std::optional<CollisionWitness> witness;
  double seconds = 0.0;
};

struct PartitionedResult {
  std::optional<CollisionWitness> witness;
  Telemetry telemetry;
  std::vector<BandResult> bands;
};

/// Runs one detection per band on a worker pool and returns the earliest
/// witness (ties by id pair). The witness is re-verified against exact
/// occupancies before it is returned.
PartitionedResult detect_partitioned(const ProblemInstance& p, const PartitionSet& bands,
                                     const PartitionOptions& options = {});

/// Builds the graph and bands, then runs detect_partitioned.
PartitionedResult detect_partitioned(const ProblemInstance& p, std::size_t partitions,
                                     const PartitionOptions& options = {});

struct BandStats {
  std::size_t index = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

std::vector<BandStats> partition_stats(const PartitionSet& bands);
std::size_t max_band_count(const PartitionSet& bands);

/// CSV with header band_index,alt_lo_m,alt_hi_m,count.
void write_partition_stats_csv(std::ostream& out, const std::vector<BandStats>& stats);

}  // namespace orbitguard

#endif  // ORBITGUARD_PARTITION_HPP
