#ifndef ORBITGUARD_ENGINE_HPP
#define ORBITGUARD_ENGINE_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "orbitguard/dynamics.hpp"
#include "orbitguard/geometry.hpp"

namespace orbitguard {

using ObjectId = std::uint64_t;

/// An identity, its motion, and the half-edge (meters) of its occupancy cube.
struct WorldObject {
  ObjectId id = 0;
  std::shared_ptr<const DynamicsModel> dynamics;
  double radius = 0.0;
};

/// Discrete-time detection problem: collisions are only considered at
/// integer multiples of step_s up to and including horizon_s.
struct ProblemInstance {
  std::vector<WorldObject> objects;
  double horizon_s = 0.0;
  double step_s = 0.0;

  /// Throws std::invalid_argument if the time grid is malformed (step <= 0,
  /// horizon < step, horizon not a multiple of step), a radius is negative,
  /// dynamics are missing, or ids repeat.
  void validate() const;

  /// Number of grid steps in the horizon (horizon_s / step_s).
  Step total_steps() const;
};

struct CollisionWitness {
  ObjectId a = 0;
  ObjectId b = 0;
  Step step = 0;
  double time_s = 0.0;

  friend bool operator==(const CollisionWitness&, const CollisionWitness&) = default;
};

/// Earlier time first, then the smaller unordered id pair.
bool witness_before(const CollisionWitness& x, const CollisionWitness& y);

enum class Algorithm { brute, basic_aabb, aabb_4d };

std::string_view to_string(Algorithm algo);
/// Accepts "brute", "basic-aabb", "aabb-4d". Throws std::invalid_argument.
Algorithm parse_algorithm(std::string_view name);

/// Deliberate defects used to show the runtime invariant checks have teeth.
enum class FaultInjection {
  none,
  advance_keeps_max,       // advanceTime sets t_min to t_max (drops the +delta)
  advance_skips_step,      // advanceTime sets t_min to t_max + 2 delta
  resolve_overshoots_min,  // resolveCollisions raises y.t_min past v.t_min
  resolve_skips_requery,   // resolveCollisions returns after a single pass
};

class InvariantViolation : public std::logic_error {
 public:
  InvariantViolation(const std::string& what, std::string dump)
      : std::logic_error(what), dump_(std::move(dump)) {}
  const std::string& dump() const { return dump_; }

 private:
  std::string dump_;
};

struct IterationRecord {
  std::uint64_t iteration = 0;
  ObjectId object = 0;
  Step t_prime = 0;  // smallest t_max at the top of the iteration
  std::size_t tree_size = 0;
  std::uint64_t queue_ops = 0;
  std::uint64_t resolve_passes = 0;
};

struct EngineOptions {
  /// Check loop invariants at every main-loop iteration.
  bool verify = false;
  /// Largest n for which verification re-checks for collisions by brute force.
  std::size_t brute_recheck_max_n = 20;
  /// Weight of the time extent in the tree's insertion cost.
  double time_weight = 1.0;
  /// Called once per main-loop iteration when set.
  std::function<void(const IterationRecord&)> on_iteration;
  /// Testing only.
  FaultInjection fault = FaultInjection::none;
};

struct Telemetry {
  std::uint64_t iterations = 0;
  std::uint64_t tree_queries = 0;
  std::uint64_t tree_inserts = 0;
  std::uint64_t tree_updates = 0;
  std::uint64_t tree_removes = 0;
  std::uint64_t tree_rotations = 0;
  std::uint64_t queue_ops = 0;
  std::uint64_t resolve_passes = 0;
  std::uint64_t raised_min = 0;     // y.t_min raised to v.t_min
  std::uint64_t shrunk_other = 0;   // y.t_max halved
  std::uint64_t shrunk_self = 0;    // v.t_max halved
  int max_tree_height = 0;

  Telemetry& operator+=(const Telemetry& o);
};

struct DetectResult {
  std::optional<CollisionWitness> witness;
  Telemetry telemetry;
};

/// Occupancy cube of `obj` at grid step `step`.
Box3 occ(const WorldObject& obj, Propagator& prop, Step step);

/// Checks every pair at every grid time; returns the earliest witness with
/// ties going to the first (i, j), i < j, in object order.
DetectResult detect_brute(const ProblemInstance& p);

/// Rebuilds a 3D AABB tree at every grid time.
DetectResult detect_basic_aabb(const ProblemInstance& p);

/// 4D AABB tree with per-object variable time steps.
DetectResult detect_4d(const ProblemInstance& p, const EngineOptions& options = {});

DetectResult detect(Algorithm algo, const ProblemInstance& p,
                    const EngineOptions& options = {});

/// Closed range of grid steps [first, last].
struct StepInterval {
  Step first = 0;
  Step last = 0;

  Step length() const { return last - first; }
  friend bool operator==(const StepInterval&, const StepInterval&) = default;
};

/// Moves the interval past its current end: the new start is one step after
/// the old end and the length doubles (at least one step), clamped to
/// total_steps. Requires w.last < total_steps.
StepInterval advance_time(StepInterval w, Step total_steps);

/// Indexed binary min-heap of (t_max, id) over engine object slots.
class MaxTimeQueue {
 public:
  explicit MaxTimeQueue(std::size_t capacity = 0);

  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  bool contains(std::size_t slot) const;

  void push(std::size_t slot, Step t_max, ObjectId id);
  /// Repositions `slot` after its t_max changed.
  void update(std::size_t slot, Step t_max);
  void remove(std::size_t slot);

  std::size_t top() const { return heap_.front(); }
  Step top_key() const { return keys_[heap_.front()].t_max; }

  std::uint64_t ops() const { return ops_; }

 private:
  struct Key {
    Step t_max = 0;
    ObjectId id = 0;
    bool operator<(const Key& o) const {
      return t_max != o.t_max ? t_max < o.t_max : id < o.id;
    }
  };
  static constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);

  void sift_up(std::size_t pos);
  void sift_down(std::size_t pos);
  void swap_positions(std::size_t a, std::size_t b);

  std::vector<std::size_t> heap_;      // heap position -> slot
  std::vector<std::size_t> position_;  // slot -> heap position
  std::vector<Key> keys_;              // slot -> key
  std::uint64_t ops_ = 0;
};

/// State of one 4D detection run. Exposes the individual procedures so they
/// can be exercised on their own; detect_4d() drives them in order.
class Engine4d {
 public:
  Engine4d(const ProblemInstance& p, EngineOptions options = {});
  ~Engine4d();
  Engine4d(const Engine4d&) = delete;
  Engine4d& operator=(const Engine4d&) = delete;

  std::size_t size() const { return objects_.size(); }
  Step total_steps() const { return total_steps_; }

  /// Inserts every object with interval [0, 0]. Returns the first pair whose
  /// occupancy overlaps at time zero (new object first), or nothing with all
  /// objects in the tree.
  std::optional<std::pair<std::size_t, std::size_t>> initialize_tree();

  /// Runs the main loop to completion.
  std::optional<CollisionWitness> run();

  /// One main-loop iteration. Returns true once the horizon is reached or a
  /// witness was found (see witness()).
  bool iterate();

  /// Alg. advanceTime on slot v, followed by the tree/queue update.
  void advance(std::size_t v);

  /// Removes every 4D overlap involving slot v by shrinking intervals.
  /// Returns the slot colliding with v at v's (point) time, if any.
  std::optional<std::size_t> resolve_collisions(std::size_t v);

  /// Throws InvariantViolation if a loop invariant fails.
  void verify_loop_invariants();

  const StepInterval& interval(std::size_t slot) const { return intervals_[slot]; }
  /// Sets an interval and refreshes the tree and queue; for tests.
  void set_interval(std::size_t slot, StepInterval w);
  Box4 occ_4d(std::size_t slot);
  const WorldObject& object(std::size_t slot) const { return objects_[slot]; }
  const AabbTree4d& tree() const { return tree_; }
  const MaxTimeQueue& queue() const { return queue_; }
  const std::optional<CollisionWitness>& witness() const { return witness_; }
  Telemetry telemetry() const;

  std::string dump_state() const;

 private:
  void tree_insert(std::size_t slot);
  void tree_update(std::size_t slot);
  void fail(const std::string& what) const;
  void brute_recheck_through(Step t_prime);

  std::vector<WorldObject> objects_;
  std::vector<std::unique_ptr<Propagator>> props_;
  std::vector<StepInterval> intervals_;
  std::vector<Step> last_first_;
  double step_s_;
  Step total_steps_;
  EngineOptions options_;
  AabbTree4d tree_;
  MaxTimeQueue queue_;
  std::optional<CollisionWitness> witness_;
  Telemetry counters_;
  Step rechecked_through_ = -1;
  Step last_t_prime_ = 0;
  std::vector<ObjectIndex> scratch_;
  std::vector<ObjectIndex> previous_;
};

}  // namespace orbitguard

#endif  // ORBITGUARD_ENGINE_HPP
