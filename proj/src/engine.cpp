#include "orbitguard/engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace orbitguard {

// ---------------------------------------------------------------------------
// Problem definition

void ProblemInstance::validate() const {
  if (!(step_s > 0.0) || !std::isfinite(step_s)) {
    throw std::invalid_argument("time step must be positive");
  }
  if (!(horizon_s >= step_s) || !std::isfinite(horizon_s)) {
    throw std::invalid_argument("time horizon must be at least one time step");
  }
  const double ratio = horizon_s / step_s;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, rounded)) {
    throw std::invalid_argument("time horizon must be an integer multiple of the time step");
  }
  std::unordered_set<ObjectId> seen;
  seen.reserve(objects.size());
  for (const WorldObject& o : objects) {
    if (!o.dynamics) throw std::invalid_argument("object without dynamics");
    if (!(o.radius >= 0.0) || !std::isfinite(o.radius)) {
      throw std::invalid_argument("object radius must be non-negative");
    }
    if (!seen.insert(o.id).second) {
      throw std::invalid_argument("duplicate object id " + std::to_string(o.id));
    }
  }
}

Step ProblemInstance::total_steps() const {
  return static_cast<Step>(std::llround(horizon_s / step_s));
}

bool witness_before(const CollisionWitness& x, const CollisionWitness& y) {
  if (x.step != y.step) return x.step < y.step;
  const auto kx = std::minmax(x.a, x.b);
  const auto ky = std::minmax(y.a, y.b);
  return kx < ky;
}

std::string_view to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::brute:
      return "brute";
    case Algorithm::basic_aabb:
      return "basic-aabb";
    case Algorithm::aabb_4d:
      return "aabb-4d";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "brute") return Algorithm::brute;
  if (name == "basic-aabb") return Algorithm::basic_aabb;
  if (name == "aabb-4d") return Algorithm::aabb_4d;
  throw std::invalid_argument("unknown algorithm '" + std::string(name) +
                              "' (expected brute, basic-aabb or aabb-4d)");
}

Telemetry& Telemetry::operator+=(const Telemetry& o) {
  iterations += o.iterations;
  tree_queries += o.tree_queries;
  tree_inserts += o.tree_inserts;
  tree_updates += o.tree_updates;
  tree_removes += o.tree_removes;
  tree_rotations += o.tree_rotations;
  queue_ops += o.queue_ops;
  resolve_passes += o.resolve_passes;
  raised_min += o.raised_min;
  shrunk_other += o.shrunk_other;
  shrunk_self += o.shrunk_self;
  max_tree_height = std::max(max_tree_height, o.max_tree_height);
  return *this;
}

Box3 occ(const WorldObject& obj, Propagator& prop, Step step) {
  return cube(prop.position(step), obj.radius);
}

namespace {

std::vector<std::unique_ptr<Propagator>> make_propagators(const ProblemInstance& p) {
  std::vector<std::unique_ptr<Propagator>> props;
  props.reserve(p.objects.size());
  for (const WorldObject& o : p.objects) props.push_back(o.dynamics->make_propagator(p.step_s));
  return props;
}

CollisionWitness make_witness(ObjectId a, ObjectId b, Step step, double step_s) {
  return {a, b, step, static_cast<double>(step) * step_s};
}

}  // namespace

// ---------------------------------------------------------------------------
// Baselines

DetectResult detect_brute(const ProblemInstance& p) {
  p.validate();
  DetectResult result;
  const std::size_t n = p.objects.size();
  if (n < 2) return result;
  auto props = make_propagators(p);
  std::vector<Box3> boxes(n);
  const Step total = p.total_steps();
  for (Step s = 0; s <= total; ++s) {
    ++result.telemetry.iterations;
    for (std::size_t i = 0; i < n; ++i) {
      boxes[i] = occ(p.objects[i], *props[i], s);
      props[i]->retire_before(s);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (boxes[i].overlaps(boxes[j])) {
          result.witness = make_witness(p.objects[i].id, p.objects[j].id, s, p.step_s);
          return result;
        }
      }
    }
  }
  return result;
}

DetectResult detect_basic_aabb(const ProblemInstance& p) {
  p.validate();
  DetectResult result;
  const std::size_t n = p.objects.size();
  if (n < 2) return result;
  auto props = make_propagators(p);
  AabbTree3d tree;
  std::vector<ObjectIndex> hits;
  Telemetry& tel = result.telemetry;
  const Step total = p.total_steps();
  for (Step s = 0; s <= total; ++s) {
    ++tel.iterations;
    tree.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Box3 box = occ(p.objects[i], *props[i], s);
      props[i]->retire_before(s);
      tree.query(box, hits);
      ++tel.tree_queries;
      if (!hits.empty()) {
        const ObjectIndex first = *std::min_element(hits.begin(), hits.end());
        result.witness = make_witness(p.objects[first].id, p.objects[i].id, s, p.step_s);
        break;
      }
      tree.insert(static_cast<ObjectIndex>(i), box);
    }
    tel.max_tree_height = std::max(tel.max_tree_height, tree.height());
    tel.tree_inserts += tree.stats().inserts;
    tel.tree_rotations += tree.stats().rotations;
    if (result.witness) break;
  }
  return result;
}

DetectResult detect_4d(const ProblemInstance& p, const EngineOptions& options) {
  p.validate();
  DetectResult result;
  if (p.objects.size() < 2) return result;
  Engine4d engine(p, options);
  result.witness = engine.run();
  result.telemetry = engine.telemetry();
  return result;
}

DetectResult detect(Algorithm algo, const ProblemInstance& p, const EngineOptions& options) {
  switch (algo) {
    case Algorithm::brute:
      return detect_brute(p);
    case Algorithm::basic_aabb:
      return detect_basic_aabb(p);
    case Algorithm::aabb_4d:
      return detect_4d(p, options);
  }
  throw std::invalid_argument("unknown algorithm");
}

// ---------------------------------------------------------------------------
// advanceTime

StepInterval advance_time(StepInterval w, Step total_steps) {
  const Step prev_steps = w.length();
  const Step next_steps = prev_steps > 0 ? 2 * prev_steps : 1;
  StepInterval out;
  out.first = w.last + 1;
  out.last = std::min(out.first + next_steps, total_steps);
  return out;
}

// ---------------------------------------------------------------------------
// MaxTimeQueue

MaxTimeQueue::MaxTimeQueue(std::size_t capacity) {
  heap_.reserve(capacity);
  position_.reserve(capacity);
  keys_.reserve(capacity);
}

bool MaxTimeQueue::contains(std::size_t slot) const {
  return slot < position_.size() && position_[slot] != kAbsent;
}

void MaxTimeQueue::push(std::size_t slot, Step t_max, ObjectId id) {
  if (contains(slot)) throw std::invalid_argument("slot already queued");
  if (position_.size() <= slot) {
    position_.resize(slot + 1, kAbsent);
    keys_.resize(slot + 1);
  }
  keys_[slot] = {t_max, id};
  position_[slot] = heap_.size();
  heap_.push_back(slot);
  sift_up(heap_.size() - 1);
  ++ops_;
}

void MaxTimeQueue::update(std::size_t slot, Step t_max) {
  if (!contains(slot)) throw std::invalid_argument("slot not queued");
  const Step old = keys_[slot].t_max;
  keys_[slot].t_max = t_max;
  if (t_max < old) {
    sift_up(position_[slot]);
  } else if (t_max > old) {
    sift_down(position_[slot]);
  }
  ++ops_;
}

void MaxTimeQueue::remove(std::size_t slot) {
  if (!contains(slot)) throw std::invalid_argument("slot not queued");
  const std::size_t pos = position_[slot];
  const std::size_t last = heap_.size() - 1;
  if (pos != last) {
    swap_positions(pos, last);
  }
  heap_.pop_back();
  position_[slot] = kAbsent;
  if (pos < heap_.size()) {
    sift_up(pos);
    sift_down(position_[heap_[pos]]);
  }
  ++ops_;
}

void MaxTimeQueue::swap_positions(std::size_t a, std::size_t b) {
  std::swap(heap_[a], heap_[b]);
  position_[heap_[a]] = a;
  position_[heap_[b]] = b;
}

void MaxTimeQueue::sift_up(std::size_t pos) {
  while (pos > 0) {
    const std::size_t parent = (pos - 1) / 2;
    if (!(keys_[heap_[pos]] < keys_[heap_[parent]])) break;
    swap_positions(pos, parent);
    pos = parent;
  }
}

void MaxTimeQueue::sift_down(std::size_t pos) {
  const std::size_t n = heap_.size();
  for (;;) {
    std::size_t best = pos;
    const std::size_t l = 2 * pos + 1;
    const std::size_t r = l + 1;
    if (l < n && keys_[heap_[l]] < keys_[heap_[best]]) best = l;
    if (r < n && keys_[heap_[r]] < keys_[heap_[best]]) best = r;
    if (best == pos) return;
    swap_positions(pos, best);
    pos = best;
  }
}

// ---------------------------------------------------------------------------
// Engine4d

Engine4d::Engine4d(const ProblemInstance& p, EngineOptions options)
    : objects_(p.objects),
      step_s_(p.step_s),
      total_steps_(0),
      options_(std::move(options)),
      tree_({1.0, 1.0, 1.0, options_.time_weight}),
      queue_(p.objects.size()) {
  p.validate();
  total_steps_ = p.total_steps();
  props_ = make_propagators(p);
  intervals_.assign(objects_.size(), StepInterval{});
  last_first_.assign(objects_.size(), 0);
}

Engine4d::~Engine4d() = default;

Box4 Engine4d::occ_4d(std::size_t slot) {
  const StepInterval& w = intervals_[slot];
  const Box3 space = inflate(props_[slot]->sweep(w.first, w.last), objects_[slot].radius);
  return make_box4(space, Interval(static_cast<double>(w.first) * step_s_,
                                   static_cast<double>(w.last) * step_s_));
}

void Engine4d::tree_insert(std::size_t slot) {
  tree_.insert(static_cast<ObjectIndex>(slot), occ_4d(slot));
  queue_.push(slot, intervals_[slot].last, objects_[slot].id);
}

void Engine4d::tree_update(std::size_t slot) {
  tree_.update(static_cast<ObjectIndex>(slot), occ_4d(slot));
  queue_.update(slot, intervals_[slot].last);
}

void Engine4d::set_interval(std::size_t slot, StepInterval w) {
  if (w.first < 0 || w.first > w.last || w.last > total_steps_) {
    throw std::invalid_argument("interval outside the time grid");
  }
  intervals_[slot] = w;
  if (tree_.contains(static_cast<ObjectIndex>(slot))) {
    tree_update(slot);
  } else {
    tree_insert(slot);
  }
  last_first_[slot] = w.first;
}

std::optional<std::pair<std::size_t, std::size_t>> Engine4d::initialize_tree() {
  std::vector<ObjectIndex> hits;
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    intervals_[i] = {0, 0};
    last_first_[i] = 0;
    tree_.query(occ_4d(i), hits);
    ++counters_.tree_queries;
    if (!hits.empty()) {
      return std::pair{i, std::size_t{*std::min_element(hits.begin(), hits.end())}};
    }
    tree_insert(i);
  }
  return std::nullopt;
}

void Engine4d::advance(std::size_t v) {
  StepInterval w = intervals_[v];
  switch (options_.fault) {
    case FaultInjection::advance_keeps_max: {
      const Step prev = w.length();
      w.first = w.last;
      w.last = std::min(w.first + (prev > 0 ? 2 * prev : 1), total_steps_);
      break;
    }
    case FaultInjection::advance_skips_step: {
      const Step prev = w.length();
      w.first = std::min(w.last + 2, total_steps_);
      w.last = std::min(w.first + (prev > 0 ? 2 * prev : 1), total_steps_);
      break;
    }
    default:
      w = advance_time(w, total_steps_);
  }
  intervals_[v] = w;
  props_[v]->retire_before(w.first);
  tree_update(v);
}

std::optional<std::size_t> Engine4d::resolve_collisions(std::size_t v) {
  std::vector<ObjectIndex>& hits = scratch_;
  const auto vi = static_cast<ObjectIndex>(v);
  tree_.query_object(vi, hits);
  ++counters_.tree_queries;

  auto total_length = [&](const std::vector<ObjectIndex>& set) {
    Step sum = intervals_[v].length();
    for (ObjectIndex y : set) sum += intervals_[y].length();
    return sum;
  };

  while (!hits.empty()) {
    ++counters_.resolve_passes;
    Step length_before = 0;
    if (options_.verify) {
      previous_ = hits;
      length_before = total_length(previous_);
    }
    // `hits` is a snapshot; entries made stale by earlier updates in this
    // pass are filtered by the overlap re-test.
    for (ObjectIndex y : hits) {
      if (!tree_.box_of(y).overlaps(tree_.box_of(vi))) continue;
      StepInterval& wy = intervals_[y];
      StepInterval& wv = intervals_[v];
      const Step steps_y = wy.length();
      const Step steps_v = wv.length();
      if (steps_y == 0 && steps_v == 0) {
        return std::size_t{y};
      } else if (wy.first < wv.first) {
        wy.first = wv.first;
        if (options_.fault == FaultInjection::resolve_overshoots_min) {
          wy.first = wv.first + 1;
          wy.last = std::max(wy.last, wy.first);
        }
        ++counters_.raised_min;
        tree_update(y);
      } else if (steps_v <= steps_y) {
        wy.last = wy.first + steps_y / 2;
        ++counters_.shrunk_other;
        tree_update(y);
      } else {
        wv.last = wv.first + steps_v / 2;
        ++counters_.shrunk_self;
        tree_update(v);
      }
    }
    if (options_.fault == FaultInjection::resolve_skips_requery) return std::nullopt;
    tree_.query_object(vi, hits);
    ++counters_.tree_queries;

    if (options_.verify) {
      std::vector<ObjectIndex> now = hits;
      std::sort(now.begin(), now.end());
      std::sort(previous_.begin(), previous_.end());
      if (!std::includes(previous_.begin(), previous_.end(), now.begin(), now.end())) {
        fail("resolveCollisions: overlap set grew between passes");
      }
      if (!(total_length(previous_) < length_before)) {
        fail("resolveCollisions: a pass did not shrink any interval");
      }
    }
  }
  return std::nullopt;
}

bool Engine4d::iterate() {
  if (witness_) return true;
  if (queue_.empty()) return true;
  if (options_.verify) verify_loop_invariants();

  const std::size_t v = queue_.top();
  const Step t_prime = intervals_[v].last;
  if (t_prime >= total_steps_) return true;

  const Step first_before = intervals_[v].first;
  advance(v);
  if (options_.verify && !(intervals_[v].first > first_before)) {
    fail("advanceTime did not increase t_min of the selected object");
  }
  const auto u = resolve_collisions(v);
  ++counters_.iterations;

  if (options_.verify && !u) {
    tree_.query_object(static_cast<ObjectIndex>(v), scratch_);
    if (!scratch_.empty()) {
      fail("resolveCollisions returned no collision but 4D boxes still overlap");
    }
  }
  if (options_.on_iteration) {
    IterationRecord rec;
    rec.iteration = counters_.iterations;
    rec.object = objects_[v].id;
    rec.t_prime = t_prime;
    rec.tree_size = tree_.size();
    rec.queue_ops = queue_.ops();
    rec.resolve_passes = counters_.resolve_passes;
    options_.on_iteration(rec);
  }
  if (u) {
    witness_ = make_witness(objects_[v].id, objects_[*u].id, intervals_[v].first, step_s_);
    return true;
  }
  return false;
}

std::optional<CollisionWitness> Engine4d::run() {
  if (objects_.size() < 2) return std::nullopt;
  if (const auto pair = initialize_tree()) {
    witness_ = make_witness(objects_[pair->first].id, objects_[pair->second].id, 0, step_s_);
    return witness_;
  }
  while (!iterate()) {
  }
  return witness_;
}

void Engine4d::verify_loop_invariants() {
  if (queue_.empty()) return;
  const Step t_prime = queue_.top_key();
  for (std::size_t z = 0; z < intervals_.size(); ++z) {
    const StepInterval& w = intervals_[z];
    if (w.last < t_prime) fail("queue front is not the smallest t_max");
    if (w.first > t_prime + 1) fail("loop invariant 1 violated: t_min exceeds t' + delta");
    if (w.first < last_first_[z]) fail("t_min decreased");
    // Every increase of t_min must land exactly one step past the t' of the
    // iteration that made it.
    if (w.first != last_first_[z] && counters_.iterations > 0 &&
        w.first != last_t_prime_ + 1) {
      fail("t_min increased to a value other than t' + delta");
    }
    last_first_[z] = w.first;
  }
  last_t_prime_ = t_prime;
  if (const std::string err = tree_.validate(); !err.empty()) fail("tree: " + err);
  if (objects_.size() <= options_.brute_recheck_max_n) brute_recheck_through(t_prime);
}

void Engine4d::brute_recheck_through(Step t_prime) {
  const std::size_t n = objects_.size();
  std::vector<Box3> boxes(n);
  for (Step s = rechecked_through_ + 1; s <= t_prime; ++s) {
    for (std::size_t i = 0; i < n; ++i) boxes[i] = occ(objects_[i], *props_[i], s);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (boxes[i].overlaps(boxes[j])) {
          fail("loop invariant 2 violated: collision at step " + std::to_string(s) +
               " between " + std::to_string(objects_[i].id) + " and " +
               std::to_string(objects_[j].id) + " lies at or before t'");
        }
      }
    }
  }
  rechecked_through_ = std::max(rechecked_through_, t_prime);
}

Telemetry Engine4d::telemetry() const {
  Telemetry t = counters_;
  t.tree_inserts = tree_.stats().inserts;
  t.tree_updates = tree_.stats().updates;
  t.tree_removes = tree_.stats().removes;
  t.tree_rotations = tree_.stats().rotations;
  t.queue_ops = queue_.ops();
  t.max_tree_height = tree_.height();
  return t;
}

std::string Engine4d::dump_state() const {
  std::ostringstream out;
  out << "t_steps=" << total_steps_ << " step_s=" << step_s_
      << " iterations=" << counters_.iterations << '\n';
  for (std::size_t z = 0; z < objects_.size(); ++z) {
    out << "  slot " << z << " id " << objects_[z].id << " t=[" << intervals_[z].first
        << ',' << intervals_[z].last << "]";
    if (tree_.contains(static_cast<ObjectIndex>(z))) {
      const Box4& b = tree_.box_of(static_cast<ObjectIndex>(z));
      out << " box=[" << b.lo[0] << ',' << b.hi[0] << "]x[" << b.lo[1] << ',' << b.hi[1]
          << "]x[" << b.lo[2] << ',' << b.hi[2] << "]x[" << b.lo[3] << ',' << b.hi[3] << ']';
    }
    out << '\n';
  }
  return out.str();
}

void Engine4d::fail(const std::string& what) const {
  throw InvariantViolation(what, dump_state());
}

}  // namespace orbitguard
