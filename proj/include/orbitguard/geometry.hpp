#ifndef ORBITGUARD_GEOMETRY_HPP
#define ORBITGUARD_GEOMETRY_HPP

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "orbitguard/interval.hpp"

namespace orbitguard {

using Vec3 = std::array<double, 3>;

/// Closed axis-aligned box in D dimensions.
template <std::size_t D>
struct Aabb {
  std::array<double, D> lo{};
  std::array<double, D> hi{};

  bool valid() const {
    for (std::size_t k = 0; k < D; ++k) {
      if (!(lo[k] <= hi[k])) return false;
    }
    return true;
  }

  /// Closed-set overlap: touching faces count.
  bool overlaps(const Aabb& o) const {
    for (std::size_t k = 0; k < D; ++k) {
      if (lo[k] > o.hi[k] || o.lo[k] > hi[k]) return false;
    }
    return true;
  }

  bool contains(const Aabb& o) const {
    for (std::size_t k = 0; k < D; ++k) {
      if (o.lo[k] < lo[k] || o.hi[k] > hi[k]) return false;
    }
    return true;
  }

  friend bool operator==(const Aabb&, const Aabb&) = default;
};

template <std::size_t D>
Aabb<D> merge(const Aabb<D>& a, const Aabb<D>& b) {
  Aabb<D> out;
  for (std::size_t k = 0; k < D; ++k) {
    out.lo[k] = std::min(a.lo[k], b.lo[k]);
    out.hi[k] = std::max(a.hi[k], b.hi[k]);
  }
  return out;
}

/// 4D analogue of surface area: weighted sum of products of extent pairs.
template <std::size_t D>
double surface_cost(const Aabb<D>& box, const std::array<double, D>& weights) {
  double cost = 0.0;
  for (std::size_t i = 0; i < D; ++i) {
    const double ei = (box.hi[i] - box.lo[i]) * weights[i];
    for (std::size_t j = i + 1; j < D; ++j) {
      cost += ei * (box.hi[j] - box.lo[j]) * weights[j];
    }
  }
  return cost;
}

/// Space box in meters.
using Box3 = Aabb<3>;
/// Space box in meters times a time interval in seconds (dimension 3).
using Box4 = Aabb<4>;

inline Box3 cube(const Vec3& center, double half_edge) {
  Box3 b;
  for (std::size_t k = 0; k < 3; ++k) {
    b.lo[k] = center[k] - half_edge;
    b.hi[k] = center[k] + half_edge;
  }
  return b;
}

inline Box3 inflate(const Box3& box, double margin) {
  Box3 b = box;
  for (std::size_t k = 0; k < 3; ++k) {
    b.lo[k] -= margin;
    b.hi[k] += margin;
  }
  return b;
}

inline Box4 make_box4(const Box3& space, const Interval& time) {
  Box4 b;
  for (std::size_t k = 0; k < 3; ++k) {
    b.lo[k] = space.lo[k];
    b.hi[k] = space.hi[k];
  }
  b.lo[3] = time.lo();
  b.hi[3] = time.hi();
  return b;
}

inline Box3 space_of(const Box4& b) {
  Box3 s;
  for (std::size_t k = 0; k < 3; ++k) {
    s.lo[k] = b.lo[k];
    s.hi[k] = b.hi[k];
  }
  return s;
}

inline Interval time_of(const Box4& b) { return Interval(b.lo[3], b.hi[3]); }

using ObjectIndex = std::uint32_t;

class DuplicateObject : public std::invalid_argument {
 public:
  explicit DuplicateObject(ObjectIndex id)
      : std::invalid_argument("object " + std::to_string(id) +
                              " already present in tree") {}
};

class UnknownObject : public std::invalid_argument {
 public:
  explicit UnknownObject(ObjectIndex id)
      : std::invalid_argument("object " + std::to_string(id) +
                              " not present in tree") {}
};

/// Incremental bounding-volume hierarchy over closed D-dimensional boxes.
///
/// Leaves hold exact boxes, so query() has neither false negatives nor false
/// positives. Insertion picks a sibling by descending toward the child with
/// the lowest enlarged surface cost, then rebalances the insertion path with
/// AVL-style rotations. Object indices are expected to be small and dense;
/// the leaf lookup table is sized by the largest index seen.
///
/// Single writer; concurrent const access is safe.
template <std::size_t D>
class AabbTree {
 public:
  using Box = Aabb<D>;
  using NodeId = std::int32_t;
  static constexpr NodeId kNull = -1;

  struct Stats {
    std::uint64_t inserts = 0;
    std::uint64_t removes = 0;
    std::uint64_t updates = 0;
    std::uint64_t rotations = 0;
  };

  AabbTree() { weights_.fill(1.0); }
  explicit AabbTree(const std::array<double, D>& cost_weights)
      : weights_(cost_weights) {}

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  bool contains(ObjectIndex id) const { return leaf_of(id) != kNull; }
  const Stats& stats() const { return stats_; }

  void clear() {
    nodes_.clear();
    leaf_index_.clear();
    free_list_ = kNull;
    root_ = kNull;
    size_ = 0;
  }

  /// Throws DuplicateObject if id is already present.
  void insert(ObjectIndex id, const Box& box) {
    assert(box.valid());
    if (contains(id)) throw DuplicateObject(id);
    const NodeId leaf = allocate_node();
    Node& n = nodes_[leaf];
    n.box = box;
    n.object = id;
    n.height = 0;
    if (leaf_index_.size() <= id) leaf_index_.resize(std::size_t{id} + 1, kNull);
    leaf_index_[id] = leaf;
    insert_leaf(leaf);
    ++size_;
    ++stats_.inserts;
  }

  /// Throws UnknownObject if id is absent.
  void remove(ObjectIndex id) {
    const NodeId leaf = leaf_of(id);
    if (leaf == kNull) throw UnknownObject(id);
    remove_leaf(leaf);
    free_node(leaf);
    leaf_index_[id] = kNull;
    --size_;
    ++stats_.removes;
  }

  /// Replaces the stored box. A box that fits inside the current leaf box is
  /// written in place and ancestors are refit; otherwise the leaf is
  /// reinserted.
  void update(ObjectIndex id, const Box& box) {
    assert(box.valid());
    const NodeId leaf = leaf_of(id);
    if (leaf == kNull) throw UnknownObject(id);
    ++stats_.updates;
    if (nodes_[leaf].box.contains(box)) {
      nodes_[leaf].box = box;
      refit_ancestors(nodes_[leaf].parent);
      return;
    }
    remove_leaf(leaf);
    nodes_[leaf].box = box;
    insert_leaf(leaf);
  }

  /// Box stored for id. Throws UnknownObject if absent.
  const Box& box_of(ObjectIndex id) const {
    const NodeId leaf = leaf_of(id);
    if (leaf == kNull) throw UnknownObject(id);
    return nodes_[leaf].box;
  }

  /// Calls visit(object) for every stored object whose box overlaps `box`.
  template <typename Visit>
  void visit_overlaps(const Box& box, Visit&& visit) const {
    if (root_ == kNull) return;
    // Depth-first stack; the inline buffer covers any balanced tree, the
    // vector only kicks in for pathological shapes.
    constexpr std::size_t kInline = 128;
    NodeId inline_stack[kInline];
    std::vector<NodeId> overflow;
    std::size_t top = 0;
    auto push = [&](NodeId id) {
      if (top < kInline) {
        inline_stack[top++] = id;
      } else {
        overflow.push_back(id);
      }
    };
    push(root_);
    while (top > 0 || !overflow.empty()) {
      NodeId id;
      if (!overflow.empty()) {
        id = overflow.back();
        overflow.pop_back();
      } else {
        id = inline_stack[--top];
      }
      const Node& n = nodes_[id];
      if (!n.box.overlaps(box)) continue;
      if (n.is_leaf()) {
        visit(n.object);
      } else {
        push(n.child1);
        push(n.child2);
      }
    }
  }

  void query(const Box& box, std::vector<ObjectIndex>& out) const {
    out.clear();
    visit_overlaps(box, [&](ObjectIndex o) { out.push_back(o); });
  }

  std::vector<ObjectIndex> query(const Box& box) const {
    std::vector<ObjectIndex> out;
    query(box, out);
    return out;
  }

  /// Overlaps of the stored box of `id`, excluding `id` itself.
  void query_object(ObjectIndex id, std::vector<ObjectIndex>& out) const {
    out.clear();
    visit_overlaps(box_of(id), [&](ObjectIndex o) {
      if (o != id) out.push_back(o);
    });
  }

  int height() const { return root_ == kNull ? 0 : nodes_[root_].height + 1; }

  /// Sum over leaves of their depth (root depth 0).
  std::uint64_t leaf_path_length() const {
    std::uint64_t total = 0;
    for (NodeId leaf : leaf_index_) {
      if (leaf == kNull) continue;
      for (NodeId p = nodes_[leaf].parent; p != kNull; p = nodes_[p].parent) ++total;
    }
    return total;
  }

  /// Walks the whole tree and checks structural and containment invariants.
  /// Returns an empty string when consistent, otherwise a description.
  std::string validate() const {
    std::size_t leaves = 0;
    std::string err;
    if (root_ != kNull && nodes_[root_].parent != kNull) return "root has a parent";
    if (root_ != kNull) validate_node(root_, leaves, err);
    if (!err.empty()) return err;
    if (leaves != size_) return "leaf count mismatch";
    for (std::size_t id = 0; id < leaf_index_.size(); ++id) {
      const NodeId leaf = leaf_index_[id];
      if (leaf == kNull) continue;
      if (!nodes_[leaf].is_leaf() || nodes_[leaf].object != id) {
        return "leaf index mismatch for object " + std::to_string(id);
      }
    }
    return {};
  }

 private:
  struct Node {
    Box box;
    NodeId parent = kNull;
    NodeId child1 = kNull;  // doubles as free-list link
    NodeId child2 = kNull;
    int height = -1;  // -1 marks a free node
    ObjectIndex object = 0;

    bool is_leaf() const { return child1 == kNull; }
  };

  NodeId leaf_of(ObjectIndex id) const {
    return id < leaf_index_.size() ? leaf_index_[id] : kNull;
  }

  NodeId allocate_node() {
    if (free_list_ == kNull) {
      nodes_.emplace_back();
      return static_cast<NodeId>(nodes_.size() - 1);
    }
    const NodeId id = free_list_;
    free_list_ = nodes_[id].parent;
    nodes_[id] = Node{};
    return id;
  }

  void free_node(NodeId id) {
    nodes_[id].height = -1;
    nodes_[id].parent = free_list_;
    nodes_[id].child1 = kNull;
    nodes_[id].child2 = kNull;
    free_list_ = id;
  }

  double cost(const Box& b) const { return surface_cost(b, weights_); }

  void insert_leaf(NodeId leaf) {
    if (root_ == kNull) {
      root_ = leaf;
      nodes_[leaf].parent = kNull;
      return;
    }
    const Box leaf_box = nodes_[leaf].box;
    NodeId index = root_;
    while (!nodes_[index].is_leaf()) {
      const Node& n = nodes_[index];
      const double area = cost(n.box);
      const double combined_area = cost(merge(n.box, leaf_box));
      // Cost of pairing the leaf with this node directly.
      const double here = 2.0 * combined_area;
      // Cost pushed down to every descendant once the leaf goes below.
      const double inheritance = 2.0 * (combined_area - area);
      const double cost1 = descend_cost(n.child1, leaf_box) + inheritance;
      const double cost2 = descend_cost(n.child2, leaf_box) + inheritance;
      if (here < cost1 && here < cost2) break;
      index = cost1 < cost2 ? n.child1 : n.child2;
    }
    const NodeId sibling = index;

    const NodeId old_parent = nodes_[sibling].parent;
    const NodeId new_parent = allocate_node();
    {
      Node& p = nodes_[new_parent];
      p.parent = old_parent;
      p.box = merge(leaf_box, nodes_[sibling].box);
      p.height = nodes_[sibling].height + 1;
      p.child1 = sibling;
      p.child2 = leaf;
    }
    if (old_parent != kNull) {
      if (nodes_[old_parent].child1 == sibling) {
        nodes_[old_parent].child1 = new_parent;
      } else {
        nodes_[old_parent].child2 = new_parent;
      }
    } else {
      root_ = new_parent;
    }
    nodes_[sibling].parent = new_parent;
    nodes_[leaf].parent = new_parent;

    rebalance_upward(nodes_[leaf].parent);
  }

  double descend_cost(NodeId child, const Box& leaf_box) const {
    const Node& c = nodes_[child];
    const double merged = cost(merge(leaf_box, c.box));
    return c.is_leaf() ? merged : merged - cost(c.box);
  }

  void remove_leaf(NodeId leaf) {
    if (leaf == root_) {
      root_ = kNull;
      return;
    }
    const NodeId parent = nodes_[leaf].parent;
    const NodeId grand = nodes_[parent].parent;
    const NodeId sibling =
        nodes_[parent].child1 == leaf ? nodes_[parent].child2 : nodes_[parent].child1;

    if (grand != kNull) {
      if (nodes_[grand].child1 == parent) {
        nodes_[grand].child1 = sibling;
      } else {
        nodes_[grand].child2 = sibling;
      }
      nodes_[sibling].parent = grand;
      free_node(parent);
      rebalance_upward(grand);
    } else {
      root_ = sibling;
      nodes_[sibling].parent = kNull;
      free_node(parent);
    }
    nodes_[leaf].parent = kNull;
  }

  void rebalance_upward(NodeId index) {
    while (index != kNull) {
      index = balance(index);
      Node& n = nodes_[index];
      const Node& c1 = nodes_[n.child1];
      const Node& c2 = nodes_[n.child2];
      n.height = 1 + std::max(c1.height, c2.height);
      n.box = merge(c1.box, c2.box);
      index = n.parent;
    }
  }

  void refit_ancestors(NodeId index) {
    while (index != kNull) {
      Node& n = nodes_[index];
      const Box fitted = merge(nodes_[n.child1].box, nodes_[n.child2].box);
      if (fitted == n.box) return;
      n.box = fitted;
      index = n.parent;
    }
  }

  // Rotates node a up or down by one level when its subtrees' heights differ
  // by more than one. Returns the root of the rotated subtree.
  NodeId balance(NodeId ia) {
    Node& a = nodes_[ia];
    if (a.is_leaf() || a.height < 2) return ia;
    const NodeId ib = a.child1;
    const NodeId ic = a.child2;
    const int skew = nodes_[ic].height - nodes_[ib].height;
    if (skew > 1) return rotate_up(ia, ic, ib);
    if (skew < -1) return rotate_up(ia, ib, ic);
    return ia;
  }

  // Promotes `high` (a child of ia) above ia; `low` is ia's other child.
  NodeId rotate_up(NodeId ia, NodeId high, NodeId low) {
    ++stats_.rotations;
    Node& a = nodes_[ia];
    Node& h = nodes_[high];
    const NodeId f = h.child1;
    const NodeId g = h.child2;

    h.child1 = ia;
    h.parent = a.parent;
    a.parent = high;
    if (h.parent != kNull) {
      Node& hp = nodes_[h.parent];
      if (hp.child1 == ia) {
        hp.child1 = high;
      } else {
        hp.child2 = high;
      }
    } else {
      root_ = high;
    }

    // Keep the taller grandchild under `high`; hand the other to ia.
    const bool f_taller = nodes_[f].height > nodes_[g].height;
    const NodeId keep = f_taller ? f : g;
    const NodeId give = f_taller ? g : f;
    h.child2 = keep;
    if (a.child1 == high) {
      a.child1 = give;
    } else {
      a.child2 = give;
    }
    nodes_[give].parent = ia;
    a.box = merge(nodes_[low].box, nodes_[give].box);
    h.box = merge(a.box, nodes_[keep].box);
    a.height = 1 + std::max(nodes_[low].height, nodes_[give].height);
    h.height = 1 + std::max(a.height, nodes_[keep].height);
    return high;
  }

  int validate_node(NodeId id, std::size_t& leaves, std::string& err) const {
    const Node& n = nodes_[id];
    if (n.height < 0) {
      err = "reachable free node";
      return 0;
    }
    if (n.is_leaf()) {
      if (n.child2 != kNull || n.height != 0) err = "malformed leaf";
      ++leaves;
      return 0;
    }
    const Node& c1 = nodes_[n.child1];
    const Node& c2 = nodes_[n.child2];
    if (c1.parent != id || c2.parent != id) {
      err = "parent link mismatch";
      return 0;
    }
    if (!n.box.contains(c1.box) || !n.box.contains(c2.box)) {
      err = "node box does not contain its children";
      return 0;
    }
    const int h1 = validate_node(n.child1, leaves, err);
    const int h2 = validate_node(n.child2, leaves, err);
    const int h = 1 + std::max(h1, h2);
    if (err.empty() && h != n.height) err = "stale node height";
    return h;
  }

  std::vector<Node> nodes_;
  std::vector<NodeId> leaf_index_;
  NodeId free_list_ = kNull;
  NodeId root_ = kNull;
  std::size_t size_ = 0;
  std::array<double, D> weights_;
  Stats stats_;
};

using AabbTree3d = AabbTree<3>;
using AabbTree4d = AabbTree<4>;

}  // namespace orbitguard

#endif  // ORBITGUARD_GEOMETRY_HPP
