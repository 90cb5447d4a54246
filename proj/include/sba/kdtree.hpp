#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sba/cloud.hpp"
#include "sba/errors.hpp"
#include "sba/types.hpp"

namespace sba {

/// Terminal node of a PCA kd-tree: a small point subset summarized by its
/// mean, PCA normal, and bounding radius. The measurement unit of the system.
struct Leaf {
  Vec3 mean = Vec3::Zero();    // sensor frame at build time
  Vec3 normal = Vec3::UnitZ();  // unit; oriented toward the sensor origin
  double radius = 0.0;          // max member distance from the mean
  int point_count = 0;
  double sigma = 0.0;  // normalized range std, assigned by the beam model
  int scan_id = 0;
  int leaf_id = 0;
  bool normal_propagated = false;  // inherited from a flat ancestor or parent
};

/// PCA kd-tree over one cloud. Each node splits its points at the node mean
/// along the direction of maximum variation (w2); recursion stops when the
/// extent along w2 is at most b_max. A node whose flatness 2*sqrt(lambda0)
/// drops below b_min passes its normal down to every descendant leaf.
/// Built trees are immutable apart from per-leaf sigma assignment.
class KdTree {
 public:
  KdTree(const Cloud& cloud, double b_max, double b_min);

  const std::vector<Leaf>& leaves() const { return leaves_; }
  Leaf& leaf_mut(int leaf_id) { return leaves_[static_cast<std::size_t>(leaf_id)]; }
  int scan_id() const { return scan_id_; }
  double b_max() const { return b_max_; }
  double b_min() const { return b_min_; }
  std::size_t point_count() const { return points_.size(); }

  /// Exact nearest leaf by Euclidean distance between query and leaf means;
  /// ties resolved toward the lowest leaf_id.
  const Leaf& nearest_leaf(const Vec3& query) const;

  /// Member points of a leaf (build-time sensor frame).
  std::span<const Vec3> leaf_points(const Leaf& leaf) const;

 private:
  friend class KdTreeView;

  struct Node {
    Vec3 mean = Vec3::Zero();       // split point
    Vec3 split_dir = Vec3::UnitZ();  // w2 of the node PCA
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t leaf = -1;  // >= 0 iff terminal
  };

  std::int32_t build_node(std::uint32_t begin, std::uint32_t end, const Vec3* inherited,
                          const Vec3& fallback_normal);

  std::vector<Node> nodes_;
  std::vector<Leaf> leaves_;
  std::vector<Vec3> points_;  // reordered so every leaf owns a contiguous range
  std::vector<std::uint32_t> leaf_begin_, leaf_end_;
  std::int32_t root_ = -1;
  int scan_id_ = 0;
  double b_max_ = 0.0;
  double b_min_ = 0.0;
};

/// Rigid re-expression of a tree: leaf means via the full transform, normals
/// and split planes via the rotation only, all applied lazily on access. The
/// underlying tree is untouched; queries match a rebuild of the transformed
/// cloud up to the exactness guarantee of nearest_leaf.
class KdTreeView {
 public:
  KdTreeView(const KdTree& tree, const Isometry3& pose) : tree_(&tree), pose_(pose) {}

  const KdTree& tree() const { return *tree_; }
  const Isometry3& pose() const { return pose_; }
  std::size_t leaf_count() const { return tree_->leaves().size(); }

  /// Leaf with mean/normal mapped into the view frame.
  Leaf leaf_world(int leaf_id) const;

  /// Exact nearest leaf over transformed leaf means; same tie rule as the tree.
  Leaf nearest_leaf(const Vec3& query) const;

 private:
  const KdTree* tree_;
  Isometry3 pose_;
};

}  // namespace sba
