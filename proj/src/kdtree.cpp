#include "sba/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace sba {

namespace {

struct NodePca {
  Vec3 mean;
  Vec3 w0;  // min-eigenvalue direction: the node normal
  Vec3 w2;  // max-eigenvalue direction: the split axis
  double lambda0;
  double extent_w2;  // max - min projection of members onto w2
};

NodePca node_pca(std::span<const Vec3> pts) {
  NodePca out;
  const double inv_n = 1.0 / static_cast<double>(pts.size());
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : pts) mean += p;
  mean *= inv_n;

  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : pts) {
    const Vec3 d = p - mean;
    cov += d * d.transpose();
  }
  cov *= inv_n;

  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  out.mean = mean;
  out.w0 = es.eigenvectors().col(0);
  out.w2 = es.eigenvectors().col(2);
  out.lambda0 = es.eigenvalues()(0);

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const Vec3& p : pts) {
    const double t = (p - mean).dot(out.w2);
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  out.extent_w2 = hi - lo;
  return out;
}

// Sensor sits at the local origin: flip so the normal faces it.
void orient_toward_origin(const Vec3& mean, Vec3& normal) {
  if (normal.dot(-mean) < 0.0) normal = -normal;
}

}  // namespace

KdTree::KdTree(const Cloud& cloud, double b_max, double b_min)
    : scan_id_(cloud.scan_id), b_max_(b_max), b_min_(b_min) {
  if (cloud.points.empty()) throw InputError("kdtree: empty cloud");
  if (!(b_max > b_min && b_min > 0.0)) throw InputError("kdtree: requires b_max > b_min > 0");

  points_ = cloud.points;
  nodes_.reserve(points_.size() / 2 + 1);

  Vec3 fallback = Vec3::UnitZ();
  if (points_.size() == 1 && points_[0].norm() > 0.0) {
    fallback = (-points_[0]).normalized();
  }
  root_ = build_node(0, static_cast<std::uint32_t>(points_.size()), nullptr, fallback);
}

std::int32_t KdTree::build_node(std::uint32_t begin, std::uint32_t end, const Vec3* inherited,
                                const Vec3& fallback_normal) {
  const std::uint32_t count = end - begin;
  const NodePca pca = node_pca(std::span<const Vec3>(points_.data() + begin, count));

  // Stable storage for a normal inherited by the whole subtree.
  Vec3 inherited_storage;
  if (inherited == nullptr && count >= 2 && 2.0 * std::sqrt(std::max(pca.lambda0, 0.0)) < b_min_) {
    inherited_storage = pca.w0;
    inherited = &inherited_storage;
  }

  bool terminal = count == 1 || pca.extent_w2 <= b_max_;
  std::uint32_t mid = begin;
  if (!terminal) {
    auto* first = points_.data() + begin;
    auto* last = points_.data() + end;
    auto* pivot = std::partition(first, last, [&](const Vec3& p) { return (p - pca.mean).dot(pca.w2) <= 0.0; });
    mid = begin + static_cast<std::uint32_t>(pivot - first);
    if (mid == begin || mid == end) terminal = true;  // degenerate projection spread
  }

  const std::int32_t node_index = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  nodes_[node_index].mean = pca.mean;
  nodes_[node_index].split_dir = pca.w2;

  if (terminal) {
    Leaf leaf;
    leaf.mean = pca.mean;
    if (inherited != nullptr) {
      leaf.normal = *inherited;
      leaf.normal_propagated = true;
    } else if (count >= 2) {
      leaf.normal = pca.w0;
    } else {
      leaf.normal = fallback_normal;
      leaf.normal_propagated = true;
    }
    orient_toward_origin(leaf.mean, leaf.normal);

    double r2 = 0.0;
    for (std::uint32_t i = begin; i < end; ++i) {
      r2 = std::max(r2, (points_[i] - pca.mean).squaredNorm());
    }
    leaf.radius = std::sqrt(r2);
    leaf.point_count = static_cast<int>(count);
    leaf.scan_id = scan_id_;
    leaf.leaf_id = static_cast<int>(leaves_.size());

    nodes_[node_index].leaf = static_cast<std::int32_t>(leaves_.size());
    leaves_.push_back(leaf);
    leaf_begin_.push_back(begin);
    leaf_end_.push_back(end);
    return node_index;
  }

  const std::int32_t left = build_node(begin, mid, inherited, pca.w0);
  const std::int32_t right = build_node(mid, end, inherited, pca.w0);
  nodes_[node_index].left = left;
  nodes_[node_index].right = right;
  return node_index;
}

std::span<const Vec3> KdTree::leaf_points(const Leaf& leaf) const {
  const auto i = static_cast<std::size_t>(leaf.leaf_id);
  return {points_.data() + leaf_begin_[i], points_.data() + leaf_end_[i]};
}

namespace {

struct NearestState {
  double best_d2 = std::numeric_limits<double>::infinity();
  int best_leaf = -1;
};

// Branch-and-bound descent. Means and split planes are mapped through the
// pose on access so results agree bit-for-bit with a scan over transformed
// leaf means. Ties go to the lowest leaf_id, so equality also descends.
template <class Nodes, class Leaves>
void search(const Nodes& nodes, const Leaves& leaves, const Isometry3& pose, std::int32_t node_index,
            const Vec3& query, NearestState& state) {
  const auto& node = nodes[static_cast<std::size_t>(node_index)];
  if (node.leaf >= 0) {
    const auto& leaf = leaves[static_cast<std::size_t>(node.leaf)];
    const double d2 = (pose * leaf.mean - query).squaredNorm();
    if (d2 < state.best_d2 || (d2 == state.best_d2 && leaf.leaf_id < state.best_leaf)) {
      state.best_d2 = d2;
      state.best_leaf = leaf.leaf_id;
    }
    return;
  }

  const double signed_dist = (query - pose * node.mean).dot(pose.linear() * node.split_dir);
  const std::int32_t near = signed_dist <= 0.0 ? node.left : node.right;
  const std::int32_t far = signed_dist <= 0.0 ? node.right : node.left;

  search(nodes, leaves, pose, near, query, state);
  if (signed_dist * signed_dist <= state.best_d2) {
    search(nodes, leaves, pose, far, query, state);
  }
}

}  // namespace

const Leaf& KdTree::nearest_leaf(const Vec3& query) const {
  NearestState state;
  search(nodes_, leaves_, Isometry3::Identity(), root_, query, state);
  return leaves_[static_cast<std::size_t>(state.best_leaf)];
}

Leaf KdTreeView::leaf_world(int leaf_id) const {
  Leaf leaf = tree_->leaves()[static_cast<std::size_t>(leaf_id)];
  leaf.mean = pose_ * leaf.mean;
  leaf.normal = pose_.linear() * leaf.normal;
  return leaf;
}

Leaf KdTreeView::nearest_leaf(const Vec3& query) const {
  NearestState state;
  search(tree_->nodes_, tree_->leaves_, pose_, tree_->root_, query, state);
  return leaf_world(state.best_leaf);
}

}  // namespace sba
