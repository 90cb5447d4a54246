#include "sba/association.hpp"

#include <algorithm>
#include <cmath>

#include "sba/errors.hpp"

namespace sba {

void GroupAggregate::add(const LeafHandle& leaf) {
  ++count;
  center += (leaf.mean_world - center) / static_cast<double>(count);
  const double sign = (count == 1 || normal_sum.dot(leaf.normal_world) >= 0.0) ? 1.0 : -1.0;
  normal_sum += sign * leaf.normal_world;
  const double norm = normal_sum.norm();
  if (norm > 1e-12) normal = normal_sum / norm;
  radius = std::max(radius, leaf.radius);
}

std::size_t AssociationSet::total_members() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  return n;
}

bool check_match(const GroupAggregate& aggregate, const Vec3& leaf_mean, const Vec3& leaf_normal,
                 const MatchThresholds& th) {
  const Vec3 d = aggregate.center - leaf_mean;
  if (d.norm() >= th.d_e) return false;
  if (std::abs(aggregate.normal.dot(d)) >= th.d_n) return false;
  const double c = std::clamp(std::abs(aggregate.normal.dot(leaf_normal)), 0.0, 1.0);
  return std::acos(c) < th.d_theta;
}

namespace {

LeafHandle make_handle(const KdTreeView& view, const Leaf& world_leaf) {
  LeafHandle h;
  h.scan_id = world_leaf.scan_id;
  h.leaf_id = world_leaf.leaf_id;
  h.mean_world = world_leaf.mean;
  h.normal_world = world_leaf.normal;
  h.mean_sensor = view.tree().leaves()[static_cast<std::size_t>(world_leaf.leaf_id)].mean;
  h.radius = world_leaf.radius;
  h.sigma = world_leaf.sigma;
  return h;
}

}  // namespace

AssociationSet associate(const std::vector<KdTreeView>& views, const MatchThresholds& th) {
  if (!th.valid()) throw InputError("associate: thresholds must be positive");

  AssociationSet out;
  // group_of[i][leaf_id] = group index, or -1 while unclaimed
  std::vector<std::vector<int>> group_of(views.size());
  for (std::size_t i = 0; i < views.size(); ++i) {
    group_of[i].assign(views[i].leaf_count(), -1);
  }

  auto new_group = [&](const LeafHandle& founder) {
    const int g = static_cast<int>(out.groups.size());
    out.groups.push_back({founder});
    out.aggregates.emplace_back();
    out.aggregates.back().add(founder);
    return g;
  };

  for (std::size_t i = 0; i < views.size(); ++i) {
    for (std::size_t j = 0; j < views.size(); ++j) {
      if (j == i) continue;
      const std::size_t n_leaves = views[i].leaf_count();
      for (std::size_t lid = 0; lid < n_leaves; ++lid) {
        const Leaf li = views[i].leaf_world(static_cast<int>(lid));
        int g = group_of[i][lid];
        if (g < 0) {
          g = new_group(make_handle(views[i], li));
          group_of[i][lid] = g;
        }

        const Leaf lj = views[j].nearest_leaf(li.mean);
        if (group_of[j][static_cast<std::size_t>(lj.leaf_id)] >= 0) continue;  // first claim wins
        if (!check_match(out.aggregates[static_cast<std::size_t>(g)], lj.mean, lj.normal, th)) continue;

        const LeafHandle h = make_handle(views[j], lj);
        out.groups[static_cast<std::size_t>(g)].push_back(h);
        out.aggregates[static_cast<std::size_t>(g)].add(h);
        group_of[j][static_cast<std::size_t>(lj.leaf_id)] = g;
      }
    }
  }

  // Anything still unclaimed (single view, or leaves no pair visited) becomes
  // its own group.
  for (std::size_t i = 0; i < views.size(); ++i) {
    for (std::size_t lid = 0; lid < group_of[i].size(); ++lid) {
      if (group_of[i][lid] >= 0) continue;
      const Leaf li = views[i].leaf_world(static_cast<int>(lid));
      group_of[i][lid] = new_group(make_handle(views[i], li));
    }
  }

  return out;
}

}  // namespace sba
