#pragma once

#include <cstddef>
#include <vector>

#include "sba/kdtree.hpp"
#include "sba/types.hpp"

namespace sba {

/// Matching criteria between a nascent surfel and a candidate leaf.
struct MatchThresholds {
  double d_e = 0.5;                        // max center distance, meters
  double d_n = 1.0;                        // max distance along the surfel normal, meters
  double d_theta = 5.0 * M_PI / 180.0;     // max angle between normals, radians

  bool valid() const { return d_e > 0.0 && d_n > 0.0 && d_theta > 0.0; }
};

/// Snapshot of one leaf as seen by the association pass: identity, world-frame
/// geometry under the current poses, and the build-time sensor-frame mean that
/// the residuals measure against.
struct LeafHandle {
  int scan_id = 0;
  int leaf_id = 0;
  Vec3 mean_world = Vec3::Zero();
  Vec3 normal_world = Vec3::UnitZ();
  Vec3 mean_sensor = Vec3::Zero();
  double radius = 0.0;
  double sigma = 1.0;
};

/// Running surfel estimate of a group: mean of member means, sign-consistent
/// mean of member normals, max member radius.
struct GroupAggregate {
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 normal_sum = Vec3::Zero();
  double radius = 0.0;
  int count = 0;

  void add(const LeafHandle& leaf);
};

/// Groups of leaves across scans, one group per nascent surfel. Disjoint:
/// every processed leaf sits in exactly one group.
struct AssociationSet {
  std::vector<std::vector<LeafHandle>> groups;
  std::vector<GroupAggregate> aggregates;

  std::size_t total_members() const;
};

/// True iff the leaf meets all three criteria against the group estimate:
/// center distance below d_e, |offset along the surfel normal| below d_n, and
/// angle between normals below d_theta (antipodal normals count as aligned).
bool check_match(const GroupAggregate& aggregate, const Vec3& leaf_mean, const Vec3& leaf_normal,
                 const MatchThresholds& th);

/// Group leaves across scans by exact nearest-neighbor queries and the match
/// criteria. Iterates ordered view pairs (i, j), i != j, and leaves in
/// ascending leaf_id; a leaf already claimed by a group is never re-assigned.
/// Deterministic for identical input. Leaves untouched by any pair end up in
/// singleton groups, so a single view yields one group per leaf.
AssociationSet associate(const std::vector<KdTreeView>& views, const MatchThresholds& th);

}  // namespace sba
