#include "sba/surfel.hpp"

#include <algorithm>

namespace sba {

namespace {

// Mean of sign-aligned normals; false when the mean collapses below 1e-6.
bool average_normals(const std::vector<LeafHandle>& members, Vec3& out) {
  Vec3 sum = Vec3::Zero();
  for (const LeafHandle& m : members) {
    const double sign = (sum.dot(m.normal_world) >= 0.0) ? 1.0 : -1.0;
    sum += sign * m.normal_world;
  }
  const Vec3 mean = sum / static_cast<double>(members.size());
  if (mean.norm() < 1e-6) return false;
  out = mean.normalized();
  return true;
}

}  // namespace

std::vector<Surfel> create_surfels(const AssociationSet& groups, SurfelStats* stats) {
  std::vector<Surfel> surfels;
  surfels.reserve(groups.groups.size());

  SurfelStats local;
  for (const auto& members : groups.groups) {
    if (members.empty()) continue;

    Vec3 normal;
    if (!average_normals(members, normal)) {
      ++local.dropped_degenerate;
      continue;
    }

    Surfel s;
    Vec3 center = Vec3::Zero();
    double radius = 0.0;
    for (const LeafHandle& m : members) {
      center += m.mean_world;
      radius = std::max(radius, m.radius);
    }
    s.center = center / static_cast<double>(members.size());
    s.normal = normal;
    s.radius = radius;
    s.q = 0.0;
    s.id = static_cast<int>(surfels.size());
    s.backing = members;
    surfels.push_back(std::move(s));
    ++local.created;
  }

  if (stats != nullptr) *stats = local;
  return surfels;
}

std::size_t refresh_normals(std::vector<Surfel>& surfels) {
  std::size_t degenerate = 0;
  for (Surfel& s : surfels) {
    Vec3 normal;
    if (average_normals(s.backing, normal)) {
      s.normal = normal;
    } else {
      ++degenerate;
    }
  }
  return degenerate;
}

void commit_offsets(std::vector<Surfel>& surfels) {
  for (Surfel& s : surfels) {
    s.center += s.q * s.normal;
    s.q = 0.0;
  }
}

}  // namespace sba
