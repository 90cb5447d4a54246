#pragma once

#include <cstddef>
#include <vector>

#include "sba/association.hpp"
#include "sba/types.hpp"

namespace sba {

/// Oriented disc: a local surface patch and the second optimization unknown.
/// The solver writes the normal-direction offset q; commit_offsets folds it
/// into the center.
struct Surfel {
  Vec3 center = Vec3::Zero();   // p_s, world frame
  Vec3 normal = Vec3::UnitZ();  // n_s, unit
  double radius = 0.0;          // r_s
  double q = 0.0;               // live normal-direction offset, meters
  int id = 0;
  std::vector<LeafHandle> backing;
};

struct SurfelStats {
  std::size_t created = 0;
  std::size_t dropped_degenerate = 0;  // sign-aligned normals averaged to ~zero
};

/// One surfel per group: center = mean of member means, normal = normalized
/// sign-aligned mean of member normals, radius = max member radius, q = 0.
/// Groups whose aligned normals average below 1e-6 in norm are dropped and
/// counted.
std::vector<Surfel> create_surfels(const AssociationSet& groups, SurfelStats* stats = nullptr);

/// Recompute each normal from the current backing leaf normals, leaving the
/// centers untouched. Degenerate groups keep their previous normal; the
/// return value counts them.
std::size_t refresh_normals(std::vector<Surfel>& surfels);

/// Fold the solved offsets into the centers: p_s += q * n_s, q = 0.
void commit_offsets(std::vector<Surfel>& surfels);

}  // namespace sba
