#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sba/kdtree.hpp"
#include "sba/types.hpp"

namespace sba {

/// Cone sampling parameters of one simulated LiDAR beam.
///
/// The cone is sampled deterministically: one axial ray plus `rings`
/// concentric rings. Ring r (1-based) sits at polar angle
/// (divergence/2)*sqrt(r/rings); the remaining n_samples-1 rays are spread
/// over the rings as evenly as possible (earlier rings take the remainder),
/// at azimuths 2*pi*j/n_r. The ring basis (u, v) is built from the axis a as
/// u = normalize(e x a) with e the coordinate axis of smallest |component|
/// in a (lowest index on ties), and v = a x u.
struct BeamSpec {
  double divergence = 3e-3;  // full cone angle, radians
  int n_samples = 37;
  int rings = 3;
};

struct SigmaSample {
  double sigma = 0.0;       // meters; std of cone hit ranges about |leaf.mean|
  int surviving = 0;        // rays that hit the leaf plane in front of the sensor
  bool degenerate = false;  // fewer than 3 survivors (grazing geometry)
};

/// Sub-beam directions for a unit axis; exposed for diagnostics.
std::vector<Vec3> beam_directions(const Vec3& axis, const BeamSpec& spec);

/// Cast the sampled cone from the sensor origin toward the leaf mean,
/// intersect each ray with the leaf's infinite plane, and return the standard
/// deviation of the hit ranges about |leaf.mean|. Rays near-parallel to the
/// plane (|dir . normal| < 1e-3) or hitting behind the origin are excluded
/// and the sample count reduced. Fewer than 3 survivors flags the leaf
/// degenerate (sigma is then left for the caller to cap).
SigmaSample simulate_sigma(const Leaf& leaf, const BeamSpec& spec);

/// Dataset-wide scaling applied to raw sigmas before they weight residuals.
struct SigmaNormalization {
  double sigma_floor = 1e-4;  // meters
  double sigma_cap = 1.0;     // meters
  double scale = 1.0;         // median of clamped sigmas
};

/// Clamp every sigma to [floor, cap], then divide by the median of the
/// clamped values so the median measurement carries unit weight.
/// Degenerate-flagged leaves must already hold the cap.
std::pair<SigmaNormalization, std::vector<double>> normalize_sigmas(
    const std::vector<double>& sigmas, double sigma_floor, double sigma_cap);

/// Known sensor presets mapping a name to a full-angle beam divergence in
/// radians. Values are representative datasheet figures; the "default" preset
/// is 3 mrad. Returns a negative value for unknown names.
double sensor_preset_divergence(const std::string& name);

}  // namespace sba
