#include "sba/beam_model.hpp"

#include <algorithm>
#include <cmath>

#include "sba/errors.hpp"

namespace sba {

std::vector<Vec3> beam_directions(const Vec3& axis, const BeamSpec& spec) {
  std::vector<Vec3> dirs;
  dirs.reserve(static_cast<std::size_t>(std::max(spec.n_samples, 1)));
  dirs.push_back(axis);
  if (spec.n_samples <= 1 || spec.rings <= 0) return dirs;

  // Reference axis with the smallest |component| of the beam axis.
  int smallest = 0;
  for (int k = 1; k < 3; ++k) {
    if (std::abs(axis(k)) < std::abs(axis(smallest))) smallest = k;
  }
  const Vec3 u = Vec3::Unit(smallest).cross(axis).normalized();
  const Vec3 v = axis.cross(u);

  const double half_angle = spec.divergence / 2.0;
  const int remaining = spec.n_samples - 1;
  const int base = remaining / spec.rings;
  const int extra = remaining % spec.rings;

  for (int r = 1; r <= spec.rings; ++r) {
    const int n_r = base + (r <= extra ? 1 : 0);
    if (n_r == 0) continue;
    const double theta = half_angle * std::sqrt(static_cast<double>(r) / spec.rings);
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    for (int j = 0; j < n_r; ++j) {
      const double phi = 2.0 * M_PI * j / n_r;
      dirs.push_back(ct * axis + st * (std::cos(phi) * u + std::sin(phi) * v));
    }
  }
  return dirs;
}

SigmaSample simulate_sigma(const Leaf& leaf, const BeamSpec& spec) {
  const double range = leaf.mean.norm();
  if (!(range > 0.0)) throw InputError("simulate_sigma: leaf mean at the sensor origin");

  const Vec3 axis = leaf.mean / range;
  const double plane_offset = leaf.normal.dot(leaf.mean);

  SigmaSample out;
  double sum_sq = 0.0;
  for (const Vec3& dir : beam_directions(axis, spec)) {
    const double denom = dir.dot(leaf.normal);
    if (std::abs(denom) < 1e-3) continue;  // grazing ray
    const double t = plane_offset / denom;
    if (t <= 0.0) continue;  // intersection behind the origin
    const double d = t - range;
    sum_sq += d * d;
    ++out.surviving;
  }

  if (out.surviving < 3) {
    out.degenerate = true;
    return out;
  }
  out.sigma = std::sqrt(sum_sq / out.surviving);
  return out;
}

std::pair<SigmaNormalization, std::vector<double>> normalize_sigmas(
    const std::vector<double>& sigmas, double sigma_floor, double sigma_cap) {
  if (sigmas.empty()) throw InputError("normalize_sigmas: empty sigma list");
  if (!(sigma_floor > 0.0 && sigma_floor < sigma_cap)) {
    throw InputError("normalize_sigmas: requires 0 < sigma_floor < sigma_cap");
  }

  std::vector<double> clamped(sigmas.size());
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    clamped[i] = std::clamp(sigmas[i], sigma_floor, sigma_cap);
  }

  std::vector<double> sorted = clamped;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  SigmaNormalization norm;
  norm.sigma_floor = sigma_floor;
  norm.sigma_cap = sigma_cap;
  norm.scale = median;
  for (double& s : clamped) s /= median;
  return {norm, std::move(clamped)};
}

double sensor_preset_divergence(const std::string& name) {
  // Full-angle figures; override with an explicit divergence when the
  // datasheet disagrees. Relative sigma is what matters after median scaling.
  if (name == "default" || name == "os0" || name == "os1" || name == "os-series") return 3e-3;
  if (name == "hdl-64" || name == "hdl64") return 2e-3;
  if (name == "vlp-16" || name == "vlp16") return 3e-3;
  return -1.0;
}

}  // namespace sba
