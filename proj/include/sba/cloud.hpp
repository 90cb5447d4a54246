#pragma once

#include <cstddef>
#include <vector>

#include "sba/types.hpp"

namespace sba {

/// One LiDAR scan in the sensor frame.
struct Cloud {
  std::vector<Vec3> points;
  double timestamp = 0.0;  // seconds; scan index when the dataset carries none
  int scan_id = 0;
  std::size_t dropped_nonfinite = 0;  // non-finite points removed at ingestion
};

/// Ordered (timestamp, pose) pairs; timestamps strictly increasing.
/// Poses map sensor-frame points into the world frame.
struct Trajectory {
  std::vector<double> times;
  std::vector<Isometry3> poses;

  std::size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }
};

}  // namespace sba
