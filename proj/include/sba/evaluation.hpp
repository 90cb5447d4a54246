#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sba/cloud.hpp"
#include "sba/types.hpp"

namespace sba {

struct AteResult {
  double rms = 0.0;  // meters
  double max = 0.0;  // meters
  int matched_pose_count = 0;
};

/// Absolute trajectory error: poses associated by nearest timestamp within
/// max_dt, the estimate rigidly aligned onto the ground truth (Horn), then
/// RMS and max of the translation errors. Fewer than 3 associations is an
/// insufficient-overlap error.
AteResult ate(const Trajectory& est, const Trajectory& gt, double max_dt = 0.05);

/// Exact nearest-neighbor index over a fixed point set (median-split kd-tree
/// with backtracking; ties toward the lowest index).
class PointKdTree {
 public:
  explicit PointKdTree(const std::vector<Vec3>& points);

  /// (squared distance, point index) of the exact nearest point.
  std::pair<double, int> nearest(const Vec3& query) const;

 private:
  struct Node {
    int axis = 0;
    double split = 0.0;
    std::int32_t left = -1, right = -1;
    std::uint32_t begin = 0, end = 0;  // leaf payload when left < 0
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Vec3& query, double& best_d2, int& best_index) const;

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

struct MapMetrics {
  double accuracy_m = 0.0;    // mean surviving map->gt distance
  double completion_m = 0.0;  // mean surviving gt->map distance
  double chamfer_l1_m = 0.0;  // (accuracy + completion) / 2
  double f_score_pct = 0.0;   // harmonic mean of precision/recall, percent
  std::size_t map_matched = 0, map_excluded = 0;
  std::size_t gt_matched = 0, gt_excluded = 0;
};

/// Bidirectional nearest-neighbor map quality. Distances beyond
/// overlap_threshold are excluded from every average (counts reported);
/// the F-score counts surviving points within f_threshold.
MapMetrics map_metrics(const std::vector<Vec3>& map_points, const std::vector<Vec3>& gt_points,
                       double overlap_threshold, double f_threshold);

/// Aggregated evaluation output. ATE in meters, map metrics in centimeters,
/// F-score in percent.
struct EvalReport {
  bool has_ate = false;
  double ate_rms = 0.0;
  double ate_max = 0.0;
  int matched_pose_count = 0;

  bool has_map = false;
  double accuracy_cm = 0.0;
  double completion_cm = 0.0;
  double chamfer_l1_cm = 0.0;
  double f_score_pct = 0.0;
  std::size_t map_excluded = 0, gt_excluded = 0;
  std::size_t map_matched = 0, gt_matched = 0;

  void set_map(const MapMetrics& m);
  std::string csv() const;
  std::string text() const;
};

/// One finite rectangular patch of world geometry.
struct ScenePlane {
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 u_axis = Vec3::UnitX();  // in-plane; v = normal x u
  double u_half = 1.0;
  double v_half = 1.0;
};

/// Synthetic desk-scale world: geometry, a smooth ground-truth trajectory, a
/// spinning-sensor ray pattern, range noise, and pose perturbation. Output is
/// byte-identical for a fixed spec (seed included).
struct SceneSpec {
  std::vector<ScenePlane> planes;

  int scan_count = 20;
  Vec3 traj_start = Vec3(1.0, 0.0, 1.2);
  Vec3 traj_end = Vec3(9.0, 0.0, 1.2);
  double wobble_amplitude = 0.3;  // lateral/vertical deviation, keeps Horn well-posed
  double yaw_sweep_deg = 20.0;

  int n_azimuth = 120;
  int n_elevation = 24;
  double elevation_min_deg = -30.0;
  double elevation_max_deg = 30.0;
  double min_range = 0.2;
  double max_range = 80.0;

  double range_noise_std = 0.0;     // meters, along the ray
  double beam_divergence = 0.0;     // rad; > 0 adds incidence-dependent range spread
  double perturb_translation_std = 0.0;  // meters
  double perturb_rotation_std = 0.0;     // radians

  double gt_sample_spacing = 0.05;  // grid step of the reference map
  std::uint64_t seed = 0;
};

/// Append the six inward-facing walls of an axis-aligned room.
void add_box_room(SceneSpec& spec, const Vec3& min_corner, const Vec3& max_corner);
/// Append the six outward-facing faces of an axis-aligned box.
void add_box(SceneSpec& spec, const Vec3& min_corner, const Vec3& max_corner);

struct Scene {
  std::vector<Cloud> clouds;  // sensor frame, scan_id = index, timestamp = index
  Trajectory gt_trajectory;
  Trajectory initial_trajectory;  // gt perturbed in the local frame
  std::vector<Vec3> gt_map_points;
};

Scene generate_scene(const SceneSpec& spec);

/// Scene spec from a flat key=value file with repeated plane/box/box_room
/// entries.
SceneSpec load_scene_spec(const std::string& path);

}  // namespace sba
