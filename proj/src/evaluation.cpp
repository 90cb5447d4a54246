#include "sba/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "sba/config.hpp"
#include "sba/errors.hpp"
#include "sba/io.hpp"
#include "sba/se3.hpp"

namespace sba {

// ---------------------------------------------------------------------------
// ATE

AteResult ate(const Trajectory& est, const Trajectory& gt, double max_dt) {
  if (est.empty() || gt.empty()) throw EvalError("ate: empty trajectory");

  std::vector<Vec3> est_pts, gt_pts;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t = est.times[i];
    const auto it = std::lower_bound(gt.times.begin(), gt.times.end(), t);
    std::size_t best = gt.times.size();
    double best_dt = max_dt;
    if (it != gt.times.end() && std::abs(*it - t) <= best_dt) {
      best = static_cast<std::size_t>(it - gt.times.begin());
      best_dt = std::abs(*it - t);
    }
    if (it != gt.times.begin() && std::abs(*(it - 1) - t) <= best_dt) {
      best = static_cast<std::size_t>(it - 1 - gt.times.begin());
    }
    if (best < gt.times.size()) {
      est_pts.push_back(est.poses[i].translation());
      gt_pts.push_back(gt.poses[best].translation());
    }
  }

  if (est_pts.size() < 3) {
    throw EvalError("ate: insufficient overlap, only " + std::to_string(est_pts.size()) +
                    " pose associations");
  }

  const Isometry3 align = horn_align_points(est_pts, gt_pts);
  AteResult out;
  out.matched_pose_count = static_cast<int>(est_pts.size());
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < est_pts.size(); ++i) {
    const double err = (align * est_pts[i] - gt_pts[i]).norm();
    sum_sq += err * err;
    out.max = std::max(out.max, err);
  }
  out.rms = std::sqrt(sum_sq / static_cast<double>(est_pts.size()));
  return out;
}

// ---------------------------------------------------------------------------
// PointKdTree

PointKdTree::PointKdTree(const std::vector<Vec3>& points) : points_(points) {
  if (points_.empty()) throw EvalError("PointKdTree: empty point set");
  order_.resize(points_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  nodes_.reserve(points_.size() / 8 + 1);
  root_ = build(0, static_cast<std::uint32_t>(points_.size()));
}

std::int32_t PointKdTree::build(std::uint32_t begin, std::uint32_t end) {
  const std::int32_t index = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();

  constexpr std::uint32_t kLeafSize = 16;
  if (end - begin <= kLeafSize) {
    nodes_[index].begin = begin;
    nodes_[index].end = end;
    return index;
  }

  Vec3 lo = points_[static_cast<std::size_t>(order_[begin])];
  Vec3 hi = lo;
  for (std::uint32_t i = begin + 1; i < end; ++i) {
    const Vec3& p = points_[static_cast<std::size_t>(order_[i])];
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     return points_[static_cast<std::size_t>(a)](axis) <
                            points_[static_cast<std::size_t>(b)](axis);
                   });

  nodes_[index].axis = axis;
  nodes_[index].split = points_[static_cast<std::size_t>(order_[mid])](axis);
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

void PointKdTree::search(std::int32_t node_index, const Vec3& query, double& best_d2,
                         int& best_index) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_index)];
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const int idx = order_[i];
      const double d2 = (points_[static_cast<std::size_t>(idx)] - query).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && idx < best_index)) {
        best_d2 = d2;
        best_index = idx;
      }
    }
    return;
  }

  const double margin = query(node.axis) - node.split;
  const std::int32_t near = margin <= 0.0 ? node.left : node.right;
  const std::int32_t far = margin <= 0.0 ? node.right : node.left;
  search(near, query, best_d2, best_index);
  if (margin * margin <= best_d2) search(far, query, best_d2, best_index);
}

std::pair<double, int> PointKdTree::nearest(const Vec3& query) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  int best_index = static_cast<int>(points_.size());
  search(root_, query, best_d2, best_index);
  return {best_d2, best_index};
}

// ---------------------------------------------------------------------------
// Map metrics

MapMetrics map_metrics(const std::vector<Vec3>& map_points, const std::vector<Vec3>& gt_points,
                       double overlap_threshold, double f_threshold) {
  if (map_points.empty() || gt_points.empty()) throw EvalError("map_metrics: empty cloud");

  const PointKdTree gt_tree(gt_points);
  const PointKdTree map_tree(map_points);

  MapMetrics m;
  double acc_sum = 0.0;
  std::size_t acc_f = 0;
  for (const Vec3& p : map_points) {
    const double d = std::sqrt(gt_tree.nearest(p).first);
    if (d > overlap_threshold) {
      ++m.map_excluded;
      continue;
    }
    ++m.map_matched;
    acc_sum += d;
    if (d < f_threshold) ++acc_f;
  }

  double comp_sum = 0.0;
  std::size_t comp_f = 0;
  for (const Vec3& q : gt_points) {
    const double d = std::sqrt(map_tree.nearest(q).first);
    if (d > overlap_threshold) {
      ++m.gt_excluded;
      continue;
    }
    ++m.gt_matched;
    comp_sum += d;
    if (d < f_threshold) ++comp_f;
  }

  if (m.map_matched == 0 || m.gt_matched == 0) {
    throw EvalError("map_metrics: no overlap within threshold " + format_g9(overlap_threshold));
  }

  m.accuracy_m = acc_sum / static_cast<double>(m.map_matched);
  m.completion_m = comp_sum / static_cast<double>(m.gt_matched);
  m.chamfer_l1_m = 0.5 * (m.accuracy_m + m.completion_m);
  const double precision = static_cast<double>(acc_f) / static_cast<double>(m.map_matched);
  const double recall = static_cast<double>(comp_f) / static_cast<double>(m.gt_matched);
  m.f_score_pct = (precision + recall) > 0.0 ? 200.0 * precision * recall / (precision + recall) : 0.0;
  return m;
}

void EvalReport::set_map(const MapMetrics& m) {
  has_map = true;
  accuracy_cm = 100.0 * m.accuracy_m;
  completion_cm = 100.0 * m.completion_m;
  chamfer_l1_cm = 100.0 * m.chamfer_l1_m;
  f_score_pct = m.f_score_pct;
  map_matched = m.map_matched;
  map_excluded = m.map_excluded;
  gt_matched = m.gt_matched;
  gt_excluded = m.gt_excluded;
}

std::string EvalReport::csv() const {
  std::ostringstream out;
  out << "metric,value,unit\n";
  if (has_ate) {
    out << "ate_rms," << format_g9(ate_rms) << ",m\n";
    out << "ate_max," << format_g9(ate_max) << ",m\n";
    out << "matched_pose_count," << matched_pose_count << ",count\n";
  }
  if (has_map) {
    out << "accuracy," << format_g9(accuracy_cm) << ",cm\n";
    out << "completion," << format_g9(completion_cm) << ",cm\n";
    out << "chamfer_l1," << format_g9(chamfer_l1_cm) << ",cm\n";
    out << "f_score," << format_g9(f_score_pct) << ",%\n";
    out << "map_matched," << map_matched << ",count\n";
    out << "map_excluded," << map_excluded << ",count\n";
    out << "gt_matched," << gt_matched << ",count\n";
    out << "gt_excluded," << gt_excluded << ",count\n";
  }
  return out.str();
}

std::string EvalReport::text() const {
  std::ostringstream out;
  if (has_ate) {
    out << "ATE RMS: " << format_g9(ate_rms) << " m\n";
    out << "ATE MAX: " << format_g9(ate_max) << " m\n";
    out << "matched poses: " << matched_pose_count << "\n";
  }
  if (has_map) {
    out << "accuracy:   " << format_g9(accuracy_cm) << " cm\n";
    out << "completion: " << format_g9(completion_cm) << " cm\n";
    out << "chamfer-L1: " << format_g9(chamfer_l1_cm) << " cm\n";
    out << "f-score:    " << format_g9(f_score_pct) << " %\n";
    out << "excluded points: map " << map_excluded << ", reference " << gt_excluded << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Synthetic scenes

namespace {

void add_face(SceneSpec& spec, const Vec3& center, const Vec3& normal, const Vec3& u_axis,
              double u_half, double v_half) {
  ScenePlane p;
  p.center = center;
  p.normal = normal;
  p.u_axis = u_axis;
  p.u_half = u_half;
  p.v_half = v_half;
  spec.planes.push_back(p);
}

void add_box_faces(SceneSpec& spec, const Vec3& lo, const Vec3& hi, double sign) {
  const Vec3 c = 0.5 * (lo + hi);
  const Vec3 h = 0.5 * (hi - lo);
  // +-x, +-y, +-z faces; normals flipped inward for rooms (sign = -1)
  add_face(spec, Vec3(hi.x(), c.y(), c.z()), sign * Vec3::UnitX(), Vec3::UnitY(), h.y(), h.z());
  add_face(spec, Vec3(lo.x(), c.y(), c.z()), -sign * Vec3::UnitX(), Vec3::UnitY(), h.y(), h.z());
  add_face(spec, Vec3(c.x(), hi.y(), c.z()), sign * Vec3::UnitY(), Vec3::UnitX(), h.x(), h.z());
  add_face(spec, Vec3(c.x(), lo.y(), c.z()), -sign * Vec3::UnitY(), Vec3::UnitX(), h.x(), h.z());
  add_face(spec, Vec3(c.x(), c.y(), hi.z()), sign * Vec3::UnitZ(), Vec3::UnitX(), h.x(), h.y());
  add_face(spec, Vec3(c.x(), c.y(), lo.z()), -sign * Vec3::UnitZ(), Vec3::UnitX(), h.x(), h.y());
}

Isometry3 scene_pose(const SceneSpec& spec, int k) {
  const double s = spec.scan_count > 1 ? static_cast<double>(k) / (spec.scan_count - 1) : 0.0;
  Vec3 pos = spec.traj_start + s * (spec.traj_end - spec.traj_start);
  pos.y() += spec.wobble_amplitude * std::sin(2.0 * M_PI * s);
  pos.z() += 0.5 * spec.wobble_amplitude * (1.0 - std::cos(2.0 * M_PI * s));

  const double yaw = spec.yaw_sweep_deg * M_PI / 180.0 * s;
  Isometry3 pose = Isometry3::Identity();
  pose.linear() = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  pose.translation() = pos;
  return pose;
}

}  // namespace

void add_box_room(SceneSpec& spec, const Vec3& min_corner, const Vec3& max_corner) {
  add_box_faces(spec, min_corner, max_corner, -1.0);
}

void add_box(SceneSpec& spec, const Vec3& min_corner, const Vec3& max_corner) {
  add_box_faces(spec, min_corner, max_corner, 1.0);
}

Scene generate_scene(const SceneSpec& spec) {
  if (spec.planes.empty()) throw InputError("generate_scene: no world geometry");
  if (spec.scan_count < 1) throw InputError("generate_scene: scan_count must be >= 1");
  if (spec.n_azimuth < 1 || spec.n_elevation < 1) {
    throw InputError("generate_scene: ray pattern must be non-empty");
  }

  std::mt19937_64 rng_rays(spec.seed);
  std::mt19937_64 rng_perturb(spec.seed ^ 0x9E3779B97F4A7C15ULL);
  std::normal_distribution<double> unit_normal(0.0, 1.0);

  Scene scene;
  const double el_min = spec.elevation_min_deg * M_PI / 180.0;
  const double el_max = spec.elevation_max_deg * M_PI / 180.0;
  const double half_div = 0.5 * spec.beam_divergence;

  for (int k = 0; k < spec.scan_count; ++k) {
    const Isometry3 pose = scene_pose(spec, k);
    const Vec3 origin = pose.translation();

    Cloud cloud;
    cloud.scan_id = k;
    cloud.timestamp = static_cast<double>(k);

    for (int ei = 0; ei < spec.n_elevation; ++ei) {
      const double el = spec.n_elevation > 1
                            ? el_min + (el_max - el_min) * ei / (spec.n_elevation - 1)
                            : 0.5 * (el_min + el_max);
      for (int ai = 0; ai < spec.n_azimuth; ++ai) {
        const double az = 2.0 * M_PI * ai / spec.n_azimuth;
        const Vec3 dir_sensor(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                              std::sin(el));
        const Vec3 dir_world = pose.linear() * dir_sensor;

        double best_t = spec.max_range;
        double best_cos = 1.0;
        bool hit = false;
        for (const ScenePlane& plane : spec.planes) {
          const double denom = dir_world.dot(plane.normal);
          if (std::abs(denom) < 1e-12) continue;
          const double t = (plane.center - origin).dot(plane.normal) / denom;
          if (t < spec.min_range || t >= best_t) continue;
          const Vec3 q = origin + t * dir_world - plane.center;
          const Vec3 v_axis = plane.normal.cross(plane.u_axis);
          if (std::abs(q.dot(plane.u_axis)) > plane.u_half) continue;
          if (std::abs(q.dot(v_axis)) > plane.v_half) continue;
          best_t = t;
          best_cos = std::abs(denom);
          hit = true;
        }
        if (!hit) continue;

        double noise_std = spec.range_noise_std;
        if (half_div > 0.0) {
          // Footprint range spread of a diverging beam on an oblique plane.
          const double sin_a = std::sqrt(std::max(0.0, 1.0 - best_cos * best_cos));
          const double tan_a = sin_a / std::max(best_cos, 1e-3);
          const double spread = std::min(0.5 * best_t * half_div * tan_a, 1.0);
          noise_std = std::sqrt(noise_std * noise_std + spread * spread);
        }
        const double r = best_t + (noise_std > 0.0 ? noise_std * unit_normal(rng_rays) : 0.0);
        cloud.points.push_back(r * dir_sensor);
      }
    }

    if (cloud.points.empty()) {
      throw InputError("generate_scene: scan " + std::to_string(k) +
                       " outside geometry (no returns)");
    }
    scene.clouds.push_back(std::move(cloud));
    scene.gt_trajectory.times.push_back(static_cast<double>(k));
    scene.gt_trajectory.poses.push_back(pose);
  }

  scene.initial_trajectory.times = scene.gt_trajectory.times;
  for (const Isometry3& pose : scene.gt_trajectory.poses) {
    Vec6 delta;
    for (int i = 0; i < 3; ++i) delta(i) = spec.perturb_translation_std * unit_normal(rng_perturb);
    for (int i = 3; i < 6; ++i) delta(i) = spec.perturb_rotation_std * unit_normal(rng_perturb);
    scene.initial_trajectory.poses.push_back(pose * se3_exp<double>(delta));
  }

  for (const ScenePlane& plane : spec.planes) {
    const Vec3 v_axis = plane.normal.cross(plane.u_axis);
    const int nu = std::max(1, static_cast<int>(std::floor(2.0 * plane.u_half / spec.gt_sample_spacing)) + 1);
    const int nv = std::max(1, static_cast<int>(std::floor(2.0 * plane.v_half / spec.gt_sample_spacing)) + 1);
    for (int iu = 0; iu < nu; ++iu) {
      const double u = nu > 1 ? -plane.u_half + 2.0 * plane.u_half * iu / (nu - 1) : 0.0;
      for (int iv = 0; iv < nv; ++iv) {
        const double v = nv > 1 ? -plane.v_half + 2.0 * plane.v_half * iv / (nv - 1) : 0.0;
        scene.gt_map_points.push_back(plane.center + u * plane.u_axis + v * v_axis);
      }
    }
  }

  return scene;
}

SceneSpec load_scene_spec(const std::string& path) {
  SceneSpec spec;
  for (const auto& [key, value] : read_kv_file(path)) {
    std::istringstream ss(value);
    auto read_doubles = [&](int n, double* out) {
      for (int i = 0; i < n; ++i) {
        if (!(ss >> out[i])) {
          throw InputError("scene key '" + key + "': expected " + std::to_string(n) + " numbers");
        }
      }
    };

    if (key == "scan_count") spec.scan_count = static_cast<int>(std::stod(value));
    else if (key == "seed") spec.seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "n_azimuth") spec.n_azimuth = static_cast<int>(std::stod(value));
    else if (key == "n_elevation") spec.n_elevation = static_cast<int>(std::stod(value));
    else if (key == "elevation_min_deg") spec.elevation_min_deg = std::stod(value);
    else if (key == "elevation_max_deg") spec.elevation_max_deg = std::stod(value);
    else if (key == "min_range") spec.min_range = std::stod(value);
    else if (key == "max_range") spec.max_range = std::stod(value);
    else if (key == "range_noise_std") spec.range_noise_std = std::stod(value);
    else if (key == "beam_divergence_mrad") spec.beam_divergence = std::stod(value) * 1e-3;
    else if (key == "perturb_translation_std") spec.perturb_translation_std = std::stod(value);
    else if (key == "perturb_rotation_deg") spec.perturb_rotation_std = std::stod(value) * M_PI / 180.0;
    else if (key == "wobble_amplitude") spec.wobble_amplitude = std::stod(value);
    else if (key == "yaw_sweep_deg") spec.yaw_sweep_deg = std::stod(value);
    else if (key == "gt_sample_spacing") spec.gt_sample_spacing = std::stod(value);
    else if (key == "traj_start") read_doubles(3, spec.traj_start.data());
    else if (key == "traj_end") read_doubles(3, spec.traj_end.data());
    else if (key == "box_room" || key == "box") {
      double v[6];
      read_doubles(6, v);
      if (key == "box_room") {
        add_box_room(spec, Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5]));
      } else {
        add_box(spec, Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5]));
      }
    } else if (key == "plane") {
      double v[11];
      read_doubles(11, v);
      ScenePlane p;
      p.center = Vec3(v[0], v[1], v[2]);
      p.normal = Vec3(v[3], v[4], v[5]).normalized();
      p.u_axis = Vec3(v[6], v[7], v[8]);
      p.u_axis = (p.u_axis - p.u_axis.dot(p.normal) * p.normal).normalized();
      p.u_half = v[9];
      p.v_half = v[10];
      spec.planes.push_back(p);
    } else {
      throw InputError("unknown scene key: " + key);
    }
  }
  return spec;
}

}  // namespace sba
