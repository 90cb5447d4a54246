#pragma once

#include <string>
#include <vector>

#include "sba/cloud.hpp"
#include "sba/errors.hpp"
#include "sba/surfel.hpp"

namespace sba {

/// Supported cloud encodings.
///  - kitti-bin: packed little-endian float32 records (x, y, z, intensity);
///    intensity discarded on read, written as 0.
///  - ply: ascii or binary_little_endian with at least float/double x, y, z;
///    written as ascii.
///  - xyz-text: one "x y z" row per line; '#' comments and blank lines skipped.
/// Non-finite points are dropped and counted on read; all floats in text
/// formats are printed with 9 significant digits.
enum class CloudFormat { KittiBin, Ply, XyzText };

/// Supported trajectory encodings.
///  - tum: "timestamp tx ty tz qx qy qz qw" per line; quaternions within 1e-3
///    of unit norm are normalized, anything further is a malformed pose.
///  - kitti-poses: 12 floats per line, the 3x4 [R|t] in row-major order;
///    timestamps synthesized as the row index.
enum class TrajectoryFormat { Tum, KittiPoses };

CloudFormat cloud_format_from_string(const std::string& name);
TrajectoryFormat trajectory_format_from_string(const std::string& name);
std::string to_string(CloudFormat format);
std::string to_string(TrajectoryFormat format);

Cloud read_cloud(const std::string& path, CloudFormat format);
void write_cloud(const Cloud& cloud, const std::string& path, CloudFormat format);

Trajectory read_trajectory(const std::string& path, TrajectoryFormat format);
void write_trajectory(const Trajectory& trajectory, const std::string& path,
                      TrajectoryFormat format);

/// Ascii ply with per-vertex properties x y z nx ny nz radius, one vertex per
/// surfel, ordered by surfel id.
void write_surfel_map(const std::vector<Surfel>& surfels, const std::string& path);
std::vector<Surfel> read_surfel_map(const std::string& path);

/// printf("%.9g") — the project-wide float-to-text rule.
std::string format_g9(double value);

}  // namespace sba
