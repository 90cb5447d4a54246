#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace sba {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using RowVec6 = Eigen::Matrix<double, 1, 6>;

// Rigid transform on SE(3). linear() is the rotation, translation() the offset.
using Isometry3 = Eigen::Isometry3d;

}  // namespace sba
