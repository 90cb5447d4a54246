#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "sba/errors.hpp"
#include "sba/types.hpp"

namespace sba {

template <class Scalar>
using Vector3T = Eigen::Matrix<Scalar, 3, 1>;
template <class Scalar>
using Vector6T = Eigen::Matrix<Scalar, 6, 1>;
template <class Scalar>
using Matrix3T = Eigen::Matrix<Scalar, 3, 3>;
template <class Scalar>
using Isometry3T = Eigen::Transform<Scalar, 3, Eigen::Isometry>;

template <class Scalar>
Matrix3T<Scalar> skew(const Vector3T<Scalar>& w) {
  Matrix3T<Scalar> m;
  // clang-format off
  m <<       0, -w.z(),  w.y(),
         w.z(),      0, -w.x(),
        -w.y(),  w.x(),      0;
  // clang-format on
  return m;
}

/// Exponential map se(3) -> SE(3). The twist is [translation; rotation].
/// Below |w| = 1e-8 the rotation and the V integrator use their second-order
/// Taylor expansions.
template <class Scalar>
Isometry3T<Scalar> se3_exp(const Vector6T<Scalar>& delta) {
  const Vector3T<Scalar> rho = delta.template head<3>();
  const Vector3T<Scalar> omega = delta.template tail<3>();
  const Scalar theta = omega.norm();
  const Matrix3T<Scalar> W = skew<Scalar>(omega);
  const Matrix3T<Scalar> W2 = W * W;
  const Matrix3T<Scalar> I = Matrix3T<Scalar>::Identity();

  Matrix3T<Scalar> R, V;
  if (theta < Scalar(1e-8)) {
    R = I + W + W2 / Scalar(2);
    V = I + W / Scalar(2) + W2 / Scalar(6);
  } else {
    const Scalar t2 = theta * theta;
    const Scalar s = std::sin(theta);
    const Scalar c = std::cos(theta);
    R = I + (s / theta) * W + ((Scalar(1) - c) / t2) * W2;
    V = I + ((Scalar(1) - c) / t2) * W + ((theta - s) / (t2 * theta)) * W2;
  }

  Isometry3T<Scalar> out = Isometry3T<Scalar>::Identity();
  out.linear() = R;
  out.translation() = V * rho;
  return out;
}

template <class Scalar>
Isometry3T<Scalar> compose(const Isometry3T<Scalar>& a, const Isometry3T<Scalar>& b) {
  return a * b;
}

template <class Scalar>
Isometry3T<Scalar> invert(const Isometry3T<Scalar>& a) {
  return a.inverse();
}

template <class Scalar>
Vector3T<Scalar> apply_point(const Isometry3T<Scalar>& a, const Vector3T<Scalar>& p) {
  return a * p;
}

/// Directions transform by the rotation part only; the input must be unit
/// length within 1e-6.
template <class Scalar>
Vector3T<Scalar> apply_direction(const Isometry3T<Scalar>& a, const Vector3T<Scalar>& n) {
  if (std::abs(n.norm() - Scalar(1)) > Scalar(1e-6)) {
    throw InputError("apply_direction: input is not unit length");
  }
  return a.linear() * n;
}

/// Rigid alignment of corresponding pose translations (closed-form SVD
/// solution): returns G minimizing sum_i |G * source_i - target_i|^2.
/// Throws EvalError on fewer than 3 pairs or collinear/coincident input.
Isometry3 horn_align(const std::vector<Isometry3>& source, const std::vector<Isometry3>& target);

/// Same alignment over bare translation vectors.
Isometry3 horn_align_points(const std::vector<Vec3>& source, const std::vector<Vec3>& target);

}  // namespace sba
