#include "sba/se3.hpp"

#include <Eigen/SVD>

namespace sba {

Isometry3 horn_align_points(const std::vector<Vec3>& source, const std::vector<Vec3>& target) {
  if (source.size() != target.size()) {
    throw EvalError("horn_align: sequences differ in length");
  }
  const std::size_t n = source.size();
  if (n < 3) {
    throw EvalError("horn_align: needs at least 3 correspondences");
  }

  Vec3 src_mean = Vec3::Zero();
  Vec3 tgt_mean = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    src_mean += source[i];
    tgt_mean += target[i];
  }
  src_mean /= static_cast<double>(n);
  tgt_mean /= static_cast<double>(n);

  Mat3 cross = Mat3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    cross += (source[i] - src_mean) * (target[i] - tgt_mean).transpose();
  }

  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  // Coincident points give a zero covariance; collinear points a rank-1 one.
  // Either leaves the rotation unobservable.
  if (sv(0) < 1e-15 || sv(1) < 1e-12 * sv(0)) {
    throw EvalError("horn_align: alignment-degenerate input (collinear or coincident translations)");
  }

  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
  const Mat3 rotation = svd.matrixV() * d * svd.matrixU().transpose();

  Isometry3 g = Isometry3::Identity();
  g.linear() = rotation;
  g.translation() = tgt_mean - rotation * src_mean;
  return g;
}

Isometry3 horn_align(const std::vector<Isometry3>& source, const std::vector<Isometry3>& target) {
  std::vector<Vec3> src(source.size()), tgt(target.size());
  for (std::size_t i = 0; i < source.size(); ++i) src[i] = source[i].translation();
  for (std::size_t i = 0; i < target.size(); ++i) tgt[i] = target[i].translation();
  return horn_align_points(src, tgt);
}

}  // namespace sba
