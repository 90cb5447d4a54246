#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "sba/se3.hpp"

using namespace sba;

TEST_CASE("se3_exp of zero is the identity") {
  const Isometry3 p = se3_exp<double>(Vec6::Zero());
  CHECK(p.linear().isApprox(Mat3::Identity(), 1e-15));
  CHECK(p.translation().norm() == 0.0);
}

TEST_CASE("se3_exp of a pure translation") {
  Vec6 delta;
  delta << 1, 2, 3, 0, 0, 0;
  const Isometry3 p = se3_exp<double>(delta);
  CHECK((p.linear() - Mat3::Identity()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((p.translation() - Vec3(1, 2, 3)).norm() == 0.0);
}

TEST_CASE("se3_exp quarter turn about z matches the Rodrigues oracle") {
  Vec6 delta;
  delta << 0, 0, 0, 0, 0, M_PI / 2;
  const Isometry3 p = se3_exp<double>(delta);

  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  CHECK((p.linear() - expected).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((p.linear() - oracles::rodrigues(Vec3(0, 0, M_PI / 2))).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("se3_exp rotation part matches Rodrigues for random twists") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> mag(1e-12, M_PI - 1e-3);
  for (int i = 0; i < 200; ++i) {
    const Vec3 omega = mag(rng) * oracles::random_unit(rng);
    Vec6 delta = Vec6::Zero();
    delta.tail<3>() = omega;
    const Isometry3 p = se3_exp<double>(delta);
    CHECK((p.linear() - oracles::rodrigues(omega)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("group laws hold for random twists") {
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> mag(0.0, M_PI - 1e-3);
  for (int i = 0; i < 200; ++i) {
    Vec6 delta;
    delta << u(rng), u(rng), u(rng), 0, 0, 0;
    delta.tail<3>() = mag(rng) * oracles::random_unit(rng);

    const Isometry3 p = se3_exp<double>(delta);
    const Isometry3 q = se3_exp<double>(Vec6(-delta));
    const Isometry3 should_be_identity = compose<double>(p, q);
    CHECK((should_be_identity.matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-9);

    const Isometry3 inv_check = compose<double>(p, invert<double>(p));
    CHECK((inv_check.matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-9);

    // Pose invariants: orthonormal rotation with unit determinant.
    CHECK((p.linear().transpose() * p.linear() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(p.linear().determinant() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("compose matches the homogeneous-matrix oracle") {
  Isometry3 a = Isometry3::Identity();
  a.translation() = Vec3(1, 0, 0);
  Isometry3 b = Isometry3::Identity();
  b.linear() = oracles::rodrigues(Vec3(0, 0, M_PI / 2));

  for (const auto& [x, y] : {std::pair{a, b}, std::pair{b, a}}) {
    const Isometry3 c = compose<double>(x, y);
    const Eigen::Matrix4d expected =
        oracles::homogeneous(x.linear(), x.translation()) * oracles::homogeneous(y.linear(), y.translation());
    CHECK((c.matrix() - expected).cwiseAbs().maxCoeff() < 1e-12);
  }

  std::mt19937 rng(13);
  for (int i = 0; i < 50; ++i) {
    const Isometry3 x = oracles::random_pose(rng);
    const Isometry3 y = oracles::random_pose(rng);
    const Eigen::Matrix4d expected =
        oracles::homogeneous(x.linear(), x.translation()) * oracles::homogeneous(y.linear(), y.translation());
    CHECK((compose<double>(x, y).matrix() - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("apply_point and apply_direction") {
  CHECK((apply_point<double>(Isometry3::Identity(), Vec3(1, 2, 3)) - Vec3(1, 2, 3)).norm() == 0.0);

  Isometry3 shifted = Isometry3::Identity();
  shifted.translation() = Vec3(5, 5, 5);
  CHECK((apply_direction<double>(shifted, Vec3(0, 0, 1)) - Vec3(0, 0, 1)).norm() == 0.0);

  CHECK_THROWS_AS(apply_direction<double>(shifted, Vec3(0, 0, 2)), InputError);

  std::mt19937 rng(14);
  for (int i = 0; i < 200; ++i) {
    const Isometry3 p = oracles::random_pose(rng);
    const Vec3 n = oracles::random_unit(rng);
    CHECK(std::abs(apply_direction<double>(p, n).norm() - 1.0) <= 1e-12);
  }
}

TEST_CASE("horn_align recovers exact rigid transforms") {
  std::mt19937 rng(15);
  std::vector<Isometry3> source;
  for (int i = 0; i < 8; ++i) source.push_back(oracles::random_pose(rng));

  SUBCASE("identical trajectories give the identity") {
    const Isometry3 g = horn_align(source, source);
    CHECK((g.matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("pure offset") {
    std::vector<Isometry3> target = source;
    for (auto& p : target) p.translation() += Vec3(10, 0, 0);
    const Isometry3 g = horn_align(source, target);
    CHECK((g.linear() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((g.translation() - Vec3(10, 0, 0)).norm() < 1e-9);
  }

  SUBCASE("random rigid transform round-trips") {
    for (int trial = 0; trial < 20; ++trial) {
      const Isometry3 g_true = oracles::random_pose(rng);
      std::vector<Isometry3> target = source;
      for (auto& p : target) {
        p.translation() = g_true * p.translation();
      }
      const Isometry3 g = horn_align(source, target);
      CHECK((g.matrix() - g_true.matrix()).cwiseAbs().maxCoeff() < 1e-9);

      double residual = 0.0;
      for (std::size_t i = 0; i < source.size(); ++i) {
        residual += (g * source[i].translation() - target[i].translation()).norm();
      }
      CHECK(residual < 1e-9);
    }
  }
}

TEST_CASE("horn_align rejects degenerate input") {
  auto pose_at = [](const Vec3& t) {
    Isometry3 p = Isometry3::Identity();
    p.translation() = t;
    return p;
  };

  std::vector<Isometry3> collinear{pose_at({0, 0, 0}), pose_at({1, 0, 0}), pose_at({2, 0, 0}),
                                   pose_at({3, 0, 0})};
  CHECK_THROWS_AS(horn_align(collinear, collinear), EvalError);

  std::vector<Isometry3> coincident{pose_at({1, 1, 1}), pose_at({1, 1, 1}), pose_at({1, 1, 1})};
  CHECK_THROWS_AS(horn_align(coincident, coincident), EvalError);

  std::vector<Isometry3> two{pose_at({0, 0, 0}), pose_at({1, 1, 0})};
  CHECK_THROWS_AS(horn_align(two, two), EvalError);
}
