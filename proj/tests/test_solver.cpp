#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <random>

#include "oracles.hpp"
#include "sba/se3.hpp"
#include "sba/solver.hpp"

using namespace sba;

namespace {

Surfel make_surfel(const Vec3& center, const Vec3& normal, int id = 0, double q = 0.0) {
  Surfel s;
  s.center = center;
  s.normal = normal.normalized();
  s.id = id;
  s.q = q;
  s.backing.resize(1);
  return s;
}

// Central differences of the residual under a right-multiplied twist on T_k^w
// and under the offset q.
void fd_jacobians(const Isometry3& T_k_w, const Surfel& s, const Vec3& p_l, double sigma,
                  RowVec6& J_pose, double& J_q, double h = 1e-6) {
  for (int i = 0; i < 6; ++i) {
    Vec6 d = Vec6::Zero();
    d(i) = h;
    const double plus = residual((T_k_w * se3_exp<double>(d)).inverse(), s, p_l, sigma);
    d(i) = -h;
    const double minus = residual((T_k_w * se3_exp<double>(d)).inverse(), s, p_l, sigma);
    J_pose(i) = (plus - minus) / (2.0 * h);
  }
  Surfel sp = s, sm = s;
  sp.q += h;
  sm.q -= h;
  J_q = (residual(T_k_w.inverse(), sp, p_l, sigma) - residual(T_k_w.inverse(), sm, p_l, sigma)) /
        (2.0 * h);
}

// Synthetic two-scan problem over three orthogonal planes. Measurements are
// exact, so the global optimum is the true pose with zero offsets.
struct TwoScanProblem {
  std::vector<Surfel> surfels;
  FactorGraph graph;
  Isometry3 true_pose1;

  explicit TwoScanProblem(double measurement_noise = 0.0, unsigned seed = 81) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> noise(0.0, measurement_noise);

    true_pose1 = Isometry3::Identity();
    true_pose1.linear() = Eigen::AngleAxisd(0.3, Vec3(0.2, 1.0, -0.4).normalized()).toRotationMatrix();
    true_pose1.translation() = Vec3(0.8, -0.5, 0.3);

    int id = 0;
    auto add_plane = [&](const Vec3& normal, const Vec3& u, const Vec3& v, const Vec3& base) {
      for (int a = -2; a <= 2; ++a) {
        for (int b = -2; b <= 2; ++b) {
          surfels.push_back(make_surfel(base + 0.8 * a * u + 0.8 * b * v, normal, id++));
        }
      }
    };
    add_plane(Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, -2));
    add_plane(Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(4, 0, 0));
    add_plane(Vec3(0, 1, 0), Vec3(1, 0, 0), Vec3(0, 0, 1), Vec3(0, 4, 0));

    graph.poses = {Isometry3::Identity(), true_pose1};
    graph.surfels = &surfels;
    for (const Surfel& s : surfels) {
      for (int k = 0; k < 2; ++k) {
        Factor f;
        f.scan_id = k;
        f.surfel = s.id;
        const Isometry3 T_w_k = graph.poses[static_cast<std::size_t>(k)].inverse();
        f.p_l = T_w_k * s.center;
        if (measurement_noise > 0.0) f.p_l += noise(rng) * (T_w_k.linear() * s.normal);
        f.sigma = 1.0;
        graph.factors.push_back(f);
      }
    }
  }
};

double pose_distance(const Isometry3& a, const Isometry3& b, double* rot_out = nullptr) {
  const double trans = (a.translation() - b.translation()).norm();
  const Eigen::AngleAxisd diff(a.linear().transpose() * b.linear());
  if (rot_out != nullptr) *rot_out = std::abs(diff.angle());
  return trans;
}

}  // namespace

TEST_CASE("residual basics") {
  const Isometry3 id = Isometry3::Identity();

  SUBCASE("coincident point on the plane") {
    const Surfel s = make_surfel(Vec3(0, 0, 1), Vec3(0, 0, 1));
    CHECK(residual(id, s, Vec3(0, 0, 1), 1.0) == 0.0);
  }

  SUBCASE("documented 0.2 m example and sigma scaling") {
    const Surfel s = make_surfel(Vec3(0, 0, 1), Vec3(0, 0, 1));
    CHECK(residual(id, s, Vec3(0, 0, 0.8), 1.0) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(residual(id, s, Vec3(0, 0, 0.8), 2.0) == doctest::Approx(0.1).epsilon(1e-12));
  }

  SUBCASE("live offset shifts the residual by q/sigma under the identity") {
    Surfel s = make_surfel(Vec3(0, 0, 1), Vec3(0, 0, 1));
    const double base = residual(id, s, Vec3(0.3, -0.2, 0.8), 2.0);
    s.q = 0.05;
    CHECK(residual(id, s, Vec3(0.3, -0.2, 0.8), 2.0) ==
          doctest::Approx(base + 0.025).epsilon(1e-12));
  }

  SUBCASE("sensor-frame form equals the world-frame identity") {
    std::mt19937 rng(82);
    for (int i = 0; i < 100; ++i) {
      const Isometry3 T_k_w = oracles::random_pose(rng);
      Surfel s = make_surfel(Vec3(1, -2, 3) + oracles::random_unit(rng), oracles::random_unit(rng));
      s.q = 0.1;
      const Vec3 p_l = oracles::random_unit(rng) * 4.0;
      const double sigma = 1.7;

      const double direct = residual(T_k_w.inverse(), s, p_l, sigma);
      const Vec3 world_point = s.center + s.q * s.normal;
      const double via_world = s.normal.dot(world_point - T_k_w * p_l) / sigma;
      CHECK(direct == doctest::Approx(via_world).epsilon(1e-9));
    }
  }
}

TEST_CASE("huber cost and weight") {
  CHECK(huber_cost(0.0, 0.1).cost == 0.0);
  CHECK(huber_cost(0.0, 0.1).weight == 1.0);

  // Boundary continuity: both branches agree at |e| = rho_ker.
  const HuberResult at = huber_cost(0.1, 0.1);
  CHECK(at.cost == doctest::Approx(0.005).epsilon(1e-12));
  CHECK(at.weight == 1.0);
  const double linear_branch_at_boundary = 0.1 * (0.1 - 0.05);
  CHECK(std::abs(at.cost - linear_branch_at_boundary) < 1e-12);

  const HuberResult beyond = huber_cost(0.4, 0.1);
  CHECK(beyond.cost == doctest::Approx(0.035).epsilon(1e-12));
  CHECK(beyond.weight == doctest::Approx(0.25).epsilon(1e-12));

  const HuberResult negative = huber_cost(-0.4, 0.1);
  CHECK(negative.cost == beyond.cost);
  CHECK(negative.weight == beyond.weight);
}

TEST_CASE("J_q is exactly 1/sigma") {
  std::mt19937 rng(83);
  for (int i = 0; i < 20; ++i) {
    const Isometry3 T_w_k = oracles::random_pose(rng).inverse();
    const Surfel s = make_surfel(oracles::random_unit(rng) * 2.0, oracles::random_unit(rng));
    RowVec6 J_pose;
    double J_q = 0.0;
    const double sigma = 0.5 + i * 0.1;
    jacobians(T_w_k, s, Vec3(1, 2, 3), sigma, J_pose, J_q);
    CHECK(J_q == 1.0 / sigma);
  }
}

TEST_CASE("analytic jacobians match central differences on 100 random configurations") {
  std::mt19937 rng(84);
  std::uniform_real_distribution<double> sig(0.3, 3.0);
  double max_rel = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Isometry3 T_k_w = oracles::random_pose(rng);
    Surfel s = make_surfel(Vec3(0.5, -1.0, 2.0) + 2.0 * oracles::random_unit(rng),
                           oracles::random_unit(rng));
    s.q = 0.02;
    const Vec3 p_l = 3.0 * oracles::random_unit(rng);
    const double sigma = sig(rng);

    RowVec6 J_analytic;
    double Jq_analytic = 0.0;
    jacobians(T_k_w.inverse(), s, p_l, sigma, J_analytic, Jq_analytic);

    RowVec6 J_fd;
    double Jq_fd = 0.0;
    fd_jacobians(T_k_w, s, p_l, sigma, J_fd, Jq_fd);

    for (int c = 0; c < 6; ++c) {
      max_rel = std::max(max_rel, std::abs(J_analytic(c) - J_fd(c)) / std::max(1.0, std::abs(J_fd(c))));
    }
    max_rel = std::max(max_rel, std::abs(Jq_analytic - Jq_fd) / std::max(1.0, std::abs(Jq_fd)));
  }
  CHECK(max_rel < 1e-5);
}

TEST_CASE("translational jacobian block matches the translation-restricted oracle") {
  std::mt19937 rng(85);
  for (int i = 0; i < 20; ++i) {
    const Isometry3 T_k_w = oracles::random_pose(rng);
    const Surfel s = make_surfel(2.0 * oracles::random_unit(rng), oracles::random_unit(rng));
    const Vec3 p_l = 3.0 * oracles::random_unit(rng);

    RowVec6 J_analytic;
    double Jq = 0.0;
    jacobians(T_k_w.inverse(), s, p_l, 1.0, J_analytic, Jq);

    const double h = 1e-6;
    for (int c = 0; c < 3; ++c) {
      Vec6 d = Vec6::Zero();
      d(c) = h;
      const double plus = residual((T_k_w * se3_exp<double>(d)).inverse(), s, p_l, 1.0);
      d(c) = -h;
      const double minus = residual((T_k_w * se3_exp<double>(d)).inverse(), s, p_l, 1.0);
      CHECK(std::abs(J_analytic(c) - (plus - minus) / (2.0 * h)) < 1e-7);
    }
  }
}

TEST_CASE("zero-residual graph converges in one iteration with no update") {
  TwoScanProblem problem;
  const std::vector<Isometry3> before = problem.graph.poses;

  LmOptions opts;
  const OptimizeResult result = optimize(problem.graph, opts);
  CHECK(result.converged);
  CHECK(result.iterations == 1);
  REQUIRE(result.cost_trace.size() == 2);
  CHECK(result.cost_trace[0] == 0.0);
  CHECK(result.cost_trace[1] == 0.0);
  for (std::size_t k = 0; k < before.size(); ++k) {
    CHECK(pose_distance(result.poses[k], before[k]) < 1e-12);
  }
  for (double q : result.offsets) CHECK(std::abs(q) < 1e-12);
}

TEST_CASE("perturbed pose recovers ground truth on exact measurements") {
  TwoScanProblem problem;
  Vec6 delta;
  delta << 0.06, -0.05, 0.06, 0.02, -0.02, 0.02;  // ~0.1 m, ~2 degrees
  problem.graph.poses[1] = problem.true_pose1 * se3_exp<double>(delta);

  LmOptions opts;
  opts.max_iterations = 100;
  opts.convergence_tol = 1e-14;
  const OptimizeResult result = optimize(problem.graph, opts);

  double rot = 0.0;
  const double trans = pose_distance(result.poses[1], problem.true_pose1, &rot);
  CHECK(trans < 1e-6);
  CHECK(rot < 1e-6);
  for (double q : result.offsets) CHECK(std::abs(q) < 1e-6);
}

TEST_CASE("pose-only mode never touches the offsets") {
  TwoScanProblem problem;
  Vec6 delta;
  delta << 0.05, 0.02, -0.03, 0.01, 0.015, -0.01;
  problem.graph.poses[1] = problem.true_pose1 * se3_exp<double>(delta);

  LmOptions opts;
  opts.pose_only = true;
  opts.max_iterations = 50;
  opts.convergence_tol = 1e-12;
  const OptimizeResult result = optimize(problem.graph, opts);
  for (double q : result.offsets) CHECK(q == 0.0);
  for (const Surfel& s : problem.surfels) CHECK(s.q == 0.0);
}

TEST_CASE("gauge pose is bit-identical before and after optimize") {
  TwoScanProblem problem(0.01);
  Vec6 delta;
  delta << 0.05, 0.0, -0.02, 0.01, 0.0, 0.005;
  problem.graph.poses[1] = problem.true_pose1 * se3_exp<double>(delta);

  Eigen::Matrix4d gauge_before = problem.graph.poses[0].matrix();
  LmOptions opts;
  opts.max_iterations = 40;
  const OptimizeResult result = optimize(problem.graph, opts);
  CHECK(std::memcmp(gauge_before.data(), result.poses[0].matrix().data(), sizeof(double) * 16) == 0);
}

TEST_CASE("accepted cost trace is monotonically non-increasing") {
  TwoScanProblem problem(0.02);
  Vec6 delta;
  delta << 0.08, -0.06, 0.05, 0.02, 0.02, -0.015;
  problem.graph.poses[1] = problem.true_pose1 * se3_exp<double>(delta);

  LmOptions opts;
  opts.max_iterations = 60;
  opts.convergence_tol = 1e-12;
  const OptimizeResult result = optimize(problem.graph, opts);
  REQUIRE(result.cost_trace.size() >= 2);
  for (std::size_t i = 1; i < result.cost_trace.size(); ++i) {
    CHECK(result.cost_trace[i] <= result.cost_trace[i - 1]);
  }
  CHECK(result.cost_trace.back() < result.cost_trace.front());
}

TEST_CASE("full BA reaches a cost no higher than pose-only on the same graph") {
  Vec6 delta;
  delta << 0.07, -0.04, 0.05, 0.015, -0.02, 0.01;

  LmOptions opts;
  opts.max_iterations = 80;
  opts.convergence_tol = 1e-12;

  TwoScanProblem full(0.02);
  full.graph.poses[1] = full.true_pose1 * se3_exp<double>(delta);
  const double full_cost = optimize(full.graph, opts).cost_trace.back();

  TwoScanProblem pose_only_problem(0.02);
  pose_only_problem.graph.poses[1] = pose_only_problem.true_pose1 * se3_exp<double>(delta);
  LmOptions po = opts;
  po.pose_only = true;
  const double pose_only_cost = optimize(pose_only_problem.graph, po).cost_trace.back();

  CHECK(full_cost <= pose_only_cost);
}

TEST_CASE("scaling every sigma by a constant leaves the argmin unchanged") {
  Vec6 delta;
  delta << 0.06, -0.03, 0.04, 0.012, -0.015, 0.01;

  LmOptions opts;
  opts.max_iterations = 200;
  opts.convergence_tol = 1e-15;

  SUBCASE("huber disabled: exact invariance") {
    TwoScanProblem a(0.004, 91);
    a.graph.use_huber = false;
    a.graph.poses[1] = a.true_pose1 * se3_exp<double>(delta);
    const OptimizeResult ra = optimize(a.graph, opts);

    TwoScanProblem b(0.004, 91);
    b.graph.use_huber = false;
    for (Factor& f : b.graph.factors) f.sigma *= 3.7;
    b.graph.poses[1] = b.true_pose1 * se3_exp<double>(delta);
    const OptimizeResult rb = optimize(b.graph, opts);

    double rot = 0.0;
    const double trans = pose_distance(ra.poses[1], rb.poses[1], &rot);
    CHECK(trans < 1e-6);
    CHECK(rot < 1e-6);
  }

  SUBCASE("huber enabled with residuals inside the quadratic branch") {
    TwoScanProblem a(0.004, 92);
    a.graph.poses[1] = a.true_pose1 * se3_exp<double>(delta);
    const OptimizeResult ra = optimize(a.graph, opts);

    TwoScanProblem b(0.004, 92);
    for (Factor& f : b.graph.factors) f.sigma *= 2.0;
    b.graph.poses[1] = b.true_pose1 * se3_exp<double>(delta);
    const OptimizeResult rb = optimize(b.graph, opts);

    double rot = 0.0;
    const double trans = pose_distance(ra.poses[1], rb.poses[1], &rot);
    CHECK(trans < 1e-5);
    CHECK(rot < 1e-5);
  }
}

TEST_CASE("solver failure modes") {
  SUBCASE("pose without factors is reported as rank deficiency") {
    TwoScanProblem problem;
    problem.graph.poses.push_back(Isometry3::Identity());  // no factors reference pose 2
    LmOptions opts;
    CHECK_THROWS_WITH_AS(optimize(problem.graph, opts), doctest::Contains("2"), SolverError);
  }

  SUBCASE("non-finite initial cost is an input error") {
    TwoScanProblem problem;
    problem.graph.factors[0].p_l = Vec3(std::nan(""), 0, 0);
    LmOptions opts;
    CHECK_THROWS_AS(optimize(problem.graph, opts), InputError);
  }

  SUBCASE("invalid factor references") {
    TwoScanProblem problem;
    problem.graph.factors[0].scan_id = 99;
    LmOptions opts;
    CHECK_THROWS_AS(optimize(problem.graph, opts), SolverError);
  }
}
