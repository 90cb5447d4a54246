#include "sba/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "sba/errors.hpp"
#include "sba/se3.hpp"

namespace sba {

HuberResult huber_cost(double e, double rho_ker) {
  const double a = std::abs(e);
  if (a <= rho_ker) return {0.5 * e * e, 1.0};
  return {rho_ker * (a - 0.5 * rho_ker), rho_ker / a};
}

namespace {

double residual_raw(const Isometry3& T_w_k, const Vec3& center, const Vec3& normal, double q,
                    const Vec3& p_l, double sigma) {
  const Vec3 n_k = T_w_k.linear() * normal;
  const Vec3 p_k = T_w_k * (center + q * normal);
  return n_k.dot(p_k - p_l) / sigma;
}

}  // namespace

double residual(const Isometry3& T_w_k, const Surfel& s, const Vec3& p_l, double sigma) {
  return residual_raw(T_w_k, s.center, s.normal, s.q, p_l, sigma);
}

void jacobians(const Isometry3& T_w_k, const Surfel& s, const Vec3& p_l, double sigma,
               RowVec6& J_pose, double& J_q) {
  const Vec3 m = T_w_k.linear() * s.normal;  // sensor-frame normal
  const double inv_sigma = 1.0 / sigma;
  J_pose.head<3>() = -inv_sigma * m.transpose();
  J_pose.tail<3>() = inv_sigma * (m.transpose() * skew<double>(p_l));
  J_q = inv_sigma;
}

namespace {

struct Assembly {
  Eigen::MatrixXd pose_hessian;  // block-diagonal pose part of H
  Eigen::VectorXd pose_rhs;      // -gradient, pose part
  std::vector<double> offset_hessian;
  std::vector<double> offset_rhs;
  // Per surfel, per observing pose (first-appearance order): J_pose^T * J_q sums.
  std::vector<std::vector<std::pair<int, Vec6>>> cross;
  double cost = 0.0;
};

class Problem {
 public:
  Problem(FactorGraph& graph, const LmOptions& opts) : graph_(graph), opts_(opts) {
    const int n_poses = static_cast<int>(graph.poses.size());
    if (n_poses == 0) throw SolverError("optimize: graph has no poses");
    if (graph.gauge_index < 0 || graph.gauge_index >= n_poses) {
      throw SolverError("optimize: gauge index out of range");
    }
    n_surfels_ = graph.surfels != nullptr ? graph.surfels->size() : 0;

    std::vector<int> factors_per_pose(static_cast<std::size_t>(n_poses), 0);
    for (const Factor& f : graph.factors) {
      if (f.scan_id < 0 || f.scan_id >= n_poses) throw SolverError("optimize: factor scan_id out of range");
      if (f.surfel < 0 || static_cast<std::size_t>(f.surfel) >= n_surfels_) {
        throw SolverError("optimize: factor surfel id out of range");
      }
      if (!(f.sigma > 0.0)) throw SolverError("optimize: factor sigma must be positive");
      ++factors_per_pose[static_cast<std::size_t>(f.scan_id)];
    }

    var_of_pose_.assign(static_cast<std::size_t>(n_poses), -1);
    std::string unconstrained;
    int v = 0;
    for (int k = 0; k < n_poses; ++k) {
      if (k == graph.gauge_index) continue;
      if (factors_per_pose[static_cast<std::size_t>(k)] == 0) {
        unconstrained += (unconstrained.empty() ? "" : ", ") + std::to_string(k);
        continue;
      }
      var_of_pose_[static_cast<std::size_t>(k)] = v++;
    }
    if (!unconstrained.empty()) {
      throw SolverError("optimize: rank-deficient system, poses without factors: " + unconstrained);
    }
    n_pose_vars_ = v;
  }

  double total_cost(const std::vector<Isometry3>& poses, const std::vector<double>& offsets) const {
    const auto inverses = invert_all(poses);
    double cost = 0.0;
    for (const Factor& f : graph_.factors) {
      const Surfel& s = (*graph_.surfels)[static_cast<std::size_t>(f.surfel)];
      const double e = residual_raw(inverses[static_cast<std::size_t>(f.scan_id)], s.center,
                                    s.normal, offsets[static_cast<std::size_t>(f.surfel)], f.p_l,
                                    f.sigma);
      cost += graph_.use_huber ? huber_cost(e, graph_.rho_ker).cost : 0.5 * e * e;
    }
    return cost;
  }

  Assembly assemble(const std::vector<Isometry3>& poses, const std::vector<double>& offsets) const {
    Assembly a;
    a.pose_hessian = Eigen::MatrixXd::Zero(6 * n_pose_vars_, 6 * n_pose_vars_);
    a.pose_rhs = Eigen::VectorXd::Zero(6 * n_pose_vars_);
    a.offset_hessian.assign(n_surfels_, 0.0);
    a.offset_rhs.assign(n_surfels_, 0.0);
    a.cross.assign(n_surfels_, {});

    const auto inverses = invert_all(poses);
    RowVec6 J_pose;
    double J_q = 0.0;
    for (const Factor& f : graph_.factors) {
      const auto si = static_cast<std::size_t>(f.surfel);
      const Surfel& s = (*graph_.surfels)[si];
      const Isometry3& T_w_k = inverses[static_cast<std::size_t>(f.scan_id)];
      const double e = residual_raw(T_w_k, s.center, s.normal, offsets[si], f.p_l, f.sigma);
      double w = 1.0;
      if (graph_.use_huber) {
        const HuberResult h = huber_cost(e, graph_.rho_ker);
        w = h.weight;
        a.cost += h.cost;
      } else {
        a.cost += 0.5 * e * e;
      }

      jacobians(T_w_k, s, f.p_l, f.sigma, J_pose, J_q);
      // Offsets enter the residual through q even when they are held fixed.
      if (!opts_.pose_only) {
        a.offset_hessian[si] += w * J_q * J_q;
        a.offset_rhs[si] += -w * e * J_q;
      }

      const int pv = var_of_pose_[static_cast<std::size_t>(f.scan_id)];
      if (pv < 0) continue;  // gauge pose
      a.pose_hessian.block<6, 6>(6 * pv, 6 * pv) += w * J_pose.transpose() * J_pose;
      a.pose_rhs.segment<6>(6 * pv) += -w * e * J_pose.transpose();

      if (!opts_.pose_only) {
        auto& list = a.cross[si];
        auto it = std::find_if(list.begin(), list.end(), [&](const auto& p) { return p.first == pv; });
        if (it == list.end()) {
          list.emplace_back(pv, (w * J_q) * J_pose.transpose());
        } else {
          it->second += (w * J_q) * J_pose.transpose();
        }
      }
    }
    return a;
  }

  int n_pose_vars() const { return n_pose_vars_; }
  std::size_t n_surfels() const { return n_surfels_; }
  int var_of_pose(int k) const { return var_of_pose_[static_cast<std::size_t>(k)]; }

 private:
  static std::vector<Isometry3> invert_all(const std::vector<Isometry3>& poses) {
    std::vector<Isometry3> out(poses.size());
    for (std::size_t k = 0; k < poses.size(); ++k) out[k] = poses[k].inverse();
    return out;
  }

  FactorGraph& graph_;
  const LmOptions& opts_;
  std::vector<int> var_of_pose_;
  int n_pose_vars_ = 0;
  std::size_t n_surfels_ = 0;
};

}  // namespace

OptimizeResult optimize(FactorGraph& graph, const LmOptions& opts) {
  if (graph.surfels == nullptr && !graph.factors.empty()) {
    throw SolverError("optimize: graph has factors but no surfel set");
  }
  Problem problem(graph, opts);

  std::vector<Isometry3> poses = graph.poses;
  std::vector<double> offsets(problem.n_surfels(), 0.0);
  for (std::size_t i = 0; i < problem.n_surfels(); ++i) offsets[i] = (*graph.surfels)[i].q;

  double cost = problem.total_cost(poses, offsets);
  if (!std::isfinite(cost)) throw InputError("optimize: non-finite cost at initialization");

  OptimizeResult result;
  result.cost_trace.push_back(cost);

  double lambda = opts.lambda_init;
  const int n_vars = 6 * problem.n_pose_vars();

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    ++result.iterations;
    Assembly a = problem.assemble(poses, offsets);

    Eigen::MatrixXd reduced = a.pose_hessian;
    Eigen::VectorXd rhs = a.pose_rhs;
    reduced.diagonal().array() += lambda;

    std::vector<double> offset_gain(problem.n_surfels(), 0.0);
    if (!opts.pose_only) {
      for (std::size_t si = 0; si < problem.n_surfels(); ++si) {
        const double hqq = a.offset_hessian[si] + lambda;
        offset_gain[si] = hqq > 0.0 ? 1.0 / hqq : 0.0;
        const auto& list = a.cross[si];
        for (const auto& [k1, v1] : list) {
          rhs.segment<6>(6 * k1) -= v1 * (offset_gain[si] * a.offset_rhs[si]);
          for (const auto& [k2, v2] : list) {
            reduced.block<6, 6>(6 * k1, 6 * k2) -= offset_gain[si] * (v1 * v2.transpose());
          }
        }
      }
    }

    Eigen::VectorXd delta_pose = Eigen::VectorXd::Zero(n_vars);
    if (n_vars > 0) {
      delta_pose = reduced.ldlt().solve(rhs);
      if (!delta_pose.allFinite()) {
        throw SolverError("optimize: singular reduced system (rank deficiency) over " +
                          std::to_string(problem.n_pose_vars()) + " pose variables");
      }
    }

    std::vector<double> candidate_offsets = offsets;
    if (!opts.pose_only) {
      for (std::size_t si = 0; si < problem.n_surfels(); ++si) {
        double coupling = 0.0;
        for (const auto& [k, v] : a.cross[si]) coupling += v.dot(delta_pose.segment<6>(6 * k));
        candidate_offsets[si] += offset_gain[si] * (a.offset_rhs[si] - coupling);
      }
    }

    std::vector<Isometry3> candidate_poses = poses;
    for (std::size_t k = 0; k < poses.size(); ++k) {
      const int pv = problem.var_of_pose(static_cast<int>(k));
      if (pv < 0) continue;
      const Vec6 d = delta_pose.segment<6>(6 * pv);
      candidate_poses[k] = poses[k] * se3_exp<double>(d);
    }

    const double candidate_cost = problem.total_cost(candidate_poses, candidate_offsets);
    if (std::isfinite(candidate_cost) && candidate_cost <= cost) {
      poses = std::move(candidate_poses);
      offsets = std::move(candidate_offsets);
      lambda = std::max(lambda / 10.0, opts.lambda_min);
      result.cost_trace.push_back(candidate_cost);
      const double relative_decrease = (cost - candidate_cost) / std::max(cost, 1e-300);
      cost = candidate_cost;
      if (relative_decrease < opts.convergence_tol) {
        result.converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;  // stalled
    }
  }

  for (std::size_t i = 0; i < problem.n_surfels(); ++i) (*graph.surfels)[i].q = offsets[i];
  result.poses = std::move(poses);
  result.offsets = std::move(offsets);
  return result;
}

}  // namespace sba
