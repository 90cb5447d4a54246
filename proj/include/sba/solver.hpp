#pragma once

#include <vector>

#include "sba/surfel.hpp"
#include "sba/types.hpp"

namespace sba {

/// One point-to-plane measurement: a leaf of scan `scan_id` constraining
/// surfel `surfel`. p_l is the leaf mean in the sensor frame; sigma its
/// normalized range standard deviation.
struct Factor {
  int scan_id = 0;
  int surfel = 0;
  Vec3 p_l = Vec3::Zero();
  double sigma = 1.0;
};

struct HuberResult {
  double cost = 0.0;
  double weight = 1.0;  // IRLS weight
};

/// Huber loss: e^2/2 within rho_ker, rho_ker*(|e| - rho_ker/2) beyond, with
/// IRLS weight 1 resp. rho_ker/|e|.
HuberResult huber_cost(double e, double rho_ker);

/// Sigma-weighted point-to-plane residual of the surfel plane against the
/// leaf mean, in the sensor frame of T_w_k (world -> sensor). The surfel
/// position includes the live offset: p_s + q*n_s.
double residual(const Isometry3& T_w_k, const Surfel& s, const Vec3& p_l, double sigma);

/// Analytic derivatives of the residual: J_pose w.r.t. a twist applied on the
/// right of T_k^w (translation first), J_q w.r.t. the surfel offset.
/// J_q is exactly 1/sigma.
void jacobians(const Isometry3& T_w_k, const Surfel& s, const Vec3& p_l, double sigma,
               RowVec6& J_pose, double& J_q);

struct LmOptions {
  int max_iterations = 30;       // accepted and rejected steps both count
  double convergence_tol = 1e-4;  // relative decrease of accepted cost
  double lambda_init = 1e-4;
  double lambda_min = 1e-12;
  bool pose_only = false;  // keep all surfel offsets fixed at their value
};

/// Poses and surfel offsets as variables, point-to-plane factors, and one
/// gauge-fixed pose. Surfel offsets are scalars and eliminated by Schur
/// complement onto the poses.
struct FactorGraph {
  std::vector<Isometry3> poses;  // T_k^w, sensor -> world, one per scan
  std::vector<Surfel>* surfels = nullptr;
  std::vector<Factor> factors;
  int gauge_index = 0;
  double rho_ker = 0.1;
  bool use_huber = true;
};

struct OptimizeResult {
  std::vector<Isometry3> poses;
  std::vector<double> offsets;
  std::vector<double> cost_trace;  // initial cost, then one entry per accepted step
  int iterations = 0;
  bool converged = false;
};

/// Levenberg-Marquardt with IRLS Huber weighting. Damping starts at
/// lambda_init, x10 on a rejected step, /10 (floored at lambda_min) on an
/// accepted one; terminates on relative cost decrease < convergence_tol or
/// the iteration cap. The gauge pose is never touched. Writes the solved
/// offsets back into the surfels.
OptimizeResult optimize(FactorGraph& graph, const LmOptions& opts);

}  // namespace sba
