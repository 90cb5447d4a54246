#pragma once

#include <functional>
#include <vector>

#include "sba/cloud.hpp"
#include "sba/config.hpp"
#include "sba/solver.hpp"
#include "sba/surfel.hpp"

namespace sba {

struct IterationRecord {
  int iteration = 0;   // 0 is the initial state
  double total_cost = 0.0;
  bool has_ate = false;
  double ate_rms = 0.0;
  std::size_t surfel_count = 0;
  std::size_t factor_count = 0;
  int inner_iterations = 0;
};

/// Observation points for tests and diagnostics.
struct PipelineHooks {
  /// Called per outer iteration with the surfel set as created (offsets zero)
  /// and after the solved offsets were committed.
  std::function<void(int iteration, const std::vector<Surfel>& created,
                     const std::vector<Surfel>& committed)>
      on_commit;
  /// Called per outer iteration with the poses fed to the solver and its result.
  std::function<void(int iteration, const std::vector<Isometry3>& poses_before,
                     const OptimizeResult& result)>
      on_optimize;
};

struct PipelineResult {
  Trajectory trajectory;        // refined poses at the input timestamps
  std::vector<Surfel> surfels;  // last iteration's map
  std::vector<IterationRecord> iterations;  // [0] initial, then one per outer iteration
  std::size_t degenerate_sigma_leaves = 0;
  std::size_t dropped_surfels = 0;  // degenerate-normal groups over all iterations
  bool converged = false;           // outer loop hit its relative-change tolerance
};

/// Batch bundle adjustment: build one kd-tree per cloud, estimate and
/// normalize per-leaf sigmas once, then iterate transform views / associate /
/// create surfels / optimize / commit offsets until the outer budget or the
/// relative total-cost change falls below 1e-4. Clouds must be ordered with
/// scan_id == index and match the trajectory length. When ground_truth is
/// given, every record carries the ATE of the current poses.
PipelineResult run_bundle_adjustment(const std::vector<Cloud>& clouds, const Trajectory& initial,
                                     const PipelineConfig& config,
                                     const Trajectory* ground_truth = nullptr,
                                     const PipelineHooks* hooks = nullptr);

}  // namespace sba
