#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sba/association.hpp"
#include "sba/beam_model.hpp"
#include "sba/io.hpp"

namespace sba {

/// Every pipeline parameter, loadable from a flat key=value file; flags
/// override file entries. Defaults follow the evaluation defaults of the
/// method (d_e, d_n, d_theta, rho_ker, b_max, b_min).
struct PipelineConfig {
  // inputs
  std::vector<std::string> cloud_paths;
  CloudFormat cloud_format = CloudFormat::Ply;
  std::string trajectory_path;
  TrajectoryFormat trajectory_format = TrajectoryFormat::Tum;
  std::string gt_trajectory_path;  // optional; enables per-iteration ATE
  TrajectoryFormat gt_trajectory_format = TrajectoryFormat::Tum;
  std::string output_dir = "sba_out";

  // association
  double d_e = 0.5;          // m
  double d_n = 1.0;          // m
  double d_theta_deg = 5.0;  // degrees

  // kd-tree
  double b_max = 0.2;  // m
  double b_min = 0.1;  // m

  // robust kernel
  double rho_ker = 0.1;  // m
  bool use_huber = true;

  // beam model
  std::string sensor_preset;       // empty: use beam_divergence directly
  double beam_divergence = 3e-3;   // full cone angle, rad
  int beam_samples = 37;
  int beam_rings = 3;
  double sigma_floor = 1e-4;  // m
  double sigma_cap = 1.0;     // m
  bool uncertainty = true;    // off: every normalized sigma = 1

  // optimization
  int outer_iterations = 10;
  int inner_iterations = 30;
  double convergence_tol = 1e-4;
  bool pose_only = false;

  // evaluation / misc
  double ate_max_dt = 0.05;  // s
  unsigned long long seed = 0;
  int threads = 1;

  MatchThresholds thresholds() const;
  BeamSpec beam_spec() const;

  /// Throws InputError listing every violated parameter constraint.
  void validate() const;
};

/// Ordered key=value pairs; '#' comments and blank lines skipped.
std::vector<std::pair<std::string, std::string>> read_kv_file(const std::string& path);

/// Applies one key=value entry; throws InputError on unknown keys or
/// unparseable values.
void apply_config_entry(PipelineConfig& config, const std::string& key, const std::string& value);

PipelineConfig load_config(const std::string& path);

/// Canonical key=value dump (the manifest's config snapshot).
std::string serialize_config(const PipelineConfig& config);

}  // namespace sba
