#include "sba/cli.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sba/config.hpp"
#include "sba/errors.hpp"
#include "sba/evaluation.hpp"
#include "sba/io.hpp"
#include "sba/pipeline.hpp"

namespace sba {

namespace {

constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;

std::string format_f9(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9f", value);
  return buf;
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path);
  out << content;
}

// Path keys inside a config file resolve against the file's directory, so a
// generated dataset stays runnable from anywhere.
void resolve_config_paths(PipelineConfig& config, const std::string& config_path) {
  const fs::path base = fs::path(config_path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (base / p).string();
  };
  for (std::string& p : config.cloud_paths) resolve(p);
  resolve(config.trajectory_path);
  resolve(config.gt_trajectory_path);
}

// -------------------------------------------------------------------------
// ba

int cmd_ba(const std::string& config_path, const std::vector<std::string>& overrides) {
  PipelineConfig config = load_config(config_path);
  resolve_config_paths(config, config_path);
  for (const std::string& entry : overrides) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + entry + "'");
    apply_config_entry(config, entry.substr(0, eq), entry.substr(eq + 1));
  }
  config.validate();
  if (config.cloud_paths.empty()) throw InputError("config: no clouds listed");
  if (config.trajectory_path.empty()) throw InputError("config: no trajectory listed");

  const Trajectory initial = read_trajectory(config.trajectory_path, config.trajectory_format);
  if (initial.size() != config.cloud_paths.size()) {
    throw InputError("config: " + std::to_string(config.cloud_paths.size()) + " clouds vs " +
                     std::to_string(initial.size()) + " poses");
  }

  std::vector<Cloud> clouds;
  clouds.reserve(config.cloud_paths.size());
  std::size_t dropped = 0;
  for (std::size_t k = 0; k < config.cloud_paths.size(); ++k) {
    Cloud cloud = read_cloud(config.cloud_paths[k], config.cloud_format);
    cloud.scan_id = static_cast<int>(k);
    cloud.timestamp = initial.times[k];
    dropped += cloud.dropped_nonfinite;
    clouds.push_back(std::move(cloud));
  }
  if (dropped > 0) std::cerr << "dropped " << dropped << " non-finite points\n";

  Trajectory gt;
  const bool has_gt = !config.gt_trajectory_path.empty();
  if (has_gt) gt = read_trajectory(config.gt_trajectory_path, config.gt_trajectory_format);

  const PipelineResult result =
      run_bundle_adjustment(clouds, initial, config, has_gt ? &gt : nullptr);

  fs::create_directories(config.output_dir);
  const fs::path out(config.output_dir);
  write_trajectory(result.trajectory, (out / "trajectory.tum").string(), TrajectoryFormat::Tum);
  write_surfel_map(result.surfels, (out / "surfel_map.ply").string());

  std::ostringstream csv;
  csv << (has_gt ? "iteration,total_cost,ate_rms\n" : "iteration,total_cost\n");
  for (const IterationRecord& r : result.iterations) {
    csv << r.iteration << ',' << format_g9(r.total_cost);
    if (has_gt) csv << ',' << (r.has_ate ? format_g9(r.ate_rms) : "");
    csv << '\n';
  }
  write_text_file((out / "iterations.csv").string(), csv.str());

  std::ostringstream manifest;
  manifest << "version = " << kVersion << "\n";
  manifest << "command = ba\n";
  manifest << serialize_config(config);
  manifest << "hash config " << hash_hex(fnv1a_file(config_path)) << "\n";
  manifest << "hash trajectory " << hash_hex(fnv1a_file(config.trajectory_path)) << "\n";
  if (has_gt) manifest << "hash gt_trajectory " << hash_hex(fnv1a_file(config.gt_trajectory_path)) << "\n";
  for (const std::string& p : config.cloud_paths) {
    manifest << "hash cloud " << hash_hex(fnv1a_file(p)) << "\n";
  }
  write_text_file((out / "manifest.txt").string(), manifest.str());

  std::cout << "surfels: " << result.surfels.size() << "\n";
  std::cout << "outer iterations: " << result.iterations.size() - 1
            << (result.converged ? " (converged)" : " (budget exhausted)") << "\n";
  std::cout << "final cost: " << format_g9(result.iterations.back().total_cost) << "\n";
  if (has_gt && result.iterations.back().has_ate) {
    std::cout << "final ATE RMS: " << format_f9(result.iterations.back().ate_rms) << " m\n";
  }
  std::cout << "outputs in " << config.output_dir << "\n";
  return 0;
}

// -------------------------------------------------------------------------
// eval-ate / eval-map

int cmd_eval_ate(const std::string& est_path, const std::string& gt_path,
                 const std::string& est_format, const std::string& gt_format, double max_dt,
                 const std::string& csv_path) {
  const Trajectory est = read_trajectory(est_path, trajectory_format_from_string(est_format));
  const Trajectory gt = read_trajectory(gt_path, trajectory_format_from_string(gt_format));
  const AteResult r = ate(est, gt, max_dt);

  EvalReport report;
  report.has_ate = true;
  report.ate_rms = r.rms;
  report.ate_max = r.max;
  report.matched_pose_count = r.matched_pose_count;

  std::cout << "rms " << format_f9(r.rms) << "\n";
  std::cout << "max " << format_f9(r.max) << "\n";
  std::cout << "matched poses " << r.matched_pose_count << "\n";
  if (!csv_path.empty()) write_text_file(csv_path, report.csv());
  return 0;
}

int cmd_eval_map(const std::string& map_path, const std::string& gt_path,
                 const std::string& map_format, const std::string& gt_format, double overlap,
                 double f_threshold, const std::string& csv_path) {
  const Cloud map_cloud = read_cloud(map_path, cloud_format_from_string(map_format));
  const Cloud gt_cloud = read_cloud(gt_path, cloud_format_from_string(gt_format));
  const MapMetrics m = map_metrics(map_cloud.points, gt_cloud.points, overlap, f_threshold);

  EvalReport report;
  report.set_map(m);
  std::cout << report.text();
  if (!csv_path.empty()) write_text_file(csv_path, report.csv());
  return 0;
}

// -------------------------------------------------------------------------
// synth

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
  const SceneSpec spec = load_scene_spec(spec_path);
  const Scene scene = generate_scene(spec);

  const fs::path out(out_dir);
  fs::create_directories(out / "clouds");

  std::vector<std::string> cloud_files;
  for (const Cloud& cloud : scene.clouds) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.ply", cloud.scan_id);
    cloud_files.push_back(std::string("clouds/") + name);
    write_cloud(cloud, (out / "clouds" / name).string(), CloudFormat::Ply);
  }
  write_trajectory(scene.gt_trajectory, (out / "gt.tum").string(), TrajectoryFormat::Tum);
  write_trajectory(scene.initial_trajectory, (out / "initial.tum").string(), TrajectoryFormat::Tum);
  Cloud gt_map;
  gt_map.points = scene.gt_map_points;
  write_cloud(gt_map, (out / "gt_map.ply").string(), CloudFormat::Ply);

  // Ready-to-run config; paths relative to the config's own directory.
  std::ostringstream cfg;
  cfg << "clouds = ";
  for (std::size_t i = 0; i < cloud_files.size(); ++i) cfg << (i > 0 ? ";" : "") << cloud_files[i];
  cfg << "\ncloud_format = ply\n";
  cfg << "trajectory = initial.tum\n";
  cfg << "trajectory_format = tum\n";
  cfg << "gt_trajectory = gt.tum\n";
  cfg << "gt_trajectory_format = tum\n";
  cfg << "output_dir = ba_out\n";
  write_text_file((out / "ba.cfg").string(), cfg.str());

  std::ostringstream manifest;
  manifest << "version = " << kVersion << "\n";
  manifest << "command = synth\n";
  manifest << "hash scene_spec " << hash_hex(fnv1a_file(spec_path)) << "\n";
  manifest << "scans = " << scene.clouds.size() << "\n";
  manifest << "gt_map_points = " << scene.gt_map_points.size() << "\n";
  write_text_file((out / "manifest.txt").string(), manifest.str());

  std::cout << "wrote " << scene.clouds.size() << " scans and " << scene.gt_map_points.size()
            << " reference points to " << out_dir << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Batch LiDAR bundle adjustment over a surfel map"};
  app.set_version_flag("--version", std::string("sba ") + kVersion);
  app.require_subcommand(1);

  // ba
  auto* ba = app.add_subcommand("ba", "Jointly optimize poses and surfel map");
  std::string config_path;
  std::vector<std::string> overrides;
  ba->add_option("-c,--config", config_path, "Pipeline config file (key = value)")->required();
  ba->add_option("--set", overrides, "Override a config entry, key=value (repeatable)");

  // eval-ate
  auto* eval_ate = app.add_subcommand("eval-ate", "Absolute trajectory error after Horn alignment");
  std::string est_path, gt_traj_path;
  std::string est_format = "tum", gt_traj_format = "tum", ate_csv;
  double max_dt = 0.05;
  eval_ate->add_option("estimate", est_path, "Estimated trajectory")->required();
  eval_ate->add_option("ground_truth", gt_traj_path, "Ground-truth trajectory")->required();
  eval_ate->add_option("--est-format", est_format, "tum | kitti-poses");
  eval_ate->add_option("--gt-format", gt_traj_format, "tum | kitti-poses");
  eval_ate->add_option("--max-dt", max_dt, "Timestamp association window, seconds");
  eval_ate->add_option("--csv", ate_csv, "Write the report as CSV");

  // eval-map
  auto* eval_map = app.add_subcommand("eval-map", "Accuracy/completion/Chamfer-L1/F-score");
  std::string map_path, gt_map_path;
  std::string map_format = "ply", gt_map_format = "ply", map_csv;
  double overlap = 1.0, f_threshold = 0.2;
  eval_map->add_option("map", map_path, "Reconstructed map (surfel ply or cloud)")->required();
  eval_map->add_option("ground_truth", gt_map_path, "Reference cloud")->required();
  eval_map->add_option("--map-format", map_format, "kitti-bin | ply | xyz-text");
  eval_map->add_option("--gt-format", gt_map_format, "kitti-bin | ply | xyz-text");
  eval_map->add_option("--overlap", overlap, "Exclude distances above this, meters");
  eval_map->add_option("--f-threshold", f_threshold, "F-score distance threshold, meters");
  eval_map->add_option("--csv", map_csv, "Write the report as CSV");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene dataset");
  std::string spec_path, out_dir;
  synth->add_option("spec", spec_path, "Scene spec file")->required();
  synth->add_option("out_dir", out_dir, "Output directory")->required();

  std::vector<std::string> argv_like = args;
  try {
    // CLI11 parses reversed argv without the program name.
    std::reverse(argv_like.begin(), argv_like.end());
    app.parse(argv_like);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (ba->parsed()) return cmd_ba(config_path, overrides);
    if (eval_ate->parsed()) {
      return cmd_eval_ate(est_path, gt_traj_path, est_format, gt_traj_format, max_dt, ate_csv);
    }
    if (eval_map->parsed()) {
      return cmd_eval_map(map_path, gt_map_path, map_format, gt_map_format, overlap, f_threshold,
                          map_csv);
    }
    if (synth->parsed()) return cmd_synth(spec_path, out_dir);
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  } catch (const EvalError& e) {
    std::cerr << "evaluation error: " << e.what() << "\n";
    return 4;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace sba
