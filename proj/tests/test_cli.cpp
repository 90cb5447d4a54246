#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "sba/association.hpp"
#include "sba/cli.hpp"
#include "sba/io.hpp"
#include "sba/kdtree.hpp"
#include "sba/surfel.hpp"

using namespace sba;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("sba_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

struct CaptureStreams {
  std::ostringstream out, err;
  std::streambuf* old_out;
  std::streambuf* old_err;
  CaptureStreams() : old_out(std::cout.rdbuf(out.rdbuf())), old_err(std::cerr.rdbuf(err.rdbuf())) {}
  ~CaptureStreams() {
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const char* kSceneSpec =
    "scan_count = 6\n"
    "seed = 3\n"
    "n_azimuth = 70\n"
    "n_elevation = 14\n"
    "elevation_min_deg = -35\n"
    "elevation_max_deg = 35\n"
    "range_noise_std = 0.01\n"
    "perturb_translation_std = 0.04\n"
    "perturb_rotation_deg = 0.4\n"
    "traj_start = 1.5 0 1.2\n"
    "traj_end = 8.5 0 1.2\n"
    "gt_sample_spacing = 0.2\n"
    "box_room = 0 -3 0 10 3 2.5\n";

int run(std::vector<std::string> args) { return run_cli(std::move(args)); }

// Recursive comparison of two generated directory trees.
bool trees_identical(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> rel_a, rel_b;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) rel_a.push_back(fs::relative(e.path(), a));
  }
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    if (e.is_regular_file()) rel_b.push_back(fs::relative(e.path(), b));
  }
  std::sort(rel_a.begin(), rel_a.end());
  std::sort(rel_b.begin(), rel_b.end());
  if (rel_a != rel_b) return false;
  for (const auto& rel : rel_a) {
    if (read_text((a / rel).string()) != read_text((b / rel).string())) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("synth writes a complete dataset and is deterministic") {
  TempDir tmp;
  write_text(tmp.file("scene.cfg"), kSceneSpec);

  CaptureStreams cap;
  CHECK(run({"synth", tmp.file("scene.cfg"), tmp.file("a")}) == 0);
  CHECK(run({"synth", tmp.file("scene.cfg"), tmp.file("b")}) == 0);

  CHECK(fs::exists(tmp.file("a/gt.tum")));
  CHECK(fs::exists(tmp.file("a/initial.tum")));
  CHECK(fs::exists(tmp.file("a/gt_map.ply")));
  CHECK(fs::exists(tmp.file("a/clouds/000000.ply")));
  CHECK(fs::exists(tmp.file("a/ba.cfg")));
  CHECK(fs::exists(tmp.file("a/manifest.txt")));

  CHECK(trees_identical(tmp.file("a"), tmp.file("b")));
}

TEST_CASE("ba runs end to end on a generated dataset") {
  TempDir tmp;
  write_text(tmp.file("scene.cfg"), kSceneSpec);
  CaptureStreams cap;
  REQUIRE(run({"synth", tmp.file("scene.cfg"), tmp.file("data")}) == 0);

  const int code = run({"ba", "--config", tmp.file("data/ba.cfg"), "--set",
                        "output_dir=" + tmp.file("out"), "--set", "outer_iterations=4"});
  CHECK(code == 0);
  CHECK(fs::exists(tmp.file("out/trajectory.tum")));
  CHECK(fs::exists(tmp.file("out/surfel_map.ply")));
  CHECK(fs::exists(tmp.file("out/iterations.csv")));
  CHECK(fs::exists(tmp.file("out/manifest.txt")));

  const std::string csv = read_text(tmp.file("out/iterations.csv"));
  CHECK(csv.rfind("iteration,total_cost,ate_rms\n", 0) == 0);  // gt present in ba.cfg
  CHECK(std::count(csv.begin(), csv.end(), '\n') >= 3);

  const std::string manifest = read_text(tmp.file("out/manifest.txt"));
  CHECK(manifest.find("version = ") != std::string::npos);
  CHECK(manifest.find("hash cloud ") != std::string::npos);
  CHECK(manifest.find("d_e = 0.5") != std::string::npos);

  // The refined trajectory parses and matches the scan count.
  const Trajectory refined = read_trajectory(tmp.file("out/trajectory.tum"), TrajectoryFormat::Tum);
  CHECK(refined.size() == 6);
}

TEST_CASE("pose-only ba writes the initial surfel construction") {
  TempDir tmp;
  write_text(tmp.file("scene.cfg"), kSceneSpec);
  CaptureStreams cap;
  REQUIRE(run({"synth", tmp.file("scene.cfg"), tmp.file("data")}) == 0);

  REQUIRE(run({"ba", "--config", tmp.file("data/ba.cfg"), "--set",
               "output_dir=" + tmp.file("out"), "--set", "pose_only=on", "--set",
               "outer_iterations=1"}) == 0);

  // Rebuild the initial construction directly from the dataset.
  const Trajectory initial =
      read_trajectory(tmp.file("data/initial.tum"), TrajectoryFormat::Tum);
  std::vector<Cloud> clouds;
  std::vector<KdTree> trees;
  for (std::size_t k = 0; k < initial.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "data/clouds/%06zu.ply", k);
    Cloud c = read_cloud(tmp.file(name), CloudFormat::Ply);
    c.scan_id = static_cast<int>(k);
    clouds.push_back(std::move(c));
  }
  for (const Cloud& c : clouds) trees.emplace_back(c, 0.2, 0.1);
  std::vector<KdTreeView> views;
  for (std::size_t k = 0; k < trees.size(); ++k) views.emplace_back(trees[k], initial.poses[k]);
  const auto surfels = create_surfels(associate(views, MatchThresholds{}));

  write_surfel_map(surfels, tmp.file("expected.ply"));
  CHECK(read_text(tmp.file("expected.ply")) == read_text(tmp.file("out/surfel_map.ply")));
}

TEST_CASE("uncertainty on/off both complete with different traces") {
  TempDir tmp;
  write_text(tmp.file("scene.cfg"), std::string(kSceneSpec) + "beam_divergence_mrad = 3\n");
  CaptureStreams cap;
  REQUIRE(run({"synth", tmp.file("scene.cfg"), tmp.file("data")}) == 0);

  REQUIRE(run({"ba", "--config", tmp.file("data/ba.cfg"), "--set",
               "output_dir=" + tmp.file("on"), "--set", "outer_iterations=3"}) == 0);
  REQUIRE(run({"ba", "--config", tmp.file("data/ba.cfg"), "--set",
               "output_dir=" + tmp.file("off"), "--set", "outer_iterations=3", "--set",
               "uncertainty=off"}) == 0);

  CHECK(read_text(tmp.file("on/iterations.csv")) != read_text(tmp.file("off/iterations.csv")));
}

TEST_CASE("missing cloud file exits with the input-error code and names the path") {
  TempDir tmp;
  write_text(tmp.file("bad.cfg"),
             "clouds = /nonexistent/cloud.ply\ntrajectory = /nonexistent/t.tum\n");
  CaptureStreams cap;
  CHECK(run({"ba", "--config", tmp.file("bad.cfg")}) == 2);
  CHECK(cap.err.str().find("/nonexistent") != std::string::npos);
}

TEST_CASE("unknown config key is an input error") {
  TempDir tmp;
  write_text(tmp.file("bad.cfg"), "no_such_key = 1\n");
  CaptureStreams cap;
  CHECK(run({"ba", "--config", tmp.file("bad.cfg")}) == 2);
}

TEST_CASE("eval-ate prints a fixed-point zero for identical trajectories") {
  TempDir tmp;
  Trajectory t;
  for (int i = 0; i < 5; ++i) {
    t.times.push_back(i);
    Isometry3 p = Isometry3::Identity();
    p.translation() = Vec3(i, std::sin(i), 0.2 * i);
    t.poses.push_back(p);
  }
  write_trajectory(t, tmp.file("t.tum"), TrajectoryFormat::Tum);

  CaptureStreams cap;
  CHECK(run({"eval-ate", tmp.file("t.tum"), tmp.file("t.tum")}) == 0);
  CHECK(cap.out.str().find("rms 0.000000000") != std::string::npos);
}

TEST_CASE("eval-ate reports evaluation errors with exit code 4") {
  TempDir tmp;
  Trajectory a, b;
  for (int i = 0; i < 5; ++i) {
    a.times.push_back(i);
    b.times.push_back(i + 100.0);  // no timestamp overlap
    Isometry3 p = Isometry3::Identity();
    p.translation() = Vec3(i, std::sin(i), 0);
    a.poses.push_back(p);
    b.poses.push_back(p);
  }
  write_trajectory(a, tmp.file("a.tum"), TrajectoryFormat::Tum);
  write_trajectory(b, tmp.file("b.tum"), TrajectoryFormat::Tum);

  CaptureStreams cap;
  CHECK(run({"eval-ate", tmp.file("a.tum"), tmp.file("b.tum")}) == 4);
  CHECK(cap.err.str().find("evaluation error") != std::string::npos);
}

TEST_CASE("eval-map reproduces the half-meter example") {
  TempDir tmp;
  Cloud a, b;
  a.points = {Vec3(0, 0, 0)};
  b.points = {Vec3(0.5, 0, 0)};
  write_cloud(a, tmp.file("a.ply"), CloudFormat::Ply);
  write_cloud(b, tmp.file("b.ply"), CloudFormat::Ply);

  CaptureStreams cap;
  CHECK(run({"eval-map", tmp.file("a.ply"), tmp.file("b.ply"), "--overlap", "1.0", "--f-threshold",
             "0.2", "--csv", tmp.file("r.csv")}) == 0);
  const std::string out = cap.out.str();
  CHECK(out.find("accuracy:   50 cm") != std::string::npos);
  CHECK(out.find("completion: 50 cm") != std::string::npos);
  CHECK(out.find("chamfer-L1: 50 cm") != std::string::npos);
  CHECK(out.find("f-score:    0 %") != std::string::npos);

  const std::string csv = read_text(tmp.file("r.csv"));
  CHECK(csv.find("chamfer_l1,50,cm") != std::string::npos);
}

TEST_CASE("synth rejects an invalid scene") {
  TempDir tmp;
  write_text(tmp.file("scene.cfg"), "scan_count = 2\n");  // no geometry
  CaptureStreams cap;
  CHECK(run({"synth", tmp.file("scene.cfg"), tmp.file("x")}) == 2);
}
