#include "sba/pipeline.hpp"

#include <cmath>
#include <thread>

#include "sba/beam_model.hpp"
#include "sba/errors.hpp"
#include "sba/evaluation.hpp"
#include "sba/kdtree.hpp"

namespace sba {

namespace {

// Per-leaf sigma estimation across all trees; independent leaves, so the
// parallel version is bit-identical to the sequential one.
void assign_sigmas(std::vector<KdTree>& trees, const PipelineConfig& config,
                   std::size_t& degenerate_count) {
  std::vector<Leaf*> all_leaves;
  for (KdTree& tree : trees) {
    for (std::size_t i = 0; i < tree.leaves().size(); ++i) {
      all_leaves.push_back(&tree.leaf_mut(static_cast<int>(i)));
    }
  }

  if (!config.uncertainty) {
    for (Leaf* leaf : all_leaves) leaf->sigma = 1.0;
    return;
  }

  const BeamSpec spec = config.beam_spec();
  std::vector<double> raw(all_leaves.size(), 0.0);
  std::vector<char> degenerate(all_leaves.size(), 0);

  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const SigmaSample sample = simulate_sigma(*all_leaves[i], spec);
      raw[i] = sample.degenerate ? config.sigma_cap : sample.sigma;
      degenerate[i] = sample.degenerate ? 1 : 0;
    }
  };

  const int n_threads = std::max(1, std::min<int>(config.threads, static_cast<int>(all_leaves.size())));
  if (n_threads == 1) {
    worker(0, all_leaves.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (all_leaves.size() + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(all_leaves.size(), begin + chunk);
      if (begin < end) pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  degenerate_count = 0;
  for (char d : degenerate) degenerate_count += d;

  const auto [norm, scaled] = normalize_sigmas(raw, config.sigma_floor, config.sigma_cap);
  (void)norm;
  for (std::size_t i = 0; i < all_leaves.size(); ++i) all_leaves[i]->sigma = scaled[i];
}

FactorGraph build_graph(const std::vector<Isometry3>& poses, std::vector<Surfel>& surfels,
                        const PipelineConfig& config) {
  FactorGraph graph;
  graph.poses = poses;
  graph.surfels = &surfels;
  graph.gauge_index = 0;
  graph.rho_ker = config.rho_ker;
  graph.use_huber = config.use_huber;
  for (const Surfel& s : surfels) {
    for (const LeafHandle& m : s.backing) {
      Factor f;
      f.scan_id = m.scan_id;
      f.surfel = s.id;
      f.p_l = m.mean_sensor;
      f.sigma = m.sigma;
      graph.factors.push_back(f);
    }
  }
  return graph;
}

}  // namespace

PipelineResult run_bundle_adjustment(const std::vector<Cloud>& clouds, const Trajectory& initial,
                                     const PipelineConfig& config, const Trajectory* ground_truth,
                                     const PipelineHooks* hooks) {
  config.validate();
  if (clouds.empty()) throw InputError("run_bundle_adjustment: no clouds");
  if (clouds.size() != initial.size()) {
    throw InputError("run_bundle_adjustment: clouds and trajectory differ in length");
  }
  for (std::size_t k = 0; k < clouds.size(); ++k) {
    if (clouds[k].scan_id != static_cast<int>(k)) {
      throw InputError("run_bundle_adjustment: clouds must be ordered with scan_id == index");
    }
  }

  PipelineResult result;

  // Trees are built once; every later stage works on transformed views.
  std::vector<KdTree> trees;
  trees.reserve(clouds.size());
  for (const Cloud& cloud : clouds) trees.emplace_back(cloud, config.b_max, config.b_min);
  assign_sigmas(trees, config, result.degenerate_sigma_leaves);

  std::vector<Isometry3> poses = initial.poses;

  const auto current_ate = [&](const std::vector<Isometry3>& p, IterationRecord& record) {
    if (ground_truth == nullptr) return;
    Trajectory t;
    t.times = initial.times;
    t.poses = p;
    const AteResult r = ate(t, *ground_truth, config.ate_max_dt);
    record.has_ate = true;
    record.ate_rms = r.rms;
  };

  LmOptions lm;
  lm.max_iterations = config.inner_iterations;
  lm.convergence_tol = config.convergence_tol;
  lm.pose_only = config.pose_only;

  for (int iteration = 1; iteration <= config.outer_iterations; ++iteration) {
    std::vector<KdTreeView> views;
    views.reserve(trees.size());
    for (std::size_t k = 0; k < trees.size(); ++k) views.emplace_back(trees[k], poses[k]);

    const AssociationSet groups = associate(views, config.thresholds());
    SurfelStats stats;
    std::vector<Surfel> surfels = create_surfels(groups, &stats);
    result.dropped_surfels += stats.dropped_degenerate;
    if (surfels.empty()) throw SolverError("run_bundle_adjustment: no usable surfels");

    const std::vector<Surfel> created = surfels;
    FactorGraph graph = build_graph(poses, surfels, config);

    OptimizeResult opt = optimize(graph, lm);
    if (!opt.cost_trace.empty() && !std::isfinite(opt.cost_trace.back())) {
      throw SolverError("run_bundle_adjustment: non-finite cost at iteration " +
                        std::to_string(iteration));
    }

    if (iteration == 1) {
      IterationRecord initial_record;
      initial_record.iteration = 0;
      initial_record.total_cost = opt.cost_trace.front();
      initial_record.surfel_count = surfels.size();
      initial_record.factor_count = graph.factors.size();
      current_ate(poses, initial_record);
      result.iterations.push_back(initial_record);
    }

    if (hooks != nullptr && hooks->on_optimize) hooks->on_optimize(iteration, poses, opt);

    poses = opt.poses;
    commit_offsets(surfels);
    if (hooks != nullptr && hooks->on_commit) hooks->on_commit(iteration, created, surfels);

    IterationRecord record;
    record.iteration = iteration;
    record.total_cost = opt.cost_trace.back();
    record.surfel_count = surfels.size();
    record.factor_count = graph.factors.size();
    record.inner_iterations = opt.iterations;
    current_ate(poses, record);
    result.iterations.push_back(record);

    result.surfels = std::move(surfels);

    const double previous = result.iterations[result.iterations.size() - 2].total_cost;
    const double change = std::abs(previous - record.total_cost) / std::max(previous, 1e-300);
    if (change < 1e-4) {
      result.converged = true;
      break;
    }
  }

  result.trajectory.times = initial.times;
  result.trajectory.poses = poses;
  return result;
}

}  // namespace sba
