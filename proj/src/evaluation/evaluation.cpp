#include "lenia/evaluation.hpp"

#include "lenia/error.hpp"
#include "lenia/parallel.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace lenia {

// Blob decomposition.

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      x = parent[x] = parent[parent[x]];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) {
      parent[std::max(a, b)] = std::min(a, b);
    }
  }
};

int wrap(int i, int n) { return ((i % n) + n) % n; }

double torus_distance2(const Cell& p, const Cell& q, int rows, int cols) {
  const int dr = std::abs(p.row - q.row);
  const int dc = std::abs(p.col - q.col);
  const double r = std::min(dr, rows - dr);
  const double c = std::min(dc, cols - dc);
  return r * r + c * c;
}

}  // namespace

std::vector<Blob> find_blobs(const GridD& a, double threshold, double merge_dist) {
  const int rows = static_cast<int>(a.rows());
  const int cols = static_cast<int>(a.cols());
  std::vector<int> label(std::size_t(rows) * cols, -1);
  auto at = [&](int r, int c) -> int& { return label[std::size_t(r) * cols + c]; };

  // 8-connected flood fill on the torus.
  int n_labels = 0;
  std::vector<Cell> stack;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (a(r, c) < threshold || at(r, c) >= 0) {
        continue;
      }
      at(r, c) = n_labels;
      stack.push_back({r, c});
      while (!stack.empty()) {
        const Cell p = stack.back();
        stack.pop_back();
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int qr = wrap(p.row + dr, rows);
            const int qc = wrap(p.col + dc, cols);
            if (a(qr, qc) >= threshold && at(qr, qc) < 0) {
              at(qr, qc) = n_labels;
              stack.push_back({qr, qc});
            }
          }
        }
      }
      ++n_labels;
    }
  }

  // The closest pair of two groups always lies on their 4-boundaries, so only boundary
  // cells are compared, bucketed so that close pairs sit in neighboring buckets.
  UnionFind uf(n_labels);
  if (n_labels > 1 && merge_dist > 0.0) {
    const int nb_r = std::max(1, static_cast<int>(rows / merge_dist));
    const int nb_c = std::max(1, static_cast<int>(cols / merge_dist));
    std::vector<std::vector<std::pair<Cell, int>>> buckets(std::size_t(nb_r) * nb_c);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const int l = at(r, c);
        if (l < 0) {
          continue;
        }
        const bool boundary = at(wrap(r - 1, rows), c) != l || at(wrap(r + 1, rows), c) != l ||
                              at(r, wrap(c - 1, cols)) != l || at(r, wrap(c + 1, cols)) != l;
        if (boundary) {
          const int br = static_cast<int>(std::int64_t(r) * nb_r / rows);
          const int bc = static_cast<int>(std::int64_t(c) * nb_c / cols);
          buckets[std::size_t(br) * nb_c + bc].push_back({{r, c}, l});
        }
      }
    }
    const double limit2 = merge_dist * merge_dist;
    for (int br = 0; br < nb_r; ++br) {
      for (int bc = 0; bc < nb_c; ++bc) {
        std::set<int> neighbors;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            neighbors.insert(wrap(br + dr, nb_r) * nb_c + wrap(bc + dc, nb_c));
          }
        }
        for (const auto& [p, lp] : buckets[std::size_t(br) * nb_c + bc]) {
          for (int nb : neighbors) {
            for (const auto& [q, lq] : buckets[nb]) {
              if (lp != lq && uf.find(lp) != uf.find(lq) && torus_distance2(p, q, rows, cols) < limit2) {
                uf.unite(lp, lq);
              }
            }
          }
        }
      }
    }
  }

  std::vector<int> slot(n_labels, -1);
  std::vector<Blob> blobs;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int l = at(r, c);
      if (l < 0) {
        continue;
      }
      const int root = uf.find(l);
      if (slot[root] < 0) {
        slot[root] = static_cast<int>(blobs.size());
        blobs.emplace_back();
      }
      Blob& b = blobs[slot[root]];
      b.cells.push_back({r, c});
      b.mass += a(r, c);
    }
  }
  return blobs;
}

double merge_distance(const RuleSet& rules) {
  double r = 0.0;
  for (const Rule& k : rules.rules) {
    r = std::max(r, k.r);
  }
  return rules.R * r;
}

TrajectoryStats make_stats(const Trajectory<float>& traj, double merge_dist, const ClassifierConfig& cfg) {
  TrajectoryStats s;
  s.mass = traj.mass;
  s.track = traj.track;
  s.final_state = traj.final_state.learnable().cast<double>();
  s.blobs = find_blobs(s.final_state, cfg.occupancy_threshold, merge_dist);
  return s;
}

// Classifiers.

Verdict agency_test(const TrajectoryStats& s, const ClassifierConfig& cfg) {
  if (s.failed) {
    return {false, "rollout failed: " + s.failure};
  }
  if (s.mass.empty()) {
    return {false, "no mass record"};
  }
  const double final_mass = s.mass.back();
  if (!(final_mass > 0.0)) {
    return {false, "collapsed (final mass 0)"};
  }
  if (!(final_mass < cfg.max_mass)) {
    return {false, "exploded (final mass " + std::to_string(final_mass) + ")"};
  }
  const int steps = static_cast<int>(s.mass.size()) - 1;
  if (steps < 2 * cfg.window) {
    throw Error(ErrorCode::InvalidArgument, "agency test needs at least 2 * window steps");
  }
  auto window_mean = [&](int begin) {
    double sum = 0.0;
    for (int t = begin; t < begin + cfg.window; ++t) {
      sum += s.mass[t];
    }
    return sum / cfg.window;
  };
  const double m1 = window_mean(0);
  const double m2 = window_mean(steps - cfg.window);
  if (!(m1 > 0.0) || !(m2 > 0.0)) {
    return {false, "empty mass window"};
  }
  const double ratio = std::max(m1, m2) / std::min(m1, m2);
  if (ratio > cfg.max_window_ratio) {
    return {false, "window mass ratio " + std::to_string(ratio)};
  }
  if (s.blobs.size() != 1) {
    return {false, std::to_string(s.blobs.size()) + " components"};
  }
  return {true, {}};
}

bool moving_test(const TrajectoryStats& s, const ClassifierConfig& cfg) {
  if (s.failed || s.track.empty() || std::isnan(s.track[0].x())) {
    return false;
  }
  const Position start = s.track[0];
  const int last = std::min<int>(cfg.moving_horizon, static_cast<int>(s.track.size()) - 1);
  for (int t = 1; t <= last; ++t) {
    if (!std::isnan(s.track[t].x()) && (s.track[t] - start).norm() > cfg.moving_distance) {
      return true;
    }
  }
  return false;
}

double measure_speed(const std::vector<Position>& track, const ClassifierConfig& cfg) {
  const int steps = static_cast<int>(track.size()) - 1;
  double sum = 0.0;
  int count = 0;
  for (int t = cfg.speed_start; t + cfg.speed_window <= steps; ++t) {
    const Position& p = track[t];
    const Position& q = track[t + cfg.speed_window];
    if (std::isnan(p.x()) || std::isnan(q.x())) {
      continue;
    }
    sum += (q - p).norm();
    ++count;
  }
  return count ? sum / count / cfg.speed_window : 0.0;
}

TrajectoryStats test_rollout(const RuleSet& rules, const InitPattern& init, const ObstacleConfig& obstacles,
                             const PerturbationSpec& perturb, GridShape shape, int steps, Rng& rng,
                             const ClassifierConfig& cfg, double clear_radius) {
  RolloutSpec spec;
  spec.steps = steps;
  spec.clear_radius = clear_radius;
  spec.perturb = perturb;
  spec.record = RecordPolicy::Summary;
  try {
    const double merge = merge_distance(rescale(rules, init, perturb.scale).first);
    return make_stats(rollout<float>(init, rules, obstacles, shape, spec, rng), merge, cfg);
  } catch (const Error& e) {
    TrajectoryStats s;
    s.failed = true;
    s.failure = std::string(to_string(e.code())) + ": " + e.what();
    return s;
  }
}

Verdict prefilter(const RuleSet& rules, const InitPattern& init, GridShape shape, const ClassifierConfig& cfg) {
  RolloutSpec spec;
  spec.steps = cfg.prefilter_steps;
  spec.record = RecordPolicy::FinalOnly;
  Rng rng(0);  // unperturbed and obstacle-free: no randomness is consumed
  try {
    const auto traj = rollout<float>(init, rules, {}, shape, spec, rng);
    const double mass = traj.final_state.learnable().cast<double>().sum();
    if (!(mass > 0.0)) {
      return {false, "collapsed (final mass 0)"};
    }
    if (!(mass < cfg.max_mass)) {
      return {false, "exploded (final mass " + std::to_string(mass) + ")"};
    }
    return {true, {}};
  } catch (const Error& e) {
    return {false, std::string(to_string(e.code())) + ": " + e.what()};
  }
}

// Obstacle robustness.

Position free_position(const TrajectoryStats& free_run, const InitPattern& init, GridShape shape, int step) {
  if (free_run.failed || step >= static_cast<int>(free_run.track.size()) || std::isnan(free_run.track[step].x())) {
    return init.center();
  }
  const Position p = free_run.track[step];
  return {std::fmod(std::fmod(p.x(), shape.rows) + shape.rows, shape.rows),
          std::fmod(std::fmod(p.y(), shape.cols) + shape.cols, shape.cols)};
}

std::vector<Disk> robustness_layout(Rng& rng, GridShape shape, int n, double radius, const Position& on_path) {
  std::vector<Disk> disks = sample_disks(rng, shape, std::max(0, n - 1), radius, 0.0, 1.0);
  if (n > 0) {
    disks.push_back({on_path.x(), on_path.y(), radius});
  }
  return disks;
}

RobustnessResult basic_obstacle_test(const RuleSet& rules, const InitPattern& init, GridShape shape,
                                     const TrajectoryStats& free_run, std::uint64_t seed,
                                     const ObstacleTestConfig& ocfg, const ClassifierConfig& cfg) {
  RobustnessResult result;
  result.rollouts = ocfg.rollouts;
  result.on_path = free_position(free_run, init, shape, ocfg.free_position_step);
  std::vector<int> pass(ocfg.rollouts, 0);
  std::vector<double> speeds(ocfg.rollouts, 0.0);
  parallel_for(ocfg.rollouts, [&](int k) {
    Rng rng = derive_rng(seed, "basic-obstacle", k);
    ObstacleConfig obstacles{robustness_layout(rng, shape, ocfg.n_obstacles, ocfg.radius, result.on_path), {}};
    const TrajectoryStats s =
        test_rollout(rules, init, obstacles, {}, shape, cfg.test_steps, rng, cfg, ocfg.clear_radius);
    if (agency_test(s, cfg).pass) {
      pass[k] = 1;
      speeds[k] = measure_speed(s.track, cfg);
    }
  });
  result.passes = std::accumulate(pass.begin(), pass.end(), 0);
  result.robustness = ocfg.rollouts ? double(result.passes) / ocfg.rollouts : 0.0;
  result.speed_obstacles = ocfg.rollouts ? std::accumulate(speeds.begin(), speeds.end(), 0.0) / ocfg.rollouts : 0.0;
  return result;
}

// Generalization grid.

std::vector<GeneralizationCell> generalization_plan(int test_steps, int free_tail) {
  std::vector<GeneralizationCell> plan;
  auto add = [&](const std::string& family, double value, auto&& configure) {
    GeneralizationCell cell;
    cell.family = family;
    cell.value = value;
    cell.perturb.active_end = test_steps - free_tail;
    configure(cell);
    plan.push_back(cell);
  };
  for (int n : {24, 30, 36, 42, 48}) {
    add("obstacle_number", n, [&](GeneralizationCell& c) { c.n_obstacles = n; });
  }
  for (double r : {4.0, 7.0, 10.0, 13.0, 16.0}) {
    add("obstacle_radius", r, [&](GeneralizationCell& c) {
      c.obstacle_radius = r;
      c.n_obstacles = static_cast<int>(std::lround(24.0 * (10.0 / r) * (10.0 / r)));
    });
  }
  for (const Speed s : {Speed{1, 3}, Speed{1, 2}, Speed{1, 1}, Speed{2, 1}, Speed{3, 1}}) {
    add("obstacle_speed", double(s.num) / s.den, [&](GeneralizationCell& c) {
      c.n_obstacles = 24;
      c.obstacle_speed = s;
    });
  }
  for (double p : {0.2, 0.6, 1.0, 1.4, 1.8}) {
    add("update_mask_rate", p, [&](GeneralizationCell& c) { c.perturb.update_mask_rate = p; });
  }
  for (double p : {0.2, 0.4, 0.6, 0.8, 1.0}) {
    add("update_noise_rate", p, [&](GeneralizationCell& c) {
      c.perturb.update_noise_rate = p;
      c.perturb.update_noise_std = 1.0;
    });
  }
  for (double s : {0.2, 0.6, 1.0, 1.4, 1.8}) {
    add("update_noise_std", s, [&](GeneralizationCell& c) {
      c.perturb.update_noise_rate = 1.0;
      c.perturb.update_noise_std = s;
    });
  }
  for (double p : {0.2, 0.4, 0.6, 0.8, 1.0}) {
    add("init_noise_rate", p, [&](GeneralizationCell& c) {
      c.perturb.init_noise_rate = p;
      c.perturb.init_noise_std = 1.0;
    });
  }
  for (double s : {0.5, 1.5, 2.5, 3.5, 4.5}) {
    add("init_noise_std", s, [&](GeneralizationCell& c) {
      c.perturb.init_noise_rate = 1.0;
      c.perturb.init_noise_std = s;
    });
  }
  for (double f : {0.15, 0.65, 1.15, 1.65, 2.15}) {
    add("scale", f, [&](GeneralizationCell& c) { c.perturb.scale = f; });
  }
  return plan;
}

std::vector<GeneralizationResult> generalization_battery(const RuleSet& rules, const InitPattern& init,
                                                         GridShape shape, const TrajectoryStats& free_run,
                                                         std::uint64_t seed, int seeds, const CellFilter& filter,
                                                         const ClassifierConfig& cfg) {
  const std::vector<GeneralizationCell> plan = generalization_plan(cfg.test_steps);
  std::vector<GeneralizationResult> results(plan.size());
  std::vector<std::pair<int, int>> jobs;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    results[i].cell = plan[i];
    results[i].seeds = seeds;
    if (!filter || filter(plan[i])) {
      results[i].ran = true;
      for (int s = 0; s < seeds; ++s) {
        jobs.emplace_back(static_cast<int>(i), s);
      }
    }
  }
  const Position on_path = free_position(free_run, init, shape, ObstacleTestConfig{}.free_position_step);
  std::vector<int> pass(jobs.size(), 0);
  parallel_for(static_cast<int>(jobs.size()), [&](int j) {
    const auto [i, s] = jobs[j];
    const GeneralizationCell& cell = plan[i];
    Rng rng = derive_rng(seed, "generalization", std::uint64_t(i) * 1000 + s);
    ObstacleConfig obstacles;
    if (cell.n_obstacles > 0) {
      obstacles.disks = robustness_layout(rng, shape, cell.n_obstacles, cell.obstacle_radius, on_path);
      obstacles.speed = cell.obstacle_speed;
    }
    const TrajectoryStats st = test_rollout(rules, init, obstacles, cell.perturb, shape, cfg.test_steps, rng, cfg);
    pass[j] = agency_test(st, cfg).pass ? 1 : 0;
  });
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    results[jobs[j].first].passes += pass[j];
  }
  for (GeneralizationResult& r : results) {
    r.survival = r.ran && r.seeds > 0 ? double(r.passes) / r.seeds : 0.0;
  }
  return results;
}

// Full report.

EvalReport evaluate(const RuleSet& rules, const InitPattern& init, int id, const EvalOptions& o) {
  EvalReport report;
  report.id = id;
  const Verdict pre = prefilter(rules, init, o.shape, o.classifier);
  report.prefilter = pre.pass;
  report.prefilter_reason = pre.reason;
  if (!pre.pass) {
    return report;
  }
  Rng rng = derive_rng(o.seed, "agency", id);
  const TrajectoryStats free_run = test_rollout(rules, init, {}, {}, o.shape, o.classifier.test_steps, rng, o.classifier);
  const Verdict agent = agency_test(free_run, o.classifier);
  report.agent = agent.pass;
  report.agent_reason = agent.reason;
  if (!agent.pass) {
    return report;
  }
  report.moving = moving_test(free_run, o.classifier);
  report.speed = measure_speed(free_run.track, o.classifier);
  if (!report.moving) {
    return report;
  }
  const RobustnessResult robust =
      basic_obstacle_test(rules, init, o.shape, free_run, derive_seed(o.seed, "robustness", id), o.obstacles, o.classifier);
  report.robustness = robust.robustness;
  report.speed_obstacles = robust.speed_obstacles;
  if (o.generalization) {
    report.generalization = generalization_battery(rules, init, o.shape, free_run, derive_seed(o.seed, "battery", id),
                                                   o.generalization_seeds, {}, o.classifier);
  }
  return report;
}

// Attractor rules.

bool overlaps(const GridD& learnable, const GridD& attractor, double threshold) {
  return ((learnable > threshold) && (attractor > threshold)).any();
}

AttractorSearch search_attractor_rules(const RuleSet& agent, const InitPattern& init, GridShape shape, int budget,
                                       Rng& rng, const AttractorSearchConfig& cfg, const ParamRanges& q) {
  AttractorSearch out;
  const Position start = init.center();
  for (int k = 0; k < budget; ++k) {
    Rule rule;
    rule.r = uniform(rng, q.r_min, q.r_max);
    for (int i = 0; i < kBumps; ++i) {
      rule.b[i] = uniform(rng, q.b_min, q.b_max);
      rule.w[i] = uniform(rng, q.w_min, q.w_max);
      rule.a[i] = uniform(rng, q.a_min, q.a_max);
    }
    rule.mu = uniform(rng, q.mu_min, q.mu_max);
    rule.sigma = uniform(rng, q.sigma_min, q.sigma_max);
    rule.h = uniform(rng, q.h_min, q.h_max);
    rule.c_src = kAttractorChannel;
    rule.c_dst = kLearnableChannel;
    ++out.tried;

    RuleSet rules = agent;
    rules.rules.push_back(rule);
    try {
      Simulator<float> sim(rules, shape);
      GridState<float> state = sim.make_state();
      stamp(state.learnable(), init);
      auto place_disk = [&](int t) {
        const Disk d{start.x() + cfg.disk_speed * t, start.y(), cfg.disk_radius};
        state.channels[kAttractorChannel] = rasterize_disks({d}, shape).cast<float>();
      };
      for (int t = 0; t < cfg.steps; ++t) {
        place_disk(t);
        sim.step(state, {}, rng);
      }
      place_disk(cfg.steps);
      if (overlaps(state.learnable().cast<double>(), state.channels[kAttractorChannel].cast<double>(),
                   cfg.overlap_threshold)) {
        out.candidates.push_back(rule);
      }
    } catch (const Error&) {
      ++out.failed;
    }
  }
  return out;
}

}  // namespace lenia
