#pragma once

// Certification battery for discovered parameters: classifiers over long rollouts,
// obstacle robustness and the perturbation grid.

#include "lenia/rollout.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace lenia {

struct ClassifierConfig {
  double occupancy_threshold = 0.1;  ///< cells at or above this value belong to a blob
  double max_mass = 6400.0;
  double max_window_ratio = 2.0;
  int prefilter_steps = 500;
  int test_steps = 2000;
  /// Window means over steps [0, window) and [test_steps - window, test_steps).
  int window = 500;
  int moving_horizon = 1000;
  double moving_distance = 100.0;
  int speed_window = 25;
  int speed_start = 150;
};

struct Cell {
  int row = 0;
  int col = 0;
};

struct Blob {
  std::vector<Cell> cells;
  double mass = 0.0;
};

/// Occupied cells grouped by 8-connectivity on the torus, then merged transitively while
/// the minimal torus distance between two groups is below `merge_distance`.
std::vector<Blob> find_blobs(const GridD& a, double threshold, double merge_distance);

/// R * max(r) over the rules: the reach of the widest kernel.
double merge_distance(const RuleSet& rules);

struct TrajectoryStats {
  std::vector<double> mass;     ///< learnable mass of states 0..steps
  std::vector<Position> track;  ///< unwrapped center of mass; NaN where empty
  GridD final_state;
  std::vector<Blob> blobs;      ///< merged components of the final state
  bool failed = false;          ///< rollout aborted (numerical blowup, invalid scale)
  std::string failure;
};

TrajectoryStats make_stats(const Trajectory<float>& traj, double merge_dist, const ClassifierConfig& cfg);

struct Verdict {
  bool pass = false;
  std::string reason;  ///< empty on pass
};

/// Final mass in (0, max_mass), window-mean ratio max/min <= max_window_ratio, one component.
Verdict agency_test(const TrajectoryStats& stats, const ClassifierConfig& cfg = {});

/// The tracked center of mass leaves the disk of radius moving_distance around its start
/// at some step in 1..moving_horizon.
bool moving_test(const TrajectoryStats& stats, const ClassifierConfig& cfg = {});

/// Mean displacement over sliding windows [t, t + w], t = speed_start .. steps - w, divided by w.
/// Windows touching an empty state are skipped; 0 when none remain.
double measure_speed(const std::vector<Position>& track, const ClassifierConfig& cfg = {});

/// Long rollout under a given environment; failures are folded into the stats. Obstacle cells
/// inside the init square and within `clear_radius` of it are removed.
TrajectoryStats test_rollout(const RuleSet& rules, const InitPattern& init, const ObstacleConfig& obstacles,
                             const PerturbationSpec& perturb, GridShape shape, int steps, Rng& rng,
                             const ClassifierConfig& cfg = {}, double clear_radius = 10.0);

/// One obstacle-free rollout of prefilter_steps; pass iff 0 < final mass < max_mass.
Verdict prefilter(const RuleSet& rules, const InitPattern& init, GridShape shape, const ClassifierConfig& cfg = {});

// Obstacle robustness.

struct ObstacleTestConfig {
  int rollouts = 50;
  int n_obstacles = 24;  ///< including the one on the free trajectory
  double radius = 10.0;
  double clear_radius = 10.0;
  int free_position_step = 1000;
};

/// Position of the agent at `step` of an obstacle-free rollout, wrapped into the grid.
/// Falls back to the init center when the pattern is empty at that step.
Position free_position(const TrajectoryStats& free_run, const InitPattern& init, GridShape shape, int step);

/// n - 1 uniform disks over the whole grid plus one centered on `on_path`.
std::vector<Disk> robustness_layout(Rng& rng, GridShape shape, int n, double radius, const Position& on_path);

struct RobustnessResult {
  double robustness = 0.0;       ///< passes / rollouts
  double speed_obstacles = 0.0;  ///< mean speed, 0 for rollouts failing the agency test
  int passes = 0;
  int rollouts = 0;
  Position on_path;
};

/// `free_run` is the obstacle-free test rollout of the same parameters.
RobustnessResult basic_obstacle_test(const RuleSet& rules, const InitPattern& init, GridShape shape,
                                     const TrajectoryStats& free_run, std::uint64_t seed,
                                     const ObstacleTestConfig& ocfg = {}, const ClassifierConfig& cfg = {});

// Generalization grid.

struct GeneralizationCell {
  std::string family;
  double value = 0.0;
  int n_obstacles = 0;  ///< 0 for obstacle-free families
  double obstacle_radius = 10.0;
  Speed obstacle_speed;
  PerturbationSpec perturb;
};

inline constexpr int kGeneralizationFamilies = 9;
inline constexpr int kGeneralizationValues = 5;

/// The 9 x 5 test cells in family-major order.
std::vector<GeneralizationCell> generalization_plan(int test_steps = 2000, int free_tail = 100);

struct GeneralizationResult {
  GeneralizationCell cell;
  double survival = 0.0;  ///< passes / seeds
  int passes = 0;
  int seeds = 0;
  bool ran = false;
};

using CellFilter = std::function<bool(const GeneralizationCell&)>;

/// Runs every cell accepted by `filter` (all when empty) on `seeds` seeded rollouts.
std::vector<GeneralizationResult> generalization_battery(const RuleSet& rules, const InitPattern& init,
                                                         GridShape shape, const TrajectoryStats& free_run,
                                                         std::uint64_t seed, int seeds = 10,
                                                         const CellFilter& filter = {},
                                                         const ClassifierConfig& cfg = {});

// Full report.

struct EvalOptions {
  GridShape shape;
  std::uint64_t seed = 0;
  bool generalization = false;
  int generalization_seeds = 10;
  ClassifierConfig classifier;
  ObstacleTestConfig obstacles;
};

struct EvalReport {
  int id = 0;
  bool prefilter = false;
  std::string prefilter_reason;
  bool agent = false;
  std::string agent_reason;
  bool moving = false;
  std::optional<double> speed;
  std::optional<double> speed_obstacles;
  std::optional<double> robustness;
  std::vector<GeneralizationResult> generalization;
};

/// Prefilter, then the obstacle-free test rollout; obstacle and generalization tests only
/// for moving agents.
EvalReport evaluate(const RuleSet& rules, const InitPattern& init, int id, const EvalOptions& options);

// Attractor rules.

struct AttractorSearchConfig {
  int steps = 200;
  double disk_radius = 10.0;
  double disk_speed = 1.0;     ///< cells per step along +x, starting at the init center
  double overlap_threshold = 0.1;
};

struct AttractorSearch {
  std::vector<Rule> candidates;  ///< attractor -> learnable rules passing the overlap prefilter
  int tried = 0;
  int failed = 0;
};

/// Random attractor -> learnable rules appended to the agent's rules; a candidate is kept when
/// at the last step some cell has both the learnable and the attractor channel above the threshold.
AttractorSearch search_attractor_rules(const RuleSet& agent, const InitPattern& init, GridShape shape, int budget,
                                       Rng& rng, const AttractorSearchConfig& cfg = {},
                                       const ParamRanges& ranges = {});

/// True when both channels exceed `threshold` in at least one common cell.
bool overlaps(const GridD& learnable, const GridD& attractor, double threshold);

}  // namespace lenia
