#pragma once

#include "lenia/autodiff.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace lenia {

/// Standard deviations and Bernoulli gates of the additive Gaussian mutation.
struct MutationScales {
  double T_std = 0.1, T_gate = 0.01;
  double R_std = 0.1, R_gate = 0.01;
  double r_std = 0.2;
  double b_std = 0.2;
  double w_std = 0.2;
  double a_std = 0.2;
  double mu_std = 0.2, mu_gate = 0.1;
  double sigma_std = 0.01, sigma_gate = 0.1;
  double h_std = 0.2, h_gate = 0.1;
};

struct SearchConfig {
  int n_outer = 120;
  int history_size = 40;
  GridShape shape{256, 256};
  int rollout_steps = 50;
  int n_rules = 10;
  ParamRanges ranges;
  /// h is sampled in [h_min, h_max / init_h_divisor] for the initial history.
  double init_h_divisor = 3.0;
  int init_size = 40;
  int init_row = 36;
  int init_col = 105;

  // Curriculum goals.
  int warmup_steps = 8;
  Goal warmup_start{-0.19, 0.0};
  double warmup_increment = 0.06;
  double close_radius = 0.1;
  double very_close_radius = 0.05;
  int max_very_close = 2;
  int goal_draw_cap = 1000;

  // Candidate selection.
  double c_filter = 0.11;
  double c_goal = 0.065;

  // Optimization schedule: 1-based outer step i skips mutation iff i % mutation_period == 0.
  int mutation_period = 5;
  int gradient_steps_plain = 125;
  int gradient_steps_mutated = 15;
  AdamConfig adam;
  int checkpoint_every = 1;

  // Mutation.
  MutationScales mutation;
  int mutation_retry_cap = 50;
  double soft_min_mass = 10.0;
  double soft_max_mse = 25.0;

  // Training environment: n disks of this radius in rows [x_lo, x_hi) of the grid.
  int n_obstacles = 8;
  double obstacle_radius = 10.0;
  double obstacle_x_lo = 0.5;
  double obstacle_x_hi = 1.0;
  double clear_radius = 10.0;
  int eval_rollouts = 20;

  // Initialization selection.
  int selection_steps = 3;
  double selection_loss_threshold = 0.08;
  int max_restarts = 20;

  // Ablations.
  bool no_obstacles = false;
  bool no_gradient = false;
  bool uniform_goals = false;

  /// 128x128 grid, R in [8, 20], 20x20 init, 4 radius-6 obstacles, 30 outer steps.
  static SearchConfig desk_scale();

  InitPattern placement(GridD values) const { return {std::move(values), init_row, init_col}; }
  Position init_center() const;
  ObstacleConfig draw_obstacles(Rng& rng) const;
};

struct HistoryEntry {
  int id = 0;
  int parent = -1;      ///< entry the optimization started from; -1 for random samples
  int outer_step = 0;   ///< 1-based outer step; 0 for the initial history
  std::string kind;     ///< "random", "gradient", "mutation+gradient", "mutation+trials", "trials", "skipped"
  std::optional<Goal> goal;
  double loss = 0.0;    ///< last optimization loss; 0 when not optimized
  RuleSet rules;
  InitPattern init;
  Goal reached;
  double c = 0.0;
};

using History = std::vector<HistoryEntry>;

/// Rollouts spent per purpose. `total` is read from an independent counter.
struct RolloutLedger {
  std::int64_t init_history = 0;
  std::int64_t mutation = 0;
  std::int64_t optimization = 0;
  std::int64_t evaluation = 0;
  std::int64_t restart_discarded = 0;
  std::int64_t random_search = 0;
  std::int64_t total = 0;

  std::int64_t component_sum() const {
    return init_history + mutation + optimization + evaluation + restart_discarded + random_search;
  }
};

struct StepFailure {
  int outer_step = 0;
  std::string code;
  std::string message;
};

struct DiscoveryRun {
  SearchConfig config;
  std::uint64_t seed = 0;
  std::string mode;  ///< "imgep", "no-obstacles", "no-gradient", "uniform-goals", "random-search"
  History history;
  RolloutLedger ledger;
  int restarts = 0;
  bool selection_accepted = true;
  std::vector<StepFailure> failures;
  bool stopped_early = false;  ///< the observer ended the run before n_outer steps
};

// Goals.

enum class GoalBranch { Warmup, Uniform, Further, Far, Wide };
const char* to_string(GoalBranch branch);

struct GoalDraw {
  Goal goal;
  GoalBranch branch;
};

struct GoalSample {
  Goal goal;
  GoalBranch branch = GoalBranch::Warmup;
  int draws = 0;
  bool stalled = false;  ///< draw cap hit; `goal` is the last (unaccepted) draw
};

/// The `step`-th deterministic warm-up goal, 1-based.
Goal warmup_goal(const SearchConfig& config, int step);

/// Reached position with maximal x among entries with c <= c_filter (all entries if none).
Goal best_goal(const History& history, double c_filter);

/// One proposal of the stochastic sampler (no acceptance test).
GoalDraw draw_goal(const Goal& best, Rng& rng);

struct Closeness {
  int close = 0;
  int very_close = 0;
};
Closeness calc_distances(const Goal& goal, const History& history, const SearchConfig& config);
bool goal_acceptable(const Closeness& closeness, const SearchConfig& config);

/// Warm-up goal for 1-based steps up to `warmup_steps`, then the rejection sampler.
/// With `uniform_goals`, every step draws uniformly in [-0.5, 0.5]^2.
GoalSample sample_goal(const History& history, int step, const SearchConfig& config, Rng& rng);

/// Admissible entry (c <= c_filter) minimizing the distance of (c, reached) to (c_goal, goal).
/// Throws HistoryExhausted when no entry is admissible.
const HistoryEntry& select_candidate(const History& history, const Goal& goal, const SearchConfig& config);

// Parameters.

/// Uniform sample in `ranges` (R, T integers); h is drawn in [h_min, h_max / h_divisor].
RuleSet sample_rules(Rng& rng, int n_rules, const ParamRanges& ranges, double h_divisor = 1.0);
GridD sample_init_values(Rng& rng, int size);

/// Source of mutation randomness; a deterministic override makes the zero-noise case testable.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual bool gate(double p) = 0;
  virtual double normal(double stddev) = 0;
};

class RngNoise : public NoiseSource {
 public:
  explicit RngNoise(Rng& rng) : rng_(rng) {}
  bool gate(double p) override { return bernoulli(rng_, p); }
  double normal(double stddev) override { return stddev * standard_normal(rng_); }

 private:
  Rng& rng_;
};

/// Additive Gaussian mutation of every rule field, clamped to `ranges`. The init pattern is kept.
RuleSet mutate_rules(const RuleSet& rules, const MutationScales& scales, const ParamRanges& ranges, NoiseSource& noise);

struct SoftCheck {
  bool pass = false;
  double mass = 0.0;
  double mse = 0.0;
};

/// Final mass > soft_min_mass and MSE to a target disk at its own center of mass < soft_max_mse
/// after one training-environment rollout.
SoftCheck soft_check(const RuleSet& rules, const InitPattern& init, const SearchConfig& config, Rng& rng,
                     RolloutCounter* counter);

struct Mutation {
  RuleSet rules;
  int attempts = 0;
};

/// Mutates until the soft check passes; throws MutationStuck after `mutation_retry_cap` attempts.
Mutation mutate(const HistoryEntry& entry, const SearchConfig& config, Rng& rng, RolloutCounter* counter);

struct Evaluation {
  Goal reached;
  double c = 0.0;
  int rollouts = 0;
  int dead = 0;  ///< rollouts that ended empty or failed
};

/// `eval_rollouts` training-environment rollouts. Reached = mean normalized final center of
/// mass; c = mean MSE between the final state and the target disk at its own center of mass.
/// Empty or failed rollouts count as reached = init center, c = 1.
Evaluation evaluate_params(const RuleSet& rules, const InitPattern& init, const SearchConfig& config, Rng& rng,
                           RolloutCounter* counter);

/// Random parameters for the initial history, each evaluated.
History init_history(const SearchConfig& config, Rng& rng, RolloutCounter* counter);

/// Called with every outer-step entry as it joins the history; returning false ends the run early.
using StepObserver = std::function<bool(const HistoryEntry&)>;

DiscoveryRun run_imgep(const SearchConfig& config, std::uint64_t seed, const StepObserver& observer = {});

/// `budget` uniform samples over the full ranges, one obstacle-free summary rollout each.
DiscoveryRun run_random_search(const SearchConfig& config, int budget, std::uint64_t seed);

}  // namespace lenia
