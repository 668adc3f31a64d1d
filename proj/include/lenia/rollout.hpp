#pragma once

#include "lenia/geometry.hpp"
#include "lenia/simulator.hpp"

#include <atomic>
#include <cstdint>
#include <limits>

namespace lenia {

enum class RecordPolicy {
  FinalOnly,  ///< final state only
  Summary,    ///< per-step mass and tracked center of mass, plus the final state
  Full,       ///< every state
};

/// Counts Lenia rollouts (forward simulations of any length), including differentiated ones.
using RolloutCounter = std::atomic<std::int64_t>;

struct RolloutSpec {
  int steps = 50;
  PerturbationSpec perturb;
  RecordPolicy record = RecordPolicy::Summary;
  /// Remove obstacle cells inside the init square and within `clear_radius` of it.
  bool clear_obstacles = true;
  double clear_radius = 10.0;
  /// Disks of attractor mass stamped into channel 2 (only when the rules use it).
  std::vector<Disk> attractor;
  /// Stop stepping once the state is bit-identical to its predecessor (exact for
  /// unperturbed, static environments); remaining records repeat the fixed point.
  bool detect_fixed_point = true;
  RolloutCounter* counter = nullptr;
};

template <typename Scalar>
struct Trajectory {
  std::vector<GridState<Scalar>> states;  ///< Full: states 0..steps
  std::vector<double> mass;               ///< learnable-channel mass of states 0..steps
  /// Torus-aware center of mass of states 0..steps, unwrapped into a continuous path.
  /// NaN where the channel is empty.
  std::vector<Position> track;
  GridState<Scalar> final_state;
  int steps = 0;
};

/// Init pattern after the init-noise perturbation (unclipped; stamping clips).
InitPattern apply_init_noise(const InitPattern& init, const PerturbationSpec& perturb, Rng& rng);

/// Builds the state a rollout starts from: init pattern (after init noise), rasterized
/// obstacles (cleared around the init square when requested), attractor disks.
template <typename Scalar>
GridState<Scalar> initial_state(const InitPattern& init, const ObstacleConfig& obstacles, GridShape shape,
                                const RolloutSpec& spec, int n_channels, Rng& rng);

/// Places `init`, rasterizes the environment and iterates `step`.
/// Rescaling (spec.perturb.scale != 1) is applied to the rules and init pattern first.
template <typename Scalar>
Trajectory<Scalar> rollout(const InitPattern& init, const RuleSet& rules, const ObstacleConfig& obstacles,
                           GridShape shape, const RolloutSpec& spec, Rng& rng, SimOptions options = {});

/// Appends mass and tracked position of `state` to `traj`.
template <typename Scalar>
void record_summary(Trajectory<Scalar>& traj, const GridState<Scalar>& state, GridShape shape);

extern template Trajectory<float> rollout<float>(const InitPattern&, const RuleSet&, const ObstacleConfig&, GridShape,
                                                 const RolloutSpec&, Rng&, SimOptions);
extern template Trajectory<double> rollout<double>(const InitPattern&, const RuleSet&, const ObstacleConfig&,
                                                   GridShape, const RolloutSpec&, Rng&, SimOptions);

}  // namespace lenia
