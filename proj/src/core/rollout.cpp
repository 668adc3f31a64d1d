#include "lenia/rollout.hpp"

#include "lenia/error.hpp"

#include <cmath>

namespace lenia {

InitPattern apply_init_noise(const InitPattern& init, const PerturbationSpec& p, Rng& rng) {
  InitPattern placed = init;
  if (p.perturbs_init()) {
    for (Eigen::Index i = 0; i < placed.values.size(); ++i) {
      const bool hit = p.init_noise_rate >= 1.0 || bernoulli(rng, p.init_noise_rate);
      if (hit) {
        placed.values.data()[i] += p.init_noise_std * standard_normal(rng);
      }
    }
  }
  return placed;
}

template <typename Scalar>
GridState<Scalar> initial_state(const InitPattern& init, const ObstacleConfig& obstacles, GridShape shape,
                                const RolloutSpec& spec, int n_channels, Rng& rng) {
  GridState<Scalar> state(std::max(n_channels, 2), shape);
  stamp(state.learnable(), apply_init_noise(init, spec.perturb, rng));
  if (!obstacles.disks.empty()) {
    state.channels[kObstacleChannel] = rasterize_disks(obstacles.disks, shape).template cast<Scalar>();
    if (spec.clear_obstacles) {
      clear_around(state.channels[kObstacleChannel], init, spec.clear_radius);
    }
  }
  if (state.n_channels() > kAttractorChannel && !spec.attractor.empty()) {
    state.channels[kAttractorChannel] = rasterize_disks(spec.attractor, shape).template cast<Scalar>();
  }
  return state;
}

template <typename Scalar>
void record_summary(Trajectory<Scalar>& traj, const GridState<Scalar>& state, GridShape shape) {
  const auto& a = state.learnable();
  traj.mass.push_back(static_cast<double>(a.template cast<double>().sum()));
  const std::optional<Position> c = torus_center_of_mass(a);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (!c) {
    traj.track.push_back({nan, nan});
    return;
  }
  // Continue the path through the last non-empty point by the minimal torus displacement.
  for (auto it = traj.track.rbegin(); it != traj.track.rend(); ++it) {
    if (!std::isnan(it->x())) {
      traj.track.push_back(*it + torus_delta(*it, *c, shape));
      return;
    }
  }
  traj.track.push_back(*c);
}

template <typename Scalar>
Trajectory<Scalar> rollout(const InitPattern& init_in, const RuleSet& rules_in, const ObstacleConfig& obstacles,
                           GridShape shape, const RolloutSpec& spec, Rng& rng, SimOptions options) {
  if (spec.steps < 1) {
    throw Error(ErrorCode::InvalidArgument, "rollout needs steps >= 1");
  }
  if (spec.counter) {
    ++*spec.counter;
  }
  const auto [rules, init] = rescale(rules_in, init_in, spec.perturb.scale);
  options.obstacle_speed = obstacles.speed;
  Simulator<Scalar> sim(rules, shape, options);
  GridState<Scalar> state = initial_state<Scalar>(init, obstacles, shape, spec, sim.n_channels(), rng);

  Trajectory<Scalar> traj;
  traj.steps = spec.steps;
  const bool summary = spec.record != RecordPolicy::FinalOnly;
  const bool full = spec.record == RecordPolicy::Full;
  if (summary) {
    traj.mass.reserve(spec.steps + 1);
    traj.track.reserve(spec.steps + 1);
    record_summary(traj, state, shape);
  }
  if (full) {
    traj.states.push_back(state);
  }
  const bool can_freeze =
      spec.detect_fixed_point && !spec.perturb.perturbs_update() && obstacles.speed.is_static();
  for (int t = 0; t < spec.steps; ++t) {
    Grid<Scalar> before;
    if (can_freeze) {
      before = state.learnable();
    }
    sim.step(state, spec.perturb, rng);
    if (summary) {
      record_summary(traj, state, shape);
    }
    if (full) {
      traj.states.push_back(state);
    }
    if (can_freeze && (before == state.learnable()).all()) {
      const std::int64_t remaining = spec.steps - 1 - t;
      for (std::int64_t k = 0; k < remaining; ++k) {
        ++state.step;
        if (summary) {
          traj.mass.push_back(traj.mass.back());
          traj.track.push_back(traj.track.back());
        }
        if (full) {
          traj.states.push_back(state);
        }
      }
      break;
    }
  }
  traj.final_state = std::move(state);
  return traj;
}

template GridState<float> initial_state<float>(const InitPattern&, const ObstacleConfig&, GridShape,
                                               const RolloutSpec&, int, Rng&);
template GridState<double> initial_state<double>(const InitPattern&, const ObstacleConfig&, GridShape,
                                                 const RolloutSpec&, int, Rng&);
template void record_summary<float>(Trajectory<float>&, const GridState<float>&, GridShape);
template void record_summary<double>(Trajectory<double>&, const GridState<double>&, GridShape);
template Trajectory<float> rollout<float>(const InitPattern&, const RuleSet&, const ObstacleConfig&, GridShape,
                                          const RolloutSpec&, Rng&, SimOptions);
template Trajectory<double> rollout<double>(const InitPattern&, const RuleSet&, const ObstacleConfig&, GridShape,
                                            const RolloutSpec&, Rng&, SimOptions);

}  // namespace lenia
