#include "lenia/error.hpp"
#include "lenia/imgep.hpp"
#include "lenia/parallel.hpp"

#include <cmath>

namespace lenia {

SearchConfig SearchConfig::desk_scale() {
  SearchConfig c;
  c.shape = {128, 128};
  c.ranges.R_min = 8;
  c.ranges.R_max = 20;
  c.init_size = 20;
  const InitPattern scaled = scaled_placement(InitPattern{GridD(), 36, 105}, {256, 256}, c.shape);
  c.init_row = scaled.row;
  c.init_col = scaled.col;
  c.n_outer = 30;
  c.n_obstacles = 4;
  c.obstacle_radius = 6.0;
  c.clear_radius = 5.0;
  return c;
}

Position SearchConfig::init_center() const {
  return {init_row + 0.5 * (init_size - 1), init_col + 0.5 * (init_size - 1)};
}

ObstacleConfig SearchConfig::draw_obstacles(Rng& rng) const {
  if (no_obstacles || n_obstacles == 0) {
    return {};
  }
  return {sample_disks(rng, shape, n_obstacles, obstacle_radius, obstacle_x_lo, obstacle_x_hi), {}};
}

RuleSet sample_rules(Rng& rng, int n_rules, const ParamRanges& q, double h_divisor) {
  RuleSet rules;
  rules.R = uniform_int(rng, q.R_min, q.R_max);
  rules.T = uniform_int(rng, q.T_min, q.T_max);
  for (int k = 0; k < n_rules; ++k) {
    Rule r;
    r.r = uniform(rng, q.r_min, q.r_max);
    for (int i = 0; i < kBumps; ++i) {
      r.b[i] = uniform(rng, q.b_min, q.b_max);
    }
    for (int i = 0; i < kBumps; ++i) {
      r.w[i] = uniform(rng, q.w_min, q.w_max);
    }
    for (int i = 0; i < kBumps; ++i) {
      r.a[i] = uniform(rng, q.a_min, q.a_max);
    }
    r.mu = uniform(rng, q.mu_min, q.mu_max);
    r.sigma = uniform(rng, q.sigma_min, q.sigma_max);
    r.h = uniform(rng, q.h_min, q.h_max / h_divisor);
    rules.rules.push_back(r);
  }
  return rules;
}

GridD sample_init_values(Rng& rng, int size) {
  GridD g(size, size);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    g.data()[i] = uniform01(rng);
  }
  return g;
}

RuleSet mutate_rules(const RuleSet& rules, const MutationScales& s, const ParamRanges& q, NoiseSource& noise) {
  RuleSet out = rules;
  auto gated = [&](double gate, double stddev) { return noise.gate(gate) ? noise.normal(stddev) : 0.0; };
  out.T = std::clamp(static_cast<int>(std::lround(out.T + gated(s.T_gate, s.T_std))), q.T_min, q.T_max);
  out.R = std::clamp(static_cast<int>(std::lround(out.R + gated(s.R_gate, s.R_std))), q.R_min, q.R_max);
  for (Rule& r : out.rules) {
    r.r = std::clamp(r.r + noise.normal(s.r_std), q.r_min, q.r_max);
    for (double& x : r.b) x = std::clamp(x + noise.normal(s.b_std), q.b_min, q.b_max);
    for (double& x : r.w) x = std::clamp(x + noise.normal(s.w_std), q.w_min, q.w_max);
    for (double& x : r.a) x = std::clamp(x + noise.normal(s.a_std), q.a_min, q.a_max);
    r.mu = std::clamp(r.mu + gated(s.mu_gate, s.mu_std), q.mu_min, q.mu_max);
    r.sigma = std::clamp(r.sigma + gated(s.sigma_gate, s.sigma_std), q.sigma_min, q.sigma_max);
    r.h = std::clamp(r.h + gated(s.h_gate, s.h_std), q.h_min, q.h_max);
  }
  return out;
}

namespace {

RolloutSpec training_spec(const SearchConfig& config, RolloutCounter* counter) {
  RolloutSpec spec;
  spec.steps = config.rollout_steps;
  spec.record = RecordPolicy::FinalOnly;
  spec.clear_radius = config.clear_radius;
  spec.counter = counter;
  return spec;
}

struct FinalMeasure {
  bool alive = false;
  double mass = 0.0;
  Position center;
  double mse = 1.0;
};

FinalMeasure measure_final(const GridF& a, GridShape shape) {
  FinalMeasure m;
  m.mass = a.cast<double>().sum();
  if (!(m.mass > 0.0)) {
    return m;
  }
  m.alive = true;
  m.center = center_of_mass(a.cast<double>());
  m.mse = mse(a, make_target_at(m.center, shape));
  return m;
}

}  // namespace

SoftCheck soft_check(const RuleSet& rules, const InitPattern& init, const SearchConfig& config, Rng& rng,
                     RolloutCounter* counter) {
  SoftCheck out;
  const ObstacleConfig obstacles = config.draw_obstacles(rng);
  try {
    const auto traj = rollout<float>(init, rules, obstacles, config.shape, training_spec(config, counter), rng);
    const FinalMeasure m = measure_final(traj.final_state.learnable(), config.shape);
    out.mass = m.mass;
    out.mse = m.mse;
    out.pass = m.alive && m.mass > config.soft_min_mass && m.mse < config.soft_max_mse;
  } catch (const Error&) {
    out.pass = false;
  }
  return out;
}

Mutation mutate(const HistoryEntry& entry, const SearchConfig& config, Rng& rng, RolloutCounter* counter) {
  RngNoise noise(rng);
  Mutation m;
  while (m.attempts < config.mutation_retry_cap) {
    ++m.attempts;
    m.rules = mutate_rules(entry.rules, config.mutation, config.ranges, noise);
    if (soft_check(m.rules, entry.init, config, rng, counter).pass) {
      return m;
    }
  }
  throw Error(ErrorCode::MutationStuck,
              "mutation stuck: no mutant passed the soft check in " + std::to_string(config.mutation_retry_cap) + " attempts");
}

Evaluation evaluate_params(const RuleSet& rules, const InitPattern& init, const SearchConfig& config, Rng& rng,
                           RolloutCounter* counter) {
  const int n = config.eval_rollouts;
  std::vector<std::uint64_t> seeds(n);
  for (auto& s : seeds) {
    s = rng();
  }
  std::vector<FinalMeasure> results(n);
  parallel_for(n, [&](int k) {
    Rng r(seeds[k]);
    const ObstacleConfig obstacles = config.draw_obstacles(r);
    try {
      const auto traj = rollout<float>(init, rules, obstacles, config.shape, training_spec(config, counter), r);
      results[k] = measure_final(traj.final_state.learnable(), config.shape);
    } catch (const Error&) {
      results[k] = FinalMeasure{};
    }
  });
  Evaluation ev;
  ev.rollouts = n;
  Position sum = Position::Zero();
  double c = 0.0;
  for (const FinalMeasure& m : results) {
    if (m.alive) {
      sum += m.center;
      c += m.mse;
    } else {
      ++ev.dead;
      sum += init.center();
      c += 1.0;
    }
  }
  ev.reached = normalize(sum / n, config.shape);
  ev.c = c / n;
  return ev;
}

History init_history(const SearchConfig& config, Rng& rng, RolloutCounter* counter) {
  History history;
  for (int k = 0; k < config.history_size; ++k) {
    HistoryEntry e;
    e.id = k;
    e.kind = "random";
    e.rules = sample_rules(rng, config.n_rules, config.ranges, config.init_h_divisor);
    e.init = config.placement(sample_init_values(rng, config.init_size));
    const Evaluation ev = evaluate_params(e.rules, e.init, config, rng, counter);
    e.reached = ev.reached;
    e.c = ev.c;
    history.push_back(std::move(e));
  }
  return history;
}

}  // namespace lenia
