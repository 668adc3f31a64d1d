#include "lenia/error.hpp"
#include "lenia/imgep.hpp"

#include <cmath>
#include <limits>

namespace lenia {

const char* to_string(GoalBranch branch) {
  switch (branch) {
    case GoalBranch::Warmup: return "warmup";
    case GoalBranch::Uniform: return "uniform";
    case GoalBranch::Further: return "further";
    case GoalBranch::Far: return "far";
    case GoalBranch::Wide: return "wide";
  }
  return "?";
}

Goal warmup_goal(const SearchConfig& config, int step) {
  return {config.warmup_start.x + config.warmup_increment * (step - 1), config.warmup_start.y};
}

Goal best_goal(const History& history, double c_filter) {
  if (history.empty()) {
    throw Error(ErrorCode::HistoryExhausted, "history exhausted: no entries");
  }
  const HistoryEntry* best = nullptr;
  for (const HistoryEntry& e : history) {
    if (e.c <= c_filter && (!best || e.reached.x > best->reached.x)) {
      best = &e;
    }
  }
  if (!best) {
    for (const HistoryEntry& e : history) {
      if (!best || e.reached.x > best->reached.x) {
        best = &e;
      }
    }
  }
  return best->reached;
}

GoalDraw draw_goal(const Goal& best, Rng& rng) {
  if (uniform01(rng) < 0.2) {
    const double dx = uniform01(rng) * 0.04 + 0.02;
    const double dy = (uniform01(rng) * 0.45 - 0.22) / 4.0;
    return {{best.x + dx, best.y + dy}, GoalBranch::Further};
  }
  if (uniform01(rng) < 0.7) {
    const double x = -uniform01(rng) * 0.2 + 0.35;
    const double y = 0.22 - uniform01(rng) * 0.45;
    return {{x, y}, GoalBranch::Far};
  }
  const double x = -uniform01(rng) * 0.35 + 0.35;
  const double y = 0.22 - uniform01(rng) * 0.45;
  return {{x, y}, GoalBranch::Wide};
}

Closeness calc_distances(const Goal& goal, const History& history, const SearchConfig& config) {
  Closeness out;
  for (const HistoryEntry& e : history) {
    const double d = std::hypot(e.reached.x - goal.x, e.reached.y - goal.y);
    out.close += d < config.close_radius;
    out.very_close += d < config.very_close_radius;
  }
  return out;
}

bool goal_acceptable(const Closeness& c, const SearchConfig& config) {
  return c.close >= 1 && c.very_close <= config.max_very_close;
}

GoalSample sample_goal(const History& history, int step, const SearchConfig& config, Rng& rng) {
  if (config.uniform_goals) {
    return {{uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5)}, GoalBranch::Uniform, 1, false};
  }
  if (step <= config.warmup_steps) {
    return {warmup_goal(config, step), GoalBranch::Warmup, 0, false};
  }
  const Goal best = best_goal(history, config.c_filter);
  GoalSample sample;
  for (sample.draws = 1; sample.draws <= config.goal_draw_cap; ++sample.draws) {
    const GoalDraw d = draw_goal(best, rng);
    sample.goal = d.goal;
    sample.branch = d.branch;
    if (goal_acceptable(calc_distances(d.goal, history, config), config)) {
      return sample;
    }
  }
  sample.draws = config.goal_draw_cap;
  sample.stalled = true;
  return sample;
}

const HistoryEntry& select_candidate(const History& history, const Goal& goal, const SearchConfig& config) {
  const HistoryEntry* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (const HistoryEntry& e : history) {
    if (!(e.c <= config.c_filter)) {
      continue;
    }
    const double dc = e.c - config.c_goal;
    const double dx = e.reached.x - goal.x;
    const double dy = e.reached.y - goal.y;
    const double d = std::sqrt(dc * dc + dx * dx + dy * dy);
    if (d < best_d) {  // strict: ties keep the lowest id
      best_d = d;
      best = &e;
    }
  }
  if (!best) {
    throw Error(ErrorCode::HistoryExhausted, "history exhausted: no entry with c <= " + std::to_string(config.c_filter));
  }
  return *best;
}

}  // namespace lenia
