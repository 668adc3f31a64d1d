#include "lenia/error.hpp"
#include "lenia/imgep.hpp"
#include "lenia/parallel.hpp"

#include <cmath>
#include <limits>

namespace lenia {
namespace {

class Search {
 public:
  Search(const SearchConfig& config, std::uint64_t seed, StepObserver observer = {})
      : config_(config), seed_(seed), observer_(std::move(observer)) {}

  /// Attributes every rollout consumed by `fn` to `component`, also on exceptions.
  template <typename Fn>
  auto charge(std::int64_t& component, Fn&& fn) {
    const std::int64_t before = counter_.load();
    struct Settle {
      std::int64_t& component;
      const RolloutCounter& counter;
      std::int64_t before;
      ~Settle() { component += counter.load() - before; }
    } settle{component, counter_, before};
    return fn();
  }

  struct Attempt {
    History history;
    RolloutLedger ledger;
    std::vector<StepFailure> failures;
    bool accepted = false;
    int index = 0;
  };

  /// Random history plus the probe steps on the first warm-up goals.
  Attempt select_initialization(const SearchConfig& config, DiscoveryRun& run) {
    Attempt attempt;
    for (int a = 0; a <= config.max_restarts; ++a) {
      attempt = Attempt{};
      attempt.index = a;
      Rng rng = derive_rng(seed_, "history", a);
      attempt.history = charge(attempt.ledger.init_history, [&] { return init_history(config, rng, &counter_); });
      attempt.accepted = true;
      const int probes = std::min(config.selection_steps, config.n_outer);
      for (int i = 1; i <= probes; ++i) {
        try {
          HistoryEntry e = outer_step(config, attempt.history, i, a, attempt.ledger, attempt.failures);
          const bool good = e.kind != "skipped" && e.loss <= config.selection_loss_threshold;
          attempt.history.push_back(std::move(e));
          if (!good) {
            attempt.accepted = false;
            break;
          }
        } catch (const Error& e) {
          if (e.code() != ErrorCode::HistoryExhausted) {
            throw;
          }
          attempt.accepted = false;
          break;
        }
      }
      if (attempt.accepted || a == config.max_restarts) {
        break;
      }
      run.ledger.restart_discarded += attempt.ledger.component_sum();
      ++run.restarts;
    }
    return attempt;
  }

  DiscoveryRun run(const std::string& mode) {
    DiscoveryRun run;
    run.config = config_;
    run.seed = seed_;
    run.mode = mode;
    const bool reuse_baseline = config_.no_gradient || config_.uniform_goals;
    SearchConfig selection_config = config_;
    if (reuse_baseline) {
      selection_config.no_gradient = false;
      selection_config.uniform_goals = false;
    }
    Attempt attempt = select_initialization(selection_config, run);
    run.selection_accepted = attempt.accepted;
    History& history = attempt.history;
    int first_step = static_cast<int>(history.size()) - config_.history_size + 1;
    if (reuse_baseline) {
      // Keep only the selected random history; the probe steps are discarded.
      history.resize(config_.history_size);
      run.ledger.init_history = attempt.ledger.init_history;
      run.ledger.restart_discarded += attempt.ledger.component_sum() - attempt.ledger.init_history;
      attempt.ledger = RolloutLedger{};
      attempt.ledger.init_history = run.ledger.init_history;
      attempt.failures.clear();
      first_step = 1;
    }
    RolloutLedger& ledger = attempt.ledger;
    std::vector<StepFailure>& failures = attempt.failures;
    auto keep_going = [&](const HistoryEntry& e) {
      if (observer_ && !observer_(e)) {
        run.stopped_early = true;
      }
      return !run.stopped_early;
    };
    for (std::size_t k = config_.history_size; k < history.size() && !run.stopped_early; ++k) {
      keep_going(history[k]);
    }
    // A probe step can end the attempt while its successors have not run yet.
    for (int i = first_step; i <= config_.n_outer && !run.stopped_early; ++i) {
      try {
        history.push_back(outer_step(config_, history, i, attempt.index, ledger, failures));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::HistoryExhausted) {
          throw;
        }
        failures.push_back({i, to_string(e.code()), e.what()});
        history.push_back(restore(history, lowest_c(history), i, nullptr));
      }
      keep_going(history.back());
    }
    run.history = std::move(history);
    run.ledger.init_history = ledger.init_history;
    run.ledger.mutation = ledger.mutation;
    run.ledger.optimization = ledger.optimization;
    run.ledger.evaluation = ledger.evaluation;
    run.ledger.total = counter_.load();
    run.failures = std::move(failures);
    return run;
  }

  DiscoveryRun random_search(int budget) {
    DiscoveryRun run;
    run.config = config_;
    run.seed = seed_;
    run.mode = "random-search";
    std::vector<HistoryEntry> entries(budget);
    charge(run.ledger.random_search, [&] {
      parallel_for(budget, [&](int k) {
        Rng rng = derive_rng(seed_, "random-search", k);
        HistoryEntry& e = entries[k];
        e.id = k;
        e.kind = "random";
        e.rules = sample_rules(rng, config_.n_rules, config_.ranges, 1.0);
        e.init = config_.placement(sample_init_values(rng, config_.init_size));
        RolloutSpec spec;
        spec.steps = config_.rollout_steps;
        spec.record = RecordPolicy::FinalOnly;
        spec.counter = &counter_;
        e.reached = normalize(e.init.center(), config_.shape);
        e.c = 1.0;
        try {
          const auto traj = rollout<float>(e.init, e.rules, {}, config_.shape, spec, rng);
          const GridD a = traj.final_state.learnable().cast<double>();
          if (a.sum() > 0.0) {
            const Position com = center_of_mass(a);
            e.reached = normalize(com, config_.shape);
            e.c = mse(a, make_target_at(com, config_.shape));
          }
        } catch (const Error&) {
        }
      });
      return 0;
    });
    run.history = std::move(entries);
    run.ledger.total = counter_.load();
    return run;
  }

 private:
  static int lowest_c(const History& history) {
    int best = 0;
    for (const HistoryEntry& e : history) {
      if (e.c < history[best].c) {
        best = e.id;
      }
    }
    return best;
  }

  HistoryEntry restore(const History& history, int source, int step, const Goal* goal) const {
    HistoryEntry e = history[source];
    e.id = static_cast<int>(history.size());
    e.parent = source;
    e.outer_step = step;
    e.kind = "skipped";
    e.goal = goal ? std::optional<Goal>(*goal) : std::nullopt;
    e.loss = std::numeric_limits<double>::infinity();
    return e;
  }

  DiffOptions diff_options(const SearchConfig& config) {
    DiffOptions o;
    o.shape = config.shape;
    o.clear_radius = config.clear_radius;
    o.checkpoint_every = config.checkpoint_every;
    o.counter = &counter_;
    return o;
  }

  /// Lowest-loss mutant among `n` plain mutations, each scored by one loss rollout.
  std::pair<RuleSet, double> mutation_trials(const SearchConfig& config, const RuleSet& rules, const InitPattern& init,
                                             const LossSpec& loss, int n, Rng& rng) {
    std::vector<RuleSet> mutants;
    std::vector<std::uint64_t> seeds;
    RngNoise noise(rng);
    for (int k = 0; k < n; ++k) {
      mutants.push_back(mutate_rules(rules, config.mutation, config.ranges, noise));
      seeds.push_back(rng());
    }
    std::vector<double> losses(n, std::numeric_limits<double>::infinity());
    const DiffOptions options = diff_options(config);
    parallel_for(n, [&](int k) {
      Rng r(seeds[k]);
      const ObstacleConfig obstacles = config.draw_obstacles(r);
      try {
        losses[k] = forward_loss<float>(mutants[k], init, obstacles, loss, r, options);
      } catch (const Error&) {
      }
    });
    int best = -1;
    for (int k = 0; k < n; ++k) {
      if (std::isfinite(losses[k]) && (best < 0 || losses[k] < losses[best])) {
        best = k;
      }
    }
    if (best < 0) {
      return {rules, std::numeric_limits<double>::infinity()};
    }
    return {mutants[best], losses[best]};
  }

  HistoryEntry outer_step(const SearchConfig& config, const History& history, int step, int attempt,
                          RolloutLedger& ledger, std::vector<StepFailure>& failures) {
    const std::uint64_t stream = (static_cast<std::uint64_t>(attempt) << 32) | static_cast<std::uint32_t>(step);
    Rng goal_rng = derive_rng(seed_, "goal", stream);
    const GoalSample goal = sample_goal(history, step, config, goal_rng);
    if (goal.stalled) {
      failures.push_back({step, to_string(ErrorCode::GoalSamplingStalled),
                          "goal sampling stalled after " + std::to_string(goal.draws) + " draws"});
    }
    const HistoryEntry& candidate = select_candidate(history, goal.goal, config);

    HistoryEntry e;
    e.id = static_cast<int>(history.size());
    e.parent = candidate.id;
    e.outer_step = step;
    e.goal = goal.goal;
    e.rules = candidate.rules;
    e.init = candidate.init;

    const bool mutation_step = step % config.mutation_period != 0;
    const int n_opt = mutation_step ? config.gradient_steps_mutated : config.gradient_steps_plain;
    std::string kind;
    try {
      if (mutation_step) {
        Rng rng = derive_rng(seed_, "mutate", stream);
        try {
          e.rules = charge(ledger.mutation, [&] { return mutate(candidate, config, rng, &counter_); }).rules;
          kind = "mutation+";
        } catch (const Error& err) {
          if (err.code() != ErrorCode::MutationStuck) {
            throw;
          }
          failures.push_back({step, to_string(err.code()), err.what()});
        }
      }
      const LossSpec loss = make_loss_spec(goal.goal, config.shape, config.rollout_steps);
      Rng opt_rng = derive_rng(seed_, "optimize", stream);
      if (config.no_gradient) {
        const auto [rules, value] = charge(ledger.optimization,
                                           [&] { return mutation_trials(config, e.rules, e.init, loss, n_opt, opt_rng); });
        e.rules = rules;
        e.loss = value;
        kind += "trials";
      } else {
        DescentConfig descent{n_opt, config.adam, config.ranges};
        auto environment = [&config](Rng& r) { return config.draw_obstacles(r); };
        const DescentResult d = charge(ledger.optimization, [&] {
          return descend<float>(e.rules, e.init, loss, environment, opt_rng, diff_options(config), descent);
        });
        e.rules = d.rules;
        e.init = d.init;
        e.loss = d.losses.empty() ? 0.0 : d.losses.back();
        kind += "gradient";
      }
    } catch (const Error& err) {
      if (err.code() != ErrorCode::NumericalBlowup && err.code() != ErrorCode::DegenerateKernel) {
        throw;
      }
      failures.push_back({step, to_string(err.code()), err.what()});
      return restore(history, candidate.id, step, &goal.goal);
    }
    e.kind = kind;
    Rng eval_rng = derive_rng(seed_, "evaluate", stream);
    const Evaluation ev = charge(ledger.evaluation, [&] { return evaluate_params(e.rules, e.init, config, eval_rng, &counter_); });
    e.reached = ev.reached;
    e.c = ev.c;
    return e;
  }

  SearchConfig config_;
  std::uint64_t seed_;
  StepObserver observer_;
  RolloutCounter counter_{0};
};

std::string mode_name(const SearchConfig& c) {
  if (c.no_obstacles) return "no-obstacles";
  if (c.no_gradient) return "no-gradient";
  if (c.uniform_goals) return "uniform-goals";
  return "imgep";
}

}  // namespace

DiscoveryRun run_imgep(const SearchConfig& config, std::uint64_t seed, const StepObserver& observer) {
  if (int(config.no_obstacles) + int(config.no_gradient) + int(config.uniform_goals) > 1) {
    throw Error(ErrorCode::InvalidArgument, "at most one ablation switch may be set");
  }
  if (config.n_outer < 0 || config.history_size < 1) {
    throw Error(ErrorCode::InvalidArgument, "n_outer must be >= 0 and history_size >= 1");
  }
  Search search(config, seed, observer);
  return search.run(mode_name(config));
}

DiscoveryRun run_random_search(const SearchConfig& config, int budget, std::uint64_t seed) {
  if (budget < 1) {
    throw Error(ErrorCode::InvalidArgument, "random search budget must be >= 1");
  }
  Search search(config, seed);
  return search.random_search(budget);
}

}  // namespace lenia
