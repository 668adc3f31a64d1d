#include "lenia/autodiff.hpp"

#include "lenia/error.hpp"

#include <cmath>

namespace lenia {

LossSpec make_loss_spec(const Goal& goal, GridShape shape, int steps) {
  return {goal, steps, make_target(goal, shape)};
}

template <typename Scalar>
double mse(const Grid<Scalar>& channel, const GridD& target) {
  return (channel.template cast<double>() - target).square().mean();
}

namespace {

void check_supported(const DiffOptions& options) {
  if (options.perturb.update_mask_rate > 1.0) {
    throw Error(ErrorCode::Unsupported, "second-pass update masks are not differentiable");
  }
  if (options.perturb.scale != 1.0) {
    throw Error(ErrorCode::Unsupported, "rescaling is not differentiated; rescale before the call");
  }
  if (options.checkpoint_every < 1) {
    throw Error(ErrorCode::InvalidArgument, "checkpoint_every must be >= 1");
  }
}

RolloutSpec rollout_spec(const DiffOptions& options, int steps) {
  RolloutSpec spec;
  spec.steps = steps;
  spec.perturb = options.perturb;
  spec.clear_obstacles = options.clear_obstacles;
  spec.clear_radius = options.clear_radius;
  spec.record = RecordPolicy::FinalOnly;
  return spec;
}

// One update with pre-drawn randomness. Returns the pre-clip field.
template <typename Scalar>
Grid<Scalar> advance(Simulator<Scalar>& sim, GridState<Scalar>& state, const StepDraws<Scalar>& draws) {
  const Grid<Scalar>& obstacle = sim.obstacle_update(state);
  Grid<Scalar> pre = sim.pre_clip(state.learnable(), sim.growth_sum(sim.sense(state)), obstacle, draws.mask, draws.noise);
  if (!pre.isFinite().all()) {
    throw Error(ErrorCode::NumericalBlowup, "numerical blowup at step " + std::to_string(state.step));
  }
  state.learnable() = pre.max(Scalar(0)).min(Scalar(1));
  sim.shift_obstacles(state);
  ++state.step;
  return pre;
}

template <typename Scalar>
bool identical(const GridState<Scalar>& x, const GridState<Scalar>& y) {
  if (x.n_channels() != y.n_channels() || x.step != y.step) {
    return false;
  }
  for (int c = 0; c < x.n_channels(); ++c) {
    if (!(x.channels[c] == y.channels[c]).all()) {
      return false;
    }
  }
  return true;
}

template <typename Scalar>
struct Tape {
  std::vector<GridState<Scalar>> checkpoints;  // states at t = 0, k, 2k, ...
  std::vector<StepDraws<Scalar>> draws;        // one per step
  GridState<Scalar> final_state;
  InitPattern noisy_init;
};

}  // namespace

template <typename Scalar>
double forward_loss(const RuleSet& rules, const InitPattern& init, const ObstacleConfig& obstacles,
                    const LossSpec& loss, Rng& rng, const DiffOptions& options) {
  RolloutSpec spec = rollout_spec(options, loss.steps);
  spec.counter = options.counter;
  const Trajectory<Scalar> traj = rollout<Scalar>(init, rules, obstacles, options.shape, spec, rng, options.sim);
  return mse(traj.final_state.learnable(), loss.target);
}

RuleGradient kernel_parameter_gradient(const Rule& rule, int R, const GridD& d_kernel) {
  const Kernel kernel = build_kernel(rule, R);
  // d/d raw[j] of raw[i] / S is (delta_ij - K[i]) / S.
  const double weighted = (d_kernel * kernel.weights).sum();
  const GridD d_raw = (d_kernel - weighted) / kernel.raw_sum;

  RuleGradient g;
  for (int di = -R; di <= R; ++di) {
    for (int dj = -R; dj <= R; ++dj) {
      if (!inside_kernel(di, dj, rule.r, R)) {
        continue;
      }
      const double gr = d_raw(di + R, dj + R);
      if (gr == 0.0) {
        continue;
      }
      const double z = relative_distance(di, dj, rule.r, R);
      double dz = 0.0;  // d raw / d z
      for (int i = 0; i < kBumps; ++i) {
        const double w2 = rule.w[i] * rule.w[i];
        const double d = z - rule.a[i];
        const double e = std::exp(-(d * d) / (2.0 * w2));
        g.b[i] += gr * e;
        g.a[i] += gr * rule.b[i] * e * d / w2;
        g.w[i] += gr * rule.b[i] * e * d * d / (w2 * rule.w[i]);
        dz -= rule.b[i] * e * d / w2;
      }
      if (z != 0.0) {
        // z = dist / (r R), so dz/dr = -z / r.
        g.r += gr * dz * (-z / rule.r);
      }
    }
  }
  return g;
}

template <typename Scalar>
std::pair<double, GradientBundle> backward(const RuleSet& rules, const InitPattern& init,
                                           const ObstacleConfig& obstacles, const LossSpec& loss, Rng& rng,
                                           const DiffOptions& options) {
  check_supported(options);
  if (loss.steps < 1) {
    throw Error(ErrorCode::InvalidArgument, "loss needs steps >= 1");
  }
  if (options.counter) {
    ++*options.counter;
  }
  SimOptions sim_options = options.sim;
  sim_options.obstacle_speed = obstacles.speed;
  Simulator<Scalar> sim(rules, options.shape, sim_options);
  const int k = options.checkpoint_every;
  const int n_rules = static_cast<int>(rules.rules.size());
  const Scalar inv_t = Scalar(1) / static_cast<Scalar>(rules.T);

  // Forward sweep, drawing randomness in the same order as `rollout`.
  Tape<Scalar> tape;
  tape.noisy_init = apply_init_noise(init, options.perturb, rng);
  RolloutSpec spec = rollout_spec(options, loss.steps);
  spec.perturb.init_noise_rate = 0.0;
  GridState<Scalar> state = initial_state<Scalar>(tape.noisy_init, obstacles, options.shape, spec, sim.n_channels(), rng);
  // Obstacles are cleared around the unperturbed placement, which is the same square.
  for (int t = 0; t < loss.steps; ++t) {
    if (t % k == 0) {
      tape.checkpoints.push_back(state);
    }
    tape.draws.push_back(sim.draw(options.perturb, state.step, rng));
    advance(sim, state, tape.draws.back());
  }
  tape.final_state = state;
  const double value = mse(state.learnable(), loss.target);

  const GridShape shape = options.shape;
  const double n_cells = static_cast<double>(shape.rows) * shape.cols;
  Grid<Scalar> g = ((state.learnable().template cast<double>() - loss.target) * (2.0 / n_cells)).template cast<Scalar>();

  GradientBundle out;
  out.d_rules.assign(n_rules, RuleGradient{});
  const SpectralConvolver<Scalar>& conv = sim.convolver();
  const GridShape tshape = conv.transform_shape();
  std::vector<Spectrum<Scalar>> kernel_acc(n_rules, Spectrum<Scalar>::Zero(tshape.rows, tshape.cols / 2 + 1));

  const int n_segments = static_cast<int>(tape.checkpoints.size());
  for (int seg = n_segments - 1; seg >= 0; --seg) {
    const int t0 = seg * k;
    const int t1 = std::min(t0 + k, loss.steps);
    // Replay the segment from its checkpoint.
    std::vector<GridState<Scalar>> states{tape.checkpoints[seg]};
    for (int t = t0; t < t1; ++t) {
      GridState<Scalar> next = states.back();
      advance(sim, next, tape.draws[t]);
      states.push_back(std::move(next));
    }
    const GridState<Scalar>& expected = seg + 1 < n_segments ? tape.checkpoints[seg + 1] : tape.final_state;
    if (!identical(states.back(), expected)) {
      throw Error(ErrorCode::NondeterministicTape, "nondeterministic tape: replay diverged before step " + std::to_string(t1));
    }

    for (int t = t1 - 1; t >= t0; --t) {
      const GridState<Scalar>& s = states[t - t0];
      const StepDraws<Scalar>& draws = tape.draws[t];
      const auto sensing = sim.sense(s);
      const Grid<Scalar> pre =
          sim.pre_clip(s.learnable(), sim.growth_sum(sensing), sim.obstacle_update(s), draws.mask, draws.noise);

      // Exact subgradient of clip: pass-through on [0, 1].
      const Grid<Scalar> g_pre = (pre >= Scalar(0) && pre <= Scalar(1)).select(g, Grid<Scalar>::Zero(shape.rows, shape.cols));
      Grid<Scalar> g_growth = g_pre * inv_t;
      if (draws.mask.size() != 0) {
        g_growth *= draws.mask;
      }

      Spectrum<Scalar> g_field_spec;
      for (int r = 0; r < n_rules; ++r) {
        const Rule& rule = rules.rules[r];
        const Scalar mu = static_cast<Scalar>(rule.mu);
        const Scalar inv2s2 = static_cast<Scalar>(1.0 / (2.0 * rule.sigma * rule.sigma));
        const Grid<Scalar> diff = sensing.fields[r] - mu;
        const Grid<Scalar> e2 = Scalar(2) * (-diff.square() * inv2s2).exp();  // G + 1
        out.d_rules[r].h += (g_growth * (e2 - Scalar(1))).template cast<double>().sum();
        if (rule.h == 0.0) {
          continue;
        }
        const Grid<Scalar> g_g = g_growth * static_cast<Scalar>(rule.h);
        const double s2 = rule.sigma * rule.sigma;
        // dG/dU = -(G + 1) (U - mu) / sigma^2
        const Grid<Scalar> g_u = -g_g * e2 * diff * static_cast<Scalar>(1.0 / s2);
        out.d_rules[r].mu -= g_u.template cast<double>().sum();
        out.d_rules[r].sigma += (g_g * e2 * diff.square()).template cast<double>().sum() / (s2 * rule.sigma);

        const Spectrum<Scalar> g_u_spec = conv.forward(g_u);
        kernel_acc[r] += g_u_spec * sensing.source_spectra[rule.c_src].conjugate();
        if (rule.c_src == kLearnableChannel) {
          const Spectrum<Scalar> contrib = g_u_spec * sim.kernel_spectra()[r].conjugate();
          if (g_field_spec.size() == 0) {
            g_field_spec = contrib;
          } else {
            g_field_spec += contrib;
          }
        }
      }
      g = g_pre;
      if (g_field_spec.size() != 0) {
        g += conv.inverse(g_field_spec);
      }
    }
  }

  for (int r = 0; r < n_rules; ++r) {
    const GridD d_kernel = conv.extract_patch(conv.inverse_full(kernel_acc[r]), rules.R);
    const RuleGradient kg = kernel_parameter_gradient(rules.rules[r], rules.R, d_kernel);
    RuleGradient& dst = out.d_rules[r];
    dst.r = kg.r;
    dst.b = kg.b;
    dst.w = kg.w;
    dst.a = kg.a;
  }

  // Stamping wraps on the torus and clips to [0, 1].
  out.d_init = GridD::Zero(init.rows(), init.cols());
  for (int i = 0; i < init.rows(); ++i) {
    for (int j = 0; j < init.cols(); ++j) {
      const double v = tape.noisy_init.values(i, j);
      if (v < 0.0 || v > 1.0) {
        continue;
      }
      const int gi = ((init.row + i) % shape.rows + shape.rows) % shape.rows;
      const int gj = ((init.col + j) % shape.cols + shape.cols) % shape.cols;
      out.d_init(i, j) = static_cast<double>(g(gi, gj));
    }
  }
  return {value, std::move(out)};
}

Eigen::VectorXd flatten(const RuleSet& rules, const InitPattern& init) {
  Eigen::VectorXd v(rules.free_parameter_count() + init.values.size());
  Eigen::Index n = 0;
  for (const Rule& r : rules.rules) {
    v(n++) = r.r;
    for (double x : r.b) v(n++) = x;
    for (double x : r.w) v(n++) = x;
    for (double x : r.a) v(n++) = x;
    v(n++) = r.mu;
    v(n++) = r.sigma;
    v(n++) = r.h;
  }
  for (Eigen::Index i = 0; i < init.values.size(); ++i) {
    v(n++) = init.values.data()[i];
  }
  return v;
}

void unflatten(const Eigen::VectorXd& v, RuleSet& rules, InitPattern& init) {
  if (v.size() != rules.free_parameter_count() + init.values.size()) {
    throw Error(ErrorCode::InvalidArgument, "flat parameter vector has the wrong length");
  }
  Eigen::Index n = 0;
  for (Rule& r : rules.rules) {
    r.r = v(n++);
    for (double& x : r.b) x = v(n++);
    for (double& x : r.w) x = v(n++);
    for (double& x : r.a) x = v(n++);
    r.mu = v(n++);
    r.sigma = v(n++);
    r.h = v(n++);
  }
  for (Eigen::Index i = 0; i < init.values.size(); ++i) {
    init.values.data()[i] = v(n++);
  }
}

Eigen::VectorXd flatten(const GradientBundle& grad) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(grad.d_rules.size()) * kScalarsPerRule + grad.d_init.size());
  Eigen::Index n = 0;
  for (const RuleGradient& r : grad.d_rules) {
    v(n++) = r.r;
    for (double x : r.b) v(n++) = x;
    for (double x : r.w) v(n++) = x;
    for (double x : r.a) v(n++) = x;
    v(n++) = r.mu;
    v(n++) = r.sigma;
    v(n++) = r.h;
  }
  for (Eigen::Index i = 0; i < grad.d_init.size(); ++i) {
    v(n++) = grad.d_init.data()[i];
  }
  return v;
}

void project(RuleSet& rules, InitPattern& init, const ParamRanges& q) {
  rules.R = std::clamp(rules.R, q.R_min, q.R_max);
  rules.T = std::clamp(rules.T, q.T_min, q.T_max);
  for (Rule& r : rules.rules) {
    r.r = std::clamp(r.r, q.r_min, q.r_max);
    for (double& x : r.b) x = std::clamp(x, q.b_min, q.b_max);
    for (double& x : r.w) x = std::clamp(x, q.w_min, q.w_max);
    for (double& x : r.a) x = std::clamp(x, q.a_min, q.a_max);
    r.mu = std::clamp(r.mu, q.mu_min, q.mu_max);
    r.sigma = std::clamp(r.sigma, q.sigma_min, q.sigma_max);
    r.h = std::clamp(r.h, q.h_min, q.h_max);
  }
  init.values = init.values.max(0.0).min(1.0);
}

Adam::Adam(int n_rule_scalars, int n_init_cells, AdamConfig config) : config_(config) {
  lr_.resize(n_rule_scalars + n_init_cells);
  lr_.head(n_rule_scalars).setConstant(config.lr_rules);
  lr_.tail(n_init_cells).setConstant(config.lr_init);
  m_ = Eigen::VectorXd::Zero(lr_.size());
  v_ = Eigen::VectorXd::Zero(lr_.size());
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
  v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(config_.beta1, t_);
  const double c2 = 1.0 - std::pow(config_.beta2, t_);
  params.array() -= lr_.array() * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.eps);
}

template <typename Scalar>
DescentResult descend(const RuleSet& rules, const InitPattern& init, const LossSpec& loss,
                      const std::function<ObstacleConfig(Rng&)>& environment, Rng& rng, const DiffOptions& options,
                      const DescentConfig& config) {
  DescentResult result{rules, init, {}};
  Adam adam(rules.free_parameter_count(), static_cast<int>(init.values.size()), config.adam);
  Eigen::VectorXd params = flatten(result.rules, result.init);
  for (int s = 0; s < config.steps; ++s) {
    const ObstacleConfig obstacles = environment(rng);
    auto [value, grad] = backward<Scalar>(result.rules, result.init, obstacles, loss, rng, options);
    result.losses.push_back(value);
    adam.step(params, flatten(grad));
    unflatten(params, result.rules, result.init);
    project(result.rules, result.init, config.ranges);
    params = flatten(result.rules, result.init);
  }
  return result;
}

template double mse<float>(const Grid<float>&, const GridD&);
template double mse<double>(const Grid<double>&, const GridD&);
template double forward_loss<float>(const RuleSet&, const InitPattern&, const ObstacleConfig&, const LossSpec&, Rng&,
                                    const DiffOptions&);
template double forward_loss<double>(const RuleSet&, const InitPattern&, const ObstacleConfig&, const LossSpec&, Rng&,
                                     const DiffOptions&);
template std::pair<double, GradientBundle> backward<float>(const RuleSet&, const InitPattern&, const ObstacleConfig&,
                                                           const LossSpec&, Rng&, const DiffOptions&);
template std::pair<double, GradientBundle> backward<double>(const RuleSet&, const InitPattern&, const ObstacleConfig&,
                                                            const LossSpec&, Rng&, const DiffOptions&);
template DescentResult descend<float>(const RuleSet&, const InitPattern&, const LossSpec&,
                                      const std::function<ObstacleConfig(Rng&)>&, Rng&, const DiffOptions&,
                                      const DescentConfig&);
template DescentResult descend<double>(const RuleSet&, const InitPattern&, const LossSpec&,
                                       const std::function<ObstacleConfig(Rng&)>&, Rng&, const DiffOptions&,
                                       const DescentConfig&);

}  // namespace lenia
