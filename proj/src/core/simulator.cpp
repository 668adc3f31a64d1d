#include "lenia/simulator.hpp"

#include "lenia/error.hpp"

#include <cmath>

namespace lenia {
namespace {

int max_radius(const RuleSet& rules) { return std::max(rules.R, kObstacleKernelRadius); }

bool finite_rule(const Rule& r) {
  auto ok = [](double v) { return std::isfinite(v); };
  bool good = ok(r.r) && ok(r.mu) && ok(r.sigma) && ok(r.h);
  for (int i = 0; i < kBumps; ++i) {
    good = good && ok(r.b[i]) && ok(r.w[i]) && ok(r.a[i]);
  }
  return good;
}

template <typename Scalar>
bool all_finite(const Grid<Scalar>& g) {
  return g.isFinite().all();
}

}  // namespace

void validate_rules(const RuleSet& rules) {
  if (rules.T < 1) {
    throw Error(ErrorCode::InvalidArgument, "T must be >= 1");
  }
  if (rules.R < 1) {
    throw Error(ErrorCode::InvalidArgument, "R must be >= 1");
  }
  for (const Rule& r : rules.rules) {
    if (!finite_rule(r)) {
      throw Error(ErrorCode::NumericalBlowup, "numerical blowup: non-finite rule parameter");
    }
    if (r.c_dst != kLearnableChannel || (r.c_src != kLearnableChannel && r.c_src != kAttractorChannel)) {
      throw Error(ErrorCode::InvalidArgument, "rules must write channel 0 and sense channel 0 or 2");
    }
    if (!(r.sigma > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "growth sigma must be positive");
    }
  }
}

template <typename Scalar>
Simulator<Scalar>::Simulator(const RuleSet& rules, GridShape shape, SimOptions options)
    : rules_(rules), shape_(shape), options_(options), convolver_(shape, options.boundary, max_radius(rules)) {
  validate_rules(rules_);
  for (const Rule& r : rules_.rules) {
    if (r.c_src == kAttractorChannel) {
      n_channels_ = 3;
    }
    kernels_.push_back(build_kernel(r, rules_.R));
    spectra_.push_back(convolver_.kernel_spectrum(kernels_.back().weights));
  }
  obstacle_kernel_ = build_kernel(obstacle_rule(), kObstacleKernelRadius);
  obstacle_spectrum_ = convolver_.kernel_spectrum(obstacle_kernel_.weights);
}

template <typename Scalar>
typename Simulator<Scalar>::Sensing Simulator<Scalar>::sense(const GridState<Scalar>& state) const {
  Sensing s;
  s.source_spectra.resize(state.n_channels());
  s.fields.reserve(rules_.rules.size());
  for (std::size_t k = 0; k < rules_.rules.size(); ++k) {
    const int src = rules_.rules[k].c_src;
    if (options_.backend == ConvBackend::Direct) {
      s.fields.push_back(direct_convolve(state.channels[src], kernels_[k].weights, options_.boundary));
      continue;
    }
    if (s.source_spectra[src].size() == 0) {
      s.source_spectra[src] = convolver_.forward(state.channels[src]);
    }
    s.fields.push_back(convolver_.inverse(s.source_spectra[src] * spectra_[k]));
  }
  return s;
}

template <typename Scalar>
Grid<Scalar> Simulator<Scalar>::growth_sum(const Sensing& sensing) const {
  Grid<Scalar> total = Grid<Scalar>::Zero(shape_.rows, shape_.cols);
  for (std::size_t k = 0; k < rules_.rules.size(); ++k) {
    const Rule& r = rules_.rules[k];
    if (r.h == 0.0) {
      continue;
    }
    const Scalar mu = static_cast<Scalar>(r.mu);
    const Scalar inv = static_cast<Scalar>(1.0 / (2.0 * r.sigma * r.sigma));
    const Scalar h = static_cast<Scalar>(r.h);
    total += h * (Scalar(2) * (-(sensing.fields[k] - mu).square() * inv).exp() - Scalar(1));
  }
  return total;
}

template <typename Scalar>
const Grid<Scalar>& Simulator<Scalar>::obstacle_update(const GridState<Scalar>& state) {
  if (!options_.obstacle_rule || state.n_channels() <= kObstacleChannel) {
    if (cached_obstacle_update_.size() == 0) {
      cached_obstacle_update_ = Grid<Scalar>::Zero(shape_.rows, shape_.cols);
    }
    return cached_obstacle_update_;
  }
  const Grid<Scalar>& obstacles = state.channels[kObstacleChannel];
  if (cached_obstacles_.size() == obstacles.size() && (cached_obstacles_ == obstacles).all()) {
    return cached_obstacle_update_;
  }
  cached_obstacles_ = obstacles;
  if ((obstacles == Scalar(0)).all()) {
    cached_obstacle_update_ = Grid<Scalar>::Zero(shape_.rows, shape_.cols);
    return cached_obstacle_update_;
  }
  Grid<Scalar> sensed = options_.backend == ConvBackend::Direct
                            ? direct_convolve(obstacles, obstacle_kernel_.weights, options_.boundary)
                            : convolver_.convolve(obstacles, obstacle_spectrum_);
  cached_obstacle_update_ = -(sensed - Scalar(1e-8)).max(Scalar(0)).min(Scalar(1)) * Scalar(10);
  return cached_obstacle_update_;
}

template <typename Scalar>
StepDraws<Scalar> Simulator<Scalar>::draw(const PerturbationSpec& p, std::int64_t step, Rng& rng) const {
  StepDraws<Scalar> d;
  if (!p.update_active(step) || !p.perturbs_update()) {
    return d;
  }
  const double rate = p.update_mask_rate;
  auto gate = [&](double prob) {
    Grid<Scalar> m(shape_.rows, shape_.cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = bernoulli(rng, prob) ? Scalar(1) : Scalar(0);
    }
    return m;
  };
  auto noise = [&]() {
    Grid<Scalar> n(shape_.rows, shape_.cols);
    for (Eigen::Index i = 0; i < n.size(); ++i) {
      const bool hit = p.update_noise_rate >= 1.0 || bernoulli(rng, p.update_noise_rate);
      n.data()[i] = hit ? static_cast<Scalar>(p.update_noise_std * standard_normal(rng)) : Scalar(0);
    }
    return n;
  };
  if (rate < 1.0) {
    d.mask = gate(std::max(rate, 0.0));
  } else if (rate > 1.0) {
    d.second_mask = gate(std::min(rate - 1.0, 1.0));
  }
  if (p.update_noise_rate > 0.0 && p.update_noise_std > 0.0) {
    d.noise = noise();
    if (rate > 1.0) {
      d.second_noise = noise();
    }
  }
  return d;
}

template <typename Scalar>
Grid<Scalar> Simulator<Scalar>::pre_clip(const Grid<Scalar>& a, const Grid<Scalar>& growth, const Grid<Scalar>& obstacle,
                                         const Grid<Scalar>& mask, const Grid<Scalar>& noise) const {
  const Scalar inv_t = Scalar(1) / static_cast<Scalar>(rules_.T);
  Grid<Scalar> update = growth;
  if (noise.size() != 0) {
    update += noise;
  }
  if (mask.size() != 0) {
    update *= mask;
  }
  return a + (update + obstacle) * inv_t;
}

template <typename Scalar>
void Simulator<Scalar>::shift_obstacles(GridState<Scalar>& state) const {
  if (options_.obstacle_speed.is_static() || state.n_channels() <= kObstacleChannel) {
    return;
  }
  const int shift = options_.obstacle_speed.shift_at(state.step);
  if (shift == 0) {
    return;
  }
  const int rows = shape_.rows;
  const int s = ((shift % rows) + rows) % rows;
  Grid<Scalar>& obs = state.channels[kObstacleChannel];
  Grid<Scalar> moved(rows, shape_.cols);
  // Motion along -x: new row i takes old row i + s.
  for (int i = 0; i < rows; ++i) {
    moved.row(i) = obs.row((i + s) % rows);
  }
  obs = std::move(moved);
}

template <typename Scalar>
void Simulator<Scalar>::step(GridState<Scalar>& state, const PerturbationSpec& perturb, Rng& rng) {
  if (state.shape() != shape_ || state.n_channels() < n_channels_) {
    throw Error(ErrorCode::InvalidArgument, "state shape or channel count does not match the simulator");
  }
  const StepDraws<Scalar> draws = draw(perturb, state.step, rng);
  const Grid<Scalar>& obstacle = obstacle_update(state);
  Grid<Scalar> pre = pre_clip(state.learnable(), growth_sum(sense(state)), obstacle, draws.mask, draws.noise);
  if (!all_finite(pre)) {
    throw Error(ErrorCode::NumericalBlowup, "numerical blowup at step " + std::to_string(state.step));
  }
  Grid<Scalar> next = pre.max(Scalar(0)).min(Scalar(1));
  if (draws.second_mask.size() != 0) {
    GridState<Scalar> mid = state;
    mid.learnable() = next;
    Grid<Scalar> pre2 = pre_clip(next, growth_sum(sense(mid)), obstacle, Grid<Scalar>(), draws.second_noise);
    if (!all_finite(pre2)) {
      throw Error(ErrorCode::NumericalBlowup, "numerical blowup at step " + std::to_string(state.step));
    }
    const Grid<Scalar> twice = pre2.max(Scalar(0)).min(Scalar(1));
    next = draws.second_mask * twice + (Scalar(1) - draws.second_mask) * next;
  }
  state.learnable() = std::move(next);
  shift_obstacles(state);
  ++state.step;
}

template class Simulator<float>;
template class Simulator<double>;

}  // namespace lenia
