#pragma once

#include "lenia/convolution.hpp"
#include "lenia/kernel.hpp"
#include "lenia/rng.hpp"
#include "lenia/types.hpp"

#include <optional>

namespace lenia {

struct SimOptions {
  Boundary boundary = Boundary::Torus;
  ConvBackend backend = ConvBackend::Spectral;
  /// Apply the fixed obstacle rule (channel 1 -> channel 0).
  bool obstacle_rule = true;
  /// Obstacle channel shift along -x.
  Speed obstacle_speed;
};

/// Random draws consumed by one step. Empty grids mean "not drawn".
template <typename Scalar>
struct StepDraws {
  Grid<Scalar> mask;         ///< per-cell update gate, rate < 1
  Grid<Scalar> noise;        ///< additive update noise
  Grid<Scalar> second_mask;  ///< per-cell second-pass gate, 1 < rate < 2
  Grid<Scalar> second_noise;
};

/// The Lenia update operator for one RuleSet on one lattice.
///
/// Owns kernel spectra and a small obstacle-sensing cache, so an instance is used by one
/// thread at a time; instances are cheap to copy.
template <typename Scalar>
class Simulator {
 public:
  Simulator(const RuleSet& rules, GridShape shape, SimOptions options = {});

  const RuleSet& rules() const { return rules_; }
  GridShape shape() const { return shape_; }
  const SimOptions& options() const { return options_; }
  /// Channels a state needs: learnable + obstacle, plus the attractor channel if a rule senses it.
  int n_channels() const { return n_channels_; }
  GridState<Scalar> make_state() const { return GridState<Scalar>(n_channels_, shape_); }

  const std::vector<Kernel>& kernels() const { return kernels_; }
  const std::vector<Spectrum<Scalar>>& kernel_spectra() const { return spectra_; }
  const SpectralConvolver<Scalar>& convolver() const { return convolver_; }

  /// Advances `state` by one step. Throws NumericalBlowup on non-finite values.
  void step(GridState<Scalar>& state, const PerturbationSpec& perturb, Rng& rng);

  // Building blocks shared with the differentiation tape.

  /// Per-rule sensed fields K_k * A_src(k); also returns the learnable-channel spectrum.
  struct Sensing {
    std::vector<Grid<Scalar>> fields;
    std::vector<Spectrum<Scalar>> source_spectra;  ///< indexed by channel; empty if unused
  };
  Sensing sense(const GridState<Scalar>& state) const;
  /// Sum over rules of h_k * G_k(sensed_k).
  Grid<Scalar> growth_sum(const Sensing& sensing) const;
  /// Growth from the fixed obstacle rule for the current obstacle channel (zero if disabled).
  const Grid<Scalar>& obstacle_update(const GridState<Scalar>& state);
  StepDraws<Scalar> draw(const PerturbationSpec& perturb, std::int64_t step, Rng& rng) const;
  /// a + (mask * (growth + noise) + obstacle) / T, before clipping.
  Grid<Scalar> pre_clip(const Grid<Scalar>& a, const Grid<Scalar>& growth, const Grid<Scalar>& obstacle,
                        const Grid<Scalar>& mask, const Grid<Scalar>& noise) const;
  /// Applies obstacle motion for the transition out of `state.step`.
  void shift_obstacles(GridState<Scalar>& state) const;

 private:
  RuleSet rules_;
  GridShape shape_;
  SimOptions options_;
  int n_channels_ = 2;
  std::vector<Kernel> kernels_;
  std::vector<Spectrum<Scalar>> spectra_;
  Kernel obstacle_kernel_;
  Spectrum<Scalar> obstacle_spectrum_;
  SpectralConvolver<Scalar> convolver_;
  Grid<Scalar> cached_obstacles_;
  Grid<Scalar> cached_obstacle_update_;
};

extern template class Simulator<float>;
extern template class Simulator<double>;

/// Throws InvalidArgument if a field is non-finite or a channel index is unsupported.
void validate_rules(const RuleSet& rules);

}  // namespace lenia
