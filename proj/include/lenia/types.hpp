#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

namespace lenia {

/// Row-major 2-D lattice. Axis 0 is x, axis 1 is y.
template <typename Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using GridD = Grid<double>;
using GridF = Grid<float>;

/// Position in cell coordinates (x = row, y = column).
using Position = Eigen::Vector2d;

inline constexpr int kBumps = 3;

inline constexpr int kLearnableChannel = 0;
inline constexpr int kObstacleChannel = 1;
inline constexpr int kAttractorChannel = 2;

struct GridShape {
  int rows = 256;
  int cols = 256;

  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// One (kernel, growth) couple. Kernel radius is `r * RuleSet::R` cells.
struct Rule {
  double r = 1.0;
  std::array<double, kBumps> b{1.0, 0.0, 0.0};
  std::array<double, kBumps> w{0.15, 0.15, 0.15};
  std::array<double, kBumps> a{0.5, 0.0, 0.0};
  double mu = 0.15;
  double sigma = 0.015;
  double h = 1.0;
  int c_src = kLearnableChannel;
  int c_dst = kLearnableChannel;

  friend bool operator==(const Rule&, const Rule&) = default;
};

/// Number of free scalars in one rule (r, b, w, a, mu, sigma, h).
inline constexpr int kScalarsPerRule = 1 + 3 * kBumps + 3;

struct RuleSet {
  int R = 15;
  int T = 10;
  std::vector<Rule> rules;

  /// Scalars touched by gradient descent (R and T excluded).
  int free_parameter_count() const { return static_cast<int>(rules.size()) * kScalarsPerRule; }
  /// Free scalars plus R and T.
  int parameter_count() const { return free_parameter_count() + 2; }

  friend bool operator==(const RuleSet&, const RuleSet&) = default;
};

/// Inclusive bounds for every rule field; defaults are the learnable-channel ranges.
struct ParamRanges {
  double r_min = 0.0, r_max = 1.0;
  double b_min = 0.0, b_max = 1.0;
  double w_min = 0.01, w_max = 0.5;
  double a_min = 0.0, a_max = 1.0;
  double mu_min = 0.05, mu_max = 0.5;
  double sigma_min = 0.001, sigma_max = 0.18;
  double h_min = 0.0, h_max = 1.0;
  int R_min = 15, R_max = 40;
  int T_min = 1, T_max = 10;
};

/// The fixed obstacle rule: senses channel 1, writes channel 0, radius 4.
inline constexpr int kObstacleKernelRadius = 4;
Rule obstacle_rule();

/// Square (or rescaled) pattern stamped into the learnable channel before a rollout.
struct InitPattern {
  GridD values;
  int row = 36;  ///< top-left x offset
  int col = 105;  ///< top-left y offset

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
  Position center() const { return {row + 0.5 * (rows() - 1), col + 0.5 * (cols() - 1)}; }
};

/// C channels of equal shape plus the number of steps taken so far.
template <typename Scalar>
struct GridState {
  std::vector<Grid<Scalar>> channels;
  std::int64_t step = 0;

  GridState() = default;
  GridState(int n_channels, GridShape shape) : channels(n_channels, Grid<Scalar>::Zero(shape.rows, shape.cols)) {}

  GridShape shape() const { return {static_cast<int>(channels.front().rows()), static_cast<int>(channels.front().cols())}; }
  int n_channels() const { return static_cast<int>(channels.size()); }
  Grid<Scalar>& learnable() { return channels[kLearnableChannel]; }
  const Grid<Scalar>& learnable() const { return channels[kLearnableChannel]; }
};

struct Disk {
  double x = 0.0;
  double y = 0.0;
  double radius = 10.0;

  friend bool operator==(const Disk&, const Disk&) = default;
};

/// Obstacle speed p/q cells per step along -x.
struct Speed {
  int num = 0;
  int den = 1;

  bool is_static() const { return num == 0; }
  /// Cells shifted while going from step t to t+1.
  int shift_at(std::int64_t t) const { return static_cast<int>((num * (t + 1)) / den - (num * t) / den); }
};

struct ObstacleConfig {
  std::vector<Disk> disks;
  Speed speed;
};

/// All defaults are the identity perturbation.
struct PerturbationSpec {
  double update_mask_rate = 1.0;
  double update_noise_rate = 0.0;
  double update_noise_std = 0.0;
  double init_noise_rate = 0.0;
  double init_noise_std = 0.0;
  double scale = 1.0;
  /// Update perturbations act on steps in [active_begin, active_end).
  std::int64_t active_begin = 0;
  std::int64_t active_end = INT64_MAX;

  bool update_active(std::int64_t step) const { return step >= active_begin && step < active_end; }
  bool perturbs_update() const { return update_mask_rate != 1.0 || (update_noise_rate > 0.0 && update_noise_std > 0.0); }
  bool perturbs_init() const { return init_noise_rate > 0.0 && init_noise_std > 0.0; }
  bool is_identity() const { return !perturbs_update() && !perturbs_init() && scale == 1.0; }
};

/// Target position normalized to [-0.5, 0.5]^2 by the grid side lengths, origin at the grid center.
struct Goal {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Goal&, const Goal&) = default;
};

Goal normalize(const Position& p, GridShape shape);
Position denormalize(const Goal& g, GridShape shape);

}  // namespace lenia
