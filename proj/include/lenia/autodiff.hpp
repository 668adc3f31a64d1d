#pragma once

#include "lenia/rollout.hpp"

#include <functional>
#include <utility>

namespace lenia {

/// Goal-conditioned loss: MSE between the final learnable channel and the two-disk target.
struct LossSpec {
  Goal goal;
  int steps = 50;
  GridD target;
};

LossSpec make_loss_spec(const Goal& goal, GridShape shape, int steps = 50);

/// Partials of one rule's free scalars; layout mirrors `Rule`.
struct RuleGradient {
  double r = 0.0;
  std::array<double, kBumps> b{};
  std::array<double, kBumps> w{};
  std::array<double, kBumps> a{};
  double mu = 0.0;
  double sigma = 0.0;
  double h = 0.0;
};

struct GradientBundle {
  std::vector<RuleGradient> d_rules;
  GridD d_init;
};

struct DiffOptions {
  GridShape shape;
  SimOptions sim;
  /// Supported: update mask rate <= 1, update noise, init noise. Rescaling is not.
  PerturbationSpec perturb;
  bool clear_obstacles = true;
  double clear_radius = 10.0;
  /// Store every k-th state and recompute the others during the reverse sweep.
  int checkpoint_every = 1;
  RolloutCounter* counter = nullptr;
};

/// Mean squared error, averaged over cells, between `channel` and `target`.
template <typename Scalar>
double mse(const Grid<Scalar>& channel, const GridD& target);

template <typename Scalar>
double forward_loss(const RuleSet& rules, const InitPattern& init, const ObstacleConfig& obstacles,
                    const LossSpec& loss, Rng& rng, const DiffOptions& options);

/// Loss and its gradient with respect to every free rule scalar and every init cell.
///
/// The rollout is replayed from checkpoints during the reverse sweep; a replay that does
/// not reproduce a stored checkpoint bit for bit raises NondeterministicTape.
template <typename Scalar>
std::pair<double, GradientBundle> backward(const RuleSet& rules, const InitPattern& init,
                                           const ObstacleConfig& obstacles, const LossSpec& loss, Rng& rng,
                                           const DiffOptions& options);

/// Chains a gradient on the normalized kernel patch back to (r, b, w, a).
/// Includes the quotient rule through the normalization sum.
RuleGradient kernel_parameter_gradient(const Rule& rule, int R, const GridD& d_kernel);

// Flat parameter vectors: 13 scalars per rule (r, b[3], w[3], a[3], mu, sigma, h), then init cells row-major.

Eigen::VectorXd flatten(const RuleSet& rules, const InitPattern& init);
void unflatten(const Eigen::VectorXd& flat, RuleSet& rules, InitPattern& init);
Eigen::VectorXd flatten(const GradientBundle& grad);

/// Clamps every rule field into `ranges` and init cells into [0, 1].
void project(RuleSet& rules, InitPattern& init, const ParamRanges& ranges);

struct AdamConfig {
  double lr_rules = 1e-3;
  double lr_init = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with one learning rate for rule scalars and one for init cells.
class Adam {
 public:
  Adam(int n_rule_scalars, int n_init_cells, AdamConfig config = {});

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  int iterations() const { return t_; }

 private:
  AdamConfig config_;
  Eigen::VectorXd lr_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  int t_ = 0;
};

struct DescentConfig {
  int steps = 15;
  AdamConfig adam;
  ParamRanges ranges;
};

struct DescentResult {
  RuleSet rules;
  InitPattern init;
  std::vector<double> losses;  ///< loss of each step, before its update
};

/// Gradient descent toward `loss.goal`. `environment` supplies a fresh obstacle draw for each step.
template <typename Scalar>
DescentResult descend(const RuleSet& rules, const InitPattern& init, const LossSpec& loss,
                      const std::function<ObstacleConfig(Rng&)>& environment, Rng& rng, const DiffOptions& options,
                      const DescentConfig& config);

}  // namespace lenia
