#include <doctest.h>

#include "lenia/autodiff.hpp"
#include "lenia/error.hpp"

#include "support/gradient_check.hpp"

using namespace lenia;
using testing_support::GradientCase;
using testing_support::make_gradient_case;

namespace {

DiffOptions options_for(const GradientCase& c) {
  DiffOptions o;
  o.shape = c.shape;
  return o;
}

}  // namespace

TEST_CASE("mse: zero at the target, closed form for an empty state") {
  const GridShape shape{64, 64};
  const GridD target = make_target(Goal{0.0, 0.0}, shape);
  CHECK(mse(target, target) == 0.0);
  // Inner disk holds 0.9^2, the annulus 0.135^2.
  const double inner = (target == 0.9).cast<double>().sum();
  const double ring = (target == 0.9 * 0.15).cast<double>().sum();
  CHECK(inner + ring == (target > 0).cast<double>().sum());
  CHECK(mse(GridD(GridD::Zero(64, 64)), target) == doctest::Approx((inner * 0.81 + ring * 0.135 * 0.135) / 4096));
}

TEST_CASE("backward: analytic gradient matches central differences of the naive oracle") {
  const GradientCase c = make_gradient_case(1);
  Rng rng(0);
  const auto value = backward<double>(c.rules, c.init, {}, c.loss, rng, options_for(c)).first;
  CHECK(value == doctest::Approx(testing_support::oracle_loss(c, flatten(c.rules, c.init)).loss).epsilon(1e-10));

  const auto sweep = testing_support::sweep_gradient_cases(20, 1e-4, 1e-6);
  REQUIRE(sweep.covering_seed != 0);
  CHECK(sweep.max_rel_error < 1e-3);
  for (const auto& k : sweep.covering.checked) {
    INFO(k.family, " index ", k.index, " analytic ", k.analytic, " numeric ", k.numeric);
    CHECK(k.rel_error < 1e-3);
  }
}

TEST_CASE("backward: kernel normalization chain (regression for the quotient rule)") {
  Rng rng(3);
  Rule rule = testing_support::random_rule(rng);
  rule.r = 0.8;
  rule.b = {0.7, 0.4, 0.2};
  rule.w = {0.2, 0.3, 0.1};
  const int R = 9;
  const GridD weights = testing_support::random_grid(rng, 2 * R + 1, 2 * R + 1);
  auto f = [&](const Rule& r) { return (build_kernel(r, R).weights * weights).sum(); };
  const RuleGradient g = kernel_parameter_gradient(rule, R, weights);
  const double h = 1e-6;
  auto central = [&](auto&& mutate) {
    Rule p = rule, m = rule;
    mutate(p, h);
    mutate(m, -h);
    return (f(p) - f(m)) / (2 * h);
  };
  for (int i = 0; i < kBumps; ++i) {
    CHECK(g.b[i] == doctest::Approx(central([i](Rule& r, double d) { r.b[i] += d; })).epsilon(1e-5));
    CHECK(g.w[i] == doctest::Approx(central([i](Rule& r, double d) { r.w[i] += d; })).epsilon(1e-5));
    CHECK(g.a[i] == doctest::Approx(central([i](Rule& r, double d) { r.a[i] += d; })).epsilon(1e-5));
  }
  CHECK(g.r == doctest::Approx(central([](Rule& r, double d) { r.r += d; })).epsilon(1e-5));
  // Scaling every b leaves the normalized kernel unchanged, so sum_i b_i * dL/db_i = 0.
  CHECK(std::abs(g.b[0] * rule.b[0] + g.b[1] * rule.b[1] + g.b[2] * rule.b[2]) < 1e-9);
}

TEST_CASE("backward: identity rules reduce to the MSE gradient of the init") {
  GradientCase c = make_gradient_case(4);
  for (Rule& r : c.rules.rules) {
    r.h = 0.0;
  }
  Rng rng(0);
  const auto [value, grad] = backward<double>(c.rules, c.init, {}, c.loss, rng, options_for(c));
  const double n = double(c.shape.rows) * c.shape.cols;
  for (int i = 0; i < c.init.rows(); ++i) {
    for (int j = 0; j < c.init.cols(); ++j) {
      const double expected = 2.0 * (c.init.values(i, j) - c.loss.target(c.init.row + i, c.init.col + j)) / n;
      REQUIRE(grad.d_init(i, j) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  for (const RuleGradient& g : grad.d_rules) {
    CHECK(g.mu == 0.0);
    CHECK(g.sigma == 0.0);
    CHECK(g.r == 0.0);
  }
  CHECK(value > 0.0);
}

TEST_CASE("backward: a rule clipped away on empty space receives zero gradient") {
  GradientCase c = make_gradient_case(5);
  c.rules.rules.resize(1);
  c.rules.rules[0].mu = 0.3;
  c.rules.rules[0].sigma = 0.01;
  c.init.values.setZero();
  Rng rng(0);
  const auto [value, grad] = backward<double>(c.rules, c.init, {}, c.loss, rng, options_for(c));
  const RuleGradient& g = grad.d_rules[0];
  CHECK(g.r == 0.0);
  CHECK(g.mu == 0.0);
  CHECK(g.sigma == 0.0);
  CHECK(g.h == 0.0);
  for (int i = 0; i < kBumps; ++i) {
    CHECK(g.b[i] == 0.0);
    CHECK(g.w[i] == 0.0);
    CHECK(g.a[i] == 0.0);
  }
  CHECK((grad.d_init == 0.0).all());
  CHECK(value == doctest::Approx(mse(GridD(GridD::Zero(48, 48)), c.loss.target)));
}

TEST_CASE("backward: tape determinism and checkpointing") {
  const GradientCase c = make_gradient_case(6, 48, 7);
  DiffOptions o = options_for(c);
  o.perturb.update_mask_rate = 0.8;
  o.perturb.update_noise_rate = 0.3;
  o.perturb.update_noise_std = 0.05;
  o.perturb.init_noise_rate = 0.2;
  o.perturb.init_noise_std = 0.1;
  ObstacleConfig obstacles{{{10, 10, 4}}, {}};
  Rng r1(42), r2(42), r3(42);
  const auto a = backward<double>(c.rules, c.init, obstacles, c.loss, r1, o);
  const auto b = backward<double>(c.rules, c.init, obstacles, c.loss, r2, o);
  CHECK(a.first == b.first);
  CHECK((flatten(a.second).array() == flatten(b.second).array()).all());
  o.checkpoint_every = 3;
  const auto k = backward<double>(c.rules, c.init, obstacles, c.loss, r3, o);
  CHECK(k.first == a.first);
  CHECK((flatten(k.second) - flatten(a.second)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("backward: loss matches the forward rollout under the same stream") {
  const GradientCase c = make_gradient_case(7);
  DiffOptions o = options_for(c);
  o.perturb.update_mask_rate = 0.9;
  o.perturb.update_noise_rate = 0.5;
  o.perturb.update_noise_std = 0.1;
  ObstacleConfig obstacles{{{30, 30, 5}}, {1, 2}};
  Rng r1(9), r2(9);
  const double forward = forward_loss<double>(c.rules, c.init, obstacles, c.loss, r1, o);
  const double value = backward<double>(c.rules, c.init, obstacles, c.loss, r2, o).first;
  CHECK(forward == value);
}

TEST_CASE("backward: gradient check with masks, noise and obstacles") {
  // Perturbation draws are reused by the differences through a fixed seed.
  GradientCase c = make_gradient_case(8);
  DiffOptions o = options_for(c);
  o.perturb.update_mask_rate = 0.7;
  ObstacleConfig obstacles{{{8, 30, 5}}, {}};
  Rng rng(5);
  const auto [value, grad] = backward<double>(c.rules, c.init, obstacles, c.loss, rng, o);
  const Eigen::VectorXd x0 = flatten(c.rules, c.init);
  const Eigen::VectorXd g = flatten(grad);
  int checked = 0;
  for (Eigen::Index idx : {Eigen::Index(10), Eigen::Index(11), Eigen::Index(12), Eigen::Index(23), Eigen::Index(1)}) {
    const double h = 1e-5;
    Eigen::VectorXd xp = x0, xm = x0;
    xp(idx) += h;
    xm(idx) -= h;
    RuleSet rp = c.rules, rm = c.rules;
    InitPattern ip = c.init, im = c.init;
    unflatten(xp, rp, ip);
    unflatten(xm, rm, im);
    Rng a(5), b(5);
    const double fp = forward_loss<double>(rp, ip, obstacles, c.loss, a, o);
    const double fm = forward_loss<double>(rm, im, obstacles, c.loss, b, o);
    const double numeric = (fp - fm) / (2 * h);
    if (std::abs(g(idx)) > 1e-6) {
      ++checked;
      INFO("index ", idx, " analytic ", g(idx), " numeric ", numeric);
      CHECK(numeric == doctest::Approx(g(idx)).epsilon(1e-3));
    }
  }
  CHECK(checked >= 3);
}

TEST_CASE("backward: unsupported configurations are rejected") {
  const GradientCase c = make_gradient_case(9);
  DiffOptions o = options_for(c);
  o.perturb.update_mask_rate = 1.4;
  Rng rng(0);
  try {
    backward<double>(c.rules, c.init, {}, c.loss, rng, o);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Unsupported);
  }
}

TEST_CASE("flatten / unflatten round trip and projection") {
  GradientCase c = make_gradient_case(10);
  const Eigen::VectorXd x = flatten(c.rules, c.init);
  CHECK(x.size() == 2 * kScalarsPerRule + 400);
  RuleSet r = c.rules;
  InitPattern i = c.init;
  unflatten(x * 3.0, r, i);
  ParamRanges ranges;
  ranges.R_min = 2;
  project(r, i, ranges);
  for (const Rule& rule : r.rules) {
    CHECK(rule.r <= 1.0);
    CHECK(rule.mu <= 0.5);
    CHECK(rule.sigma <= 0.18);
  }
  CHECK(i.values.maxCoeff() <= 1.0);
  unflatten(x, r, i);
  CHECK(r == c.rules);
}

TEST_CASE("descend: loss decreases on a warm-started configuration") {
  int improved = 0;
  const int fixtures = 5;
  for (int s = 0; s < fixtures; ++s) {
    GradientCase c = make_gradient_case(100 + s, 48, 10);
    DiffOptions o = options_for(c);
    DescentConfig cfg;
    cfg.steps = 25;
    cfg.ranges.R_min = 2;
    Rng rng(s);
    const auto result =
        descend<double>(c.rules, c.init, c.loss, [](Rng&) { return ObstacleConfig{}; }, rng, o, cfg);
    REQUIRE(result.losses.size() == 25);
    if (result.losses.back() < result.losses.front()) {
      ++improved;
    }
  }
  CHECK(improved >= 4);
}
