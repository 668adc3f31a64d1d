#include <doctest.h>

#include "lenia/error.hpp"
#include "lenia/geometry.hpp"
#include "lenia/kernel.hpp"
#include "lenia/rollout.hpp"
#include "lenia/simulator.hpp"

#include "support/naive_lenia.hpp"
#include "support/random_params.hpp"

#include <cmath>

using namespace lenia;
using testing_support::random_grid;
using testing_support::random_rule;

namespace {

Rule orbium_like() {
  Rule r;
  r.r = 1.0;
  r.b = {1.0, 0.0, 0.0};
  r.w = {0.15, 0.15, 0.15};
  r.a = {0.5, 0.0, 0.0};
  r.mu = 0.15;
  r.sigma = 0.015;
  r.h = 1.0;
  return r;
}

template <typename Scalar>
GridState<Scalar> state_from(const GridD& a, int channels = 2) {
  GridState<Scalar> s(channels, {static_cast<int>(a.rows()), static_cast<int>(a.cols())});
  s.learnable() = a.cast<Scalar>();
  return s;
}

}  // namespace

TEST_CASE("kernel: obstacle rule profile is 1 at the origin before normalization") {
  const GridD profile = kernel_profile(obstacle_rule(), kObstacleKernelRadius);
  CHECK(profile(4, 4) == 1.0);
  const Kernel k = build_kernel(obstacle_rule(), kObstacleKernelRadius);
  CHECK(k.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(k.raw_sum == doctest::Approx(profile.sum()));
}

TEST_CASE("kernel: ring profile peaks at r*R*a") {
  Rule r;
  r.r = 0.5;
  r.b = {1.0, 0.0, 0.0};
  r.a = {0.5, 0.0, 0.0};
  r.w = {0.1, 0.1, 0.1};
  const int R = 20;
  const GridD p = kernel_profile(r, R);
  Eigen::Index i = 0, j = 0;
  p.maxCoeff(&i, &j);
  CHECK(std::hypot(double(i - R), double(j - R)) == doctest::Approx(5.0));
}

TEST_CASE("kernel: normalized, zero outside r*R, equal to the naive construction") {
  Rng rng(11);
  for (int n = 0; n < 200; ++n) {
    Rule rule = random_rule(rng);
    rule.r = uniform(rng, 0.1, 1.0);
    rule.b[0] = uniform(rng, 0.1, 1.0);
    const int R = uniform_int(rng, 2, 40);
    const Kernel k = build_kernel(rule, R);
    CHECK(std::abs(k.weights.sum() - 1.0) < 1e-6);
    for (int di = -R; di <= R; ++di) {
      for (int dj = -R; dj <= R; ++dj) {
        if (std::hypot(di, dj) > rule.r * R + 1e-9) {
          CHECK(k.weights(di + R, dj + R) == 0.0);
        }
      }
    }
    CHECK((k.weights - naive::kernel(rule, R)).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("kernel: all-zero profile is degenerate") {
  Rule r;
  r.b = {0.0, 0.0, 0.0};
  try {
    build_kernel(r, 10);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateKernel);
  }
}

TEST_CASE("growth and obstacle growth values") {
  CHECK(growth(0.3, 0.3, 0.1) == 1.0);
  CHECK(growth(0.3 + 10 * 0.1, 0.3, 0.1) == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(growth(0.4, 0.3, 0.1) == doctest::Approx(0.2130613194).epsilon(1e-9));
  CHECK(obstacle_growth(0.0) == 0.0);
  CHECK(std::abs(obstacle_growth(1.0) + 10.0) < 1e-6);
  CHECK(std::abs(obstacle_growth(0.5) - (-5.0 + 1e-7)) < 1e-6);
  Rng rng(3);
  for (int n = 0; n < 1000; ++n) {
    const double u = uniform(rng, -2, 3);
    const double g = growth(u, uniform(rng, 0.05, 0.5), uniform(rng, 0.001, 0.18));
    CHECK(g > -1.0 - 1e-15);
    CHECK(g <= 1.0);
  }
}

TEST_CASE_TEMPLATE("convolution: spectral equals direct on a torus", Scalar, float, double) {
  Rng rng(5);
  const double tol = std::is_same_v<Scalar, float> ? 1e-5 : 1e-10;
  for (int n = 0; n < 5; ++n) {
    const int R = uniform_int(rng, 1, 20);
    const GridShape shape{64, 48};
    SpectralConvolver<Scalar> conv(shape, Boundary::Torus, R);
    const Grid<Scalar> field = random_grid(rng, shape.rows, shape.cols).cast<Scalar>();
    const GridD patch = random_grid(rng, 2 * R + 1, 2 * R + 1) / double((2 * R + 1) * (2 * R + 1));
    const Grid<Scalar> fast = conv.convolve(field, conv.kernel_spectrum(patch));
    const Grid<Scalar> slow = direct_convolve(field, patch, Boundary::Torus);
    CHECK((fast - slow).abs().maxCoeff() < tol);
    const GridD oracle = naive::conv_torus(field.template cast<double>(), patch);
    CHECK((slow.template cast<double>() - oracle).abs().maxCoeff() < tol);
  }
}

TEST_CASE("convolution: zero boundary matches direct and correlate is the adjoint") {
  Rng rng(6);
  const GridShape shape{40, 33};
  const int R = 7;
  SpectralConvolver<double> conv(shape, Boundary::Zero, R);
  const GridD field = random_grid(rng, shape.rows, shape.cols);
  const GridD g = random_grid(rng, shape.rows, shape.cols);
  const GridD patch = random_grid(rng, 2 * R + 1, 2 * R + 1);
  const Spectrum<double> k = conv.kernel_spectrum(patch);
  CHECK((conv.convolve(field, k) - direct_convolve(field, patch, Boundary::Zero)).abs().maxCoeff() < 1e-10);
  // <g, K*f> == <K^T g, f>
  const double lhs = (g * conv.convolve(field, k)).sum();
  const double rhs = (conv.correlate(g, k) * field).sum();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("convolution: torus rejects kernels wider than the grid") {
  CHECK_THROWS_AS(SpectralConvolver<float>({16, 16}, Boundary::Torus, 8), Error);
}

TEST_CASE("step: h = 0 leaves the state unchanged") {
  RuleSet rules;
  Rule r = orbium_like();
  r.h = 0.0;
  rules.rules = {r};
  Simulator<float> sim(rules, {32, 32});
  Rng rng(1);
  GridState<float> s = state_from<float>(random_grid(rng, 32, 32));
  const GridF before = s.learnable();
  sim.step(s, {}, rng);
  CHECK((s.learnable() == before).all());
  CHECK(s.step == 1);
}

TEST_CASE("step: double-precision update equals the naive oracle") {
  Rng rng(2);
  RuleSet rules;
  rules.R = 6;
  rules.T = 4;
  for (int k = 0; k < 3; ++k) {
    Rule r = random_rule(rng);
    r.r = uniform(rng, 0.4, 1.0);
    r.sigma = uniform(rng, 0.03, 0.18);
    rules.rules.push_back(r);
  }
  const GridD a = random_grid(rng, 30, 26);
  Simulator<double> sim(rules, {30, 26});
  GridState<double> s = state_from<double>(a);
  for (int t = 0; t < 4; ++t) {
    sim.step(s, {}, rng);
  }
  const GridD expected = naive::run(rules.rules, rules.R, rules.T, a, 4).final_state;
  CHECK((s.learnable() - expected).abs().maxCoeff() < 1e-10);
}

TEST_CASE("step: spectral and direct backends agree in single precision") {
  Rng rng(4);
  RuleSet rules;
  rules.R = 10;
  rules.rules = {random_rule(rng), random_rule(rng)};
  rules.rules[0].b[0] = 0.8;
  const GridD a = random_grid(rng, 64, 64);
  SimOptions direct;
  direct.backend = ConvBackend::Direct;
  Simulator<float> fast(rules, {64, 64});
  Simulator<float> slow(rules, {64, 64}, direct);
  GridState<float> s1 = state_from<float>(a);
  GridState<float> s2 = s1;
  fast.step(s1, {}, rng);
  slow.step(s2, {}, rng);
  CHECK((s1.learnable() - s2.learnable()).abs().maxCoeff() < 1e-5f);
}

TEST_CASE("step: bounded under random parameters and perturbations") {
  Rng rng(8);
  for (int n = 0; n < 6; ++n) {
    RuleSet rules;
    rules.R = uniform_int(rng, 3, 12);
    rules.T = uniform_int(rng, 1, 10);
    for (int k = 0; k < 3; ++k) {
      Rule r = random_rule(rng);
      r.b[0] = std::max(r.b[0], 0.05);
      rules.rules.push_back(r);
    }
    PerturbationSpec p;
    p.update_mask_rate = uniform(rng, 0.2, 1.8);
    p.update_noise_rate = uniform01(rng);
    p.update_noise_std = uniform(rng, 0.0, 2.0);
    Simulator<float> sim(rules, {40, 40});
    GridState<float> s = state_from<float>(random_grid(rng, 40, 40));
    s.channels[kObstacleChannel] = rasterize_disks({{20, 20, 5}}, {40, 40}).cast<float>();
    for (int t = 0; t < 30; ++t) {
      sim.step(s, p, rng);
      for (const auto& c : s.channels) {
        REQUIRE(c.minCoeff() >= 0.0f);
        REQUIRE(c.maxCoeff() <= 1.0f);
      }
    }
  }
}

TEST_CASE("step: static obstacles are bit-identical, moving ones shift along -x") {
  RuleSet rules;
  rules.rules = {orbium_like()};
  const GridShape shape{64, 64};
  const GridF obstacles = rasterize_disks({{30, 30, 6}}, shape).cast<float>();
  Rng rng(9);
  {
    Simulator<float> sim(rules, shape);
    GridState<float> s = state_from<float>(random_grid(rng, 64, 64));
    s.channels[kObstacleChannel] = obstacles;
    for (int t = 0; t < 5; ++t) {
      sim.step(s, {}, rng);
      CHECK((s.channels[kObstacleChannel] == obstacles).all());
    }
  }
  {
    SimOptions opt;
    opt.obstacle_speed = {1, 2};
    Simulator<float> sim(rules, shape, opt);
    GridState<float> s = state_from<float>(GridD::Zero(64, 64));
    s.channels[kObstacleChannel] = obstacles;
    for (int t = 0; t < 6; ++t) {
      sim.step(s, {}, rng);
    }
    // 6 steps at 1/2 cell per step = 3 cells toward lower x.
    const GridF expected = rasterize_disks({{27, 30, 6}}, shape).cast<float>();
    CHECK((s.channels[kObstacleChannel] == expected).all());
  }
}

TEST_CASE("step: obstacle sensing at 1 forces the learnable cell to 0 with T = 1") {
  RuleSet rules;
  rules.T = 1;
  rules.rules = {orbium_like()};
  const GridShape shape{48, 48};
  Simulator<float> sim(rules, shape);
  Rng rng(10);
  GridState<float> s = state_from<float>(GridD::Ones(48, 48));
  s.channels[kObstacleChannel] = rasterize_disks({{24, 24, 10}}, shape).cast<float>();
  const GridF sensed = sim.convolver().convolve(
      s.channels[kObstacleChannel], sim.convolver().kernel_spectrum(build_kernel(obstacle_rule(), 4).weights));
  sim.step(s, {}, rng);
  for (Eigen::Index i = 0; i < sensed.size(); ++i) {
    if (sensed.data()[i] >= 1.0f - 1e-6f) {
      CHECK(s.learnable().data()[i] == 0.0f);
    }
  }
}

TEST_CASE("step: determinism and identity perturbation") {
  Rng seed_rng(12);
  RuleSet rules;
  rules.R = 8;
  rules.rules = {orbium_like(), random_rule(seed_rng)};
  rules.rules[0].r = 1.0;
  const GridD a = random_grid(seed_rng, 48, 48);
  PerturbationSpec noisy;
  noisy.update_mask_rate = 0.7;
  noisy.update_noise_rate = 0.5;
  noisy.update_noise_std = 0.3;
  auto run = [&](const PerturbationSpec& p, std::uint64_t seed) {
    Simulator<float> sim(rules, {48, 48});
    GridState<float> s = state_from<float>(a);
    Rng rng(seed);
    for (int t = 0; t < 10; ++t) {
      sim.step(s, p, rng);
    }
    return s.learnable();
  };
  CHECK((run(noisy, 1) == run(noisy, 1)).all());
  CHECK(!(run(noisy, 1) == run(noisy, 2)).all());
  CHECK((run({}, 1) == run({}, 77)).all());
}

TEST_CASE("step: non-finite parameters raise numerical blowup") {
  RuleSet rules;
  Rule r = orbium_like();
  r.mu = std::nan("");
  rules.rules = {r};
  try {
    Simulator<float> sim(rules, {64, 64});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NumericalBlowup);
  }
}

TEST_CASE("rollout: one step with identity rules returns the initial state") {
  RuleSet rules;
  Rule r = orbium_like();
  r.h = 0.0;
  rules.rules = {r};
  Rng rng(13);
  InitPattern init{random_grid(rng, 40, 40), 36, 105};
  RolloutSpec spec;
  spec.steps = 1;
  spec.record = RecordPolicy::Full;
  const auto traj = rollout<float>(init, rules, {}, {256, 256}, spec, rng);
  REQUIRE(traj.states.size() == 2);
  CHECK((traj.states[0].learnable() == traj.final_state.learnable()).all());
  CHECK(traj.mass.size() == 2);
  CHECK(traj.track.size() == 2);
  CHECK(traj.track[0].x() == doctest::Approx(center_of_mass(init.values).x() + 36));

  spec.steps = 0;
  CHECK_THROWS_AS(rollout<float>(init, rules, {}, {256, 256}, spec, rng), Error);
}

TEST_CASE("rollout: obstacles are cleared around the init square") {
  RuleSet rules;
  rules.rules = {orbium_like()};
  InitPattern init{GridD::Constant(40, 40, 0.5), 36, 105};
  ObstacleConfig obstacles{{{56, 125, 10}, {56, 160, 10}, {200, 30, 10}}, {}};
  Rng rng(14);
  RolloutSpec spec;
  spec.steps = 1;
  spec.record = RecordPolicy::Full;
  const auto traj = rollout<float>(init, rules, obstacles, {256, 256}, spec, rng);
  const GridF& obs = traj.states[0].channels[kObstacleChannel];
  CHECK(obs(56, 125) == 0.0f);   // inside the square
  CHECK(obs(56, 150) == 0.0f);   // within 10 of the square's right edge at col 144
  CHECK(obs(56, 165) == 1.0f);   // further away
  CHECK(obs(200, 30) == 1.0f);
}

TEST_CASE("sample_disks: training placement lies in the right half") {
  Rng rng(15);
  const auto disks = sample_disks(rng, {256, 256}, 8, 10.0, 0.5, 1.0);
  REQUIRE(disks.size() == 8);
  for (const Disk& d : disks) {
    CHECK(d.x >= 128.0);
    CHECK(d.x < 256.0);
    CHECK(d.radius == 10.0);
  }
}

TEST_CASE("center of mass examples") {
  GridD g = GridD::Zero(64, 64);
  g(10, 20) = 1.0;
  CHECK(center_of_mass(g) == Position(10, 20));
  g.setZero();
  g(0, 0) = 1.0;
  g(0, 10) = 1.0;
  CHECK(center_of_mass(g) == Position(0, 5));
  const GridD disk = rasterize_disks({{128, 64, 12.3}}, {256, 256});
  const Position c = center_of_mass(disk);
  CHECK(std::abs(c.x() - 128) <= 0.5);
  CHECK(std::abs(c.y() - 64) <= 0.5);
  CHECK_THROWS_AS(center_of_mass(GridD::Zero(8, 8)), Error);
}

TEST_CASE("torus center of mass follows a pattern across the seam") {
  const GridShape shape{64, 64};
  const GridD wrapped = rasterize_disks({{1.0, 63.0, 4}}, shape);
  const auto c = torus_center_of_mass(wrapped);
  REQUIRE(c.has_value());
  const Position d = torus_delta({1.0, 63.0}, *c, shape);
  CHECK(std::abs(d.x()) < 1e-9);
  CHECK(std::abs(d.y()) < 1e-9);
  CHECK(!torus_center_of_mass(GridD::Zero(8, 8)).has_value());
}

TEST_CASE("make_target profile") {
  const GridShape shape{256, 256};
  const GridD t = make_target(Goal{0.0, 0.0}, shape);
  CHECK(t(128, 128) == doctest::Approx(0.9));
  CHECK(t(135, 128) == doctest::Approx(0.135));
  CHECK(t(148, 128) == 0.0);
}

TEST_CASE("rasterize: boundary distance equal to the radius is outside") {
  const GridD m = rasterize_disks({{10, 10, 3}}, {32, 32});
  CHECK(m(13, 10) == 0.0);
  CHECK(m(12, 10) == 1.0);
  CHECK(((m == 0.0) || (m == 1.0)).all());
}

TEST_CASE("rescale") {
  RuleSet rules;
  rules.R = 15;
  rules.rules = {orbium_like()};
  InitPattern init{GridD::Constant(40, 40, 0.8), 36, 105};
  {
    const auto [r, i] = rescale(rules, init, 1.0);
    CHECK(r == rules);
    CHECK((i.values == init.values).all());
  }
  {
    const auto [r, i] = rescale(rules, init, 0.5);
    CHECK(r.R == 8);
    CHECK(i.rows() == 20);
    CHECK((i.values - 0.8).abs().maxCoeff() < 1e-6);
    CHECK(std::abs(i.center().x() - init.center().x()) <= 0.5);
  }
  try {
    rescale(rules, init, 0.05);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ScaleTooSmall);
  }
}
