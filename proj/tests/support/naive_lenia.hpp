#pragma once

// Brute-force double-precision Lenia used as an oracle: plain loops, no FFT, no library helpers.

#include "lenia/types.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace naive {

using lenia::GridD;
using lenia::Rule;

inline GridD kernel(const Rule& rule, int R) {
  GridD k = GridD::Zero(2 * R + 1, 2 * R + 1);
  const double radius = rule.r * R;
  double sum = 0.0;
  for (int i = 0; i <= 2 * R; ++i) {
    for (int j = 0; j <= 2 * R; ++j) {
      const double dist = std::sqrt(double((i - R) * (i - R) + (j - R) * (j - R)));
      if (dist > radius) {
        continue;
      }
      const double z = dist == 0.0 ? 0.0 : dist / radius;
      double v = 0.0;
      for (int q = 0; q < 3; ++q) {
        v += rule.b[q] * std::exp(-std::pow(z - rule.a[q], 2) / (2 * rule.w[q] * rule.w[q]));
      }
      k(i, j) = v;
      sum += v;
    }
  }
  return k / sum;
}

/// out(i, j) = sum_{d} k(d) * a(i - d) on a torus.
inline GridD conv_torus(const GridD& a, const GridD& k) {
  const int H = int(a.rows()), W = int(a.cols()), R = int(k.rows() / 2);
  GridD out = GridD::Zero(H, W);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      double s = 0.0;
      for (int di = -R; di <= R; ++di) {
        for (int dj = -R; dj <= R; ++dj) {
          s += k(di + R, dj + R) * a(((i - di) % H + H) % H, ((j - dj) % W + W) % W);
        }
      }
      out(i, j) = s;
    }
  }
  return out;
}

struct Trace {
  GridD final_state;
  std::vector<GridD> pre_clip;  ///< one per step
};

/// Learnable-channel-only rollout (no obstacles, no perturbations).
inline Trace run(const std::vector<Rule>& rules, int R, int T, GridD a, int steps) {
  std::vector<GridD> kernels;
  for (const Rule& r : rules) {
    kernels.push_back(kernel(r, R));
  }
  Trace trace;
  for (int t = 0; t < steps; ++t) {
    GridD update = GridD::Zero(a.rows(), a.cols());
    for (std::size_t k = 0; k < rules.size(); ++k) {
      const GridD u = conv_torus(a, kernels[k]);
      for (Eigen::Index c = 0; c < u.size(); ++c) {
        const double d = u.data()[c] - rules[k].mu;
        update.data()[c] += rules[k].h * (2 * std::exp(-d * d / (2 * rules[k].sigma * rules[k].sigma)) - 1);
      }
    }
    GridD pre = a + update / T;
    trace.pre_clip.push_back(pre);
    a = pre.max(0.0).min(1.0);
  }
  trace.final_state = a;
  return trace;
}

inline double mse(const GridD& x, const GridD& y) { return (x - y).square().mean(); }

}  // namespace naive
