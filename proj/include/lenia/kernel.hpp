#pragma once

#include "lenia/types.hpp"

#include <algorithm>
#include <cmath>

namespace lenia {

/// Normalized convolution kernel on a (2R+1)^2 patch centered at (R, R).
struct Kernel {
  GridD weights;
  double raw_sum = 0.0;  ///< sum of the profile before normalization
  int radius = 0;
};

/// Distance of cell (i, j) of the patch to its center, divided by r*R. Zero at the center.
inline double relative_distance(int di, int dj, double r, int R) {
  if (di == 0 && dj == 0) {
    return 0.0;
  }
  return std::sqrt(static_cast<double>(di * di + dj * dj)) / (r * R);
}

/// Sum of Gaussian bumps evaluated at relative distance z.
inline double bump_profile(const Rule& rule, double z) {
  double v = 0.0;
  for (int i = 0; i < kBumps; ++i) {
    const double d = z - rule.a[i];
    v += rule.b[i] * std::exp(-(d * d) / (2.0 * rule.w[i] * rule.w[i]));
  }
  return v;
}

/// True when the patch cell at offset (di, dj) lies within the kernel radius r*R.
inline bool inside_kernel(int di, int dj, double r, int R) {
  return static_cast<double>(di * di + dj * dj) <= (r * R) * (r * R);
}

/// Unnormalized profile sampled at cell-center distances, origin included.
GridD kernel_profile(const Rule& rule, int R);

/// Profile normalized to unit sum. Throws DegenerateKernel when the profile is all zero.
Kernel build_kernel(const Rule& rule, int R);

inline double growth(double u, double mu, double sigma) {
  const double d = u - mu;
  return 2.0 * std::exp(-(d * d) / (2.0 * sigma * sigma)) - 1.0;
}

inline double obstacle_growth(double u) { return -std::clamp(u - 1e-8, 0.0, 1.0) * 10.0; }

}  // namespace lenia
