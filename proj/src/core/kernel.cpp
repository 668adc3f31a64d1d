#include "lenia/kernel.hpp"

#include "lenia/error.hpp"

namespace lenia {

GridD kernel_profile(const Rule& rule, int R) {
  if (R < 1) {
    throw Error(ErrorCode::InvalidArgument, "kernel radius R must be >= 1");
  }
  GridD profile = GridD::Zero(2 * R + 1, 2 * R + 1);
  for (int di = -R; di <= R; ++di) {
    for (int dj = -R; dj <= R; ++dj) {
      if (inside_kernel(di, dj, rule.r, R)) {
        profile(di + R, dj + R) = bump_profile(rule, relative_distance(di, dj, rule.r, R));
      }
    }
  }
  return profile;
}

Kernel build_kernel(const Rule& rule, int R) {
  Kernel k;
  k.radius = R;
  k.weights = kernel_profile(rule, R);
  k.raw_sum = k.weights.sum();
  if (!(k.raw_sum > 0.0) || !std::isfinite(k.raw_sum)) {
    throw Error(ErrorCode::DegenerateKernel, "degenerate kernel: profile sums to " + std::to_string(k.raw_sum));
  }
  k.weights /= k.raw_sum;
  return k;
}

}  // namespace lenia
