#pragma once

#include "lenia/rng.hpp"
#include "lenia/types.hpp"

namespace testing_support {

inline lenia::Rule random_rule(lenia::Rng& rng, const lenia::ParamRanges& q = {}) {
  lenia::Rule r;
  r.r = lenia::uniform(rng, q.r_min, q.r_max);
  for (int i = 0; i < lenia::kBumps; ++i) {
    r.b[i] = lenia::uniform(rng, q.b_min, q.b_max);
    r.w[i] = lenia::uniform(rng, q.w_min, q.w_max);
    r.a[i] = lenia::uniform(rng, q.a_min, q.a_max);
  }
  r.mu = lenia::uniform(rng, q.mu_min, q.mu_max);
  r.sigma = lenia::uniform(rng, q.sigma_min, q.sigma_max);
  r.h = lenia::uniform(rng, q.h_min, q.h_max);
  return r;
}

inline lenia::GridD random_grid(lenia::Rng& rng, int rows, int cols) {
  lenia::GridD g(rows, cols);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    g.data()[i] = lenia::uniform01(rng);
  }
  return g;
}

}  // namespace testing_support
