#include "lenia/geometry.hpp"

#include <cmath>

namespace lenia {

Position torus_delta(const Position& from, const Position& to, GridShape shape) {
  auto wrap = [](double d, double n) {
    d = std::fmod(d, n);
    if (d > n / 2) {
      d -= n;
    } else if (d < -n / 2) {
      d += n;
    }
    return d;
  };
  return {wrap(to.x() - from.x(), shape.rows), wrap(to.y() - from.y(), shape.cols)};
}

GridD make_target_at(const Position& center, GridShape shape) {
  GridD target = GridD::Zero(shape.rows, shape.cols);
  const int i0 = std::max(0, static_cast<int>(std::floor(center.x() - 10.0)));
  const int i1 = std::min(shape.rows - 1, static_cast<int>(std::ceil(center.x() + 10.0)));
  const int j0 = std::max(0, static_cast<int>(std::floor(center.y() - 10.0)));
  const int j1 = std::min(shape.cols - 1, static_cast<int>(std::ceil(center.y() + 10.0)));
  for (int i = i0; i <= i1; ++i) {
    for (int j = j0; j <= j1; ++j) {
      const double dist = std::hypot(i - center.x(), j - center.y());
      target(i, j) = 0.9 * (0.15 * (dist < 10.0 ? 1.0 : 0.0) + 0.85 * (dist < 5.0 ? 1.0 : 0.0));
    }
  }
  return target;
}

GridD make_target(const Goal& goal, GridShape shape) { return make_target_at(denormalize(goal, shape), shape); }

GridD rasterize_disks(const std::vector<Disk>& disks, GridShape shape, bool wrap) {
  GridD mask = GridD::Zero(shape.rows, shape.cols);
  for (const Disk& d : disks) {
    const int i0 = static_cast<int>(std::floor(d.x - d.radius));
    const int i1 = static_cast<int>(std::ceil(d.x + d.radius));
    const int j0 = static_cast<int>(std::floor(d.y - d.radius));
    const int j1 = static_cast<int>(std::ceil(d.y + d.radius));
    for (int i = i0; i <= i1; ++i) {
      for (int j = j0; j <= j1; ++j) {
        const double dx = i - d.x;
        const double dy = j - d.y;
        if (dx * dx + dy * dy >= d.radius * d.radius) {
          continue;
        }
        int gi = i;
        int gj = j;
        if (wrap) {
          gi = ((i % shape.rows) + shape.rows) % shape.rows;
          gj = ((j % shape.cols) + shape.cols) % shape.cols;
        } else if (i < 0 || i >= shape.rows || j < 0 || j >= shape.cols) {
          continue;
        }
        mask(gi, gj) = 1.0;
      }
    }
  }
  return mask;
}

std::vector<Disk> sample_disks(Rng& rng, GridShape shape, int n, double radius, double x_lo_frac, double x_hi_frac) {
  std::vector<Disk> disks;
  disks.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double x = uniform(rng, x_lo_frac * shape.rows, x_hi_frac * shape.rows);
    const double y = uniform(rng, 0.0, static_cast<double>(shape.cols));
    disks.push_back({x, y, radius});
  }
  return disks;
}

GridD resize_bilinear(const GridD& src, int rows, int cols) {
  GridD out(rows, cols);
  const double sx = static_cast<double>(src.rows()) / rows;
  const double sy = static_cast<double>(src.cols()) / cols;
  const int max_i = static_cast<int>(src.rows()) - 1;
  const int max_j = static_cast<int>(src.cols()) - 1;
  for (int i = 0; i < rows; ++i) {
    const double fx = std::clamp((i + 0.5) * sx - 0.5, 0.0, static_cast<double>(max_i));
    const int x0 = static_cast<int>(std::floor(fx));
    const int x1 = std::min(x0 + 1, max_i);
    const double tx = fx - x0;
    for (int j = 0; j < cols; ++j) {
      const double fy = std::clamp((j + 0.5) * sy - 0.5, 0.0, static_cast<double>(max_j));
      const int y0 = static_cast<int>(std::floor(fy));
      const int y1 = std::min(y0 + 1, max_j);
      const double ty = fy - y0;
      const double top = (1 - ty) * src(x0, y0) + ty * src(x0, y1);
      const double bottom = (1 - ty) * src(x1, y0) + ty * src(x1, y1);
      out(i, j) = std::clamp((1 - tx) * top + tx * bottom, 0.0, 1.0);
    }
  }
  return out;
}

std::pair<RuleSet, InitPattern> rescale(const RuleSet& rules, const InitPattern& init, double factor) {
  if (!(factor > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "scale factor must be positive");
  }
  if (factor == 1.0) {
    return {rules, init};
  }
  RuleSet scaled = rules;
  scaled.R = static_cast<int>(std::lround(factor * rules.R));
  if (scaled.R < 2) {
    throw Error(ErrorCode::ScaleTooSmall, "scale too small: R would become " + std::to_string(scaled.R));
  }
  const int rows = std::max(1, static_cast<int>(std::lround(factor * init.rows())));
  const int cols = std::max(1, static_cast<int>(std::lround(factor * init.cols())));
  InitPattern out;
  out.values = resize_bilinear(init.values, rows, cols);
  const Position c = init.center();
  out.row = static_cast<int>(std::lround(c.x() - 0.5 * (rows - 1)));
  out.col = static_cast<int>(std::lround(c.y() - 0.5 * (cols - 1)));
  return {scaled, out};
}

InitPattern scaled_placement(const InitPattern& init, GridShape reference, GridShape target) {
  InitPattern out = init;
  out.row = static_cast<int>(std::floor(static_cast<double>(init.row) * target.rows / reference.rows));
  out.col = static_cast<int>(std::floor(static_cast<double>(init.col) * target.cols / reference.cols));
  return out;
}

}  // namespace lenia
