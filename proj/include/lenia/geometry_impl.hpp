#pragma once

// Template definitions for geometry.hpp.

#include "lenia/error.hpp"

#include <cmath>

namespace lenia {

template <typename Derived>
Position center_of_mass(const Eigen::ArrayBase<Derived>& channel) {
  double total = 0.0;
  double sx = 0.0;
  double sy = 0.0;
  for (Eigen::Index i = 0; i < channel.rows(); ++i) {
    for (Eigen::Index j = 0; j < channel.cols(); ++j) {
      const double m = static_cast<double>(channel(i, j));
      total += m;
      sx += m * static_cast<double>(i);
      sy += m * static_cast<double>(j);
    }
  }
  if (!(total > 0.0)) {
    throw Error(ErrorCode::EmptyPattern, "empty pattern: center of mass of a zero-mass channel");
  }
  return {sx / total, sy / total};
}

namespace detail {

// Mean coordinate along one axis of a circular marginal, cut at the widest zero band.
inline double circular_axis_mean(const Eigen::ArrayXd& marginal) {
  const Eigen::Index n = marginal.size();
  Eigen::Index best_len = 0;
  Eigen::Index best_end = 0;  // first index after the widest zero run
  Eigen::Index run = 0;
  for (Eigen::Index k = 0; k < 2 * n; ++k) {
    if (marginal(k % n) == 0.0) {
      ++run;
      if (run > best_len && run <= n) {
        best_len = run;
        best_end = (k + 1) % n;
      }
    } else {
      run = 0;
    }
  }
  const Eigen::Index start = best_len > 0 ? best_end : 0;
  double total = 0.0;
  double acc = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index idx = (start + k) % n;
    total += marginal(idx);
    acc += marginal(idx) * static_cast<double>(k);
  }
  const double mean = static_cast<double>(start) + acc / total;
  return std::fmod(mean, static_cast<double>(n));
}

}  // namespace detail

template <typename Derived>
std::optional<Position> torus_center_of_mass(const Eigen::ArrayBase<Derived>& channel) {
  const Eigen::ArrayXd rows = channel.template cast<double>().rowwise().sum();
  const Eigen::ArrayXd cols = channel.template cast<double>().colwise().sum().transpose();
  if (!(rows.sum() > 0.0)) {
    return std::nullopt;
  }
  return Position{detail::circular_axis_mean(rows), detail::circular_axis_mean(cols)};
}

template <typename Scalar>
void clear_around(Grid<Scalar>& channel, const InitPattern& init, double radius) {
  const double r0 = init.row;
  const double r1 = init.row + init.rows() - 1;
  const double c0 = init.col;
  const double c1 = init.col + init.cols() - 1;
  for (Eigen::Index i = 0; i < channel.rows(); ++i) {
    const double dx = i < r0 ? r0 - i : (i > r1 ? i - r1 : 0.0);
    if (dx > radius) {
      continue;
    }
    for (Eigen::Index j = 0; j < channel.cols(); ++j) {
      const double dy = j < c0 ? c0 - j : (j > c1 ? j - c1 : 0.0);
      if (dx * dx + dy * dy <= radius * radius) {
        channel(i, j) = Scalar(0);
      }
    }
  }
}

template <typename Scalar>
void stamp(Grid<Scalar>& channel, const InitPattern& init) {
  const Eigen::Index rows = channel.rows();
  const Eigen::Index cols = channel.cols();
  for (int i = 0; i < init.rows(); ++i) {
    for (int j = 0; j < init.cols(); ++j) {
      const Eigen::Index gi = ((init.row + i) % rows + rows) % rows;
      const Eigen::Index gj = ((init.col + j) % cols + cols) % cols;
      channel(gi, gj) = static_cast<Scalar>(std::clamp(init.values(i, j), 0.0, 1.0));
    }
  }
}

}  // namespace lenia
