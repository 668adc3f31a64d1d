#pragma once

#include "lenia/rng.hpp"
#include "lenia/types.hpp"

#include <optional>
#include <utility>

namespace lenia {

/// Mass-weighted mean cell coordinate, without torus unwrapping. Throws EmptyPattern on zero mass.
template <typename Derived>
Position center_of_mass(const Eigen::ArrayBase<Derived>& channel);

/// Center of mass on a torus: each axis is cut at its widest empty band of the marginal mass
/// before averaging, so a localized pattern straddling the border is measured in one piece.
/// Returns nullopt on zero mass. The result lies in [0, rows) x [0, cols).
template <typename Derived>
std::optional<Position> torus_center_of_mass(const Eigen::ArrayBase<Derived>& channel);

/// Smallest displacement from `from` to `to` on a torus of the given shape.
Position torus_delta(const Position& from, const Position& to, GridShape shape);

/// 0.9 * (0.15 * [dist < 10] + 0.85 * [dist < 5]) around the denormalized goal.
GridD make_target(const Goal& goal, GridShape shape);
/// Same profile centered on an arbitrary cell-coordinate position.
GridD make_target_at(const Position& center, GridShape shape);

/// Binary mask: a cell is inside a disk iff the distance between its center and the
/// disk center is strictly below the radius. Disks wrap around on a torus.
GridD rasterize_disks(const std::vector<Disk>& disks, GridShape shape, bool wrap = true);

/// Zeroes every cell inside the init square or within `radius` (Euclidean) of it.
template <typename Scalar>
void clear_around(Grid<Scalar>& channel, const InitPattern& init, double radius);

/// n disks of the given radius with centers uniform in rows [x_lo, x_hi) and all columns.
std::vector<Disk> sample_disks(Rng& rng, GridShape shape, int n, double radius, double x_lo_frac, double x_hi_frac);

/// Writes the init pattern into `channel` at its placement (wrapping on the torus), clipped to [0, 1].
template <typename Scalar>
void stamp(Grid<Scalar>& channel, const InitPattern& init);

/// Bilinear resize (half-pixel centers, edge clamp), values clipped to [0, 1].
GridD resize_bilinear(const GridD& src, int rows, int cols);

/// Multiplies R by `factor` and resizes the init pattern around its center.
/// Throws ScaleTooSmall when round(factor * R) < 2.
std::pair<RuleSet, InitPattern> rescale(const RuleSet& rules, const InitPattern& init, double factor);

/// Init placement for a grid of a different size than the 256x256 reference layout.
InitPattern scaled_placement(const InitPattern& init, GridShape reference, GridShape target);

}  // namespace lenia

#include "lenia/geometry_impl.hpp"
