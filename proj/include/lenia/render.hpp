#pragma once

// PPM frames and trajectory overlays.
//
// Colormap (fixed): the learnable channel goes through a five-stop ramp, linearly
// interpolated between
//   0.00 (0, 0, 4)   0.25 (87, 16, 110)   0.50 (188, 55, 84)   0.75 (249, 142, 9)   1.00 (252, 255, 164)
// then obstacles are blended toward kObstacleColor with weight o, and the attractor toward
// kAttractorColor with weight a / 2. Inputs are clamped to [0, 1]; components are rounded.

#include "lenia/io.hpp"
#include "lenia/rollout.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace lenia {

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr std::array<double, 3> kObstacleColor{40.0, 120.0, 255.0};
inline constexpr std::array<double, 3> kAttractorColor{0.0, 200.0, 80.0};

/// Ramp color of a learnable-channel value.
Rgb colormap(double v);

struct Image {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> rgb;  ///< row-major, 3 bytes per pixel

  Rgb at(int r, int c) const {
    const std::size_t i = 3 * (std::size_t(r) * cols + c);
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
};

/// One pixel per cell; row index = x.
Image render_state(const GridState<float>& state);

/// Binary PPM (P6, maxval 255).
void write_ppm(const fs::path& path, const Image& image);
Image read_ppm(const fs::path& path);

/// Opacity of each of n overlay layers, oldest first: (k + 1) / n.
std::vector<double> overlay_alphas(int n);

/// Superposes learnable-channel snapshots over black: layer k is painted with the ramp
/// color of each cell at opacity overlay_alphas(n)[k] * value.
Image trajectory_overlay(const std::vector<GridF>& layers);

struct RenderOptions {
  GridShape shape;
  int steps = 200;
  ObstacleConfig obstacles;
  double clear_radius = 10.0;
  bool write_frames = true;
  int overlay_every = 0;  ///< 0 disables the overlay composite
  std::uint64_t seed = 0;
};

struct RenderSummary {
  int frames = 0;
  fs::path overlay;  ///< empty when disabled
};

/// Steps the pattern and writes `out/frame_NNNNN.ppm` for the states after steps 1..steps,
/// plus `out/overlay.ppm` from every `overlay_every`-th state.
RenderSummary render_rollout(const ParamsFile& params, const RenderOptions& options, const fs::path& out);

}  // namespace lenia
