#include "lenia/render.hpp"

#include "lenia/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace lenia {

namespace {

constexpr std::array<std::array<double, 3>, 5> kRamp{{
    {0.0, 0.0, 4.0},
    {87.0, 16.0, 110.0},
    {188.0, 55.0, 84.0},
    {249.0, 142.0, 9.0},
    {252.0, 255.0, 164.0},
}};

std::array<double, 3> ramp(double v) {
  v = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0);
  const double pos = v * (kRamp.size() - 1);
  const int i = std::min(static_cast<int>(pos), static_cast<int>(kRamp.size()) - 2);
  const double t = pos - i;
  std::array<double, 3> c;
  for (int k = 0; k < 3; ++k) {
    c[k] = (1.0 - t) * kRamp[i][k] + t * kRamp[i + 1][k];
  }
  return c;
}

Rgb to_rgb(const std::array<double, 3>& c) {
  Rgb out;
  for (int k = 0; k < 3; ++k) {
    out[k] = static_cast<std::uint8_t>(std::lround(std::clamp(c[k], 0.0, 255.0)));
  }
  return out;
}

void blend(std::array<double, 3>& c, const std::array<double, 3>& toward, double weight) {
  weight = std::clamp(weight, 0.0, 1.0);
  for (int k = 0; k < 3; ++k) {
    c[k] = (1.0 - weight) * c[k] + weight * toward[k];
  }
}

void put(Image& img, int r, int col, const Rgb& rgb) {
  std::copy(rgb.begin(), rgb.end(), img.rgb.begin() + 3 * (std::size_t(r) * img.cols + col));
}

}  // namespace

Rgb colormap(double v) { return to_rgb(ramp(v)); }

Image render_state(const GridState<float>& state) {
  const GridShape s = state.shape();
  Image img{s.rows, s.cols, std::vector<std::uint8_t>(3 * std::size_t(s.rows) * s.cols)};
  for (int r = 0; r < s.rows; ++r) {
    for (int c = 0; c < s.cols; ++c) {
      std::array<double, 3> px = ramp(state.learnable()(r, c));
      if (state.n_channels() > kObstacleChannel) {
        blend(px, kObstacleColor, state.channels[kObstacleChannel](r, c));
      }
      if (state.n_channels() > kAttractorChannel) {
        blend(px, kAttractorColor, 0.5 * state.channels[kAttractorChannel](r, c));
      }
      put(img, r, c, to_rgb(px));
    }
  }
  return img;
}

void write_ppm(const fs::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  out << "P6\n" << image.cols << ' ' << image.rows << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write " + path.string());
  }
}

Image read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int maxval = 0;
  Image img;
  in >> magic >> img.cols >> img.rows >> maxval;
  in.get();
  if (!in || magic != "P6" || maxval != 255 || img.rows <= 0 || img.cols <= 0) {
    throw Error(ErrorCode::Io, "not a P6/255 image: " + path.string());
  }
  img.rgb.resize(3 * std::size_t(img.rows) * img.cols);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (!in) {
    throw Error(ErrorCode::Io, "truncated image: " + path.string());
  }
  return img;
}

std::vector<double> overlay_alphas(int n) {
  std::vector<double> a(std::max(n, 0));
  for (int k = 0; k < n; ++k) {
    a[k] = double(k + 1) / n;
  }
  return a;
}

Image trajectory_overlay(const std::vector<GridF>& layers) {
  if (layers.empty()) {
    throw Error(ErrorCode::InvalidArgument, "overlay needs at least one layer");
  }
  const int rows = static_cast<int>(layers[0].rows()), cols = static_cast<int>(layers[0].cols());
  const std::vector<double> alpha = overlay_alphas(static_cast<int>(layers.size()));
  std::vector<std::array<double, 3>> acc(std::size_t(rows) * cols, {0.0, 0.0, 0.0});
  for (std::size_t k = 0; k < layers.size(); ++k) {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const double v = std::clamp(double(layers[k](r, c)), 0.0, 1.0);
        blend(acc[std::size_t(r) * cols + c], ramp(v), alpha[k] * v);
      }
    }
  }
  Image img{rows, cols, std::vector<std::uint8_t>(3 * std::size_t(rows) * cols)};
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      put(img, r, c, to_rgb(acc[std::size_t(r) * cols + c]));
    }
  }
  return img;
}

RenderSummary render_rollout(const ParamsFile& params, const RenderOptions& options, const fs::path& out) {
  if (options.steps < 1) {
    throw Error(ErrorCode::InvalidArgument, "render needs steps >= 1");
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) {
    throw Error(ErrorCode::Io, "cannot create " + out.string() + ": " + ec.message());
  }
  SimOptions sim_options;
  sim_options.obstacle_speed = options.obstacles.speed;
  Simulator<float> sim(params.rules, options.shape, sim_options);
  RolloutSpec spec;
  spec.clear_radius = options.clear_radius;
  Rng rng = derive_rng(options.seed, "render");
  GridState<float> state =
      initial_state<float>(params.init, options.obstacles, options.shape, spec, std::max(sim.n_channels(), 3), rng);

  RenderSummary summary;
  std::vector<GridF> layers;
  const PerturbationSpec none;
  for (int t = 1; t <= options.steps; ++t) {
    sim.step(state, none, rng);
    if (options.write_frames) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%05d.ppm", t);
      write_ppm(out / name, render_state(state));
      ++summary.frames;
    }
    if (options.overlay_every > 0 && t % options.overlay_every == 0) {
      layers.push_back(state.learnable());
    }
  }
  if (!layers.empty()) {
    summary.overlay = out / "overlay.ppm";
    write_ppm(summary.overlay, trajectory_overlay(layers));
  }
  return summary;
}

}  // namespace lenia
