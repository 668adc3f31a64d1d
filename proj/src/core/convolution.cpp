#include "lenia/convolution.hpp"

#include "lenia/error.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace lenia {
namespace {

template <typename Scalar>
struct Fftw;

template <>
struct Fftw<double> {
  using Plan = fftw_plan;
  using Complex = fftw_complex;
  static Plan plan_r2c(int n0, int n1, double* in, Complex* out) {
    return fftw_plan_dft_r2c_2d(n0, n1, in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  static Plan plan_c2r(int n0, int n1, Complex* in, double* out) {
    return fftw_plan_dft_c2r_2d(n0, n1, in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  static void r2c(Plan p, double* in, Complex* out) { fftw_execute_dft_r2c(p, in, out); }
  static void c2r(Plan p, Complex* in, double* out) { fftw_execute_dft_c2r(p, in, out); }
};

template <>
struct Fftw<float> {
  using Plan = fftwf_plan;
  using Complex = fftwf_complex;
  static Plan plan_r2c(int n0, int n1, float* in, Complex* out) {
    return fftwf_plan_dft_r2c_2d(n0, n1, in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  static Plan plan_c2r(int n0, int n1, Complex* in, float* out) {
    return fftwf_plan_dft_c2r_2d(n0, n1, in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  static void r2c(Plan p, float* in, Complex* out) { fftwf_execute_dft_r2c(p, in, out); }
  static void c2r(Plan p, Complex* in, float* out) { fftwf_execute_dft_c2r(p, in, out); }
};

// FFTW planning is not thread-safe; execution with the new-array API is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

int wrap(int i, int n) {
  const int m = i % n;
  return m < 0 ? m + n : m;
}

}  // namespace

template <typename Scalar>
struct SpectralConvolver<Scalar>::Plans {
  typename Fftw<Scalar>::Plan r2c;
  typename Fftw<Scalar>::Plan c2r;
};

template <typename Scalar>
SpectralConvolver<Scalar>::SpectralConvolver(GridShape grid, Boundary boundary, int max_radius)
    : grid_(grid), padded_(grid), boundary_(boundary) {
  if (grid.rows < 1 || grid.cols < 1) {
    throw Error(ErrorCode::InvalidArgument, "grid must be non-empty");
  }
  if (boundary == Boundary::Zero) {
    padded_ = {grid.rows + max_radius, grid.cols + max_radius};
  } else if (2 * max_radius + 1 > std::min(grid.rows, grid.cols)) {
    throw Error(ErrorCode::InvalidArgument, "kernel radius " + std::to_string(max_radius) + " does not fit the grid");
  }

  // Plans are cached per transform size and shared by every convolver.
  using Key = std::tuple<int, int>;
  static std::map<Key, std::shared_ptr<const Plans>> cache;
  std::lock_guard lock(planner_mutex());
  auto& slot = cache[{padded_.rows, padded_.cols}];
  if (!slot) {
    Grid<Scalar> real(padded_.rows, padded_.cols);
    Spectrum<Scalar> cplx(padded_.rows, padded_.cols / 2 + 1);
    auto* c = reinterpret_cast<typename Fftw<Scalar>::Complex*>(cplx.data());
    auto plans = std::make_shared<Plans>();
    plans->r2c = Fftw<Scalar>::plan_r2c(padded_.rows, padded_.cols, real.data(), c);
    plans->c2r = Fftw<Scalar>::plan_c2r(padded_.rows, padded_.cols, c, real.data());
    slot = std::move(plans);
  }
  plans_ = slot;
}

template <typename Scalar>
Spectrum<Scalar> SpectralConvolver<Scalar>::kernel_spectrum(const GridD& patch) const {
  const int R = static_cast<int>(patch.rows() / 2);
  if (patch.rows() != patch.cols() || patch.rows() != 2 * R + 1) {
    throw Error(ErrorCode::InvalidArgument, "kernel patch must be (2R+1)x(2R+1)");
  }
  Grid<Scalar> embedded = Grid<Scalar>::Zero(padded_.rows, padded_.cols);
  for (int di = -R; di <= R; ++di) {
    for (int dj = -R; dj <= R; ++dj) {
      embedded(wrap(di, padded_.rows), wrap(dj, padded_.cols)) += static_cast<Scalar>(patch(di + R, dj + R));
    }
  }
  Spectrum<Scalar> out(padded_.rows, padded_.cols / 2 + 1);
  Fftw<Scalar>::r2c(plans_->r2c, embedded.data(), reinterpret_cast<typename Fftw<Scalar>::Complex*>(out.data()));
  return out;
}

template <typename Scalar>
Spectrum<Scalar> SpectralConvolver<Scalar>::forward(const Grid<Scalar>& field) const {
  Spectrum<Scalar> out(padded_.rows, padded_.cols / 2 + 1);
  auto* c = reinterpret_cast<typename Fftw<Scalar>::Complex*>(out.data());
  if (boundary_ == Boundary::Torus) {
    // FFTW r2c does not modify its input.
    Fftw<Scalar>::r2c(plans_->r2c, const_cast<Scalar*>(field.data()), c);
  } else {
    Grid<Scalar> padded = Grid<Scalar>::Zero(padded_.rows, padded_.cols);
    padded.topLeftCorner(grid_.rows, grid_.cols) = field;
    Fftw<Scalar>::r2c(plans_->r2c, padded.data(), c);
  }
  return out;
}

template <typename Scalar>
Grid<Scalar> SpectralConvolver<Scalar>::inverse_full(const Spectrum<Scalar>& spectrum) const {
  // c2r destroys its input.
  Spectrum<Scalar> scratch = spectrum;
  Grid<Scalar> out(padded_.rows, padded_.cols);
  Fftw<Scalar>::c2r(plans_->c2r, reinterpret_cast<typename Fftw<Scalar>::Complex*>(scratch.data()), out.data());
  out *= Scalar(1) / static_cast<Scalar>(padded_.rows * padded_.cols);
  return out;
}

template <typename Scalar>
Grid<Scalar> SpectralConvolver<Scalar>::inverse(const Spectrum<Scalar>& spectrum) const {
  if (boundary_ == Boundary::Torus) {
    return inverse_full(spectrum);
  }
  return inverse_full(spectrum).topLeftCorner(grid_.rows, grid_.cols);
}

template <typename Scalar>
Grid<Scalar> SpectralConvolver<Scalar>::convolve(const Grid<Scalar>& field, const Spectrum<Scalar>& kernel) const {
  return inverse(forward(field) * kernel);
}

template <typename Scalar>
Grid<Scalar> SpectralConvolver<Scalar>::correlate(const Grid<Scalar>& g, const Spectrum<Scalar>& kernel) const {
  return inverse(forward(g) * kernel.conjugate());
}

template <typename Scalar>
GridD SpectralConvolver<Scalar>::extract_patch(const Grid<Scalar>& offsets, int radius) const {
  GridD patch(2 * radius + 1, 2 * radius + 1);
  for (int di = -radius; di <= radius; ++di) {
    for (int dj = -radius; dj <= radius; ++dj) {
      patch(di + radius, dj + radius) = static_cast<double>(offsets(wrap(di, padded_.rows), wrap(dj, padded_.cols)));
    }
  }
  return patch;
}

template <typename Scalar>
Grid<Scalar> direct_convolve(const Grid<Scalar>& field, const GridD& patch, Boundary boundary) {
  const int rows = static_cast<int>(field.rows());
  const int cols = static_cast<int>(field.cols());
  const int R = static_cast<int>(patch.rows() / 2);
  Grid<Scalar> out = Grid<Scalar>::Zero(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (int di = -R; di <= R; ++di) {
        int si = i - di;
        if (boundary == Boundary::Torus) {
          si = wrap(si, rows);
        } else if (si < 0 || si >= rows) {
          continue;
        }
        for (int dj = -R; dj <= R; ++dj) {
          const double k = patch(di + R, dj + R);
          if (k == 0.0) {
            continue;
          }
          int sj = j - dj;
          if (boundary == Boundary::Torus) {
            sj = wrap(sj, cols);
          } else if (sj < 0 || sj >= cols) {
            continue;
          }
          acc += k * static_cast<double>(field(si, sj));
        }
      }
      out(i, j) = static_cast<Scalar>(acc);
    }
  }
  return out;
}

template class SpectralConvolver<float>;
template class SpectralConvolver<double>;
template Grid<float> direct_convolve<float>(const Grid<float>&, const GridD&, Boundary);
template Grid<double> direct_convolve<double>(const Grid<double>&, const GridD&, Boundary);

}  // namespace lenia
