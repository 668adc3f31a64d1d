#pragma once

#include "lenia/types.hpp"

#include <complex>
#include <memory>

namespace lenia {

enum class Boundary { Torus, Zero };
enum class ConvBackend { Spectral, Direct };

template <typename Scalar>
using Spectrum = Eigen::Array<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Real-to-complex 2-D FFT convolution on a fixed lattice.
///
/// With `Boundary::Torus` the transform size equals the grid; with `Boundary::Zero`
/// the grid is zero-padded by `max_radius` on the high side of each axis so the
/// circular product equals a linear convolution on the grid window.
template <typename Scalar>
class SpectralConvolver {
 public:
  SpectralConvolver(GridShape grid, Boundary boundary, int max_radius);

  GridShape grid() const { return grid_; }
  GridShape transform_shape() const { return padded_; }
  Boundary boundary() const { return boundary_; }

  /// Spectrum of a centered (2R+1)^2 kernel patch embedded at circular offsets.
  Spectrum<Scalar> kernel_spectrum(const GridD& patch) const;

  Spectrum<Scalar> forward(const Grid<Scalar>& field) const;
  /// Inverse transform cropped to the grid window.
  Grid<Scalar> inverse(const Spectrum<Scalar>& spectrum) const;
  /// Inverse transform of the full transform-sized lattice (no crop).
  Grid<Scalar> inverse_full(const Spectrum<Scalar>& spectrum) const;

  /// out[x] = sum_d k[d] field[x - d]
  Grid<Scalar> convolve(const Grid<Scalar>& field, const Spectrum<Scalar>& kernel) const;
  /// Adjoint of convolve with respect to the field: out[y] = sum_d k[d] g[y + d].
  Grid<Scalar> correlate(const Grid<Scalar>& g, const Spectrum<Scalar>& kernel) const;

  /// Extracts the (2R+1)^2 centered patch of a transform-sized lattice of offsets.
  GridD extract_patch(const Grid<Scalar>& offsets, int radius) const;

 private:
  struct Plans;
  GridShape grid_;
  GridShape padded_;
  Boundary boundary_;
  std::shared_ptr<const Plans> plans_;
};

/// Brute-force convolution, out[x] = sum_d k[d] field[x - d]. The oracle for the spectral path.
template <typename Scalar>
Grid<Scalar> direct_convolve(const Grid<Scalar>& field, const GridD& patch, Boundary boundary);

extern template class SpectralConvolver<float>;
extern template class SpectralConvolver<double>;

}  // namespace lenia
