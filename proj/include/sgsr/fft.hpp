#pragma once

#include <complex>
#include <cstddef>
#include <span>

#include "sgsr/tensor.hpp"

namespace sgsr {

namespace fft {

using cplx = std::complex<double>;

bool is_power_of_two(std::size_t n);

/// In-place unnormalized DFT. Radix-2 for power-of-two lengths, direct
/// O(n^2) sum otherwise. `inverse` flips the exponent sign only.
void transform(std::span<cplx> data, bool inverse);

/// In-place unnormalized 2D DFT of a row-major rows x cols grid.
void transform2d(std::span<cplx> data, std::size_t rows, std::size_t cols, bool inverse);

/// Weight of half-plane column v when expanding to the full plane:
/// 1 for self-conjugate columns (v == 0, and v == width/2 for even width), else 2.
double half_plane_weight(std::size_t v, std::size_t width);

}  // namespace fft

/// Differentiable 2D real FFT over the two trailing axes.
/// Input [..., h, w] with h, w powers of two; output [..., h, w/2+1].
/// Forward transform is unnormalized.
ComplexPair rfft2(const Tensor& x);

/// Inverse of rfft2 (divides by h*w). `width` is the spatial width of the
/// result; 0 means 2*(columns-1), or 1 for a single column.
Tensor irfft2(const ComplexPair& spectrum, std::size_t width = 0);

}  // namespace sgsr
