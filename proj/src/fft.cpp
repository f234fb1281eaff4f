#include "sgsr/fft.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "sgsr/error.hpp"

namespace sgsr {

namespace fft {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

static void radix2(std::span<cplx> a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      const cplx tw = std::polar(1.0, sign * 2.0 * std::numbers::pi * double(k) / double(len));
      for (std::size_t i = 0; i < n; i += len) {
        const cplx u = a[i + k];
        const cplx v = a[i + k + half] * tw;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

static void direct(std::span<cplx> a, bool inverse) {
  const std::size_t n = a.size();
  std::vector<cplx> out(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      acc += a[t] * std::polar(1.0, sign * 2.0 * std::numbers::pi * double((k * t) % n) / double(n));
    }
    out[k] = acc;
  }
  std::copy(out.begin(), out.end(), a.begin());
}

void transform(std::span<cplx> data, bool inverse) {
  if (data.size() <= 1) return;
  if (is_power_of_two(data.size())) {
    radix2(data, inverse);
  } else {
    direct(data, inverse);
  }
}

void transform2d(std::span<cplx> data, std::size_t rows, std::size_t cols, bool inverse) {
  if (data.size() != rows * cols) throw ShapeError("transform2d: buffer does not match grid");
  for (std::size_t r = 0; r < rows; ++r) transform(data.subspan(r * cols, cols), inverse);
  std::vector<cplx> column(rows);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) column[r] = data[r * cols + c];
    transform(column, inverse);
    for (std::size_t r = 0; r < rows; ++r) data[r * cols + c] = column[r];
  }
}

double half_plane_weight(std::size_t v, std::size_t width) {
  if (v == 0) return 1.0;
  if (width % 2 == 0 && v == width / 2) return 1.0;
  return 2.0;
}

}  // namespace fft

namespace {

struct Planes {
  std::size_t batch;
  std::size_t rows;
  std::size_t cols;
};

Planes trailing_planes(const Shape& shape, const char* what) {
  if (shape.size() < 2) throw ShapeError(std::string(what) + ": need at least 2 axes, got " + shape_str(shape));
  Planes p{1, shape[shape.size() - 2], shape.back()};
  for (std::size_t i = 0; i + 2 < shape.size(); ++i) p.batch *= shape[i];
  return p;
}

// out[b] = half-plane of FFT(real plane in[b])
void rfft_planes(const Planes& p, std::span<const double> in, std::span<double> re,
                 std::span<double> im) {
  const std::size_t hc = p.cols / 2 + 1;
  std::vector<fft::cplx> buf(p.rows * p.cols);
  for (std::size_t b = 0; b < p.batch; ++b) {
    const double* src = in.data() + b * p.rows * p.cols;
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = src[i];
    fft::transform2d(buf, p.rows, p.cols, false);
    for (std::size_t u = 0; u < p.rows; ++u) {
      for (std::size_t v = 0; v < hc; ++v) {
        const auto z = buf[u * p.cols + v];
        re[(b * p.rows + u) * hc + v] = z.real();
        im[(b * p.rows + u) * hc + v] = z.imag();
      }
    }
  }
}

// out[b] += Re(unnormalized inverse FFT of the half-plane embedded with `weight(v)`)*scale
void half_plane_synthesis(const Planes& p, std::span<const double> re, std::span<const double> im,
                          bool hermitian_weights, double scale, std::span<double> out) {
  const std::size_t hc = p.cols / 2 + 1;
  std::vector<fft::cplx> buf(p.rows * p.cols);
  for (std::size_t b = 0; b < p.batch; ++b) {
    std::fill(buf.begin(), buf.end(), fft::cplx{});
    for (std::size_t u = 0; u < p.rows; ++u) {
      for (std::size_t v = 0; v < hc && v < p.cols; ++v) {
        const double wgt = hermitian_weights ? fft::half_plane_weight(v, p.cols) : 1.0;
        const std::size_t k = (b * p.rows + u) * hc + v;
        buf[u * p.cols + v] = wgt * fft::cplx(re[k], im[k]);
      }
    }
    fft::transform2d(buf, p.rows, p.cols, true);
    double* dst = out.data() + b * p.rows * p.cols;
    for (std::size_t i = 0; i < buf.size(); ++i) dst[i] += scale * buf[i].real();
  }
}

}  // namespace

ComplexPair rfft2(const Tensor& x) {
  const Planes p = trailing_planes(x.shape(), "rfft2");
  if (!fft::is_power_of_two(p.rows) || !fft::is_power_of_two(p.cols)) {
    throw ConfigError("rfft2: window extents must be powers of two, got " + shape_str(x.shape()));
  }
  const std::size_t hc = p.cols / 2 + 1;
  Shape out_shape = x.shape();
  out_shape.back() = hc;
  std::vector<double> re(p.batch * p.rows * hc), im(re.size());
  rfft_planes(p, x.data(), re, im);

  // Real and imaginary outputs are separate graph nodes; each pulls back
  // through the adjoint: dx = Re(IFFT_unnorm(g_re + i g_im)) on the half plane.
  auto backward_re = [p](detail::Node& self) {
    auto& parent = *self.parents[0];
    if (!parent.requires_grad) return;
    std::vector<double> zeros(self.grad.size(), 0.0);
    half_plane_synthesis(p, self.grad, zeros, false, 1.0, parent.grad_buffer());
  };
  auto backward_im = [p](detail::Node& self) {
    auto& parent = *self.parents[0];
    if (!parent.requires_grad) return;
    std::vector<double> zeros(self.grad.size(), 0.0);
    half_plane_synthesis(p, zeros, self.grad, false, 1.0, parent.grad_buffer());
  };
  ComplexPair out;
  out.real = make_result(out_shape, std::move(re), {x}, backward_re);
  out.imag = make_result(out_shape, std::move(im), {x}, backward_im);
  return out;
}

Tensor irfft2(const ComplexPair& spectrum, std::size_t width) {
  check_pair(spectrum);
  const Planes half = trailing_planes(spectrum.shape(), "irfft2");
  if (width == 0) width = half.cols == 1 ? 1 : 2 * (half.cols - 1);
  if (width / 2 + 1 != half.cols) {
    throw ShapeError("irfft2: width " + std::to_string(width) + " inconsistent with " +
                     std::to_string(half.cols) + " half-plane columns");
  }
  const Planes p{half.batch, half.rows, width};
  if (!fft::is_power_of_two(p.rows) || !fft::is_power_of_two(p.cols)) {
    throw ConfigError("irfft2: window extents must be powers of two");
  }
  Shape out_shape = spectrum.shape();
  out_shape.back() = width;
  std::vector<double> out(p.batch * p.rows * p.cols, 0.0);
  const double scale = 1.0 / double(p.rows * p.cols);
  half_plane_synthesis(p, spectrum.real.data(), spectrum.imag.data(), true, scale, out);

  // Adjoint: g_re + i g_im = weight(v)/(h w) * FFT(g) on the half plane.
  auto backward = [p, scale](detail::Node& self) {
    auto& pre = *self.parents[0];
    auto& pim = *self.parents[1];
    const std::size_t hc = p.cols / 2 + 1;
    std::vector<double> re(p.batch * p.rows * hc), im(re.size());
    rfft_planes(p, self.grad, re, im);
    for (std::size_t b = 0; b < p.batch * p.rows; ++b) {
      for (std::size_t v = 0; v < hc; ++v) {
        const double wgt = fft::half_plane_weight(v, p.cols) * scale;
        re[b * hc + v] *= wgt;
        im[b * hc + v] *= wgt;
      }
    }
    if (pre.requires_grad) {
      auto& g = pre.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += re[i];
    }
    if (pim.requires_grad) {
      auto& g = pim.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += im[i];
    }
  };
  return make_result(out_shape, std::move(out), {spectrum.real, spectrum.imag}, backward);
}

}  // namespace sgsr
