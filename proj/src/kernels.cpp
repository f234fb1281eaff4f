#include "sgsr/kernels.hpp"

#include <algorithm>

namespace sgsr::kernels {

namespace {

// Output rows/cols touched by tap offset k in {0,1,2} with padding 1.
inline void tap_range(std::size_t k, std::size_t extent, std::size_t& lo, std::size_t& hi) {
  lo = (k == 0) ? 1 : 0;
  hi = (k == 2) ? extent - 1 : extent;
}

}  // namespace

void conv3x3(const ConvDims& d, std::span<const double> x, std::span<const double> w,
             std::span<const double> b, std::span<double> y) {
  const std::size_t H = d.height, W = d.width, plane = H * W;
  const auto Co = static_cast<std::ptrdiff_t>(d.out_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t co = 0; co < Co; ++co) {
    double* out = y.data() + co * plane;
    std::fill(out, out + plane, b.empty() ? 0.0 : b[co]);
    for (std::size_t ci = 0; ci < d.in_channels; ++ci) {
      const double* in = x.data() + ci * plane;
      const double* k = w.data() + (co * d.in_channels + ci) * 9;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        std::size_t y0, y1;
        tap_range(ky, H, y0, y1);
        for (std::size_t kx = 0; kx < 3; ++kx) {
          std::size_t x0, x1;
          tap_range(kx, W, x0, x1);
          const double wv = k[ky * 3 + kx];
          for (std::size_t yy = y0; yy < y1; ++yy) {
            double* orow = out + yy * W;
            const double* irow = in + (yy + ky - 1) * W;
            for (std::size_t xx = x0; xx < x1; ++xx) orow[xx] += wv * irow[xx + kx - 1];
          }
        }
      }
    }
  }
}

void conv3x3_serial(const ConvDims& d, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y) {
  const auto H = static_cast<long>(d.height), W = static_cast<long>(d.width);
  for (std::size_t co = 0; co < d.out_channels; ++co) {
    for (long yy = 0; yy < H; ++yy) {
      for (long xx = 0; xx < W; ++xx) {
        double acc = b.empty() ? 0.0 : b[co];
        for (std::size_t ci = 0; ci < d.in_channels; ++ci) {
          for (long ky = -1; ky <= 1; ++ky) {
            for (long kx = -1; kx <= 1; ++kx) {
              const long sy = yy + ky, sx = xx + kx;
              if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
              acc += w[((co * d.in_channels + ci) * 3 + (ky + 1)) * 3 + (kx + 1)] *
                     x[(ci * H + sy) * W + sx];
            }
          }
        }
        y[(co * H + yy) * W + xx] = acc;
      }
    }
  }
}

void conv3x3_grad_input(const ConvDims& d, std::span<const double> gy,
                        std::span<const double> w, std::span<double> gx) {
  const std::size_t H = d.height, W = d.width, plane = H * W;
  const auto Ci = static_cast<std::ptrdiff_t>(d.in_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < Ci; ++ci) {
    double* gin = gx.data() + ci * plane;
    for (std::size_t co = 0; co < d.out_channels; ++co) {
      const double* gout = gy.data() + co * plane;
      const double* k = w.data() + (co * d.in_channels + ci) * 9;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        std::size_t y0, y1;
        tap_range(ky, H, y0, y1);
        for (std::size_t kx = 0; kx < 3; ++kx) {
          std::size_t x0, x1;
          tap_range(kx, W, x0, x1);
          const double wv = k[ky * 3 + kx];
          for (std::size_t yy = y0; yy < y1; ++yy) {
            const double* grow = gout + yy * W;
            double* irow = gin + (yy + ky - 1) * W;
            for (std::size_t xx = x0; xx < x1; ++xx) irow[xx + kx - 1] += wv * grow[xx];
          }
        }
      }
    }
  }
}

void conv3x3_grad_input_serial(const ConvDims& d, std::span<const double> gy,
                               std::span<const double> w, std::span<double> gx) {
  const auto H = static_cast<long>(d.height), W = static_cast<long>(d.width);
  for (std::size_t ci = 0; ci < d.in_channels; ++ci) {
    for (long sy = 0; sy < H; ++sy) {
      for (long sx = 0; sx < W; ++sx) {
        double acc = 0.0;
        for (std::size_t co = 0; co < d.out_channels; ++co) {
          for (long ky = -1; ky <= 1; ++ky) {
            for (long kx = -1; kx <= 1; ++kx) {
              const long yy = sy - ky, xx = sx - kx;
              if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
              acc += w[((co * d.in_channels + ci) * 3 + (ky + 1)) * 3 + (kx + 1)] *
                     gy[(co * H + yy) * W + xx];
            }
          }
        }
        gx[(ci * H + sy) * W + sx] += acc;
      }
    }
  }
}

void conv3x3_grad_params(const ConvDims& d, std::span<const double> gy,
                         std::span<const double> x, std::span<double> gw,
                         std::span<double> gb) {
  const std::size_t H = d.height, W = d.width, plane = H * W;
  const auto Co = static_cast<std::ptrdiff_t>(d.out_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t co = 0; co < Co; ++co) {
    const double* gout = gy.data() + co * plane;
    if (!gb.empty()) {
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += gout[i];
      gb[co] += s;
    }
    for (std::size_t ci = 0; ci < d.in_channels; ++ci) {
      const double* in = x.data() + ci * plane;
      double* k = gw.data() + (co * d.in_channels + ci) * 9;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        std::size_t y0, y1;
        tap_range(ky, H, y0, y1);
        for (std::size_t kx = 0; kx < 3; ++kx) {
          std::size_t x0, x1;
          tap_range(kx, W, x0, x1);
          double acc = 0.0;
          for (std::size_t yy = y0; yy < y1; ++yy) {
            const double* grow = gout + yy * W;
            const double* irow = in + (yy + ky - 1) * W;
            for (std::size_t xx = x0; xx < x1; ++xx) acc += grow[xx] * irow[xx + kx - 1];
          }
          k[ky * 3 + kx] += acc;
        }
      }
    }
  }
}

void conv3x3_grad_params_serial(const ConvDims& d, std::span<const double> gy,
                                std::span<const double> x, std::span<double> gw,
                                std::span<double> gb) {
  const auto H = static_cast<long>(d.height), W = static_cast<long>(d.width);
  for (std::size_t co = 0; co < d.out_channels; ++co) {
    if (!gb.empty()) {
      for (long i = 0; i < H * W; ++i) gb[co] += gy[co * H * W + i];
    }
    for (std::size_t ci = 0; ci < d.in_channels; ++ci) {
      for (long ky = -1; ky <= 1; ++ky) {
        for (long kx = -1; kx <= 1; ++kx) {
          double acc = 0.0;
          for (long yy = 0; yy < H; ++yy) {
            for (long xx = 0; xx < W; ++xx) {
              const long sy = yy + ky, sx = xx + kx;
              if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
              acc += gy[(co * H + yy) * W + xx] * x[(ci * H + sy) * W + sx];
            }
          }
          gw[((co * d.in_channels + ci) * 3 + (ky + 1)) * 3 + (kx + 1)] += acc;
        }
      }
    }
  }
}

void matmul(std::size_t p, std::size_t q, std::size_t r, std::span<const double> a,
            std::span<const double> b, std::span<double> c) {
  const auto P = static_cast<std::ptrdiff_t>(p);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < P; ++i) {
    double* crow = c.data() + i * r;
    std::fill(crow, crow + r, 0.0);
    const double* arow = a.data() + i * q;
    for (std::size_t k = 0; k < q; ++k) {
      const double av = arow[k];
      const double* brow = b.data() + k * r;
      for (std::size_t j = 0; j < r; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_serial(std::size_t p, std::size_t q, std::size_t r, std::span<const double> a,
                   std::span<const double> b, std::span<double> c) {
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < r; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < q; ++k) acc += a[i * q + k] * b[k * r + j];
      c[i * r + j] = acc;
    }
  }
}

void matmul_acc_nt(std::size_t p, std::size_t q, std::size_t r, std::span<const double> a,
                   std::span<const double> b, std::span<double> c) {
  const auto P = static_cast<std::ptrdiff_t>(p);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < P; ++i) {
    const double* arow = a.data() + i * q;
    double* crow = c.data() + i * r;
    for (std::size_t j = 0; j < r; ++j) {
      const double* brow = b.data() + j * q;
      double acc = 0.0;
      for (std::size_t k = 0; k < q; ++k) acc += arow[k] * brow[k];
      crow[j] += acc;
    }
  }
}

void matmul_acc_tn(std::size_t p, std::size_t q, std::size_t r, std::span<const double> a,
                   std::span<const double> b, std::span<double> c) {
  const auto Q = static_cast<std::ptrdiff_t>(q);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < Q; ++k) {
    double* crow = c.data() + k * r;
    for (std::size_t i = 0; i < p; ++i) {
      const double av = a[i * q + k];
      const double* brow = b.data() + i * r;
      for (std::size_t j = 0; j < r; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace sgsr::kernels
