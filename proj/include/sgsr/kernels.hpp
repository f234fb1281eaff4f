#pragma once

// Raw numeric kernels behind the differentiable ops.
//
// Each kernel has an OpenMP-parallel version used by the engine and a plain
// serial reference kept for tests and the benchmark. Parallel versions split
// work so every output element is owned by one thread, so results do not
// depend on the thread count.

#include <cstddef>
#include <span>

namespace sgsr::kernels {

struct ConvDims {
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t height;
  std::size_t width;
};

// y[out,H,W] = conv3x3(x[in,H,W], w[out,in,3,3]) + b[out], zero padding 1.
void conv3x3(const ConvDims& d, std::span<const double> x, std::span<const double> w,
             std::span<const double> b, std::span<double> y);
void conv3x3_serial(const ConvDims& d, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y);

// gx += transposed convolution of gy.
void conv3x3_grad_input(const ConvDims& d, std::span<const double> gy,
                        std::span<const double> w, std::span<double> gx);
void conv3x3_grad_input_serial(const ConvDims& d, std::span<const double> gy,
                               std::span<const double> w, std::span<double> gx);

// gw += correlation of gy with x; gb += spatial sums of gy.
void conv3x3_grad_params(const ConvDims& d, std::span<const double> gy,
                         std::span<const double> x, std::span<double> gw,
                         std::span<double> gb);
void conv3x3_grad_params_serial(const ConvDims& d, std::span<const double> gy,
                                std::span<const double> x, std::span<double> gw,
                                std::span<double> gb);

// c[p,r] = a[p,q] * b[q,r]
void matmul(std::size_t p, std::size_t q, std::size_t r, std::span<const double> a,
            std::span<const double> b, std::span<double> c);
void matmul_serial(std::size_t p, std::size_t q, std::size_t r, std::span<const double> a,
                   std::span<const double> b, std::span<double> c);

// c[p,r] += a[p,q] * b[r,q]^T
void matmul_acc_nt(std::size_t p, std::size_t q, std::size_t r, std::span<const double> a,
                   std::span<const double> b, std::span<double> c);
// c[q,r] += a[p,q]^T * b[p,r]
void matmul_acc_tn(std::size_t p, std::size_t q, std::size_t r, std::span<const double> a,
                   std::span<const double> b, std::span<double> c);

}  // namespace sgsr::kernels
