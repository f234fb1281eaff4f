#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sgsr/attention.hpp"
#include "sgsr/grad_check.hpp"
#include "sgsr/random.hpp"
#include "sgsr/tensor.hpp"

namespace sgsr::test {

inline Tensor rand_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                          bool requires_grad = false) {
  Tensor t(shape);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  t.set_requires_grad(requires_grad);
  return t;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  return max_abs_diff(a.data(), b.data());
}

inline double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

/// Direct O(h^2 w^2) DFT of one real h x w plane, full spectrum.
inline std::vector<std::complex<double>> direct_dft2(std::span<const double> x, std::size_t h,
                                                     std::size_t w) {
  std::vector<std::complex<double>> out(h * w);
  for (std::size_t u = 0; u < h; ++u)
    for (std::size_t v = 0; v < w; ++v) {
      std::complex<double> s = 0;
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x0 = 0; x0 < w; ++x0) {
          const double ang = -2.0 * M_PI * (double(u * y) / double(h) + double(v * x0) / double(w));
          s += x[y * w + x0] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
      out[u * w + v] = s;
    }
  return out;
}

/// cos(2 pi (ky y / H + kx x / W)) as a [1, H, W] image.
inline Tensor tone_image(std::size_t H, std::size_t W, double ky, double kx) {
  Tensor t({1, H, W});
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      t.data()[y * W + x] = std::cos(2 * M_PI * (ky * double(y) / double(H) + kx * double(x) / double(W)));
  return t;
}

/// Random image whose spectrum lies strictly inside the central (H/s) x (W/s) window.
inline Tensor band_limited(std::size_t H, std::size_t W, std::size_t s, Rng& rng) {
  Tensor t({1, H, W}, rng.uniform());
  const long ly = long(H / s / 2), lx = long(W / s / 2);
  for (int term = 0; term < 12; ++term) {
    const double ky = double(long(rng.below(2 * ly - 1)) - (ly - 1));
    const double kx = double(long(rng.below(2 * lx - 1)) - (lx - 1));
    const double amp = rng.uniform(-0.3, 0.3), phase = rng.uniform(0, 2 * M_PI);
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        t.data()[y * W + x] += amp * std::cos(2 * M_PI * (ky * double(y) / double(H) + kx * double(x) / double(W)) + phase);
  }
  return t;
}

/// Plain row-major matrix helpers for oracles (no autodiff).
using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const Tensor& t) {
  Mat m(t.dim(0), std::vector<double>(t.dim(1)));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m[i][j] = t.data()[i * t.dim(1) + j];
  return m;
}

/// y = x W + b with W [in, out].
inline Mat affine(const Mat& x, const Tensor& w, const Tensor& b) {
  const std::size_t in = w.dim(0), out = w.dim(1);
  Mat y(x.size(), std::vector<double>(out));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t o = 0; o < out; ++o) {
      double s = b.data()[o];
      for (std::size_t k = 0; k < in; ++k) s += x[i][k] * w.data()[k * out + o];
      y[i][o] = s;
    }
  return y;
}

/// Brute-force single-head attention: out_i = sum_j softmax_j(q_i.k_j / sqrt(d)) v_j.
inline Mat brute_attention(const Mat& q, const Mat& k, const Mat& v) {
  const std::size_t d = q.front().size();
  Mat out(q.size(), std::vector<double>(v.front().size(), 0.0));
  for (std::size_t i = 0; i < q.size(); ++i) {
    std::vector<double> logits(k.size());
    double mx = -INFINITY;
    for (std::size_t j = 0; j < k.size(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += q[i][c] * k[j][c];
      logits[j] = s / std::sqrt(double(d));
      mx = std::max(mx, logits[j]);
    }
    double z = 0.0;
    for (auto& l : logits) z += (l = std::exp(l - mx));
    for (std::size_t j = 0; j < k.size(); ++j)
      for (std::size_t c = 0; c < out[i].size(); ++c) out[i][c] += logits[j] / z * v[j][c];
  }
  return out;
}

/// Co-query attention composed from the primitives above.
inline std::array<Mat, 2> brute_cqa(const CqaInput& in, const CqaParams& p) {
  const Mat sl = to_mat(in.structural[0]), sr = to_mat(in.structural[1]);
  Mat cat(sl.size());
  for (std::size_t i = 0; i < sl.size(); ++i) {
    cat[i] = sl[i];
    cat[i].insert(cat[i].end(), sr[i].begin(), sr[i].end());
  }
  const Mat q = affine(cat, p.coquery.weight, p.coquery.bias);
  std::array<Mat, 2> out;
  for (std::size_t c = 0; c < 2; ++c) {
    const Mat a = to_mat(in.appearance[c]);
    out[c] = brute_attention(q, affine(a, p.key[c].weight, p.key[c].bias),
                             affine(a, p.value[c].weight, p.value[c].bias));
  }
  return out;
}

inline double max_abs_diff(const Mat& a, const Tensor& b) {
  if (b.rank() != 2 || a.size() != b.dim(0)) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j)
      m = std::max(m, std::abs(a[i][j] - b.data()[i * b.dim(1) + j]));
  return m;
}

/// Direct per-window SSIM with a full 2-D Gaussian window.
inline double oracle_ssim(const Tensor& x, const Tensor& y) {
  const std::size_t H = x.dim(x.rank() - 2), W = x.dim(x.rank() - 1);
  double g[11], total = 0.0;
  for (int k = 0; k < 11; ++k) total += g[k] = std::exp(-double((k - 5) * (k - 5)) / (2 * 1.5 * 1.5));
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i + 11 <= H; ++i)
    for (std::size_t j = 0; j + 11 <= W; ++j) {
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (std::size_t a = 0; a < 11; ++a)
        for (std::size_t b = 0; b < 11; ++b) {
          const double w = g[a] * g[b] / (total * total);
          const double xv = x.data()[(i + a) * W + j + b], yv = y.data()[(i + a) * W + j + b];
          mx += w * xv;
          my += w * yv;
          xx += w * xv * xv;
          yy += w * yv * yv;
          xy += w * xv * yv;
        }
      const double vx = xx - mx * mx, vy = yy - my * my, cxy = xy - mx * my;
      acc += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return acc / double(count);
}

/// A differentiable op with input shapes and an input sampler.
struct OpCase {
  std::string name;
  std::vector<Shape> shapes;
  std::function<Tensor(const std::vector<Tensor>&)> fn;
  /// Inputs drawn from [lo, hi]; some ops need values away from kinks.
  double lo = -1.0;
  double hi = 1.0;
};

/// Every differentiable op with 8-64 element inputs.
std::vector<OpCase> op_catalog();

/// grad_check of sum(op(inputs) * fixed random weights) w.r.t. all inputs.
GradCheckResult check_op(const OpCase& op, std::uint64_t seed);

}  // namespace sgsr::test
