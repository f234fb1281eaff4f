#include <algorithm>
#include <complex>

#include "doctest.h"
#include "sgsr/error.hpp"
#include "sgsr/fcqa.hpp"
#include "sgsr/ops.hpp"
#include "support.hpp"

using namespace sgsr;
using namespace sgsr::test;

namespace {

using cplx = std::complex<double>;

/// Windows in row-major window order, each [C][w][w].
std::vector<std::vector<double>> windows_of(const Tensor& x, std::size_t w) {
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  std::vector<std::vector<double>> out;
  for (std::size_t wy = 0; wy < H / w; ++wy)
    for (std::size_t wx = 0; wx < W / w; ++wx) {
      std::vector<double> win(C * w * w);
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < w; ++y)
          for (std::size_t z = 0; z < w; ++z)
            win[(c * w + y) * w + z] = x.data()[(c * H + wy * w + y) * W + wx * w + z];
      out.push_back(std::move(win));
    }
  return out;
}

/// Tokens from direct DFTs: row u*(w/2+1)+v, real columns then imaginary columns.
Mat oracle_tokens(const Tensor& x, std::size_t w) {
  const std::size_t C = x.dim(0), half = w / 2 + 1;
  const auto wins = windows_of(x, w);
  const std::size_t nf = wins.size();
  Mat t(w * half, std::vector<double>(2 * nf * C));
  for (std::size_t f = 0; f < nf; ++f)
    for (std::size_t c = 0; c < C; ++c) {
      const auto spec = direct_dft2(std::span<const double>(wins[f]).subspan(c * w * w, w * w), w, w);
      for (std::size_t u = 0; u < w; ++u)
        for (std::size_t v = 0; v < half; ++v) {
          t[u * half + v][f * C + c] = spec[u * w + v].real();
          t[u * half + v][nf * C + f * C + c] = spec[u * w + v].imag();
        }
    }
  return t;
}

/// Image from half-plane tokens by explicit Hermitian synthesis.
Tensor oracle_image(const Mat& t, std::size_t C, std::size_t H, std::size_t W, std::size_t w) {
  const std::size_t half = w / 2 + 1, nwx = W / w, nf = (H / w) * nwx;
  Tensor x({C, H, W});
  for (std::size_t f = 0; f < nf; ++f)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < w; ++y)
        for (std::size_t z = 0; z < w; ++z) {
          double s = 0.0;
          for (std::size_t u = 0; u < w; ++u)
            for (std::size_t v = 0; v < half; ++v) {
              const double cv = (v == 0 || 2 * v == w) ? 1.0 : 2.0;
              const cplx bin(t[u * half + v][f * C + c], t[u * half + v][nf * C + f * C + c]);
              const double ang = 2.0 * M_PI * double(u * y + v * z) / double(w);
              s += cv * (bin * cplx(std::cos(ang), std::sin(ang))).real();
            }
          x.data()[(c * H + (f / nwx) * w + y) * W + (f % nwx) * w + z] = s / double(w * w);
        }
  return x;
}

/// Keep only full-plane bins inside the low-frequency box, then invert.
Tensor oracle_lowpass(const Tensor& x, std::size_t w, std::size_t f) {
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2), nwx = W / w, half = w / 2 + 1;
  const auto wins = windows_of(x, w);
  Tensor out({C, H, W});
  for (std::size_t k = 0; k < wins.size(); ++k)
    for (std::size_t c = 0; c < C; ++c) {
      auto spec = direct_dft2(std::span<const double>(wins[k]).subspan(c * w * w, w * w), w, w);
      for (std::size_t u = 0; u < w; ++u)
        for (std::size_t v = 0; v < w; ++v) {
          const bool keep = std::min(u, w - u) * 2 * f < w && std::min(v, w - v) * f < half;
          if (!keep) spec[u * w + v] = 0;
        }
      for (std::size_t y = 0; y < w; ++y)
        for (std::size_t z = 0; z < w; ++z) {
          cplx s = 0;
          for (std::size_t u = 0; u < w; ++u)
            for (std::size_t v = 0; v < w; ++v) {
              const double ang = 2.0 * M_PI * double(u * y + v * z) / double(w);
              s += spec[u * w + v] * cplx(std::cos(ang), std::sin(ang));
            }
          out.data()[(c * H + (k / nwx) * w + y) * W + (k % nwx) * w + z] = s.real() / double(w * w);
        }
    }
  return out;
}

Mat token_affine(const Tensor& weight, const Tensor& bias, const Mat& x) {
  const std::size_t out = weight.dim(0), in = weight.dim(1);
  Mat y(out, std::vector<double>(x[0].size()));
  for (std::size_t o = 0; o < out; ++o)
    for (std::size_t j = 0; j < x[0].size(); ++j) {
      double s = bias.data()[o];
      for (std::size_t i = 0; i < in; ++i) s += weight.data()[o * in + i] * x[i][j];
      y[o][j] = s;
    }
  return y;
}

Tensor to_tensor(const Mat& m) {
  Tensor t({m.size(), m[0].size()});
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[0].size(); ++j) t.data()[i * m[0].size() + j] = m[i][j];
  return t;
}

void zero(Tensor& t) { std::fill(t.data().begin(), t.data().end(), 0.0); }

}  // namespace

TEST_CASE("frequency tokens") {
  Rng rng(51);
  SUBCASE("constant map only has a DC token") {
    const FreqTokens t = tokenize_freq(Tensor({2, 16, 16}, 0.75), 8);
    for (std::size_t k = 0; k < t.layout.tokens; ++k)
      for (std::size_t j = 0; j < t.layout.token_width; ++j) {
        const double v = t.tokens.data()[k * t.layout.token_width + j];
        const bool real_dc = k == 0 && j < t.layout.token_width / 2;
        if (real_dc) CHECK(std::abs(v - 0.75 * 64) < 1e-12);
        else CHECK(std::abs(v) < 1e-12);
      }
  }
  SUBCASE("one window gives 40 tokens of width 2d") {
    const FreqTokens t = tokenize_freq(rand_tensor({3, 8, 8}, rng), 8);
    CHECK(t.layout.n_windows == 1);
    CHECK(t.layout.tokens == 40);
    CHECK(t.layout.token_width == 6);
    CHECK(t.tokens.shape() == Shape{40, 6});
    for (std::size_t k = 0; k < 40; ++k) {
      CHECK(t.layout.freq_index[k].first == k / 5);
      CHECK(t.layout.freq_index[k].second == k % 5);
    }
  }
  SUBCASE("matches direct DFT tokens") {
    const Tensor x = rand_tensor({3, 16, 32}, rng);
    const FreqTokens t = tokenize_freq(x, 8);
    CHECK(t.layout.n_windows == 8);
    CHECK(max_abs_diff(oracle_tokens(x, 8), t.tokens) < 1e-10);
  }
  SUBCASE("round trip") {
    for (std::size_t w : {2u, 4u, 8u, 16u}) {
      const Tensor x = rand_tensor({2, 16, 16}, rng);
      const FreqTokens t = tokenize_freq(x, w);
      CHECK(max_abs_diff(detokenize_freq(t.tokens, t.layout), x) < 1e-10);
    }
  }
  SUBCASE("invalid windows") {
    CHECK_THROWS_AS(tokenize_freq(Tensor({1, 12, 12}), 6), ConfigError);
    CHECK_THROWS_AS(tokenize_freq(Tensor({1, 12, 12}), 8), ConfigError);
    CHECK_THROWS_AS(tokenize_freq(Tensor({12, 12}), 4), ShapeError);
    const FreqTokens t = tokenize_freq(Tensor({1, 8, 8}), 8);
    CHECK_THROWS_AS(detokenize_freq(Tensor({39, 2}), t.layout), ShapeError);
  }
}

TEST_CASE("frequency split") {
  Rng rng(52);
  SUBCASE("(w=8, f=4) counts from enumerating the rule") {
    std::size_t ma = 0, ms = 0;
    for (std::size_t u = 0; u < 8; ++u)
      for (std::size_t v = 0; v < 5; ++v) {
        const bool low = std::min(u, 8 - u) * 8 < 8 && v * 4 < 5;
        (low ? ma : ms)++;
      }
    const FreqSplitIndex idx = freq_split_index(8, 4);
    CHECK(idx.appearance.size() == ma);
    CHECK(idx.structure.size() == ms);
    CHECK(ma == 2);
    CHECK(ms == 38);
    CHECK(idx.appearance == std::vector<std::size_t>{0, 1});
  }
  SUBCASE("f=2 keeps a larger low-frequency box") {
    const FreqSplitIndex idx = freq_split_index(8, 2);
    // |u| in {0,1} -> u in {0,1,7}; v*2 < 5 -> v in {0,1,2}
    CHECK(idx.appearance.size() == 9);
    CHECK(idx.structure.size() == 31);
  }
  SUBCASE("pure high-frequency tone lands in the structure set") {
    Tensor x({1, 8, 8});
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t z = 0; z < 8; ++z) x.data()[y * 8 + z] = std::cos(2 * M_PI * 3.0 * double(z) / 8.0);
    const FreqSplit s = split_freq(tokenize_freq(x, 8), 4);
    CHECK(max_abs(s.appearance) < 1e-12);
    CHECK(max_abs(s.structure) > 10.0);
  }
  SUBCASE("split then merge is the identity") {
    const FreqTokens t = tokenize_freq(rand_tensor({2, 16, 16}, rng), 8);
    for (std::size_t f : {2u, 3u, 4u}) {
      const FreqSplit s = split_freq(t, f);
      CHECK(s.appearance.dim(0) + s.structure.dim(0) == 40);
      CHECK(max_abs_diff(merge_freq(s.appearance, s.structure, s.index, 40), t.tokens) == 0.0);
    }
  }
  SUBCASE("degenerate splits") {
    CHECK_THROWS_AS(freq_split_index(8, 1), ConfigError);
    CHECK_THROWS_AS(freq_split_index(8, 0), ConfigError);
    CHECK_THROWS_AS(freq_split_index(1, 2), ConfigError);
  }
}

TEST_CASE("lowpass reconstruction matches a full-plane mask") {
  Rng rng(53);
  for (std::size_t f : {2u, 4u}) {
    const Tensor x = rand_tensor({2, 16, 16}, rng);
    CHECK(max_abs_diff(lowpass_reconstruction(x, 8, f), oracle_lowpass(x, 8, f)) < 1e-10);
  }
}

TEST_CASE("fcqa_forward") {
  Rng rng(54);
  const FcqaConfig cfg{8, 4, 0};

  SUBCASE("parameter shapes and reduced-token default") {
    ParamStore store(1);
    const FcqaParams p = FcqaParams::make(store, "fcqa", 4, 16, 16, cfg);
    CHECK(p.reduced == 2);
    CHECK(p.reduce_s.weight.shape() == Shape{2, 38});
    CHECK(p.reduce_a.weight.shape() == Shape{2, 2});
    CHECK(p.expand_s.weight.shape() == Shape{38, 2});
    CHECK(p.cqa.width == 2 * 4 * 4);
    CHECK(default_reduced_tokens(38, 2) == 2);
    CHECK(default_reduced_tokens(38, 100) == 10);
    ParamStore other(2);
    CHECK_THROWS_AS(FcqaParams::make(other, "f", 4, 16, 16, FcqaConfig{8, 4, 8}), ConfigError);
  }
  SUBCASE("step-by-step oracle 16x16 d=4 w=8 f=4 m~=2") {
    ParamStore store(3);
    const FcqaParams p = FcqaParams::make(store, "fcqa", 4, 16, 16, FcqaConfig{8, 4, 2});
    const Tensor a = rand_tensor({4, 16, 16}, rng), b = rand_tensor({4, 16, 16}, rng);
    const auto out = fcqa_forward(a, b, p);
    const std::array<const Tensor*, 2> xs{&a, &b};
    std::array<Mat, 2> low, high;
    CqaInput in;
    for (std::size_t c = 0; c < 2; ++c) {
      const Mat t = oracle_tokens(*xs[c], 8);
      for (std::size_t k = 0; k < t.size(); ++k) (k == 0 || k == 1 ? low[c] : high[c]).push_back(t[k]);
      in.structural[c] = to_tensor(token_affine(p.reduce_s.weight, p.reduce_s.bias, high[c]));
      in.appearance[c] = to_tensor(token_affine(p.reduce_a.weight, p.reduce_a.bias, low[c]));
    }
    const auto att = brute_cqa(in, p.cqa);
    for (std::size_t c = 0; c < 2; ++c) {
      const Mat expanded = token_affine(p.expand_s.weight, p.expand_s.bias, att[c]);
      Mat merged = low[c];
      merged.insert(merged.end(), expanded.begin(), expanded.end());
      CHECK(max_abs_diff(oracle_image(merged, 4, 16, 16, 8), out[c]) < 1e-9);
    }
  }
  SUBCASE("zero expansion leaves only the low-frequency image") {
    ParamStore store(4);
    FcqaParams p = FcqaParams::make(store, "fcqa", 2, 16, 16, cfg);
    zero(p.expand_s.weight);
    zero(p.expand_s.bias);
    const Tensor a = rand_tensor({2, 16, 16}, rng), b = rand_tensor({2, 16, 16}, rng);
    const auto out = fcqa_forward(a, b, p);
    CHECK(max_abs_diff(out[0], oracle_lowpass(a, 8, 4)) < 1e-9);
    CHECK(max_abs_diff(out[1], oracle_lowpass(b, 8, 4)) < 1e-9);
  }
  SUBCASE("low-frequency content passes through unchanged") {
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      ParamStore store(100 + trial);
      const FcqaParams p = FcqaParams::make(store, "fcqa", 2, 16, 16, cfg);
      const Tensor a = rand_tensor({2, 16, 16}, rng), b = rand_tensor({2, 16, 16}, rng);
      const auto out = fcqa_forward(a, b, p);
      worst = std::max({worst, max_abs_diff(lowpass_reconstruction(out[0], 8, 4), oracle_lowpass(a, 8, 4)),
                        max_abs_diff(lowpass_reconstruction(out[1], 8, 4), oracle_lowpass(b, 8, 4))});
    }
    CHECK(worst < 1e-9);
  }
  SUBCASE("constant inputs keep their per-window mean") {
    ParamStore store(5);
    const FcqaParams p = FcqaParams::make(store, "fcqa", 2, 16, 16, cfg);
    const auto out = fcqa_forward(Tensor({2, 16, 16}, 0.3), Tensor({2, 16, 16}, -0.2), p);
    const std::array<double, 2> level{0.3, -0.2};
    for (std::size_t c = 0; c < 2; ++c) {
      const auto wins = windows_of(out[c], 8);
      for (const auto& win : wins)
        for (std::size_t ch = 0; ch < 2; ++ch) {
          double m = 0.0;
          for (std::size_t i = 0; i < 64; ++i) m += win[ch * 64 + i] / 64.0;
          CHECK(std::abs(m - level[c]) < 1e-12);
        }
    }
  }
  SUBCASE("deterministic") {
    ParamStore s1(6), s2(6);
    const FcqaParams p1 = FcqaParams::make(s1, "fcqa", 2, 16, 16, cfg);
    const FcqaParams p2 = FcqaParams::make(s2, "fcqa", 2, 16, 16, cfg);
    const Tensor a = rand_tensor({2, 16, 16}, rng), b = rand_tensor({2, 16, 16}, rng);
    const auto o1 = fcqa_forward(a, b, p1), o2 = fcqa_forward(a, b, p2);
    CHECK(max_abs_diff(o1[0], o2[0]) == 0.0);
    CHECK(max_abs_diff(o1[1], o2[1]) == 0.0);
  }
  SUBCASE("gradient check end to end") {
    ParamStore store(7);
    const FcqaParams p = FcqaParams::make(store, "fcqa", 1, 8, 8, FcqaConfig{4, 2, 1});
    const Tensor a = rand_tensor({1, 8, 8}, rng, -1, 1, true), b = rand_tensor({1, 8, 8}, rng, -1, 1, true);
    const Tensor w0 = rand_tensor({1, 8, 8}, rng), w1 = rand_tensor({1, 8, 8}, rng);
    auto loss = [&] {
      const auto o = fcqa_forward(a, b, p);
      return add(sum(mul(o[0], w0)), sum(mul(o[1], w1)));
    };
    std::vector<Tensor> all = store.tensors();
    all.push_back(a);
    all.push_back(b);
    CHECK(grad_check(loss, all).max_relative_error < 1e-4);
  }
  SUBCASE("shape errors") {
    ParamStore store(8);
    const FcqaParams p = FcqaParams::make(store, "fcqa", 2, 16, 16, cfg);
    CHECK_THROWS_AS(fcqa_forward(Tensor({2, 16, 16}), Tensor({2, 8, 8}), p), ShapeError);
    CHECK_THROWS_AS(fcqa_forward(Tensor({3, 16, 16}), Tensor({3, 16, 16}), p), ShapeError);
  }
}
