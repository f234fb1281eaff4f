#include "sgsr/eval.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "sgsr/error.hpp"
#include "sgsr/fcqa.hpp"

namespace sgsr {

double psnr(const Tensor& x, const Tensor& y, double peak) {
  if (x.shape() != y.shape()) {
    throw ShapeError("psnr: shapes differ " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  }
  auto a = x.data(), b = y.data();
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
  const double mse = se / double(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

namespace {

constexpr std::size_t kSsimWin = 11;

std::array<double, kSsimWin> gaussian_window() {
  std::array<double, kSsimWin> g{};
  double total = 0.0;
  for (std::size_t i = 0; i < kSsimWin; ++i) {
    const double t = double(i) - 5.0;
    g[i] = std::exp(-t * t / (2.0 * 1.5 * 1.5));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

// Valid-mode separable Gaussian filter of an h x w image.
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t h, std::size_t w,
                                 const std::array<double, kSsimWin>& g) {
  const std::size_t oh = h - kSsimWin + 1, ow = w - kSsimWin + 1;
  std::vector<double> rows(h * ow, 0.0), out(oh * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < kSsimWin; ++k) s += g[k] * img[y * w + x + k];
      rows[y * ow + x] = s;
    }
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < kSsimWin; ++k) s += g[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

}  // namespace

double ssim(const Tensor& x, const Tensor& y) {
  if (x.shape() != y.shape()) {
    throw ShapeError("ssim: shapes differ " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  }
  if (x.rank() < 2) throw ShapeError("ssim: need at least two axes, got " + shape_str(x.shape()));
  const std::size_t h = x.dim(x.rank() - 2), w = x.dim(x.rank() - 1);
  if (h < kSsimWin || w < kSsimWin) {
    throw ConfigError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) +
                      " smaller than the 11x11 window");
  }
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const auto g = gaussian_window();
  const std::size_t plane = h * w, planes = x.numel() / plane;
  auto xd = x.data(), yd = y.data();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < planes; ++p) {
    std::vector<double> a(xd.begin() + p * plane, xd.begin() + (p + 1) * plane);
    std::vector<double> b(yd.begin() + p * plane, yd.begin() + (p + 1) * plane);
    std::vector<double> aa(plane), bb(plane), ab(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      aa[i] = a[i] * a[i];
      bb[i] = b[i] * b[i];
      ab[i] = a[i] * b[i];
    }
    const auto mu_a = filter_valid(a, h, w, g), mu_b = filter_valid(b, h, w, g);
    const auto e_aa = filter_valid(aa, h, w, g), e_bb = filter_valid(bb, h, w, g);
    const auto e_ab = filter_valid(ab, h, w, g);
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double ma = mu_a[i], mb = mu_b[i];
      const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / double(count);
}

std::string variant_name(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::Cross: return "cross_attention";
    case AttentionVariant::Scqa: return "scqa_attention";
    case AttentionVariant::Fcqa: return "fcqa_attention";
  }
  throw InternalError("variant_name: unknown variant");
}

AttentionVariant parse_variant(const std::string& name) {
  if (name == "cross_attention" || name == "cross") return AttentionVariant::Cross;
  if (name == "scqa_attention" || name == "scqa") return AttentionVariant::Scqa;
  if (name == "fcqa_attention" || name == "fcqa") return AttentionVariant::Fcqa;
  throw ConfigError("unknown attention variant '" + name + "'");
}

void ShapeConfig::validate() const {
  if (height == 0 || width == 0 || channels == 0 || bytes_per_scalar == 0) {
    throw ConfigError("shape config: extents, channels and bytes_per_scalar must be positive");
  }
  if (pooled == 0 || pooled > height || pooled > width) {
    throw ConfigError("shape config: pooled " + std::to_string(pooled) + " outside 1.." +
                      std::to_string(std::min(height, width)));
  }
  freq_layout(channels, height, width, window);
  const FreqSplitIndex idx = freq_split_index(window, factor);
  if (reduced > std::min(idx.structure.size(), idx.appearance.size())) {
    throw ConfigError("shape config: reduced " + std::to_string(reduced) + " exceeds min(m_S, m_A)");
  }
}

ShapeConfig reference_shape() { return ShapeConfig{}; }

CostReport attention_cost(AttentionVariant variant, const ShapeConfig& s) {
  s.validate();
  CostReport r;
  r.variant = variant;
  r.shape = s;
  const double d = double(s.channels);
  const double N = double(s.height) * double(s.width);
  double proj_mac = 0, core_mac = 0, softmax = 0, live = 0;
  switch (variant) {
    case AttentionVariant::Cross: {
      // Q from LR, K/V from Ref, one N x N attention.
      r.query_tokens = N;
      r.key_tokens = N;
      r.token_width = d;
      proj_mac = 3 * N * d * d;
      core_mac = 2 * N * N * d;
      softmax = 5 * N * N;
      // inputs, q/k/v, logits, probabilities, output
      live = 2 * N * d + 3 * N * d + 2 * N * N + N * d;
      break;
    }
    case AttentionVariant::Scqa: {
      const double n = double(s.pooled) * double(s.pooled);
      r.query_tokens = N;
      r.key_tokens = n;
      r.token_width = d;
      // co-query (2d -> d), then per contrast K and V over n tokens
      proj_mac = N * 2 * d * d + 2 * (2 * n * d * d);
      core_mac = 2 * (2 * N * n * d);
      softmax = 2 * 5 * N * n;
      // structure + appearance inputs, co-query, k/v, logits + probs, outputs
      live = 2 * N * d + 2 * n * d + N * d + 4 * n * d + 4 * N * n + 2 * N * d;
      break;
    }
    case AttentionVariant::Fcqa: {
      const FreqLayout l = freq_layout(s.channels, s.height, s.width, s.window);
      const FreqSplitIndex idx = freq_split_index(s.window, s.factor);
      const double ms = double(idx.structure.size()), ma = double(idx.appearance.size());
      const double mt = double(s.reduced ? s.reduced
                                         : default_reduced_tokens(idx.structure.size(),
                                                                  idx.appearance.size()));
      const double D = double(l.token_width), m = double(l.tokens);
      r.query_tokens = mt;
      r.key_tokens = mt;
      r.token_width = D;
      // per contrast: reduce_S, reduce_A, expand_S; shared co-query; per contrast K and V
      proj_mac = 2 * (mt * ms * D + mt * ma * D + ms * mt * D) + mt * 2 * D * D + 2 * (2 * mt * D * D);
      core_mac = 2 * (2 * mt * mt * D);
      softmax = 2 * 5 * mt * mt;
      // tokens, reduced sets, co-query, k/v, logits + probs, refined, expanded
      live = 2 * m * D + 4 * mt * D + mt * D + 4 * mt * D + 4 * mt * mt + 2 * mt * D + 2 * ms * D;
      break;
    }
  }
  r.projection_flops = 2 * proj_mac;
  r.core_flops = 2 * core_mac + softmax;
  r.flops = r.projection_flops + r.core_flops;
  r.peak_activation_bytes = live * double(s.bytes_per_scalar);
  return r;
}

std::string cost_csv_header() {
  return "variant,flops,bytes,projection_flops,core_flops,query_tokens,key_tokens,token_width,"
         "height,width,channels,pooled,window,factor,reduced,bytes_per_scalar";
}

std::string cost_csv_row(const CostReport& r) {
  std::ostringstream os;
  os.precision(17);
  const ShapeConfig& s = r.shape;
  os << variant_name(r.variant) << ',' << r.flops << ',' << r.peak_activation_bytes << ','
     << r.projection_flops << ',' << r.core_flops << ',' << r.query_tokens << ',' << r.key_tokens
     << ',' << r.token_width << ',' << s.height << ',' << s.width << ',' << s.channels << ','
     << s.pooled << ',' << s.window << ',' << s.factor << ',' << s.reduced << ','
     << s.bytes_per_scalar;
  return os.str();
}

namespace {
std::size_t conv_params(std::size_t in, std::size_t out) { return 9 * in * out + out; }
std::size_t linear_params(std::size_t in, std::size_t out) { return in * out + out; }
std::size_t cqa_params(std::size_t d) { return linear_params(2 * d, d) + 4 * linear_params(d, d); }
}  // namespace

std::size_t param_count(const BackboneConfig& cfg) {
  cfg.validate();
  const std::size_t L = cfg.levels;
  const auto groups = cfg.groups_per_level();
  std::size_t encoder = conv_params(1, cfg.base_channels);
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t d = cfg.level_channels(l);
    encoder += groups[l] * 4 * conv_params(d, d);
    if (l + 1 < L) encoder += conv_params(d, 2 * d);
  }
  std::size_t total = 2 * encoder;
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t d = cfg.level_channels(l);
    if (cfg.use_scqa) total += cqa_params(d);
    if (cfg.fcqa_at(l)) {
      const FreqLayout lay = freq_layout(d, cfg.level_height(l), cfg.level_width(l), cfg.window);
      const FreqSplitIndex idx = freq_split_index(cfg.window, cfg.factor);
      const std::size_t ms = idx.structure.size(), ma = idx.appearance.size();
      const std::size_t mt = cfg.reduced ? cfg.reduced : default_reduced_tokens(ms, ma);
      total += linear_params(ms, mt) + linear_params(ma, mt) + linear_params(mt, ms);
      total += cqa_params(lay.token_width);
    }
    if (l + 1 < L) total += conv_params(cfg.level_channels(l + 1), 4 * d);
    total += 2 * linear_params(d, d) + conv_params(d, d);
  }
  total += conv_params(cfg.base_channels, 1);
  return total;
}

}  // namespace sgsr
