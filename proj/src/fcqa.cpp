#include "sgsr/fcqa.hpp"

#include <algorithm>

#include "sgsr/error.hpp"
#include "sgsr/fft.hpp"
#include "sgsr/ops.hpp"

namespace sgsr {

FreqLayout freq_layout(std::size_t channels, std::size_t height, std::size_t width,
                       std::size_t window) {
  if (!fft::is_power_of_two(window)) {
    throw ConfigError("frequency window " + std::to_string(window) + " is not a power of two");
  }
  if (channels == 0 || height == 0 || width == 0 || height % window || width % window) {
    throw ConfigError("frequency window " + std::to_string(window) + " does not tile " +
                      std::to_string(height) + "x" + std::to_string(width));
  }
  FreqLayout l;
  l.window = window;
  l.channels = channels;
  l.height = height;
  l.width = width;
  l.n_windows = (height / window) * (width / window);
  const std::size_t half = window / 2 + 1;
  l.tokens = window * half;
  l.token_width = 2 * l.n_windows * channels;
  l.freq_index.reserve(l.tokens);
  for (std::size_t u = 0; u < window; ++u) {
    for (std::size_t v = 0; v < half; ++v) l.freq_index.emplace_back(u, v);
  }
  return l;
}

FreqTokens tokenize_freq(const Tensor& x, std::size_t window) {
  if (x.rank() != 3) throw ShapeError("tokenize_freq: expected [C,H,W], got " + shape_str(x.shape()));
  FreqTokens t;
  t.layout = freq_layout(x.dim(0), x.dim(1), x.dim(2), window);
  const FreqLayout& l = t.layout;
  const ComplexPair spec = rfft2(window_partition(x, window));
  const Shape flat{l.n_windows * l.channels, l.tokens};
  t.tokens = concat_cols({transpose(reshape(spec.real, flat)), transpose(reshape(spec.imag, flat))});
  return t;
}

Tensor detokenize_freq(const Tensor& tokens, const FreqLayout& l) {
  if (tokens.rank() != 2 || tokens.dim(0) != l.tokens || tokens.dim(1) != l.token_width) {
    throw ShapeError("detokenize_freq: expected [" + std::to_string(l.tokens) + ", " +
                     std::to_string(l.token_width) + "], got " + shape_str(tokens.shape()));
  }
  const std::size_t half_width = l.token_width / 2;
  const Shape spec_shape{l.n_windows, l.channels, l.window, l.window / 2 + 1};
  ComplexPair spec;
  spec.real = reshape(transpose(slice_cols(tokens, 0, half_width)), spec_shape);
  spec.imag = reshape(transpose(slice_cols(tokens, half_width, half_width)), spec_shape);
  return window_merge(irfft2(spec, l.window), l.height, l.width);
}

FreqSplitIndex freq_split_index(std::size_t window, std::size_t factor) {
  if (factor < 2) throw ConfigError("frequency split factor must be >= 2, got " + std::to_string(factor));
  const std::size_t half = window / 2 + 1;
  FreqSplitIndex idx;
  for (std::size_t u = 0; u < window; ++u) {
    const std::size_t au = std::min(u, window - u);
    for (std::size_t v = 0; v < half; ++v) {
      const bool low = au * 2 * factor < window && v * factor < half;
      (low ? idx.appearance : idx.structure).push_back(u * half + v);
    }
  }
  if (idx.appearance.empty() || idx.structure.empty()) {
    throw ConfigError("frequency split (w=" + std::to_string(window) + ", f=" +
                      std::to_string(factor) + ") leaves one side empty");
  }
  return idx;
}

FreqSplit split_freq(const FreqTokens& tokens, std::size_t factor) {
  FreqSplit s;
  s.index = freq_split_index(tokens.layout.window, factor);
  s.appearance = gather_rows(tokens.tokens, s.index.appearance);
  s.structure = gather_rows(tokens.tokens, s.index.structure);
  return s;
}

Tensor merge_freq(const Tensor& appearance, const Tensor& structure, const FreqSplitIndex& index,
                  std::size_t total) {
  return scatter_rows({appearance, structure}, {index.appearance, index.structure}, total);
}

std::size_t default_reduced_tokens(std::size_t m_structure, std::size_t m_appearance) {
  return std::min((m_structure + 3) / 4, m_appearance);
}

FcqaParams FcqaParams::make(ParamStore& store, const std::string& name, std::size_t channels,
                            std::size_t height, std::size_t width, const FcqaConfig& cfg) {
  FcqaParams p;
  p.config = cfg;
  p.layout = freq_layout(channels, height, width, cfg.window);
  p.index = freq_split_index(cfg.window, cfg.factor);
  const std::size_t m_s = p.index.structure.size(), m_a = p.index.appearance.size();
  p.reduced = cfg.reduced ? cfg.reduced : default_reduced_tokens(m_s, m_a);
  if (p.reduced > std::min(m_s, m_a)) {
    throw ConfigError("reduced token count " + std::to_string(p.reduced) + " exceeds min(m_S=" +
                      std::to_string(m_s) + ", m_A=" + std::to_string(m_a) + ")");
  }
  p.reduce_s = TokenLinear::make(store, name + ".reduce_s", m_s, p.reduced);
  p.reduce_a = TokenLinear::make(store, name + ".reduce_a", m_a, p.reduced);
  p.expand_s = TokenLinear::make(store, name + ".expand_s", p.reduced, m_s);
  p.cqa = CqaParams::make(store, name + ".cqa", p.layout.token_width);
  return p;
}

std::array<Tensor, 2> fcqa_forward(const Tensor& x_lr, const Tensor& x_ref,
                                   const FcqaParams& params) {
  if (x_lr.shape() != x_ref.shape()) {
    throw ShapeError("fcqa_forward: contrast shapes differ " + shape_str(x_lr.shape()) + " vs " +
                     shape_str(x_ref.shape()));
  }
  const FreqLayout& l = params.layout;
  if (x_lr.rank() != 3 || x_lr.dim(0) != l.channels || x_lr.dim(1) != l.height ||
      x_lr.dim(2) != l.width) {
    throw ShapeError("fcqa_forward: input " + shape_str(x_lr.shape()) + " does not match layout");
  }
  const std::array<const Tensor*, 2> xs{&x_lr, &x_ref};
  std::array<FreqSplit, 2> split;
  CqaInput in;
  for (std::size_t c = 0; c < 2; ++c) {
    split[c] = split_freq(tokenize_freq(*xs[c], l.window), params.config.factor);
    in.structural[c] = params.reduce_s(split[c].structure);
    in.appearance[c] = params.reduce_a(split[c].appearance);
  }
  const CqaOutput att = cqa_forward(in, params.cqa);
  std::array<Tensor, 2> out;
  for (std::size_t c = 0; c < 2; ++c) {
    const Tensor high = params.expand_s(att.refined[c]);
    out[c] = detokenize_freq(merge_freq(split[c].appearance, high, params.index, l.tokens), l);
  }
  return out;
}

Tensor lowpass_reconstruction(const Tensor& x, std::size_t window, std::size_t factor) {
  const FreqTokens t = tokenize_freq(x, window);
  const FreqSplit s = split_freq(t, factor);
  const Tensor zeros(s.structure.shape(), 0.0);
  return detokenize_freq(merge_freq(s.appearance, zeros, s.index, t.layout.tokens), t.layout);
}

}  // namespace sgsr
