#pragma once

// Frequency co-query attention.
//
// Feature maps are cut into w x w windows and each window is transformed with
// rfft2. Frequency (u, v) becomes one token holding that bin from every window
// and channel, real parts then imaginary parts, so a token has width
// 2 * n_windows * d. Low-frequency tokens are the appearance set; the rest are
// structure. Both sets are reduced to m~ tokens by linear maps over the token
// axis, attended with CQA, expanded back, and merged with the untouched
// low-frequency tokens before the inverse transform.

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "sgsr/attention.hpp"
#include "sgsr/nn.hpp"
#include "sgsr/tensor.hpp"

namespace sgsr {

struct FreqLayout {
  std::size_t window = 0;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t n_windows = 0;
  std::size_t tokens = 0;       // m = w * (w/2 + 1)
  std::size_t token_width = 0;  // 2 * n_windows * channels
  /// (u, v) of each token row; u in [0, w), v in [0, w/2].
  std::vector<std::pair<std::size_t, std::size_t>> freq_index;
};

FreqLayout freq_layout(std::size_t channels, std::size_t height, std::size_t width,
                       std::size_t window);

struct FreqTokens {
  Tensor tokens;  // [m, token_width]
  FreqLayout layout;
};

/// Throws ConfigError unless the window is a power of two dividing both extents.
FreqTokens tokenize_freq(const Tensor& x, std::size_t window);
Tensor detokenize_freq(const Tensor& tokens, const FreqLayout& layout);

/// Token rows of the low-frequency (appearance) and high-frequency (structure)
/// sets. Token (u, v) is appearance iff min(u, w-u) * 2f < w and v * f < w/2+1.
struct FreqSplitIndex {
  std::vector<std::size_t> appearance;
  std::vector<std::size_t> structure;
};

/// Throws ConfigError if f < 2 or either side is empty.
FreqSplitIndex freq_split_index(std::size_t window, std::size_t factor);

struct FreqSplit {
  Tensor appearance;  // [m_A, token_width]
  Tensor structure;   // [m_S, token_width]
  FreqSplitIndex index;
};

FreqSplit split_freq(const FreqTokens& tokens, std::size_t factor);
/// Inverse of split_freq.
Tensor merge_freq(const Tensor& appearance, const Tensor& structure, const FreqSplitIndex& index,
                  std::size_t total);

struct FcqaConfig {
  std::size_t window = 8;
  std::size_t factor = 4;
  std::size_t reduced = 0;  // m~; 0 selects the default
};

/// Default m~ = min(ceil(m_S / 4), m_A).
std::size_t default_reduced_tokens(std::size_t m_structure, std::size_t m_appearance);

struct FcqaParams {
  FcqaConfig config;
  FreqLayout layout;
  FreqSplitIndex index;
  std::size_t reduced = 0;
  TokenLinear reduce_s;  // m_S -> m~, shared by both contrasts
  TokenLinear reduce_a;  // m_A -> m~, shared by both contrasts
  TokenLinear expand_s;  // m~ -> m_S
  CqaParams cqa;         // width token_width

  static FcqaParams make(ParamStore& store, const std::string& name, std::size_t channels,
                         std::size_t height, std::size_t width, const FcqaConfig& cfg);
};

std::array<Tensor, 2> fcqa_forward(const Tensor& x_lr, const Tensor& x_ref,
                                   const FcqaParams& params);

/// Image of x with only the appearance tokens kept (structure zeroed).
Tensor lowpass_reconstruction(const Tensor& x, std::size_t window, std::size_t factor);

}  // namespace sgsr
