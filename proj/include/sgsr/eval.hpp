#pragma once

// Image metrics, analytical attention cost model, and parameter counting.

#include <cstddef>
#include <string>

#include "sgsr/backbone.hpp"
#include "sgsr/tensor.hpp"

namespace sgsr {

/// 10 log10(peak^2 / MSE); +infinity when the images are identical.
double psnr(const Tensor& x, const Tensor& y, double peak = 1.0);

/// Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5, K1 0.01, K2 0.03,
/// dynamic range 1). The trailing two axes are the image; leading axes are
/// averaged. Throws ConfigError if either image extent is below 11.
double ssim(const Tensor& x, const Tensor& y);

enum class AttentionVariant { Cross, Scqa, Fcqa };

std::string variant_name(AttentionVariant v);
AttentionVariant parse_variant(const std::string& name);

/// Attention input geometry: feature extents, channel width, pooled
/// appearance extent, FFT window, split factor and m~ (0 = default).
struct ShapeConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channels = 32;
  std::size_t pooled = 16;
  std::size_t window = 8;
  std::size_t factor = 4;
  std::size_t reduced = 0;
  std::size_t bytes_per_scalar = 4;

  void validate() const;
};

/// Table-scale reference: 64x64 features with 32 channels (the attention
/// scale of a 128x128 input).
ShapeConfig reference_shape();

/// FLOP and activation-memory estimate. One multiply-accumulate counts as two
/// FLOPs; softmax as five FLOPs per logit. Memory counts activations only.
struct CostReport {
  AttentionVariant variant = AttentionVariant::Cross;
  ShapeConfig shape;
  double query_tokens = 0;
  double key_tokens = 0;
  double token_width = 0;
  double projection_flops = 0;  // linear maps (q/k/v, co-query, token reductions)
  double core_flops = 0;        // logits, softmax, weighted sum
  double flops = 0;             // projection_flops + core_flops
  double peak_activation_bytes = 0;
};

CostReport attention_cost(AttentionVariant variant, const ShapeConfig& shape);

std::string cost_csv_header();
std::string cost_csv_row(const CostReport& report);

/// Exact parameter total of Model(cfg), computed without building it.
std::size_t param_count(const BackboneConfig& cfg);

}  // namespace sgsr
