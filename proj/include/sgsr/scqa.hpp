#pragma once

// Spatial co-query attention. Each encoder map is split into a low-pass
// appearance map (area pooling) and the residual structure; CQA then runs with
// one token per spatial position for structure and per pooled cell for
// appearance.

#include <array>
#include <cstddef>
#include <string>

#include "sgsr/attention.hpp"
#include "sgsr/nn.hpp"
#include "sgsr/tensor.hpp"

namespace sgsr {

struct SpatialSplit {
  Tensor appearance;  // [d, h_a, w_a]
  Tensor structure;   // [d, H_f, W_f]
};

/// appearance = area_down(x), structure = x - bilinear_up(appearance).
/// Throws ConfigError if the pooled size exceeds or does not divide the input.
SpatialSplit spatial_split(const Tensor& x, std::size_t pooled_h, std::size_t pooled_w);

/// Pooled appearance extent at pyramid `level` for a feature extent of
/// `extent`: `finest` halved per level, floored at 4, capped at the extent.
std::size_t pooled_extent(std::size_t finest, std::size_t level, std::size_t extent);

struct ScqaParams {
  CqaParams cqa;
  std::size_t pooled_h = 0;
  std::size_t pooled_w = 0;

  static ScqaParams make(ParamStore& store, const std::string& name, std::size_t channels,
                         std::size_t pooled_h, std::size_t pooled_w);
};

/// Refined structure map per contrast, each the shape of the inputs.
std::array<Tensor, 2> scqa_forward(const Tensor& x_lr, const Tensor& x_ref,
                                   const ScqaParams& params);

}  // namespace sgsr
