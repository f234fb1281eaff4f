#include "sgsr/scqa.hpp"

#include <algorithm>

#include "sgsr/error.hpp"
#include "sgsr/ops.hpp"

namespace sgsr {

SpatialSplit spatial_split(const Tensor& x, std::size_t pooled_h, std::size_t pooled_w) {
  if (x.rank() != 3) throw ShapeError("spatial_split: expected [C,H,W], got " + shape_str(x.shape()));
  const std::size_t h = x.dim(1), w = x.dim(2);
  if (pooled_h == 0 || pooled_w == 0 || pooled_h > h || pooled_w > w) {
    throw ConfigError("spatial_split: pooled size " + std::to_string(pooled_h) + "x" +
                      std::to_string(pooled_w) + " invalid for input " + shape_str(x.shape()));
  }
  SpatialSplit s;
  s.appearance = resample(x, pooled_h, pooled_w, ResampleMode::AreaDown);
  s.structure = sub(x, resample(s.appearance, h, w, ResampleMode::BilinearUp));
  return s;
}

std::size_t pooled_extent(std::size_t finest, std::size_t level, std::size_t extent) {
  std::size_t p = finest >> std::min<std::size_t>(level, 63);
  p = std::max<std::size_t>(p, 4);
  return std::min(p, extent);
}

ScqaParams ScqaParams::make(ParamStore& store, const std::string& name, std::size_t channels,
                            std::size_t pooled_h, std::size_t pooled_w) {
  ScqaParams p;
  p.cqa = CqaParams::make(store, name + ".cqa", channels);
  p.pooled_h = pooled_h;
  p.pooled_w = pooled_w;
  return p;
}

std::array<Tensor, 2> scqa_forward(const Tensor& x_lr, const Tensor& x_ref,
                                   const ScqaParams& params) {
  if (x_lr.shape() != x_ref.shape()) {
    throw ShapeError("scqa_forward: contrast shapes differ " + shape_str(x_lr.shape()) + " vs " +
                     shape_str(x_ref.shape()));
  }
  const SpatialSplit lr = spatial_split(x_lr, params.pooled_h, params.pooled_w);
  const SpatialSplit ref = spatial_split(x_ref, params.pooled_h, params.pooled_w);
  CqaInput in;
  in.structural = {map_to_tokens(lr.structure), map_to_tokens(ref.structure)};
  in.appearance = {map_to_tokens(lr.appearance), map_to_tokens(ref.appearance)};
  const CqaOutput out = cqa_forward(in, params.cqa);
  const std::size_t h = x_lr.dim(1), w = x_lr.dim(2);
  return {tokens_to_map(out.refined[kLr], h, w), tokens_to_map(out.refined[kRef], h, w)};
}

}  // namespace sgsr
