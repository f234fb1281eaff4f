#include "sgsr/attention.hpp"

#include <cmath>

#include "sgsr/error.hpp"
#include "sgsr/ops.hpp"

namespace sgsr {

CqaParams CqaParams::make(ParamStore& store, const std::string& name, std::size_t width,
                          std::size_t heads) {
  if (width == 0 || heads == 0 || width % heads != 0) {
    throw ConfigError("CQA: width " + std::to_string(width) + " not divisible into " +
                      std::to_string(heads) + " heads");
  }
  CqaParams p;
  p.width = width;
  p.heads = heads;
  p.coquery = Linear::make(store, name + ".coquery", 2 * width, width);
  p.key[kLr] = Linear::make(store, name + ".key_lr", width, width);
  p.value[kLr] = Linear::make(store, name + ".value_lr", width, width);
  p.key[kRef] = Linear::make(store, name + ".key_ref", width, width);
  p.value[kRef] = Linear::make(store, name + ".value_ref", width, width);
  return p;
}

static void require_tokens(const Tensor& t, std::size_t width, const char* what) {
  if (t.rank() != 2 || t.dim(1) != width) {
    throw ShapeError(std::string(what) + ": expected tokens x " + std::to_string(width) + ", got " +
                     shape_str(t.shape()));
  }
}

Tensor form_coquery(const Tensor& x_s_lr, const Tensor& x_s_ref, const CqaParams& params) {
  require_tokens(x_s_lr, params.width, "form_coquery (lr)");
  require_tokens(x_s_ref, params.width, "form_coquery (ref)");
  if (x_s_lr.dim(0) != x_s_ref.dim(0)) {
    throw ShapeError("form_coquery: token counts differ " + shape_str(x_s_lr.shape()) + " vs " +
                     shape_str(x_s_ref.shape()));
  }
  return params.coquery(concat_cols({x_s_lr, x_s_ref}));
}

Tensor cqa_attend(const Tensor& coquery, const Tensor& appearance, const CqaParams& params,
                  Contrast contrast) {
  require_tokens(coquery, params.width, "cqa_attend (query)");
  require_tokens(appearance, params.width, "cqa_attend (appearance)");
  const Tensor keys = params.key[contrast](appearance);
  const Tensor values = params.value[contrast](appearance);
  const std::size_t hd = params.width / params.heads;
  const double inv_sqrt = 1.0 / std::sqrt(double(hd));

  auto head = [&](const Tensor& q, const Tensor& k, const Tensor& v) {
    return matmul(softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt)), v);
  };
  if (params.heads == 1) return head(coquery, keys, values);

  std::vector<Tensor> outs;
  for (std::size_t h = 0; h < params.heads; ++h) {
    outs.push_back(head(slice_cols(coquery, h * hd, hd), slice_cols(keys, h * hd, hd),
                        slice_cols(values, h * hd, hd)));
  }
  return concat_cols(outs);
}

CqaOutput cqa_forward(const CqaInput& input, const CqaParams& params) {
  for (std::size_t c = 0; c < 2; ++c) require_tokens(input.appearance[c], params.width, "cqa_forward");
  if (input.appearance[kLr].dim(0) != input.appearance[kRef].dim(0)) {
    throw ShapeError("cqa_forward: appearance token counts differ between contrasts");
  }
  const Tensor coq = form_coquery(input.structural[kLr], input.structural[kRef], params);
  CqaOutput out;
  out.refined[kLr] = cqa_attend(coq, input.appearance[kLr], params, kLr);
  out.refined[kRef] = cqa_attend(coq, input.appearance[kRef], params, kRef);
  return out;
}

}  // namespace sgsr
