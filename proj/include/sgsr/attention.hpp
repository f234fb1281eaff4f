#pragma once

// Co-query attention (CQA).
//
// A single query, formed from the structural tokens of both contrasts, attends
// separately to each contrast's appearance tokens:
//
//   CoQ      = Linear_{2d->d}([X_S_lr | X_S_ref])
//   X~_c     = softmax(CoQ K_c^T / sqrt(d)) V_c,   K_c = W_K,c(X_A_c), V_c = W_V,c(X_A_c)
//
// CoQ is used directly as the query; there is no output projection.

#include <array>
#include <cstddef>
#include <string>

#include "sgsr/nn.hpp"
#include "sgsr/tensor.hpp"

namespace sgsr {

enum Contrast : std::size_t { kLr = 0, kRef = 1 };

struct CqaParams {
  std::size_t width = 0;  // d
  std::size_t heads = 1;
  Linear coquery;                 // 2d -> d
  std::array<Linear, 2> key;      // per contrast, d -> d
  std::array<Linear, 2> value;    // per contrast, d -> d

  static CqaParams make(ParamStore& store, const std::string& name, std::size_t width,
                        std::size_t heads = 1);
};

struct CqaInput {
  std::array<Tensor, 2> structural;  // N x d each
  std::array<Tensor, 2> appearance;  // n x d each
};

struct CqaOutput {
  std::array<Tensor, 2> refined;  // N x d each, one per contrast
};

/// CoQ = Linear(concat_channels(x_s_lr, x_s_ref)).
Tensor form_coquery(const Tensor& x_s_lr, const Tensor& x_s_ref, const CqaParams& params);

/// Scaled dot-product attention of the shared query against contrast c.
Tensor cqa_attend(const Tensor& coquery, const Tensor& appearance, const CqaParams& params,
                  Contrast contrast);

CqaOutput cqa_forward(const CqaInput& input, const CqaParams& params);

}  // namespace sgsr
