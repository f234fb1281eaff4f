#pragma once

// Differentiable tensor operations. Feature maps are [channels, height, width];
// token matrices are [tokens, channels].

#include <cstddef>
#include <vector>

#include "sgsr/tensor.hpp"

namespace sgsr {

// Element-wise.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor abs(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);
Tensor add_n(const std::vector<Tensor>& terms);

// Reductions to a scalar of shape [1].
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor l1_loss(const Tensor& prediction, const Tensor& target);

/// Same values, new shape (element count must match).
Tensor reshape(const Tensor& a, Shape shape);

// Matrices.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// x[p,q] + bias[q] broadcast over rows.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);
/// x[p,q] + bias[p] broadcast over columns.
Tensor add_col_bias(const Tensor& x, const Tensor& bias);
/// Row-wise softmax, stabilized by subtracting each row maximum.
Tensor softmax_rows(const Tensor& x);
/// Concatenate matrices with equal row counts along columns.
Tensor concat_cols(const std::vector<Tensor>& parts);
/// Columns [start, start+count) of a matrix.
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);
Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows);
/// Inverse of a row partition: row parts[k][i] lands at row index[k][i] of a
/// matrix with `total` rows. Every target row must be covered exactly once.
Tensor scatter_rows(const std::vector<Tensor>& parts,
                    const std::vector<std::vector<std::size_t>>& index, std::size_t total);

// Feature maps.
/// 3x3 convolution, zero padding 1. weight [out,in,3,3], bias [out] (optional).
Tensor conv3x3(const Tensor& x, const Tensor& weight, const Tensor& bias);
/// Concatenate along the leading (channel) axis.
Tensor concat_channels(const std::vector<Tensor>& parts);
/// [C*r*r, H, W] -> [C, H*r, W*r]
Tensor pixel_shuffle(const Tensor& x, std::size_t factor);

enum class ResampleMode { AreaDown, BilinearUp };
/// Area averaging (integer factors) or bilinear interpolation with
/// align-corners-false sampling.
Tensor resample(const Tensor& x, std::size_t out_h, std::size_t out_w, ResampleMode mode);

/// [C,H,W] -> [H*W, C], tokens in row-major (h, w) order.
Tensor map_to_tokens(const Tensor& x);
/// [H*W, C] -> [C,H,W]
Tensor tokens_to_map(const Tensor& tokens, std::size_t height, std::size_t width);

/// [C,H,W] -> [C]
Tensor channel_mean(const Tensor& x);
/// out[c,h,w] = x[c,h,w] * gamma[c] + beta[c]
Tensor channel_affine(const Tensor& x, const Tensor& gamma, const Tensor& beta);

/// [C,H,W] -> [n_windows, C, w, w], windows in row-major order.
Tensor window_partition(const Tensor& x, std::size_t window);
/// [n_windows, C, w, w] -> [C,H,W]
Tensor window_merge(const Tensor& windows, std::size_t height, std::size_t width);

}  // namespace sgsr
