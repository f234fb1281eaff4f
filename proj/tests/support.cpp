#include "support.hpp"

#include "sgsr/fft.hpp"
#include "sgsr/nn.hpp"
#include "sgsr/ops.hpp"

namespace sgsr::test {

std::vector<OpCase> op_catalog() {
  using V = std::vector<Tensor>;
  std::vector<OpCase> ops = {
      {"add", {{3, 4}, {3, 4}}, [](const V& x) { return add(x[0], x[1]); }},
      {"sub", {{3, 4}, {3, 4}}, [](const V& x) { return sub(x[0], x[1]); }},
      {"mul", {{3, 4}, {3, 4}}, [](const V& x) { return mul(x[0], x[1]); }},
      {"scale", {{10}}, [](const V& x) { return scale(x[0], -2.5); }},
      {"add_scalar", {{10}}, [](const V& x) { return add_scalar(x[0], 0.7); }},
      {"abs_positive", {{12}}, [](const V& x) { return abs(x[0]); }, 0.1, 1.0},
      {"abs_negative", {{12}}, [](const V& x) { return abs(x[0]); }, -1.0, -0.1},
      {"leaky_relu_positive", {{12}}, [](const V& x) { return leaky_relu(x[0]); }, 0.1, 1.0},
      {"leaky_relu_negative", {{12}}, [](const V& x) { return leaky_relu(x[0]); }, -1.0, -0.1},
      {"add_n", {{2, 5}, {2, 5}, {2, 5}}, [](const V& x) { return add_n(x); }},
      {"sum", {{9}}, [](const V& x) { return sum(x[0]); }},
      {"mean", {{9}}, [](const V& x) { return mean(x[0]); }},
      {"l1_loss", {{3, 3}, {3, 3}}, [](const V& x) { return l1_loss(x[0], x[1]); }},
      {"reshape", {{2, 6}}, [](const V& x) { return reshape(x[0], {3, 4}); }},
      {"matmul", {{3, 4}, {4, 5}}, [](const V& x) { return matmul(x[0], x[1]); }},
      {"transpose", {{3, 5}}, [](const V& x) { return transpose(x[0]); }},
      {"add_row_bias", {{4, 3}, {3}}, [](const V& x) { return add_row_bias(x[0], x[1]); }},
      {"add_col_bias", {{4, 3}, {4}}, [](const V& x) { return add_col_bias(x[0], x[1]); }},
      {"softmax_rows", {{3, 5}}, [](const V& x) { return softmax_rows(x[0]); }},
      {"concat_cols", {{3, 2}, {3, 4}}, [](const V& x) { return concat_cols(x); }},
      {"slice_cols", {{3, 6}}, [](const V& x) { return slice_cols(x[0], 2, 3); }},
      {"gather_rows", {{5, 3}}, [](const V& x) { return gather_rows(x[0], {4, 0, 2}); }},
      {"scatter_rows", {{2, 3}, {3, 3}},
       [](const V& x) { return scatter_rows(x, {{3, 0}, {1, 4, 2}}, 5); }},
      {"conv3x3", {{2, 4, 4}, {3, 2, 3, 3}, {3}},
       [](const V& x) { return conv3x3(x[0], x[1], x[2]); }},
      {"concat_channels", {{1, 3, 3}, {2, 3, 3}}, [](const V& x) { return concat_channels(x); }},
      {"pixel_shuffle", {{8, 2, 2}}, [](const V& x) { return pixel_shuffle(x[0], 2); }},
      {"area_down", {{2, 4, 4}},
       [](const V& x) { return resample(x[0], 2, 2, ResampleMode::AreaDown); }},
      {"bilinear_up", {{2, 3, 3}},
       [](const V& x) { return resample(x[0], 6, 5, ResampleMode::BilinearUp); }},
      {"map_to_tokens", {{3, 2, 4}}, [](const V& x) { return map_to_tokens(x[0]); }},
      {"tokens_to_map", {{8, 3}}, [](const V& x) { return tokens_to_map(x[0], 2, 4); }},
      {"channel_mean", {{3, 2, 4}}, [](const V& x) { return channel_mean(x[0]); }},
      {"channel_affine", {{3, 2, 4}, {3}, {3}},
       [](const V& x) { return channel_affine(x[0], x[1], x[2]); }},
      {"window_partition", {{2, 4, 8}}, [](const V& x) { return window_partition(x[0], 4); }},
      {"window_merge", {{2, 2, 4, 4}}, [](const V& x) { return window_merge(x[0], 4, 8); }},
      {"rfft2_real", {{2, 4, 4}}, [](const V& x) { return rfft2(x[0]).real; }},
      {"rfft2_imag", {{2, 4, 4}}, [](const V& x) { return rfft2(x[0]).imag; }},
      {"irfft2", {{2, 4, 3}, {2, 4, 3}},
       [](const V& x) { return irfft2(ComplexPair{x[0], x[1]}, 4); }},
  };
  return ops;
}

GradCheckResult check_op(const OpCase& op, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor> inputs;
  for (const Shape& s : op.shapes) inputs.push_back(rand_tensor(s, rng, op.lo, op.hi, true));
  Tensor probe;
  {
    NoGradGuard g;
    probe = rand_tensor(op.fn(inputs).shape(), rng);
  }
  auto loss = [&] { return sum(mul(op.fn(inputs), probe)); };
  return grad_check(loss, inputs);
}

}  // namespace sgsr::test
