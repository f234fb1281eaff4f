#include "sgsr/ops.hpp"

#include <algorithm>
#include <cmath>

#include "sgsr/error.hpp"
#include "sgsr/kernels.hpp"

namespace sgsr {

namespace {

using detail::Node;

// Gradient buffer of parent i, or nullptr if it does not need one.
std::vector<double>* pgrad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.grad_buffer() : nullptr;
}

const std::vector<double>& pval(const Node& self, std::size_t i) { return self.parents[i]->value; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(a.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* g = pgrad(self, k)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (auto* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = pgrad(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (auto* g = pgrad(self, 0)) {
      const auto& other = pval(self, 1);
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * other[i];
    }
    if (auto* g = pgrad(self, 1)) {
      const auto& other = pval(self, 0);
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * other[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= factor;
  return make_result(a.shape(), std::move(out), {a}, [factor](Node& self) {
    if (auto* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += factor * self.grad[i];
    }
  });
}

Tensor add_scalar(const Tensor& a, double value) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v += value;
  return make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    if (auto* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Tensor abs(const Tensor& a) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v = std::fabs(v);
  return make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    if (auto* g = pgrad(self, 0)) {
      const auto& x = pval(self, 0);
      for (std::size_t i = 0; i < g->size(); ++i) {
        const double s = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
        (*g)[i] += s * self.grad[i];
      }
    }
  });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v = v > 0.0 ? v : slope * v;
  return make_result(a.shape(), std::move(out), {a}, [slope](Node& self) {
    if (auto* g = pgrad(self, 0)) {
      const auto& x = pval(self, 0);
      for (std::size_t i = 0; i < g->size(); ++i) {
        (*g)[i] += (x[i] > 0.0 ? 1.0 : slope) * self.grad[i];
      }
    }
  });
}

Tensor add_n(const std::vector<Tensor>& terms) {
  if (terms.empty()) throw ShapeError("add_n: no terms");
  for (const auto& t : terms) require_same_shape(terms[0], t, "add_n");
  std::vector<double> out(terms[0].numel(), 0.0);
  for (const auto& t : terms) {
    auto v = t.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  return make_result(terms[0].shape(), std::move(out), terms, [](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      if (auto* g = pgrad(self, k)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_result(Shape{1}, {s}, {a}, [](Node& self) {
    if (auto* g = pgrad(self, 0)) {
      for (auto& v : *g) v += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / double(a.numel())); }

Tensor l1_loss(const Tensor& prediction, const Tensor& target) {
  return mean(abs(sub(prediction, target)));
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), {a}, [](Node& self) {
    if (auto* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: dimension mismatch " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const std::size_t p = a.dim(0), q = a.dim(1), r = b.dim(1);
  std::vector<double> out(p * r);
  kernels::matmul(p, q, r, a.data(), b.data(), out);
  return make_result(Shape{p, r}, std::move(out), {a, b}, [p, q, r](Node& self) {
    if (auto* g = pgrad(self, 0)) kernels::matmul_acc_nt(p, r, q, self.grad, pval(self, 1), *g);
    if (auto* g = pgrad(self, 1)) kernels::matmul_acc_tn(p, q, r, pval(self, 0), self.grad, *g);
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t p = a.dim(0), q = a.dim(1);
  std::vector<double> out(p * q);
  auto v = a.data();
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) out[j * p + i] = v[i * q + j];
  return make_result(Shape{q, p}, std::move(out), {a}, [p, q](Node& self) {
    if (auto* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) (*g)[i * q + j] += self.grad[j * p + i];
    }
  });
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_row_bias");
  const std::size_t p = x.dim(0), q = x.dim(1);
  if (bias.numel() != q) {
    throw ShapeError("add_row_bias: bias " + shape_str(bias.shape()) + " vs " + shape_str(x.shape()));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  auto b = bias.data();
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) out[i * q + j] += b[j];
  return make_result(x.shape(), std::move(out), {x, bias}, [p, q](Node& self) {
    if (auto* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = pgrad(self, 1)) {
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) (*g)[j] += self.grad[i * q + j];
    }
  });
}

Tensor add_col_bias(const Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_col_bias");
  const std::size_t p = x.dim(0), q = x.dim(1);
  if (bias.numel() != p) {
    throw ShapeError("add_col_bias: bias " + shape_str(bias.shape()) + " vs " + shape_str(x.shape()));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  auto b = bias.data();
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) out[i * q + j] += b[i];
  return make_result(x.shape(), std::move(out), {x, bias}, [p, q](Node& self) {
    if (auto* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = pgrad(self, 1)) {
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) (*g)[i] += self.grad[i * q + j];
    }
  });
}

Tensor softmax_rows(const Tensor& x) {
  require_rank(x, 2, "softmax_rows");
  const std::size_t p = x.dim(0), q = x.dim(1);
  auto v = x.data();
  std::vector<double> out(p * q);
  for (std::size_t i = 0; i < p; ++i) {
    const double* row = v.data() + i * q;
    double mx = row[0];
    for (std::size_t j = 0; j < q; ++j) {
      if (!std::isfinite(row[j])) throw NumericError("softmax_rows: non-finite input");
      mx = std::max(mx, row[j]);
    }
    double s = 0.0;
    for (std::size_t j = 0; j < q; ++j) s += (out[i * q + j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < q; ++j) out[i * q + j] /= s;
  }
  // Stash the probabilities for the backward pass: dx = y * (g - <g, y>).
  auto probs = std::make_shared<std::vector<double>>(out);
  return make_result(x.shape(), std::move(out), {x}, [p, q, probs](Node& self) {
    if (auto* g = pgrad(self, 0)) {
      const auto& y = *probs;
      for (std::size_t i = 0; i < p; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < q; ++j) dot += self.grad[i * q + j] * y[i * q + j];
        for (std::size_t j = 0; j < q; ++j)
          (*g)[i * q + j] += y[i * q + j] * (self.grad[i * q + j] - dot);
      }
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t p = parts[0].dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& t : parts) {
    require_rank(t, 2, "concat_cols");
    if (t.dim(0) != p) {
      throw ShapeError("concat_cols: row mismatch " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(t.shape()));
    }
    widths.push_back(t.dim(1));
    total += t.dim(1);
  }
  std::vector<double> out(p * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].data();
    for (std::size_t i = 0; i < p; ++i)
      std::copy_n(v.data() + i * widths[k], widths[k], out.data() + i * total + off);
    off += widths[k];
  }
  return make_result(Shape{p, total}, std::move(out), parts, [p, total, widths](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (auto* g = pgrad(self, k)) {
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j)
            (*g)[i * widths[k] + j] += self.grad[i * total + off + j];
      }
      off += widths[k];
    }
  });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
  require_rank(x, 2, "slice_cols");
  const std::size_t p = x.dim(0), q = x.dim(1);
  if (count == 0 || start + count > q) {
    throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of range for " + shape_str(x.shape()));
  }
  std::vector<double> out(p * count);
  auto v = x.data();
  for (std::size_t i = 0; i < p; ++i) std::copy_n(v.data() + i * q + start, count, out.data() + i * count);
  return make_result(Shape{p, count}, std::move(out), {x}, [p, q, start, count](Node& self) {
    if (auto* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < count; ++j) (*g)[i * q + start + j] += self.grad[i * count + j];
    }
  });
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
  require_rank(x, 2, "gather_rows");
  const std::size_t p = x.dim(0), q = x.dim(1);
  if (rows.empty()) throw ShapeError("gather_rows: empty row list");
  std::vector<double> out(rows.size() * q);
  auto v = x.data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= p) throw ShapeError("gather_rows: row index out of range");
    std::copy_n(v.data() + rows[i] * q, q, out.data() + i * q);
  }
  return make_result(Shape{rows.size(), q}, std::move(out), {x}, [rows, q](Node& self) {
    if (auto* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < q; ++j) (*g)[rows[i] * q + j] += self.grad[i * q + j];
    }
  });
}

Tensor scatter_rows(const std::vector<Tensor>& parts,
                    const std::vector<std::vector<std::size_t>>& index, std::size_t total) {
  if (parts.empty() || parts.size() != index.size()) {
    throw ShapeError("scatter_rows: parts and index lists differ in length");
  }
  const std::size_t q = parts[0].dim(1);
  std::vector<int> covered(total, 0);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    require_rank(parts[k], 2, "scatter_rows");
    if (parts[k].dim(1) != q || parts[k].dim(0) != index[k].size()) {
      throw ShapeError("scatter_rows: part " + std::to_string(k) + " shape " +
                       shape_str(parts[k].shape()) + " does not match its index list");
    }
    for (auto r : index[k]) {
      if (r >= total) throw ShapeError("scatter_rows: row index out of range");
      ++covered[r];
    }
  }
  for (int c : covered) {
    if (c != 1) throw InternalError("scatter_rows: index lists do not partition the rows");
  }
  std::vector<double> out(total * q);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].data();
    for (std::size_t i = 0; i < index[k].size(); ++i)
      std::copy_n(v.data() + i * q, q, out.data() + index[k][i] * q);
  }
  return make_result(Shape{total, q}, std::move(out), parts, [index, q](Node& self) {
    for (std::size_t k = 0; k < index.size(); ++k) {
      if (auto* g = pgrad(self, k)) {
        for (std::size_t i = 0; i < index[k].size(); ++i)
          for (std::size_t j = 0; j < q; ++j) (*g)[i * q + j] += self.grad[index[k][i] * q + j];
      }
    }
  });
}

Tensor conv3x3(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 3, "conv3x3");
  if (weight.rank() != 4 || weight.dim(1) != x.dim(0) || weight.dim(2) != 3 || weight.dim(3) != 3) {
    throw ShapeError("conv3x3: weight " + shape_str(weight.shape()) + " incompatible with input " +
                     shape_str(x.shape()));
  }
  if (bias.defined() && bias.numel() != weight.dim(0)) {
    throw ShapeError("conv3x3: bias " + shape_str(bias.shape()) + " vs weight " +
                     shape_str(weight.shape()));
  }
  const kernels::ConvDims d{x.dim(0), weight.dim(0), x.dim(1), x.dim(2)};
  std::vector<double> out(d.out_channels * d.height * d.width);
  kernels::conv3x3(d, x.data(), weight.data(),
                   bias.defined() ? bias.data() : std::span<const double>{}, out);
  std::vector<Tensor> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  const bool has_bias = bias.defined();
  return make_result(Shape{d.out_channels, d.height, d.width}, std::move(out), parents,
                     [d, has_bias](Node& self) {
                       if (auto* g = pgrad(self, 0)) {
                         kernels::conv3x3_grad_input(d, self.grad, pval(self, 1), *g);
                       }
                       auto* gw = pgrad(self, 1);
                       auto* gb = has_bias ? pgrad(self, 2) : nullptr;
                       if (gw || gb) {
                         std::vector<double> wtmp;
                         if (!gw) {
                           wtmp.assign(self.parents[1]->value.size(), 0.0);
                           gw = &wtmp;
                         }
                         kernels::conv3x3_grad_params(
                             d, self.grad, pval(self, 0), *gw,
                             gb ? std::span<double>(*gb) : std::span<double>{});
                       }
                     });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
  std::size_t channels = 0;
  std::vector<std::size_t> sizes;
  for (const auto& t : parts) {
    Shape tt(t.shape().begin() + 1, t.shape().end());
    if (tt != tail) {
      throw ShapeError("concat_channels: trailing shape mismatch " + shape_str(parts[0].shape()) +
                       " vs " + shape_str(t.shape()));
    }
    channels += t.dim(0);
    sizes.push_back(t.numel());
  }
  std::vector<double> out;
  out.reserve(channels * shape_numel(tail));
  for (const auto& t : parts) out.insert(out.end(), t.data().begin(), t.data().end());
  Shape shape{channels};
  shape.insert(shape.end(), tail.begin(), tail.end());
  return make_result(shape, std::move(out), parts, [sizes](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (auto* g = pgrad(self, k)) {
        for (std::size_t i = 0; i < sizes[k]; ++i) (*g)[i] += self.grad[off + i];
      }
      off += sizes[k];
    }
  });
}

Tensor pixel_shuffle(const Tensor& x, std::size_t factor) {
  require_rank(x, 3, "pixel_shuffle");
  const std::size_t r = factor, rr = r * r;
  if (r == 0 || x.dim(0) % rr != 0) {
    throw ShapeError("pixel_shuffle: channels " + std::to_string(x.dim(0)) +
                     " not divisible by factor^2");
  }
  const std::size_t C = x.dim(0) / rr, H = x.dim(1), W = x.dim(2);
  const std::size_t OH = H * r, OW = W * r;
  // Forward map: out[c, h*r+i, w*r+j] = in[c*r*r + i*r + j, h, w]
  std::vector<std::size_t> src(C * OH * OW);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < r; ++j)
        for (std::size_t h = 0; h < H; ++h)
          for (std::size_t w = 0; w < W; ++w)
            src[(c * OH + h * r + i) * OW + w * r + j] = ((c * rr + i * r + j) * H + h) * W + w;
  std::vector<double> out(src.size());
  auto v = x.data();
  for (std::size_t k = 0; k < src.size(); ++k) out[k] = v[src[k]];
  return make_result(Shape{C, OH, OW}, std::move(out), {x},
                     [src = std::move(src)](Node& self) {
                       if (auto* g = pgrad(self, 0)) {
                         for (std::size_t k = 0; k < src.size(); ++k) (*g)[src[k]] += self.grad[k];
                       }
                     });
}

namespace {

struct Taps {
  std::vector<std::size_t> lo, hi;
  std::vector<double> frac;  // weight on hi
};

// Bilinear taps for align-corners-false sampling.
Taps bilinear_taps(std::size_t in, std::size_t out) {
  Taps t;
  const double ratio = double(in) / double(out);
  for (std::size_t o = 0; o < out; ++o) {
    double s = (double(o) + 0.5) * ratio - 0.5;
    if (s < 0.0) s = 0.0;
    auto lo = std::min(static_cast<std::size_t>(s), in - 1);
    auto hi = std::min(lo + 1, in - 1);
    t.lo.push_back(lo);
    t.hi.push_back(hi);
    t.frac.push_back(s - double(lo));
  }
  return t;
}

}  // namespace

Tensor resample(const Tensor& x, std::size_t out_h, std::size_t out_w, ResampleMode mode) {
  require_rank(x, 3, "resample");
  if (out_h == 0 || out_w == 0) throw ConfigError("resample: output extents must be positive");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  auto v = x.data();
  std::vector<double> out(C * out_h * out_w, 0.0);

  if (mode == ResampleMode::AreaDown) {
    if (H % out_h != 0 || W % out_w != 0) {
      throw ConfigError("resample: area downsampling needs integer factors, " + shape_str(x.shape()) +
                        " -> " + std::to_string(out_h) + "x" + std::to_string(out_w));
    }
    const std::size_t fy = H / out_h, fx = W / out_w;
    const double inv = 1.0 / double(fy * fx);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t xx = 0; xx < W; ++xx)
          out[(c * out_h + y / fy) * out_w + xx / fx] += v[(c * H + y) * W + xx];
    for (auto& o : out) o *= inv;
    return make_result(Shape{C, out_h, out_w}, std::move(out), {x},
                       [C, H, W, out_h, out_w, fy, fx, inv](Node& self) {
                         if (auto* g = pgrad(self, 0)) {
                           for (std::size_t c = 0; c < C; ++c)
                             for (std::size_t y = 0; y < H; ++y)
                               for (std::size_t xx = 0; xx < W; ++xx)
                                 (*g)[(c * H + y) * W + xx] +=
                                     inv * self.grad[(c * out_h + y / fy) * out_w + xx / fx];
                         }
                       });
  }

  auto ty = std::make_shared<Taps>(bilinear_taps(H, out_h));
  auto tx = std::make_shared<Taps>(bilinear_taps(W, out_w));
  for (std::size_t c = 0; c < C; ++c) {
    const double* src = v.data() + c * H * W;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const double wy = ty->frac[oy];
      const double* r0 = src + ty->lo[oy] * W;
      const double* r1 = src + ty->hi[oy] * W;
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const double wx = tx->frac[ox];
        const std::size_t x0 = tx->lo[ox], x1 = tx->hi[ox];
        out[(c * out_h + oy) * out_w + ox] = (1 - wy) * ((1 - wx) * r0[x0] + wx * r0[x1]) +
                                             wy * ((1 - wx) * r1[x0] + wx * r1[x1]);
      }
    }
  }
  return make_result(Shape{C, out_h, out_w}, std::move(out), {x},
                     [C, H, W, out_h, out_w, ty, tx](Node& self) {
                       auto* g = pgrad(self, 0);
                       if (!g) return;
                       for (std::size_t c = 0; c < C; ++c) {
                         double* dst = g->data() + c * H * W;
                         for (std::size_t oy = 0; oy < out_h; ++oy) {
                           const double wy = ty->frac[oy];
                           double* r0 = dst + ty->lo[oy] * W;
                           double* r1 = dst + ty->hi[oy] * W;
                           for (std::size_t ox = 0; ox < out_w; ++ox) {
                             const double go = self.grad[(c * out_h + oy) * out_w + ox];
                             const double wx = tx->frac[ox];
                             const std::size_t x0 = tx->lo[ox], x1 = tx->hi[ox];
                             r0[x0] += go * (1 - wy) * (1 - wx);
                             r0[x1] += go * (1 - wy) * wx;
                             r1[x0] += go * wy * (1 - wx);
                             r1[x1] += go * wy * wx;
                           }
                         }
                       }
                     });
}

Tensor map_to_tokens(const Tensor& x) {
  require_rank(x, 3, "map_to_tokens");
  const std::size_t C = x.dim(0), N = x.dim(1) * x.dim(2);
  std::vector<double> out(N * C);
  auto v = x.data();
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < N; ++i) out[i * C + c] = v[c * N + i];
  return make_result(Shape{N, C}, std::move(out), {x}, [C, N](Node& self) {
    if (auto* g = pgrad(self, 0)) {
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < N; ++i) (*g)[c * N + i] += self.grad[i * C + c];
    }
  });
}

Tensor tokens_to_map(const Tensor& tokens, std::size_t height, std::size_t width) {
  require_rank(tokens, 2, "tokens_to_map");
  const std::size_t N = tokens.dim(0), C = tokens.dim(1);
  if (N != height * width) {
    throw ShapeError("tokens_to_map: " + std::to_string(N) + " tokens cannot fill " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  std::vector<double> out(N * C);
  auto v = tokens.data();
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < N; ++i) out[c * N + i] = v[i * C + c];
  return make_result(Shape{C, height, width}, std::move(out), {tokens}, [C, N](Node& self) {
    if (auto* g = pgrad(self, 0)) {
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < N; ++i) (*g)[i * C + c] += self.grad[c * N + i];
    }
  });
}

Tensor channel_mean(const Tensor& x) {
  require_rank(x, 3, "channel_mean");
  const std::size_t C = x.dim(0), N = x.dim(1) * x.dim(2);
  std::vector<double> out(C, 0.0);
  auto v = x.data();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < N; ++i) out[c] += v[c * N + i];
    out[c] /= double(N);
  }
  return make_result(Shape{C}, std::move(out), {x}, [C, N](Node& self) {
    if (auto* g = pgrad(self, 0)) {
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < N; ++i) (*g)[c * N + i] += self.grad[c] / double(N);
    }
  });
}

Tensor channel_affine(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  require_rank(x, 3, "channel_affine");
  const std::size_t C = x.dim(0), N = x.dim(1) * x.dim(2);
  if (gamma.numel() != C || beta.numel() != C) {
    throw ShapeError("channel_affine: gamma/beta must have " + std::to_string(C) + " entries");
  }
  std::vector<double> out(C * N);
  auto v = x.data();
  auto ga = gamma.data(), be = beta.data();
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < N; ++i) out[c * N + i] = v[c * N + i] * ga[c] + be[c];
  return make_result(x.shape(), std::move(out), {x, gamma, beta}, [C, N](Node& self) {
    const auto& xv = pval(self, 0);
    const auto& ga = pval(self, 1);
    if (auto* g = pgrad(self, 0)) {
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < N; ++i) (*g)[c * N + i] += self.grad[c * N + i] * ga[c];
    }
    if (auto* g = pgrad(self, 1)) {
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < N; ++i) (*g)[c] += self.grad[c * N + i] * xv[c * N + i];
    }
    if (auto* g = pgrad(self, 2)) {
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < N; ++i) (*g)[c] += self.grad[c * N + i];
    }
  });
}

namespace {

// index map: windowed layout position -> map position
std::vector<std::size_t> window_index(std::size_t C, std::size_t H, std::size_t W, std::size_t w) {
  const std::size_t ny = H / w, nx = W / w;
  std::vector<std::size_t> idx(C * H * W);
  std::size_t k = 0;
  for (std::size_t wy = 0; wy < ny; ++wy)
    for (std::size_t wx = 0; wx < nx; ++wx)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < w; ++y)
          for (std::size_t x = 0; x < w; ++x)
            idx[k++] = (c * H + wy * w + y) * W + wx * w + x;
  return idx;
}

}  // namespace

Tensor window_partition(const Tensor& x, std::size_t window) {
  require_rank(x, 3, "window_partition");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (window == 0 || H % window != 0 || W % window != 0) {
    throw ConfigError("window_partition: window " + std::to_string(window) +
                      " does not tile " + shape_str(x.shape()));
  }
  auto idx = window_index(C, H, W, window);
  std::vector<double> out(idx.size());
  auto v = x.data();
  for (std::size_t k = 0; k < idx.size(); ++k) out[k] = v[idx[k]];
  const std::size_t nw = (H / window) * (W / window);
  return make_result(Shape{nw, C, window, window}, std::move(out), {x},
                     [idx = std::move(idx)](Node& self) {
                       if (auto* g = pgrad(self, 0)) {
                         for (std::size_t k = 0; k < idx.size(); ++k) (*g)[idx[k]] += self.grad[k];
                       }
                     });
}

Tensor window_merge(const Tensor& windows, std::size_t height, std::size_t width) {
  require_rank(windows, 4, "window_merge");
  const std::size_t C = windows.dim(1), w = windows.dim(2);
  if (windows.dim(3) != w || height % w != 0 || width % w != 0 ||
      windows.dim(0) != (height / w) * (width / w)) {
    throw ShapeError("window_merge: " + shape_str(windows.shape()) + " cannot tile " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  auto idx = window_index(C, height, width, w);
  std::vector<double> out(idx.size());
  auto v = windows.data();
  for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = v[k];
  return make_result(Shape{C, height, width}, std::move(out), {windows},
                     [idx = std::move(idx)](Node& self) {
                       if (auto* g = pgrad(self, 0)) {
                         for (std::size_t k = 0; k < idx.size(); ++k) (*g)[k] += self.grad[idx[k]];
                       }
                     });
}

}  // namespace sgsr
