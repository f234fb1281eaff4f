#include "sgsr/nn.hpp"

#include <cmath>

#include "sgsr/error.hpp"
#include "sgsr/ops.hpp"

namespace sgsr {

Tensor ParamStore::add(const std::string& name, Tensor t) {
  t.set_requires_grad(true);
  params_.push_back({name, t});
  return t;
}

Tensor ParamStore::uniform(const std::string& name, Shape shape, double bound) {
  Tensor t(std::move(shape));
  Rng rng(mix_seed(seed_, params_.size()));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return add(name, t);
}

Tensor ParamStore::zeros(const std::string& name, Shape shape) {
  return add(name, Tensor(std::move(shape)));
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

std::size_t ParamStore::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

Linear Linear::make(ParamStore& store, const std::string& name, std::size_t in, std::size_t out) {
  const double bound = 1.0 / std::sqrt(double(in));
  Linear l;
  l.weight = store.uniform(name + ".weight", {in, out}, bound);
  l.bias = store.uniform(name + ".bias", {out}, bound);
  return l;
}

Tensor Linear::operator()(const Tensor& x) const { return add_row_bias(matmul(x, weight), bias); }

TokenLinear TokenLinear::make(ParamStore& store, const std::string& name, std::size_t in_tokens,
                              std::size_t out_tokens) {
  const double bound = 1.0 / std::sqrt(double(in_tokens));
  TokenLinear l;
  l.weight = store.uniform(name + ".weight", {out_tokens, in_tokens}, bound);
  l.bias = store.uniform(name + ".bias", {out_tokens}, bound);
  return l;
}

Tensor TokenLinear::operator()(const Tensor& x) const {
  return add_col_bias(matmul(weight, x), bias);
}

Conv3x3 Conv3x3::make(ParamStore& store, const std::string& name, std::size_t in,
                      std::size_t out, bool zero_init) {
  Conv3x3 c;
  if (zero_init) {
    c.weight = store.zeros(name + ".weight", {out, in, 3, 3});
    c.bias = store.zeros(name + ".bias", {out});
  } else {
    const double bound = 1.0 / std::sqrt(double(in * 9));
    c.weight = store.uniform(name + ".weight", {out, in, 3, 3}, bound);
    c.bias = store.uniform(name + ".bias", {out}, bound);
  }
  return c;
}

Tensor Conv3x3::operator()(const Tensor& x) const { return conv3x3(x, weight, bias); }

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step(double lr) {
  if (!(lr >= 0.0)) throw ConfigError("Adam: learning rate must be non-negative");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto value = params_[k].data();
    auto grad = params_[k].grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      value[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace sgsr
