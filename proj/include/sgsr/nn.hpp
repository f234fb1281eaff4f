#pragma once

// Parameter containers, layers built on the ops, and the Adam optimizer.

#include <cstdint>
#include <string>
#include <vector>

#include "sgsr/random.hpp"
#include "sgsr/tensor.hpp"

namespace sgsr {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

/// Owns the parameter list of a model. Each parameter is initialised from its
/// own stream derived from (seed, registration index), so adding a parameter
/// never perturbs earlier ones.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed) : seed_(seed) {}

  /// U(-bound, bound) initialisation.
  Tensor uniform(const std::string& name, Shape shape, double bound);
  Tensor zeros(const std::string& name, Shape shape);

  const std::vector<NamedParam>& params() const { return params_; }
  std::vector<Tensor> tensors() const;
  std::size_t count() const;
  void zero_grad();

 private:
  Tensor add(const std::string& name, Tensor t);
  std::uint64_t seed_;
  std::vector<NamedParam> params_;
};

/// Row-wise affine map: x[p, in] -> x * weight[in, out] + bias[out].
struct Linear {
  Tensor weight;
  Tensor bias;

  static Linear make(ParamStore& store, const std::string& name, std::size_t in, std::size_t out);
  Tensor operator()(const Tensor& x) const;
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
};

/// Affine map across the token axis: x[in_tokens, D] -> weight[out, in] * x + bias[out].
struct TokenLinear {
  Tensor weight;
  Tensor bias;

  static TokenLinear make(ParamStore& store, const std::string& name, std::size_t in_tokens,
                          std::size_t out_tokens);
  Tensor operator()(const Tensor& x) const;
};

struct Conv3x3 {
  Tensor weight;
  Tensor bias;

  /// `zero_init` starts both weight and bias at zero.
  static Conv3x3 make(ParamStore& store, const std::string& name, std::size_t in,
                      std::size_t out, bool zero_init = false);
  Tensor operator()(const Tensor& x) const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg = {});

  /// One update with learning rate `lr`; parameters without a gradient are
  /// treated as having a zero gradient.
  void step(double lr);
  void zero_grad();

  std::uint64_t steps() const { return t_; }
  /// First/second moment buffers, exposed for checkpointing.
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void set_steps(std::uint64_t t) { t_ = t; }

 private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace sgsr
