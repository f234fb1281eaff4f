#include "sgsr/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sgsr/error.hpp"
#include "sgsr/random.hpp"

namespace sgsr {

namespace {

double finite_loss(const std::function<Tensor()>& loss) {
  NoGradGuard guard;
  const double v = loss().item();
  if (!std::isfinite(v)) throw NumericError("grad_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                           const GradCheckOptions& options) {
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  Tensor root = loss();
  if (!std::isfinite(root.item())) throw NumericError("grad_check: loss is not finite");
  root.backward();

  GradCheckResult result;
  Rng rng(options.seed);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    std::vector<double> analytic(p.numel(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());

    std::vector<std::size_t> coords(p.numel());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords_per_tensor && coords.size() > options.max_coords_per_tensor) {
      for (std::size_t i = 0; i < options.max_coords_per_tensor; ++i) {
        std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
      }
      coords.resize(options.max_coords_per_tensor);
    }

    auto values = p.data();
    for (std::size_t idx : coords) {
      const double saved = values[idx];
      values[idx] = saved + options.step;
      const double up = finite_loss(loss);
      values[idx] = saved - options.step;
      const double down = finite_loss(loss);
      values[idx] = saved;

      const double numeric = (up - down) / (2.0 * options.step);
      const double g = analytic[idx];
      const double err =
          std::fabs(g - numeric) / std::max({1.0, std::fabs(g), std::fabs(numeric)});
      ++result.coords_checked;
      if (err > result.max_relative_error || result.coords_checked == 1) {
        result.max_relative_error = err;
        result.worst_tensor = k;
        result.worst_index = idx;
        result.worst_analytic = g;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace sgsr
