#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sgsr/tensor.hpp"

namespace sgsr {

struct GradCheckOptions {
  double step = 1e-5;
  /// Coordinates probed per tensor; 0 probes every coordinate. When limited,
  /// coordinates are drawn without replacement from a seeded stream.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares reverse-mode gradients of the scalar `loss()` against central
/// differences. Error per coordinate is |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
/// `loss` must rebuild its graph from the current values of `params` on each
/// call. Throws NumericError if the loss is not finite.
GradCheckResult grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                           const GradCheckOptions& options = {});

}  // namespace sgsr
