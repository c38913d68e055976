#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "tapkit/engine/layers.hpp"

namespace tapkit::engine {

struct GradCheckTarget {
  std::vector<ParamView<double>> params;
  /// Forward only.
  std::function<double()> loss;
  /// Zeroes gradients, runs forward and backward, returns the loss.
  std::function<double()> loss_and_grad;
  /// Optional; evaluated right after loss(). Parameters whose perturbation
  /// changes it straddle a ReLU kink and are skipped.
  std::function<std::uint64_t()> kink_signature;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
};

/// Central differences against the analytic gradient; every parameter, or a
/// seeded subsample of `max_params` above that count. The error per
/// parameter is |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport grad_check(const GradCheckTarget& target, double eps = 1e-4,
                           std::size_t max_params = 10000, std::uint64_t seed = 0);

/// MSE of a sequential stack's output against `target`.
GradCheckTarget make_mse_target(Sequential<double>& net, const Tensor3<double>& input,
                                const Tensor3<double>& target);

}  // namespace tapkit::engine
