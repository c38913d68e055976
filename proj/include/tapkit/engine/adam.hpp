#pragma once

#include <cstdint>
#include <vector>

#include "tapkit/engine/layers.hpp"

namespace tapkit::engine {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moments per parameter tensor, plus the step counter.
struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update of every tensor in `params` from its
/// `grad` span. Throws kDivergence on a non-finite gradient, before any
/// parameter is touched.
template <class Real>
void adam_step(std::vector<ParamView<Real>>& params, AdamState& state, const AdamConfig& cfg);

}  // namespace tapkit::engine
