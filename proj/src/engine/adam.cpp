#include "tapkit/engine/adam.hpp"

#include <cmath>

#include "tapkit/error.hpp"

namespace tapkit::engine {

template <class Real>
void adam_step(std::vector<ParamView<Real>>& params, AdamState& state, const AdamConfig& cfg) {
  if (state.m.size() != params.size()) {
    if (state.step != 0 || !state.m.empty())
      throw Error(ErrorCode::kShape, "adam: optimizer state does not match parameter list");
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].value.size(), 0.0);
      state.v[i].assign(params[i].value.size(), 0.0);
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].grad.size() != params[i].value.size() || state.m[i].size() != params[i].value.size())
      throw Error(ErrorCode::kShape, "adam: gradient/parameter size mismatch");
    for (Real g : params[i].grad)
      if (!std::isfinite(static_cast<double>(g)))
        throw Error(ErrorCode::kDivergence, "adam: non-finite gradient");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    auto value = params[i].value;
    auto grad = params[i].grad;
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = static_cast<double>(grad[k]);
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      value[k] = static_cast<Real>(static_cast<double>(value[k]) - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
    }
  }
}

template void adam_step(std::vector<ParamView<float>>&, AdamState&, const AdamConfig&);
template void adam_step(std::vector<ParamView<double>>&, AdamState&, const AdamConfig&);

}  // namespace tapkit::engine
