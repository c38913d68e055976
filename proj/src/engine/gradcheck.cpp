#include "tapkit/engine/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tapkit/engine/ops.hpp"

namespace tapkit::engine {

GradCheckReport grad_check(const GradCheckTarget& target, double eps, std::size_t max_params,
                           std::uint64_t seed) {
  // Analytic gradients at the unperturbed point.
  target.loss_and_grad();
  struct Slot {
    std::size_t tensor;
    std::size_t index;
  };
  std::vector<Slot> slots;
  for (std::size_t i = 0; i < target.params.size(); ++i)
    for (std::size_t k = 0; k < target.params[i].value.size(); ++k) slots.push_back({i, k});
  std::vector<double> analytic(slots.size());
  for (std::size_t s = 0; s < slots.size(); ++s)
    analytic[s] = target.params[slots[s].tensor].grad[slots[s].index];

  std::vector<std::size_t> order(slots.size());
  std::iota(order.begin(), order.end(), 0);
  if (order.size() > max_params) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(max_params);
    std::sort(order.begin(), order.end());
  }

  std::uint64_t base_sig = 0;
  if (target.kink_signature) {
    target.loss();
    base_sig = target.kink_signature();
  }

  GradCheckReport report;
  for (std::size_t s : order) {
    double& p = target.params[slots[s].tensor].value[slots[s].index];
    const double saved = p;
    p = saved + eps;
    const double plus = target.loss();
    const std::uint64_t sig_plus = target.kink_signature ? target.kink_signature() : 0;
    p = saved - eps;
    const double minus = target.loss();
    const std::uint64_t sig_minus = target.kink_signature ? target.kink_signature() : 0;
    p = saved;
    if (target.kink_signature && (sig_plus != base_sig || sig_minus != base_sig)) {
      ++report.skipped_kinks;
      continue;
    }
    const double numeric = (plus - minus) / (2.0 * eps);
    const double a = analytic[s];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    report.max_rel_error = std::max(report.max_rel_error, std::abs(a - numeric) / denom);
    ++report.checked;
  }
  return report;
}

GradCheckTarget make_mse_target(Sequential<double>& net, const Tensor3<double>& input,
                                const Tensor3<double>& target) {
  GradCheckTarget t;
  net.append_params(t.params);
  t.loss = [&net, input, target] { return mse_loss(net.forward(input), target).loss; };
  t.loss_and_grad = [&net, input, target] {
    net.zero_grad();
    auto r = mse_loss(net.forward(input), target);
    net.backward(r.grad);
    return r.loss;
  };
  t.kink_signature = [&net] { return net.relu_signature(); };
  return t;
}

}  // namespace tapkit::engine
