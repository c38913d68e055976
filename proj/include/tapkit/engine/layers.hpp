#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tapkit/engine/ops.hpp"
#include "tapkit/engine/tensor.hpp"

namespace tapkit::engine {

enum class LayerKind : std::uint32_t { kConv1d = 0, kRelu = 1, kSigmoid = 2, kDense = 3 };

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  int in = 0;
  int out = 0;
  int kernel = 1;
  int stride = 1;
  int pad = 0;

  static LayerSpec conv1d(int in, int out, int kernel, int stride = 1, int pad = 0);
  static LayerSpec dense(int in, int out);
  static LayerSpec relu() { return {LayerKind::kRelu}; }
  static LayerSpec sigmoid() { return {LayerKind::kSigmoid}; }

  bool has_params() const noexcept { return kind == LayerKind::kConv1d || kind == LayerKind::kDense; }
  std::size_t weight_count() const noexcept;
  std::size_t bias_count() const noexcept { return has_params() ? static_cast<std::size_t>(out) : 0; }
  ConvShape conv_shape() const noexcept;
  void validate() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

std::string to_string(const LayerSpec& spec);

template <class Real>
struct ParamView {
  std::span<Real> value;
  std::span<Real> grad;
};

/// One layer with its parameters, accumulated gradients, and the
/// activations cached by the last forward call. Dense layers act on the
/// channel axis independently at every time step.
template <class Real>
class Layer {
 public:
  explicit Layer(const LayerSpec& spec);

  const LayerSpec& spec() const noexcept { return spec_; }
  std::vector<Real>& weight() noexcept { return weight_; }
  const std::vector<Real>& weight() const noexcept { return weight_; }
  std::vector<Real>& bias() noexcept { return bias_; }
  const std::vector<Real>& bias() const noexcept { return bias_; }
  std::vector<Real>& grad_weight() noexcept { return grad_weight_; }
  std::vector<Real>& grad_bias() noexcept { return grad_bias_; }

  Tensor3<Real> forward(const Tensor3<Real>& x);
  /// Accumulates parameter gradients; returns the gradient w.r.t. the input.
  Tensor3<Real> backward(const Tensor3<Real>& grad_y);
  void zero_grad();

  /// Glorot-uniform weights, zero bias.
  void init_glorot(std::mt19937_64& rng);

  const Tensor3<Real>& cached_input() const noexcept { return input_; }

 private:
  LayerSpec spec_;
  std::vector<Real> weight_;
  std::vector<Real> bias_;
  std::vector<Real> grad_weight_;
  std::vector<Real> grad_bias_;
  Tensor3<Real> input_;
  Tensor3<Real> output_;
};

template <class Real>
class Sequential {
 public:
  Sequential() = default;
  explicit Sequential(const std::vector<LayerSpec>& specs);

  std::vector<Layer<Real>>& layers() noexcept { return layers_; }
  const std::vector<Layer<Real>>& layers() const noexcept { return layers_; }
  std::vector<LayerSpec> specs() const;

  void init(std::mt19937_64& rng);
  Tensor3<Real> forward(const Tensor3<Real>& x);
  Tensor3<Real> backward(const Tensor3<Real>& grad_y);
  void zero_grad();

  void append_params(std::vector<ParamView<Real>>& out);
  std::size_t param_count() const;

  /// Folds the sign pattern of every ReLU input from the last forward pass
  /// into a hash; changes when a perturbation crosses a kink.
  std::uint64_t relu_signature(std::uint64_t seed = 1469598103934665603ull) const;

  template <class Other>
  Sequential<Other> cast() const {
    Sequential<Other> out(specs());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& src = layers_[i];
      auto& dst = out.layers()[i];
      for (std::size_t k = 0; k < src.weight().size(); ++k) dst.weight()[k] = static_cast<Other>(src.weight()[k]);
      for (std::size_t k = 0; k < src.bias().size(); ++k) dst.bias()[k] = static_cast<Other>(src.bias()[k]);
    }
    return out;
  }

 private:
  std::vector<Layer<Real>> layers_;
};

enum class GraphKind : std::uint32_t { kSequential = 0, kSsad = 1 };

/// Parameters of a whole network: one or more sequential segments whose
/// wiring is implied by `kind` (a plain chain, or the Prop-SSAD pyramid).
template <class Real>
struct Model {
  GraphKind kind = GraphKind::kSequential;
  std::uint64_t seed = 0;
  std::vector<Sequential<Real>> segments;

  std::vector<ParamView<Real>> params() {
    std::vector<ParamView<Real>> out;
    for (auto& s : segments) s.append_params(out);
    return out;
  }
  void zero_grad() {
    for (auto& s : segments) s.zero_grad();
  }
  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& s : segments) n += s.param_count();
    return n;
  }
  std::uint64_t relu_signature() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& s : segments) h = s.relu_signature(h);
    return h;
  }
  template <class Other>
  Model<Other> cast() const {
    Model<Other> out;
    out.kind = kind;
    out.seed = seed;
    for (const auto& s : segments) out.segments.push_back(s.template cast<Other>());
    return out;
  }
};

}  // namespace tapkit::engine
