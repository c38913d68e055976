#include "tapkit/engine/layers.hpp"

#include <cmath>
#include <sstream>

#include "tapkit/error.hpp"

namespace tapkit::engine {

LayerSpec LayerSpec::conv1d(int in, int out, int kernel, int stride, int pad) {
  LayerSpec s{LayerKind::kConv1d, in, out, kernel, stride, pad};
  s.validate();
  return s;
}

LayerSpec LayerSpec::dense(int in, int out) {
  LayerSpec s{LayerKind::kDense, in, out, 1, 1, 0};
  s.validate();
  return s;
}

std::size_t LayerSpec::weight_count() const noexcept {
  if (!has_params()) return 0;
  return static_cast<std::size_t>(out) * in * (kind == LayerKind::kConv1d ? kernel : 1);
}

ConvShape LayerSpec::conv_shape() const noexcept {
  if (kind == LayerKind::kDense) return {in, out, 1, 1, 0};
  return {in, out, kernel, stride, pad};
}

void LayerSpec::validate() const {
  switch (kind) {
    case LayerKind::kConv1d:
      if (in < 1 || out < 1 || kernel < 1 || stride < 1 || pad < 0)
        throw Error(ErrorCode::kConfig, "invalid layer " + to_string(*this));
      break;
    case LayerKind::kDense:
      if (in < 1 || out < 1) throw Error(ErrorCode::kConfig, "invalid layer " + to_string(*this));
      break;
    case LayerKind::kRelu:
    case LayerKind::kSigmoid:
      break;
    default:
      throw Error(ErrorCode::kConfig, "unknown layer kind");
  }
}

std::string to_string(const LayerSpec& spec) {
  std::ostringstream os;
  switch (spec.kind) {
    case LayerKind::kConv1d:
      os << "conv1d(" << spec.in << "->" << spec.out << ", k=" << spec.kernel << ", s=" << spec.stride
         << ", p=" << spec.pad << ")";
      break;
    case LayerKind::kDense: os << "dense(" << spec.in << "->" << spec.out << ")"; break;
    case LayerKind::kRelu: os << "relu"; break;
    case LayerKind::kSigmoid: os << "sigmoid"; break;
  }
  return os.str();
}

template <class Real>
Layer<Real>::Layer(const LayerSpec& spec)
    : spec_(spec),
      weight_(spec.weight_count(), Real(0)),
      bias_(spec.bias_count(), Real(0)),
      grad_weight_(spec.weight_count(), Real(0)),
      grad_bias_(spec.bias_count(), Real(0)) {
  spec_.validate();
}

template <class Real>
Tensor3<Real> Layer<Real>::forward(const Tensor3<Real>& x) {
  input_ = x;
  switch (spec_.kind) {
    case LayerKind::kConv1d:
    case LayerKind::kDense:
      output_ = conv1d_forward<Real>(x, weight_, bias_, spec_.conv_shape());
      break;
    case LayerKind::kRelu: output_ = relu_forward(x); break;
    case LayerKind::kSigmoid: output_ = sigmoid_forward(x); break;
  }
  return output_;
}

template <class Real>
Tensor3<Real> Layer<Real>::backward(const Tensor3<Real>& grad_y) {
  switch (spec_.kind) {
    case LayerKind::kConv1d:
    case LayerKind::kDense: {
      auto g = conv1d_backward<Real>(input_, weight_, grad_y, spec_.conv_shape());
      for (std::size_t i = 0; i < g.grad_w.size(); ++i) grad_weight_[i] += g.grad_w[i];
      for (std::size_t i = 0; i < g.grad_b.size(); ++i) grad_bias_[i] += g.grad_b[i];
      return std::move(g.grad_x);
    }
    case LayerKind::kRelu: return relu_backward(input_, grad_y);
    case LayerKind::kSigmoid: return sigmoid_backward(output_, grad_y);
  }
  return grad_y;
}

template <class Real>
void Layer<Real>::zero_grad() {
  std::fill(grad_weight_.begin(), grad_weight_.end(), Real(0));
  std::fill(grad_bias_.begin(), grad_bias_.end(), Real(0));
}

template <class Real>
void Layer<Real>::init_glorot(std::mt19937_64& rng) {
  if (!spec_.has_params()) return;
  const int k = spec_.kind == LayerKind::kConv1d ? spec_.kernel : 1;
  const double limit = std::sqrt(6.0 / static_cast<double>((spec_.in + spec_.out) * k));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& w : weight_) w = static_cast<Real>(dist(rng));
  std::fill(bias_.begin(), bias_.end(), Real(0));
}

template <class Real>
Sequential<Real>::Sequential(const std::vector<LayerSpec>& specs) {
  layers_.reserve(specs.size());
  int channels = -1;
  for (const auto& s : specs) {
    if (s.has_params()) {
      if (channels >= 0 && s.in != channels)
        throw Error(ErrorCode::kShape, "layer " + to_string(s) + " expects " + std::to_string(s.in) +
                                           " channels but receives " + std::to_string(channels));
      channels = s.out;
    }
    layers_.emplace_back(s);
  }
}

template <class Real>
std::vector<LayerSpec> Sequential<Real>::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers_) out.push_back(l.spec());
  return out;
}

template <class Real>
void Sequential<Real>::init(std::mt19937_64& rng) {
  for (auto& l : layers_) l.init_glorot(rng);
}

template <class Real>
Tensor3<Real> Sequential<Real>::forward(const Tensor3<Real>& x) {
  Tensor3<Real> h = x;
  for (auto& l : layers_) h = l.forward(h);
  return h;
}

template <class Real>
Tensor3<Real> Sequential<Real>::backward(const Tensor3<Real>& grad_y) {
  Tensor3<Real> g = grad_y;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->backward(g);
  return g;
}

template <class Real>
void Sequential<Real>::zero_grad() {
  for (auto& l : layers_) l.zero_grad();
}

template <class Real>
void Sequential<Real>::append_params(std::vector<ParamView<Real>>& out) {
  for (auto& l : layers_) {
    if (!l.spec().has_params()) continue;
    out.push_back({l.weight(), l.grad_weight()});
    out.push_back({l.bias(), l.grad_bias()});
  }
}

template <class Real>
std::size_t Sequential<Real>::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight().size() + l.bias().size();
  return n;
}

template <class Real>
std::uint64_t Sequential<Real>::relu_signature(std::uint64_t h) const {
  constexpr std::uint64_t kPrime = 1099511628211ull;
  for (const auto& l : layers_) {
    if (l.spec().kind != LayerKind::kRelu) continue;
    for (Real v : l.cached_input().data) h = (h ^ (v > Real(0) ? 1u : 0u)) * kPrime;
  }
  return h;
}

template class Layer<float>;
template class Layer<double>;
template class Sequential<float>;
template class Sequential<double>;

}  // namespace tapkit::engine
