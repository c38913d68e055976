#pragma once

#include <span>
#include <vector>

#include "tapkit/engine/tensor.hpp"

namespace tapkit::engine {

struct ConvShape {
  int in = 1;
  int out = 1;
  int kernel = 1;
  int stride = 1;
  int pad = 0;
};

/// floor((T + 2p - k) / s) + 1; throws kShape when < 1.
int conv_output_length(int length, const ConvShape& shape);

/// y[n,o,t] = b[o] + sum_{c,j} w[o,c,j] * x_padded[n,c,t*s+j].
/// Weights are laid out (out, in, kernel).
template <class Real>
Tensor3<Real> conv1d_forward(const Tensor3<Real>& x, std::span<const Real> w,
                             std::span<const Real> b, const ConvShape& shape);

template <class Real>
struct ConvGrads {
  Tensor3<Real> grad_x;
  std::vector<Real> grad_w;
  std::vector<Real> grad_b;
};

template <class Real>
ConvGrads<Real> conv1d_backward(const Tensor3<Real>& x, std::span<const Real> w,
                                const Tensor3<Real>& grad_y, const ConvShape& shape);

template <class Real>
Tensor3<Real> relu_forward(const Tensor3<Real>& x);
template <class Real>
Tensor3<Real> relu_backward(const Tensor3<Real>& x, const Tensor3<Real>& grad_y);

template <class Real>
Tensor3<Real> sigmoid_forward(const Tensor3<Real>& x);
/// Takes the forward output y: dy/dx = y (1 - y).
template <class Real>
Tensor3<Real> sigmoid_backward(const Tensor3<Real>& y, const Tensor3<Real>& grad_y);

template <class Real>
struct LossResult {
  double loss = 0.0;
  Tensor3<Real> grad;
};

/// mean((pred - target)^2) and its gradient 2 (pred - target) / count.
template <class Real>
LossResult<Real> mse_loss(const Tensor3<Real>& pred, const Tensor3<Real>& target);

}  // namespace tapkit::engine
