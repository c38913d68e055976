#include "tapkit/engine/ops.hpp"

#include <cmath>
#include <string>

#include "tapkit/error.hpp"
#include "tapkit/simd.hpp"

namespace tapkit::engine {
namespace {

void check_shape(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorCode::kShape, msg);
}

// cols[(c*K + j) * Tout + t] = x[c, t*s + j - p], zero outside.
template <class Real>
void im2col(const Real* x, int channels, int length, const ConvShape& sh, int out_len, Real* cols) {
  for (int c = 0; c < channels; ++c) {
    const Real* xc = x + static_cast<std::size_t>(c) * length;
    for (int j = 0; j < sh.kernel; ++j) {
      Real* dst = cols + static_cast<std::size_t>(c * sh.kernel + j) * out_len;
      for (int t = 0; t < out_len; ++t) {
        const int src = t * sh.stride + j - sh.pad;
        dst[t] = (src >= 0 && src < length) ? xc[src] : Real(0);
      }
    }
  }
}

template <class Real>
void col2im_add(const Real* cols, int channels, int length, const ConvShape& sh, int out_len, Real* gx) {
  for (int c = 0; c < channels; ++c) {
    Real* gc = gx + static_cast<std::size_t>(c) * length;
    for (int j = 0; j < sh.kernel; ++j) {
      const Real* src = cols + static_cast<std::size_t>(c * sh.kernel + j) * out_len;
      for (int t = 0; t < out_len; ++t) {
        const int dst = t * sh.stride + j - sh.pad;
        if (dst >= 0 && dst < length) gc[dst] += src[t];
      }
    }
  }
}

}  // namespace

int conv_output_length(int length, const ConvShape& shape) {
  check_shape(shape.kernel >= 1 && shape.stride >= 1 && shape.pad >= 0,
              "conv1d: kernel and stride must be >= 1, pad >= 0");
  const int span = length + 2 * shape.pad - shape.kernel;
  const int out = span < 0 ? 0 : span / shape.stride + 1;
  check_shape(out >= 1, "conv1d: input length " + std::to_string(length) + " too short for kernel " +
                            std::to_string(shape.kernel));
  return out;
}

template <class Real>
Tensor3<Real> conv1d_forward(const Tensor3<Real>& x, std::span<const Real> w, std::span<const Real> b,
                             const ConvShape& shape) {
  check_shape(x.c == shape.in, "conv1d: input has " + std::to_string(x.c) + " channels, weights expect " +
                                   std::to_string(shape.in));
  const std::size_t patch = static_cast<std::size_t>(shape.in) * shape.kernel;
  check_shape(w.size() == patch * shape.out && b.size() == static_cast<std::size_t>(shape.out),
              "conv1d: parameter sizes do not match shape");
  const int out_len = conv_output_length(x.t, shape);

  Tensor3<Real> y(x.n, shape.out, out_len);
  std::vector<Real> cols(patch * out_len);
  for (int n = 0; n < x.n; ++n) {
    im2col(x.row(n, 0), x.c, x.t, shape, out_len, cols.data());
    for (int o = 0; o < shape.out; ++o) {
      Real* yo = y.row(n, o);
      for (int t = 0; t < out_len; ++t) yo[t] = b[o];
      const Real* wo = w.data() + o * patch;
      for (std::size_t cj = 0; cj < patch; ++cj)
        if (wo[cj] != Real(0)) simd::axpy(wo[cj], cols.data() + cj * out_len, yo, out_len);
    }
  }
  return y;
}

template <class Real>
ConvGrads<Real> conv1d_backward(const Tensor3<Real>& x, std::span<const Real> w, const Tensor3<Real>& grad_y,
                                const ConvShape& shape) {
  check_shape(x.c == shape.in, "conv1d backward: channel mismatch");
  const std::size_t patch = static_cast<std::size_t>(shape.in) * shape.kernel;
  check_shape(w.size() == patch * shape.out, "conv1d backward: weight size mismatch");
  const int out_len = conv_output_length(x.t, shape);
  check_shape(grad_y.n == x.n && grad_y.c == shape.out && grad_y.t == out_len,
              "conv1d backward: grad_y shape mismatch");

  ConvGrads<Real> g{Tensor3<Real>(x.n, x.c, x.t), std::vector<Real>(w.size(), Real(0)),
                    std::vector<Real>(shape.out, Real(0))};
  std::vector<Real> cols(patch * out_len);
  std::vector<Real> grad_cols(patch * out_len);
  for (int n = 0; n < x.n; ++n) {
    im2col(x.row(n, 0), x.c, x.t, shape, out_len, cols.data());
    std::fill(grad_cols.begin(), grad_cols.end(), Real(0));
    for (int o = 0; o < shape.out; ++o) {
      const Real* gy = grad_y.row(n, o);
      g.grad_b[o] += simd::sum(gy, out_len);
      Real* gw = g.grad_w.data() + o * patch;
      const Real* wo = w.data() + o * patch;
      for (std::size_t cj = 0; cj < patch; ++cj) {
        gw[cj] += simd::dot(gy, cols.data() + cj * out_len, out_len);
        if (wo[cj] != Real(0)) simd::axpy(wo[cj], gy, grad_cols.data() + cj * out_len, out_len);
      }
    }
    col2im_add(grad_cols.data(), x.c, x.t, shape, out_len, g.grad_x.row(n, 0));
  }
  return g;
}

template <class Real>
Tensor3<Real> relu_forward(const Tensor3<Real>& x) {
  Tensor3<Real> y = x;
  for (auto& v : y.data) v = v > Real(0) ? v : Real(0);
  return y;
}

template <class Real>
Tensor3<Real> relu_backward(const Tensor3<Real>& x, const Tensor3<Real>& grad_y) {
  check_shape(x.same_shape(grad_y), "relu backward: shape mismatch");
  Tensor3<Real> g = grad_y;
  for (std::size_t i = 0; i < g.data.size(); ++i)
    if (!(x.data[i] > Real(0))) g.data[i] = Real(0);
  return g;
}

template <class Real>
Tensor3<Real> sigmoid_forward(const Tensor3<Real>& x) {
  Tensor3<Real> y = x;
  for (auto& v : y.data) {
    // Split by sign so exp never overflows.
    if (v >= Real(0)) {
      v = Real(1) / (Real(1) + std::exp(-v));
    } else {
      const Real e = std::exp(v);
      v = e / (Real(1) + e);
    }
  }
  return y;
}

template <class Real>
Tensor3<Real> sigmoid_backward(const Tensor3<Real>& y, const Tensor3<Real>& grad_y) {
  check_shape(y.same_shape(grad_y), "sigmoid backward: shape mismatch");
  Tensor3<Real> g = grad_y;
  for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] *= y.data[i] * (Real(1) - y.data[i]);
  return g;
}

template <class Real>
LossResult<Real> mse_loss(const Tensor3<Real>& pred, const Tensor3<Real>& target) {
  check_shape(pred.same_shape(target), "mse: shape mismatch");
  check_shape(pred.size() > 0, "mse: empty tensors");
  LossResult<Real> r{0.0, Tensor3<Real>(pred.n, pred.c, pred.t)};
  const double count = static_cast<double>(pred.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
    acc += d * d;
    r.grad.data[i] = static_cast<Real>(2.0 * d / count);
  }
  r.loss = acc / count;
  return r;
}

#define TAPKIT_INSTANTIATE(Real)                                                                     \
  template Tensor3<Real> conv1d_forward(const Tensor3<Real>&, std::span<const Real>,                 \
                                        std::span<const Real>, const ConvShape&);                    \
  template ConvGrads<Real> conv1d_backward(const Tensor3<Real>&, std::span<const Real>,              \
                                           const Tensor3<Real>&, const ConvShape&);                  \
  template Tensor3<Real> relu_forward(const Tensor3<Real>&);                                         \
  template Tensor3<Real> relu_backward(const Tensor3<Real>&, const Tensor3<Real>&);                  \
  template Tensor3<Real> sigmoid_forward(const Tensor3<Real>&);                                      \
  template Tensor3<Real> sigmoid_backward(const Tensor3<Real>&, const Tensor3<Real>&);               \
  template LossResult<Real> mse_loss(const Tensor3<Real>&, const Tensor3<Real>&);

TAPKIT_INSTANTIATE(float)
TAPKIT_INSTANTIATE(double)

#undef TAPKIT_INSTANTIATE

}  // namespace tapkit::engine
