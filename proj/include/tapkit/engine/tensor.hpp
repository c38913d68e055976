#pragma once

#include <cstddef>
#include <vector>

namespace tapkit::engine {

/// Dense (batch, channel, time) tensor, time fastest.
template <class Real>
struct Tensor3 {
  int n = 0;
  int c = 0;
  int t = 0;
  std::vector<Real> data;

  Tensor3() = default;
  Tensor3(int batch, int channels, int length, Real fill = Real(0))
      : n(batch), c(channels), t(length),
        data(static_cast<std::size_t>(batch) * channels * length, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  bool same_shape(const Tensor3& o) const noexcept { return n == o.n && c == o.c && t == o.t; }

  Real* row(int i, int ch) noexcept { return data.data() + (static_cast<std::size_t>(i) * c + ch) * t; }
  const Real* row(int i, int ch) const noexcept {
    return data.data() + (static_cast<std::size_t>(i) * c + ch) * t;
  }
  Real& at(int i, int ch, int k) noexcept { return row(i, ch)[k]; }
  const Real& at(int i, int ch, int k) const noexcept { return row(i, ch)[k]; }

  template <class Other>
  Tensor3<Other> cast() const {
    Tensor3<Other> out(n, c, t);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<Other>(data[i]);
    return out;
  }
};

}  // namespace tapkit::engine
