/**
 * Copyright 2026 The cropseg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Raw convolution kernels. Stride 1, zero padding (k-1)/2, cross-correlation
// (no kernel flip). Every reduction runs in a fixed order, so results are
// reproducible bit for bit for a given build.
//
// The flattened plane is processed in tiles of kTile pixels. For each input
// channel and tap, the zero-padded shifted input segment is materialised
// once and reused across every output channel, so accumulators and
// operands stay in L1.

#include <algorithm>
#include <array>
#include <cstddef>
#include <vector>

#include "cropseg/nn/tensor.hpp"

namespace cropseg::nn::kernels {

template <typename T>
inline void axpy(T* __restrict dst, const T* __restrict src, T a, std::ptrdiff_t len) {
#pragma omp simd
  for (std::ptrdiff_t i = 0; i < len; ++i) dst[i] += a * src[i];
}

struct ConvGeom {
  int in_ch;
  int out_ch;
  int kh;
  int kw;
};

namespace detail {

inline constexpr int kTile = 256;
inline constexpr int kLanes = 16;

/// Lane-wise partial dot product: acc[j] += sum_k a[k*kLanes + j] * b[k*kLanes + j].
/// len must be a multiple of kLanes (callers zero-pad).
template <typename T>
inline void dot_lanes(T* __restrict acc, const T* __restrict a, const T* __restrict b, int len) {
  T v[kLanes];
  for (int j = 0; j < kLanes; ++j) v[j] = acc[j];
  for (int k = 0; k < len; k += kLanes) {
#pragma omp simd
    for (int j = 0; j < kLanes; ++j) v[j] += a[k + j] * b[k + j];
  }
  for (int j = 0; j < kLanes; ++j) acc[j] = v[j];
}

/// Copies the source pixels feeding tile positions [start, start+len) at
/// offset (dy, dx) into buf, writing zeros where the source falls outside the
/// plane. Positions past len (up to the padded length) are zeroed too.
template <typename T>
inline void gather_shifted(T* __restrict buf, const T* __restrict plane, int start, int len,
                           int padded, int H, int W, int dy, int dx) {
  std::fill_n(buf, padded, T{});
  int p = start;
  const int end = start + len;
  while (p < end) {
    const int y = p / W;
    const int x = p - y * W;
    const int seg_end = std::min(end, (y + 1) * W);  // stay inside this row
    const int sy = y + dy;
    if (sy >= 0 && sy < H) {
      const int x_lo = std::max(x, -dx);
      const int x_hi = std::min(x + (seg_end - p), W - dx);
      if (x_hi > x_lo) {
        const T* src = plane + static_cast<std::ptrdiff_t>(sy) * W + x_lo + dx;
        std::copy(src, src + (x_hi - x_lo), buf + (p - start) + (x_lo - x));
      }
    }
    p = seg_end;
  }
}

inline int padded_len(int len) { return (len + kLanes - 1) / kLanes * kLanes; }

}  // namespace detail

/// y[n,o] = bias[o] + sum_{i,ky,kx} w[o,i,ky,kx] * x[n,i,y+ky-ph,x+kx-pw]
template <typename T>
void conv_forward(const Tensor<T>& x, const T* w, const T* bias, const ConvGeom& g, Tensor<T>& y) {
  using detail::kTile;
  const int H = x.h();
  const int W = x.w();
  const int hw = H * W;
  const int ph = g.kh / 2;
  const int pw = g.kw / 2;
  const int K = g.kh * g.kw;
  const std::size_t wstride = static_cast<std::size_t>(g.in_ch) * K;
  std::vector<T> acc(static_cast<std::size_t>(g.out_ch) * kTile);
  std::vector<T> buf(kTile);
  for (int n = 0; n < x.n(); ++n) {
    for (int start = 0; start < hw; start += kTile) {
      const int len = std::min(kTile, hw - start);
      for (int o = 0; o < g.out_ch; ++o)
        std::fill_n(acc.data() + static_cast<std::size_t>(o) * kTile, len, bias ? bias[o] : T{});
      for (int i = 0; i < g.in_ch; ++i) {
        const T* xp = x.plane(n, i);
        for (int ky = 0; ky < g.kh; ++ky) {
          for (int kx = 0; kx < g.kw; ++kx) {
            const int dy = ky - ph;
            const int dx = kx - pw;
            const T* src;
            if (dx == 0 && dy == 0) {
              src = xp + start;
            } else {
              detail::gather_shifted(buf.data(), xp, start, len, len, H, W, dy, dx);
              src = buf.data();
            }
            const T* wk = w + static_cast<std::size_t>(i) * K + ky * g.kw + kx;
            for (int o = 0; o < g.out_ch; ++o)
              axpy(acc.data() + static_cast<std::size_t>(o) * kTile, src, wk[o * wstride], len);
          }
        }
      }
      for (int o = 0; o < g.out_ch; ++o)
        std::copy_n(acc.data() + static_cast<std::size_t>(o) * kTile, len, y.plane(n, o) + start);
    }
  }
}

/// Kernel of the adjoint convolution: w'[i,o,ky,kx] = w[o,i,kh-1-ky,kw-1-kx].
template <typename T>
std::vector<T> adjoint_weights(const T* w, const ConvGeom& g) {
  const int K = g.kh * g.kw;
  std::vector<T> out(static_cast<std::size_t>(g.in_ch) * g.out_ch * K);
  for (int o = 0; o < g.out_ch; ++o)
    for (int i = 0; i < g.in_ch; ++i)
      for (int ky = 0; ky < g.kh; ++ky)
        for (int kx = 0; kx < g.kw; ++kx)
          out[(static_cast<std::size_t>(i) * g.out_ch + o) * K + (g.kh - 1 - ky) * g.kw + (g.kw - 1 - kx)] =
              w[(static_cast<std::size_t>(o) * g.in_ch + i) * K + ky * g.kw + kx];
  return out;
}

/// Accumulates dw and dbias (if non-null) and writes dx (if non-null) from dy.
template <typename T>
void conv_backward(const Tensor<T>& x, const T* w, const ConvGeom& g, const Tensor<T>& dy,
                   Tensor<T>* dx, T* dw, T* dbias) {
  using detail::kLanes;
  using detail::kTile;
  const int H = x.h();
  const int W = x.w();
  const int hw = H * W;
  const int ph = g.kh / 2;
  const int pw = g.kw / 2;
  const int K = g.kh * g.kw;
  const std::size_t nweights = static_cast<std::size_t>(g.out_ch) * g.in_ch * K;
  const std::size_t wstride = static_cast<std::size_t>(g.in_ch) * K;

  if (dbias) {
    for (int o = 0; o < g.out_ch; ++o) {
      double s = 0.0;
      for (int n = 0; n < x.n(); ++n) {
        const T* dyp = dy.plane(n, o);
        T a{};
#pragma omp simd reduction(+ : a)
        for (int k = 0; k < hw; ++k) a += dyp[k];
        s += static_cast<double>(a);
      }
      dbias[o] += static_cast<T>(s);
    }
  }

  // Lane-wise accumulators, reduced once at the end.
  std::vector<T> lanes(nweights * kLanes, T{});
  std::vector<T> grad(static_cast<std::size_t>(g.out_ch) * kTile);
  std::vector<T> buf(kTile);
  for (int n = 0; n < x.n(); ++n) {
    for (int start = 0; start < hw; start += kTile) {
      const int len = std::min(kTile, hw - start);
      const int padded = detail::padded_len(len);
      for (int o = 0; o < g.out_ch; ++o) {
        T* gp = grad.data() + static_cast<std::size_t>(o) * kTile;
        std::copy_n(dy.plane(n, o) + start, len, gp);
        std::fill(gp + len, gp + padded, T{});
      }
      for (int i = 0; i < g.in_ch; ++i) {
        const T* xp = x.plane(n, i);
        for (int ky = 0; ky < g.kh; ++ky) {
          for (int kx = 0; kx < g.kw; ++kx) {
            detail::gather_shifted(buf.data(), xp, start, len, padded, H, W, ky - ph, kx - pw);
            const std::size_t widx = static_cast<std::size_t>(i) * K + ky * g.kw + kx;
            for (int o = 0; o < g.out_ch; ++o)
              detail::dot_lanes(lanes.data() + (o * wstride + widx) * kLanes,
                                grad.data() + static_cast<std::size_t>(o) * kTile, buf.data(), padded);
          }
        }
      }
    }
  }
  for (std::size_t k = 0; k < nweights; ++k) {
    double s = 0.0;
    for (int j = 0; j < kLanes; ++j) s += static_cast<double>(lanes[k * kLanes + j]);
    dw[k] += static_cast<T>(s);
  }

  if (dx) {
    const std::vector<T> wt = adjoint_weights(w, g);
    conv_forward(dy, wt.data(), static_cast<const T*>(nullptr),
                 ConvGeom{g.out_ch, g.in_ch, g.kh, g.kw}, *dx);
  }
}

}  // namespace cropseg::nn::kernels
