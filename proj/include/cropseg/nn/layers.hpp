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

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cropseg/nn/kernels.hpp"
#include "cropseg/nn/tensor.hpp"

namespace cropseg::nn {

enum class Mode { kTrain, kInfer };

// ---------------------------------------------------------------------------
// Convolution

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int in_ch, int out_ch, int kh, int kw, bool bias)
      : geom_{in_ch, out_ch, kh, kw},
        weight_(name + ".weight", Shape{out_ch, in_ch, kh, kw}),
        has_bias_(bias) {
    if (kh < 1 || kw < 1 || kh % 2 == 0 || kw % 2 == 0)
      throw ArgumentError(name + ": kernel sizes must be odd");
    if (in_ch < 1 || out_ch < 1) throw ArgumentError(name + ": channel counts must be positive");
    if (bias) bias_ = Param<T>(name + ".bias", Shape{out_ch, 1, 1, 1});
  }

  const kernels::ConvGeom& geom() const { return geom_; }
  bool has_bias() const { return has_bias_; }
  Param<T>& weight() { return weight_; }
  const Param<T>& weight() const { return weight_; }
  Param<T>& bias() { return bias_; }
  const Param<T>& bias() const { return bias_; }

  /// Fan-in scaled Gaussian init (std = sqrt(2 / fan_in)); bias zero.
  void init(std::mt19937_64& rng) {
    const double fan_in = static_cast<double>(geom_.in_ch) * geom_.kh * geom_.kw;
    fill_normal(weight_.value, rng, 0.0, std::sqrt(2.0 / fan_in));
    if (has_bias_) bias_.value.zero();
  }

  Tensor<T> forward(const Tensor<T>& x, bool keep_cache = true) {
    if (x.c() != geom_.in_ch)
      throw ShapeError(weight_.name + ": expected " + std::to_string(geom_.in_ch) +
                       " input channels, got " + std::to_string(x.c()));
    Tensor<T> y(x.n(), geom_.out_ch, x.h(), x.w());
    kernels::conv_forward(x, weight_.value.data(), has_bias_ ? bias_.value.data() : nullptr, geom_, y);
    if (keep_cache) input_ = x;
    return y;
  }

  /// Accumulates parameter gradients; returns dL/dx (empty when need_dx is false).
  Tensor<T> backward(const Tensor<T>& dy, bool need_dx = true) {
    if (input_.size() == 0) throw ShapeError(weight_.name + ": backward without cached forward");
    Tensor<T> dx;
    if (need_dx) dx = Tensor<T>(input_.shape());
    kernels::conv_backward(input_, weight_.value.data(), geom_, dy, need_dx ? &dx : nullptr,
                           weight_.grad.data(), has_bias_ ? bias_.grad.data() : nullptr);
    return dx;
  }

  std::vector<Param<T>*> parameters() {
    std::vector<Param<T>*> ps{&weight_};
    if (has_bias_) ps.push_back(&bias_);
    return ps;
  }

  const Tensor<T>& cached_input() const { return input_; }
  void clear_cache() { input_ = Tensor<T>(); }

 private:
  kernels::ConvGeom geom_{};
  Param<T> weight_;
  Param<T> bias_;
  bool has_bias_ = false;
  Tensor<T> input_;
};

// ---------------------------------------------------------------------------
// Batch normalisation

template <typename T>
class BatchNorm2d {
 public:
  static constexpr double kDefaultEpsilon = 1e-5;
  static constexpr double kDefaultMomentum = 0.1;

  BatchNorm2d() = default;
  BatchNorm2d(std::string name, int channels, double epsilon = kDefaultEpsilon,
              double momentum = kDefaultMomentum)
      : gamma_(name + ".gamma", Shape{channels, 1, 1, 1}),
        beta_(name + ".beta", Shape{channels, 1, 1, 1}),
        running_mean_{name + ".running_mean", Tensor<T>(channels, 1, 1, 1, T{0})},
        running_var_{name + ".running_var", Tensor<T>(channels, 1, 1, 1, T{1})},
        epsilon_(epsilon),
        momentum_(momentum) {
    if (!(epsilon > 0.0)) throw ArgumentError(name + ": epsilon must be positive");
    if (!(momentum > 0.0 && momentum < 1.0)) throw ArgumentError(name + ": momentum must be in (0,1)");
    gamma_.value.fill(T{1});
  }

  int channels() const { return gamma_.value.n(); }
  double epsilon() const { return epsilon_; }
  Param<T>& gamma() { return gamma_; }
  Param<T>& beta() { return beta_; }
  Buffer<T>& running_mean() { return running_mean_; }
  Buffer<T>& running_var() { return running_var_; }
  const Buffer<T>& running_mean() const { return running_mean_; }
  const Buffer<T>& running_var() const { return running_var_; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode = Mode::kTrain) {
    Tensor<T> y(x.shape());
    forward_into(x, y, mode);
    return y;
  }

  /// y may alias x.
  void forward_into(const Tensor<T>& x, Tensor<T>& y, Mode mode) {
    const int C = channels();
    if (x.c() != C)
      throw ShapeError(gamma_.name + ": expected " + std::to_string(C) + " channels, got " +
                       std::to_string(x.c()));
    const std::size_t hw = x.shape().plane();
    const double count = static_cast<double>(x.n()) * static_cast<double>(hw);
    mode_ = mode;
    inv_std_.assign(C, T{});
    if (mode == Mode::kTrain) xhat_ = Tensor<T>(x.shape());
    for (int c = 0; c < C; ++c) {
      double mean;
      double var;
      if (mode == Mode::kTrain) {
        double s = 0.0;
        for (int n = 0; n < x.n(); ++n) {
          const T* p = x.plane(n, c);
          T acc{};
#pragma omp simd reduction(+ : acc)
          for (std::size_t k = 0; k < hw; ++k) acc += p[k];
          s += static_cast<double>(acc);
        }
        mean = s / count;
        double ss = 0.0;
        for (int n = 0; n < x.n(); ++n) {
          const T* p = x.plane(n, c);
          const T m = static_cast<T>(mean);
          T acc{};
#pragma omp simd reduction(+ : acc)
          for (std::size_t k = 0; k < hw; ++k) acc += (p[k] - m) * (p[k] - m);
          ss += static_cast<double>(acc);
        }
        var = ss / count;
        const double unbiased = count > 1.0 ? var * count / (count - 1.0) : var;
        auto& rm = running_mean_.value[c];
        auto& rv = running_var_.value[c];
        rm = static_cast<T>((1.0 - momentum_) * rm + momentum_ * mean);
        rv = static_cast<T>((1.0 - momentum_) * rv + momentum_ * unbiased);
      } else {
        mean = static_cast<double>(running_mean_.value[c]);
        var = static_cast<double>(running_var_.value[c]);
      }
      const T inv = static_cast<T>(1.0 / std::sqrt(var + epsilon_));
      inv_std_[c] = inv;
      const T m = static_cast<T>(mean);
      const T g = gamma_.value[c];
      const T b = beta_.value[c];
      for (int n = 0; n < x.n(); ++n) {
        const T* p = x.plane(n, c);
        T* q = y.plane(n, c);
        if (mode == Mode::kTrain) {
          T* xh = xhat_.plane(n, c);
#pragma omp simd
          for (std::size_t k = 0; k < hw; ++k) {
            const T v = (p[k] - m) * inv;
            xh[k] = v;
            q[k] = g * v + b;
          }
        } else {
#pragma omp simd
          for (std::size_t k = 0; k < hw; ++k) q[k] = g * ((p[k] - m) * inv) + b;
        }
      }
    }
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.shape());
    backward_into(dy, dx);
    return dx;
  }

  /// dx may alias dy.
  void backward_into(const Tensor<T>& dy, Tensor<T>& dx) {
    const int C = channels();
    const std::size_t hw = dy.shape().plane();
    const double count = static_cast<double>(dy.n()) * static_cast<double>(hw);
    if (mode_ == Mode::kInfer) throw ShapeError(gamma_.name + ": backward needs a train-mode forward");
    require_same_shape(dy, xhat_, "batch_norm backward");
    for (int c = 0; c < C; ++c) {
      double sum_dy = 0.0;
      double sum_dy_xhat = 0.0;
      for (int n = 0; n < dy.n(); ++n) {
        const T* g = dy.plane(n, c);
        const T* xh = xhat_.plane(n, c);
        T a{};
        T b{};
#pragma omp simd reduction(+ : a, b)
        for (std::size_t k = 0; k < hw; ++k) {
          a += g[k];
          b += g[k] * xh[k];
        }
        sum_dy += static_cast<double>(a);
        sum_dy_xhat += static_cast<double>(b);
      }
      gamma_.grad[c] += static_cast<T>(sum_dy_xhat);
      beta_.grad[c] += static_cast<T>(sum_dy);
      const T gam = gamma_.value[c];
      const T scale = gam * inv_std_[c];
      const T mdy = static_cast<T>(sum_dy / count);
      const T mdyx = static_cast<T>(sum_dy_xhat / count);
      for (int n = 0; n < dy.n(); ++n) {
        const T* g = dy.plane(n, c);
        const T* xh = xhat_.plane(n, c);
        T* d = dx.plane(n, c);
#pragma omp simd
        for (std::size_t k = 0; k < hw; ++k) d[k] = scale * (g[k] - mdy - xh[k] * mdyx);
      }
    }
  }

  std::vector<Param<T>*> parameters() { return {&gamma_, &beta_}; }
  std::vector<Buffer<T>*> buffers() { return {&running_mean_, &running_var_}; }
  void clear_cache() { xhat_ = Tensor<T>(); }

 private:
  Param<T> gamma_;
  Param<T> beta_;
  Buffer<T> running_mean_;
  Buffer<T> running_var_;
  double epsilon_ = kDefaultEpsilon;
  double momentum_ = kDefaultMomentum;
  Mode mode_ = Mode::kTrain;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
};

// ---------------------------------------------------------------------------
// ReLU

template <typename T>
void relu_inplace(Tensor<T>& x) {
  T* p = x.data();
  const std::size_t n = x.size();
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) p[i] = p[i] > T{} ? p[i] : T{};
}

/// Gradient gate from the forward output: passes where y > 0.
template <typename T>
void relu_backward_inplace(Tensor<T>& dy, const Tensor<T>& y) {
  T* g = dy.data();
  const T* v = y.data();
  const std::size_t n = dy.size();
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) g[i] = v[i] > T{} ? g[i] : T{};
}

template <typename T>
class Relu {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    out_ = x;
    relu_inplace(out_);
    return out_;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx = dy;
    relu_backward_inplace(dx, out_);
    return dx;
  }
  std::vector<Param<T>*> parameters() { return {}; }

 private:
  Tensor<T> out_;
};

// ---------------------------------------------------------------------------
// Pooling with shared indices

/// Argmax positions of a 2x2/stride-2 max pool, as flat indices into the
/// input plane (y * in_w + x), one per output element.
struct PoolIndices {
  Shape out_shape{};
  int in_h = 0;
  int in_w = 0;
  std::vector<std::int32_t> index;
};

template <typename T>
Tensor<T> max_pool_2x2(const Tensor<T>& x, PoolIndices& idx) {
  if (x.h() % 2 != 0 || x.w() % 2 != 0)
    throw ShapeError("max_pool_2x2 needs even spatial dimensions, got " + x.shape().str());
  const int oh = x.h() / 2;
  const int ow = x.w() / 2;
  Tensor<T> y(x.n(), x.c(), oh, ow);
  idx.out_shape = y.shape();
  idx.in_h = x.h();
  idx.in_w = x.w();
  idx.index.assign(y.size(), 0);
  const int W = x.w();
  std::size_t o = 0;
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const T* p = x.plane(n, c);
      T* q = y.plane(n, c);
      for (int yy = 0; yy < oh; ++yy) {
        for (int xx = 0; xx < ow; ++xx, ++o) {
          const int base = (2 * yy) * W + 2 * xx;
          // Row-major window order; strict '>' keeps the first maximum.
          int best = base;
          T bv = p[base];
          const int cand[3] = {base + 1, base + W, base + W + 1};
          for (int k : cand)
            if (p[k] > bv) {
              bv = p[k];
              best = k;
            }
          q[yy * ow + xx] = bv;
          idx.index[o] = best;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> max_pool_2x2_backward(const Tensor<T>& dy, const PoolIndices& idx) {
  if (dy.shape() != idx.out_shape) throw ShapeError("max_pool backward: index/gradient shape mismatch");
  Tensor<T> dx(dy.n(), dy.c(), idx.in_h, idx.in_w);
  const std::size_t per = idx.out_shape.plane();
  std::size_t o = 0;
  for (int n = 0; n < dy.n(); ++n)
    for (int c = 0; c < dy.c(); ++c) {
      T* d = dx.plane(n, c);
      const T* g = dy.plane(n, c);
      for (std::size_t k = 0; k < per; ++k, ++o) d[idx.index[o]] += g[k];
    }
  return dx;
}

/// Places each value at its recorded argmax position; all other cells are 0.
template <typename T>
Tensor<T> unpool_2x2(const Tensor<T>& x, const PoolIndices& idx, int out_h, int out_w) {
  if (x.shape() != idx.out_shape)
    throw ShapeError("unpool_2x2: input " + x.shape().str() + " does not match pool indices " +
                     idx.out_shape.str());
  if (out_h != 2 * x.h() || out_w != 2 * x.w() || out_h != idx.in_h || out_w != idx.in_w)
    throw ShapeError("unpool_2x2: output size must be twice the input and match the pool level");
  Tensor<T> y(x.n(), x.c(), out_h, out_w);
  const std::size_t per = x.shape().plane();
  const std::int32_t limit = out_h * out_w;
  std::size_t o = 0;
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      T* q = y.plane(n, c);
      const T* p = x.plane(n, c);
      for (std::size_t k = 0; k < per; ++k, ++o) {
        const std::int32_t at = idx.index[o];
        if (at < 0 || at >= limit) throw ShapeError("unpool_2x2: index out of range");
        q[at] = p[k];
      }
    }
  return y;
}

template <typename T>
Tensor<T> unpool_2x2_backward(const Tensor<T>& dy, const PoolIndices& idx) {
  if (dy.h() != idx.in_h || dy.w() != idx.in_w) throw ShapeError("unpool backward: shape mismatch");
  Tensor<T> dx(idx.out_shape);
  const std::size_t per = idx.out_shape.plane();
  std::size_t o = 0;
  for (int n = 0; n < dx.n(); ++n)
    for (int c = 0; c < dx.c(); ++c) {
      T* d = dx.plane(n, c);
      const T* g = dy.plane(n, c);
      for (std::size_t k = 0; k < per; ++k, ++o) d[k] = g[idx.index[o]];
    }
  return dx;
}

/// Pool + unpool pair as gradcheck-able modules.
template <typename T>
class MaxPool2x2 {
 public:
  Tensor<T> forward(const Tensor<T>& x) { return max_pool_2x2(x, idx_); }
  Tensor<T> backward(const Tensor<T>& dy) { return max_pool_2x2_backward(dy, idx_); }
  std::vector<Param<T>*> parameters() { return {}; }
  const PoolIndices& indices() const { return idx_; }

 private:
  PoolIndices idx_;
};

// ---------------------------------------------------------------------------
// Output

/// Per-pixel softmax over the channel axis, max-subtracted.
template <typename T>
Tensor<T> softmax_pixelwise(const Tensor<T>& logits) {
  Tensor<T> p(logits.shape());
  const std::size_t hw = logits.shape().plane();
  const int C = logits.c();
  for (int n = 0; n < logits.n(); ++n) {
    for (std::size_t k = 0; k < hw; ++k) {
      T mx = logits.plane(n, 0)[k];
      for (int c = 1; c < C; ++c) mx = std::max(mx, logits.plane(n, c)[k]);
      T sum{};
      for (int c = 0; c < C; ++c) {
        const T e = std::exp(logits.plane(n, c)[k] - mx);
        p.plane(n, c)[k] = e;
        sum += e;
      }
      for (int c = 0; c < C; ++c) p.plane(n, c)[k] /= sum;
    }
  }
  return p;
}

using ClassWeights = std::array<double, 3>;

inline constexpr double kProbabilityFloor = 1e-12;

template <typename T>
void check_labels(const Tensor<T>& probs, std::span<const std::uint8_t> labels) {
  if (labels.size() != static_cast<std::size_t>(probs.n()) * probs.shape().plane())
    throw ShapeError("label count does not match the probability tensor");
  for (auto l : labels)
    if (l >= probs.c()) throw ArgumentError("label outside the class range");
}

/// -(1/N) sum_pixels w[label] ln p[label]; labels are n-major, row-major.
template <typename T>
double weighted_cross_entropy(const Tensor<T>& probs, std::span<const std::uint8_t> labels,
                              const ClassWeights& w) {
  check_labels(probs, labels);
  const std::size_t hw = probs.shape().plane();
  double loss = 0.0;
  std::size_t i = 0;
  for (int n = 0; n < probs.n(); ++n)
    for (std::size_t k = 0; k < hw; ++k, ++i) {
      const int l = labels[i];
      const double p = std::max(static_cast<double>(probs.plane(n, l)[k]), kProbabilityFloor);
      loss -= w[l] * std::log(p);
    }
  return loss / static_cast<double>(labels.size());
}

/// Gradient of weighted_cross_entropy(softmax(logits)) w.r.t. the logits:
/// w[label] * (p - onehot) / N.
template <typename T>
Tensor<T> weighted_cross_entropy_backward(const Tensor<T>& probs,
                                          std::span<const std::uint8_t> labels,
                                          const ClassWeights& w) {
  check_labels(probs, labels);
  Tensor<T> g(probs.shape());
  const std::size_t hw = probs.shape().plane();
  const double inv_n = 1.0 / static_cast<double>(labels.size());
  std::size_t i = 0;
  for (int n = 0; n < probs.n(); ++n)
    for (std::size_t k = 0; k < hw; ++k, ++i) {
      const int l = labels[i];
      const T scale = static_cast<T>(w[l] * inv_n);
      for (int c = 0; c < probs.c(); ++c) {
        const T p = probs.plane(n, c)[k];
        g.plane(n, c)[k] = scale * (p - (c == l ? T{1} : T{0}));
      }
    }
  return g;
}

}  // namespace cropseg::nn
