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

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cropseg/arch.hpp"
#include "cropseg/image.hpp"
#include "cropseg/imgproc.hpp"
#include "cropseg/nn/layers.hpp"
#include "cropseg/nn/weight_store.hpp"

namespace cropseg {

using nn::Mode;
using nn::Tensor;

/// Residual separable bottleneck:
/// 1x1 reduce -> BN -> ReLU -> kx1 -> BN -> ReLU -> 1xk -> BN -> ReLU
/// -> 1x1 expand -> BN -> (+ input) -> ReLU
template <typename T>
class Bottleneck {
 public:
  Bottleneck() = default;
  Bottleneck(const std::string& name, int depth, int mid, int k, bool residual)
      : reduce_(name + ".reduce", depth, mid, 1, 1, false),
        bn1_(name + ".bn1", mid),
        vert_(name + ".vert", mid, mid, k, 1, false),
        bn2_(name + ".bn2", mid),
        horiz_(name + ".horiz", mid, mid, 1, k, false),
        bn3_(name + ".bn3", mid),
        expand_(name + ".expand", mid, depth, 1, 1, false),
        bn4_(name + ".bn4", depth),
        residual_(residual) {}

  void init(std::mt19937_64& rng) {
    reduce_.init(rng);
    vert_.init(rng);
    horiz_.init(rng);
    expand_.init(rng);
  }

  bool residual() const { return residual_; }
  void set_residual(bool r) { residual_ = r; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode = Mode::kTrain) {
    const bool keep = mode == Mode::kTrain;
    Tensor<T> a = reduce_.forward(x, keep);
    bn1_.forward_into(a, a, mode);
    nn::relu_inplace(a);
    Tensor<T> b = vert_.forward(a, keep);
    bn2_.forward_into(b, b, mode);
    nn::relu_inplace(b);
    Tensor<T> c = horiz_.forward(b, keep);
    bn3_.forward_into(c, c, mode);
    nn::relu_inplace(c);
    Tensor<T> d = expand_.forward(c, keep);
    bn4_.forward_into(d, d, mode);
    if (residual_) {
      T* p = d.data();
      const T* q = x.data();
#pragma omp simd
      for (std::size_t i = 0; i < d.size(); ++i) p[i] += q[i];
    }
    nn::relu_inplace(d);
    if (keep) out_ = d;
    return d;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> g = dy;
    nn::relu_backward_inplace(g, out_);
    Tensor<T> skip;
    if (residual_) skip = g;
    bn4_.backward_into(g, g);
    g = expand_.backward(g);
    nn::relu_backward_inplace(g, expand_.cached_input());
    bn3_.backward_into(g, g);
    g = horiz_.backward(g);
    nn::relu_backward_inplace(g, horiz_.cached_input());
    bn2_.backward_into(g, g);
    g = vert_.backward(g);
    nn::relu_backward_inplace(g, vert_.cached_input());
    bn1_.backward_into(g, g);
    g = reduce_.backward(g);
    if (residual_) {
      T* p = g.data();
      const T* q = skip.data();
#pragma omp simd
      for (std::size_t i = 0; i < g.size(); ++i) p[i] += q[i];
    }
    return g;
  }

  std::vector<nn::Param<T>*> parameters() {
    std::vector<nn::Param<T>*> ps;
    for (auto* p : reduce_.parameters()) ps.push_back(p);
    for (auto* p : bn1_.parameters()) ps.push_back(p);
    for (auto* p : vert_.parameters()) ps.push_back(p);
    for (auto* p : bn2_.parameters()) ps.push_back(p);
    for (auto* p : horiz_.parameters()) ps.push_back(p);
    for (auto* p : bn3_.parameters()) ps.push_back(p);
    for (auto* p : expand_.parameters()) ps.push_back(p);
    for (auto* p : bn4_.parameters()) ps.push_back(p);
    return ps;
  }

  std::vector<nn::Buffer<T>*> buffers() {
    std::vector<nn::Buffer<T>*> bs;
    for (auto* bn : {&bn1_, &bn2_, &bn3_, &bn4_})
      for (auto* b : bn->buffers()) bs.push_back(b);
    return bs;
  }

  void clear_cache() {
    for (auto* c : {&reduce_, &vert_, &horiz_, &expand_}) c->clear_cache();
    for (auto* bn : {&bn1_, &bn2_, &bn3_, &bn4_}) bn->clear_cache();
    out_ = Tensor<T>();
  }

 private:
  nn::Conv2d<T> reduce_;
  nn::BatchNorm2d<T> bn1_;
  nn::Conv2d<T> vert_;
  nn::BatchNorm2d<T> bn2_;
  nn::Conv2d<T> horiz_;
  nn::BatchNorm2d<T> bn3_;
  nn::Conv2d<T> expand_;
  nn::BatchNorm2d<T> bn4_;
  bool residual_ = true;
  Tensor<T> out_;
};

/// Encoder-decoder segmentation network built from a NetworkSpec.
template <typename T>
class Network {
 public:
  Network() = default;

  Network(const arch::NetworkSpec& spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    const int L = spec_.levels();
    stem_ = nn::Conv2d<T>("enc0.conv", spec_.input_channels, spec_.depth, spec_.kernel, spec_.kernel, false);
    stem_bn_ = nn::BatchNorm2d<T>("enc0.bn", spec_.depth);
    encoder_.resize(L);
    decoder_.resize(L);
    for (int s = 0; s < L; ++s) {
      const int count = spec_.encoder_stages[s] - (s == 0 ? 1 : 0);
      for (int i = 0; i < count; ++i)
        encoder_[s].emplace_back("enc" + std::to_string(s) + ".b" + std::to_string(i), spec_.depth,
                                 spec_.bottleneck_depth, spec_.kernel, spec_.residual);
    }
    for (int d = 0; d < L; ++d) {
      const int level = L - 1 - d;
      for (int i = 0; i < spec_.decoder_stages[d]; ++i)
        decoder_[d].emplace_back("dec" + std::to_string(level) + ".b" + std::to_string(i), spec_.depth,
                                 spec_.bottleneck_depth, spec_.kernel, spec_.residual);
    }
    head_ = nn::Conv2d<T>("head", spec_.depth, spec_.num_classes, 1, 1, true);
    pool_idx_.resize(L);

    std::mt19937_64 rng(seed);
    stem_.init(rng);
    for (auto& st : encoder_)
      for (auto& b : st) b.init(rng);
    for (auto& st : decoder_)
      for (auto& b : st) b.init(rng);
    head_.init(rng);
  }

  const arch::NetworkSpec& spec() const { return spec_; }
  int input_channels() const { return spec_.input_channels; }
  int num_classes() const { return spec_.num_classes; }

  /// Toggles the skip path of every bottleneck (structure sanity checks).
  void set_residual(bool r) {
    for (auto& st : encoder_)
      for (auto& b : st) b.set_residual(r);
    for (auto& st : decoder_)
      for (auto& b : st) b.set_residual(r);
  }

  /// Last feature map before the head (depth channels, input resolution).
  Tensor<T> features(const Tensor<T>& x, Mode mode) {
    if (x.c() != spec_.input_channels)
      throw ShapeError("network expects " + std::to_string(spec_.input_channels) +
                       " input channels, got " + std::to_string(x.c()));
    arch::require_poolable(spec_, x.h(), x.w());
    const bool keep = mode == Mode::kTrain;
    Tensor<T> h = stem_.forward(x, keep);
    stem_bn_.forward_into(h, h, mode);
    nn::relu_inplace(h);
    if (keep) stem_out_ = h;
    const int L = spec_.levels();
    for (int s = 0; s < L; ++s) {
      for (auto& b : encoder_[s]) h = b.forward(h, mode);
      h = nn::max_pool_2x2(h, pool_idx_[s]);
    }
    for (int d = 0; d < L; ++d) {
      const int level = L - 1 - d;
      const auto& idx = pool_idx_[level];
      h = nn::unpool_2x2(h, idx, idx.in_h, idx.in_w);
      for (auto& b : decoder_[d]) h = b.forward(h, mode);
    }
    return h;
  }

  /// Per-pixel class logits.
  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    Tensor<T> f = features(x, mode);
    return head_.forward(f, mode == Mode::kTrain);
  }

  /// Per-pixel class probabilities, inference statistics.
  Tensor<T> predict(const Tensor<T>& x) { return nn::softmax_pixelwise(forward(x, Mode::kInfer)); }

  /// Backpropagates dL/dlogits through the whole network, accumulating
  /// gradients. Requires a preceding train-mode forward.
  void backward(const Tensor<T>& dlogits) {
    Tensor<T> g = head_.backward(dlogits);
    const int L = spec_.levels();
    for (int d = L - 1; d >= 0; --d) {
      const int level = L - 1 - d;
      for (auto it = decoder_[d].rbegin(); it != decoder_[d].rend(); ++it) g = it->backward(g);
      g = nn::unpool_2x2_backward(g, pool_idx_[level]);
    }
    for (int s = L - 1; s >= 0; --s) {
      g = nn::max_pool_2x2_backward(g, pool_idx_[s]);
      for (auto it = encoder_[s].rbegin(); it != encoder_[s].rend(); ++it) g = it->backward(g);
    }
    nn::relu_backward_inplace(g, stem_out_);
    stem_bn_.backward_into(g, g);
    stem_.backward(g, false);
  }

  nn::Conv2d<T>& head() { return head_; }

  std::vector<nn::Param<T>*> parameters() {
    std::vector<nn::Param<T>*> ps;
    for (auto* p : stem_.parameters()) ps.push_back(p);
    for (auto* p : stem_bn_.parameters()) ps.push_back(p);
    for (auto& st : encoder_)
      for (auto& b : st)
        for (auto* p : b.parameters()) ps.push_back(p);
    for (auto& st : decoder_)
      for (auto& b : st)
        for (auto* p : b.parameters()) ps.push_back(p);
    for (auto* p : head_.parameters()) ps.push_back(p);
    return ps;
  }

  std::vector<nn::Buffer<T>*> buffers() {
    std::vector<nn::Buffer<T>*> bs;
    for (auto* b : stem_bn_.buffers()) bs.push_back(b);
    for (auto& st : encoder_)
      for (auto& blk : st)
        for (auto* b : blk.buffers()) bs.push_back(b);
    for (auto& st : decoder_)
      for (auto& blk : st)
        for (auto* b : blk.buffers()) bs.push_back(b);
    return bs;
  }

  std::int64_t count_parameters() {
    std::int64_t n = 0;
    for (auto* p : parameters()) n += static_cast<std::int64_t>(p->numel());
    return n;
  }

  /// Freezes everything except the head when head_only is true.
  void set_head_only(bool head_only) {
    for (auto* p : parameters()) p->trainable = !head_only;
    for (auto* p : head_.parameters()) p->trainable = true;
  }

  void clear_cache() {
    stem_.clear_cache();
    stem_bn_.clear_cache();
    stem_out_ = Tensor<T>();
    for (auto& st : encoder_)
      for (auto& b : st) b.clear_cache();
    for (auto& st : decoder_)
      for (auto& b : st) b.clear_cache();
    head_.clear_cache();
  }

  // -- persistence ---------------------------------------------------------

  nn::WeightStore to_store(int input_h, int input_w) {
    nn::WeightStore ws;
    const std::vector<std::uint32_t> meta = {
        static_cast<std::uint32_t>(spec_.input_channels), static_cast<std::uint32_t>(spec_.num_classes),
        static_cast<std::uint32_t>(input_h), static_cast<std::uint32_t>(input_w)};
    ws.put("meta.config", {4}, {static_cast<float>(meta[0]), static_cast<float>(meta[1]),
                                static_cast<float>(meta[2]), static_cast<float>(meta[3])});
    for (auto* p : parameters()) ws.put_tensor(p->name, p->value, p->name.ends_with(".weight") ? 4 : 1);
    for (auto* b : buffers()) ws.put_tensor(b->name, b->value, 1);
    return ws;
  }

  void load_store(const nn::WeightStore& ws) {
    for (auto* p : parameters()) ws.load_into(p->name, p->value);
    for (auto* b : buffers()) ws.load_into(b->name, b->value);
  }

 private:
  arch::NetworkSpec spec_;
  nn::Conv2d<T> stem_;
  nn::BatchNorm2d<T> stem_bn_;
  Tensor<T> stem_out_;
  std::vector<std::vector<Bottleneck<T>>> encoder_;
  std::vector<std::vector<Bottleneck<T>>> decoder_;
  nn::Conv2d<T> head_;
  std::vector<nn::PoolIndices> pool_idx_;
};

/// Stored model configuration: (input channels, classes, input h, input w).
struct ModelInfo {
  int input_channels = 14;
  int num_classes = kNumClasses;
  int input_h = imgproc::kInputHeight;
  int input_w = imgproc::kInputWidth;
};

inline ModelInfo model_info(const nn::WeightStore& ws) {
  const auto& m = ws.get("meta.config");
  if (m.data.size() != 4) throw LoadError("meta.config must hold 4 values");
  return {static_cast<int>(m.data[0]), static_cast<int>(m.data[1]), static_cast<int>(m.data[2]),
          static_cast<int>(m.data[3])};
}

inline Network<float> load_network(const nn::WeightStore& ws) {
  const ModelInfo info = model_info(ws);
  arch::NetworkSpec spec;
  spec.input_channels = info.input_channels;
  spec.num_classes = info.num_classes;
  Network<float> net(spec, 0);
  net.load_store(ws);
  return net;
}

// ---------------------------------------------------------------------------
// Volume <-> tensor plumbing

inline Tensor<float> to_tensor(std::span<const imgproc::InputVolume> vols) {
  if (vols.empty()) throw ArgumentError("empty batch");
  const auto& v0 = vols.front();
  Tensor<float> t(static_cast<int>(vols.size()), v0.channel_count(), v0.height, v0.width);
  for (std::size_t n = 0; n < vols.size(); ++n) {
    const auto& v = vols[n];
    if (v.width != v0.width || v.height != v0.height || v.channel_count() != v0.channel_count())
      throw ShapeError("batch volumes differ in shape");
    for (int c = 0; c < v.channel_count(); ++c)
      std::copy(v.channels[c].data().begin(), v.channels[c].data().end(),
                t.plane(static_cast<int>(n), c));
  }
  return t;
}

inline Tensor<float> to_tensor(const imgproc::InputVolume& v) {
  return to_tensor(std::span<const imgproc::InputVolume>(&v, 1));
}

/// Per-pixel argmax of an (N, C, H, W) probability/logit tensor for sample n.
template <typename T>
LabelMask argmax_labels(const Tensor<T>& scores, int n = 0) {
  LabelMask m(scores.w(), scores.h());
  const std::size_t hw = scores.shape().plane();
  for (std::size_t k = 0; k < hw; ++k) {
    int best = 0;
    T bv = scores.plane(n, 0)[k];
    for (int c = 1; c < scores.c(); ++c)
      if (scores.plane(n, c)[k] > bv) {
        bv = scores.plane(n, c)[k];
        best = c;
      }
    m[k] = static_cast<std::uint8_t>(best);
  }
  return m;
}

}  // namespace cropseg
