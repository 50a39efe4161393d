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

// Declarative description of the encoder-decoder segmentation network and
// its analytic cost model: parameters, multiply-accumulates and receptive
// field. The trainable instantiation lives in network.hpp.

#include <cstdint>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cropseg/common.hpp"

namespace cropseg::arch {

enum class LayerKind { kPlainConv, kBottleneck, kPool, kUnpool, kHead };

/// One entry of the flattened layer list.
struct LayerSpec {
  LayerKind kind = LayerKind::kPlainConv;
  std::string name;
  int in_ch = 0;
  int out_ch = 0;
  int mid_ch = 0;       // bottleneck only
  int kernel = 1;       // spatial extent of the main convolution
  bool separable = true;  // bottleneck: kxk factorised into kx1 then 1xk
  bool residual = true;
  bool bias = false;
  int level = 0;        // pyramid level (0 = full resolution)
  bool encoder = true;
};

/// Individual convolutions making up a layer, as (kh, kw, in, out).
struct ConvShape {
  int kh;
  int kw;
  int in;
  int out;
};

inline std::vector<ConvShape> convs_of(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::kPlainConv:
      return {{l.kernel, l.kernel, l.in_ch, l.out_ch}};
    case LayerKind::kBottleneck:
      if (l.separable)
        return {{1, 1, l.in_ch, l.mid_ch},
                {l.kernel, 1, l.mid_ch, l.mid_ch},
                {1, l.kernel, l.mid_ch, l.mid_ch},
                {1, 1, l.mid_ch, l.out_ch}};
      return {{1, 1, l.in_ch, l.mid_ch}, {l.kernel, l.kernel, l.mid_ch, l.mid_ch}, {1, 1, l.mid_ch, l.out_ch}};
    case LayerKind::kHead:
      return {{1, 1, l.in_ch, l.out_ch}};
    default:
      return {};
  }
}

/// Channel widths of the batch norms following each convolution.
inline std::vector<int> batchnorms_of(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::kPlainConv: return {l.out_ch};
    case LayerKind::kBottleneck: {
      std::vector<int> bn;
      for (const auto& c : convs_of(l)) bn.push_back(c.out);
      return bn;
    }
    default: return {};
  }
}

/// Multiply-accumulates per output position: sum of kh*kw*in*out.
inline std::int64_t macs_per_position(const LayerSpec& l) {
  std::int64_t s = 0;
  for (const auto& c : convs_of(l)) s += static_cast<std::int64_t>(c.kh) * c.kw * c.in * c.out;
  return s;
}

inline std::int64_t conv_weight_count(const LayerSpec& l) { return macs_per_position(l); }

/// Learnable parameters: conv weights, biases, batch-norm gamma and beta.
inline std::int64_t parameter_count(const LayerSpec& l) {
  std::int64_t n = conv_weight_count(l);
  if (l.bias) n += l.out_ch;
  for (int c : batchnorms_of(l)) n += 2 * c;
  return n;
}

/// Plain k x k convolution without bias, followed by batch norm.
inline LayerSpec plain_conv(int in, int out, int k, std::string name = "conv") {
  LayerSpec l;
  l.kind = LayerKind::kPlainConv;
  l.name = std::move(name);
  l.in_ch = in;
  l.out_ch = out;
  l.kernel = k;
  return l;
}

inline LayerSpec bottleneck(int depth, int mid, int k, bool separable, std::string name = "bottleneck") {
  LayerSpec l;
  l.kind = LayerKind::kBottleneck;
  l.name = std::move(name);
  l.in_ch = depth;
  l.out_ch = depth;
  l.mid_ch = mid;
  l.kernel = k;
  l.separable = separable;
  return l;
}

inline LayerSpec pool_layer(std::string name = "pool") {
  LayerSpec l;
  l.kind = LayerKind::kPool;
  l.name = std::move(name);
  l.kernel = 2;
  return l;
}

/// Network description. Stage vectors count convolutional layers per
/// pyramid level; the first encoder stage includes the plain input conv.
struct NetworkSpec {
  int input_channels = 14;
  int depth = 16;
  int bottleneck_depth = 8;
  int kernel = 5;
  int num_classes = kNumClasses;
  std::vector<int> encoder_stages = {4, 3, 3, 3};
  std::vector<int> decoder_stages = {3, 3, 3, 3};
  bool residual = true;

  static constexpr int kEncoderConvs = 13;
  static constexpr int kDecoderConvs = 12;
  static constexpr int kBottlenecks = 24;
  static constexpr std::int64_t kParameterBudget = 30000;

  int levels() const { return static_cast<int>(encoder_stages.size()); }

  std::vector<LayerSpec> layers() const {
    std::vector<LayerSpec> out;
    const int L = levels();
    for (int s = 0; s < L; ++s) {
      for (int i = 0; i < encoder_stages[s]; ++i) {
        LayerSpec l;
        if (s == 0 && i == 0) {
          l = plain_conv(input_channels, depth, kernel, "enc0.conv");
        } else {
          l = bottleneck(depth, bottleneck_depth, kernel, true,
                         "enc" + std::to_string(s) + ".b" + std::to_string(s == 0 ? i - 1 : i));
          l.residual = residual;
        }
        l.level = s;
        l.encoder = true;
        out.push_back(l);
      }
      LayerSpec p = pool_layer("pool" + std::to_string(s + 1));
      p.level = s;
      p.in_ch = p.out_ch = depth;
      out.push_back(p);
    }
    const int D = static_cast<int>(decoder_stages.size());
    for (int d = 0; d < D; ++d) {
      const int level = L - 1 - d;
      LayerSpec u;
      u.kind = LayerKind::kUnpool;
      u.name = "unpool" + std::to_string(level + 1);
      u.kernel = 2;
      u.in_ch = u.out_ch = depth;
      u.level = level;
      u.encoder = false;
      out.push_back(u);
      for (int i = 0; i < decoder_stages[d]; ++i) {
        LayerSpec l = bottleneck(depth, bottleneck_depth, kernel, true,
                                 "dec" + std::to_string(level) + ".b" + std::to_string(i));
        l.residual = residual;
        l.level = level;
        l.encoder = false;
        out.push_back(l);
      }
    }
    LayerSpec h;
    h.kind = LayerKind::kHead;
    h.name = "head";
    h.in_ch = depth;
    h.out_ch = num_classes;
    h.kernel = 1;
    h.bias = true;
    h.level = 0;
    h.encoder = false;
    out.push_back(h);
    return out;
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& l : layers()) n += arch::parameter_count(l);
    return n;
  }

  /// Throws SpecError naming the first violated structural constraint.
  void validate() const {
    auto fail = [](const std::string& what) { throw SpecError("network spec: " + what); };
    if (input_channels < 1) fail("input_channels must be positive");
    if (num_classes < 2) fail("num_classes must be at least 2");
    if (kernel < 1 || kernel % 2 == 0) fail("kernel must be odd");
    if (bottleneck_depth * 2 != depth) fail("bottleneck depth must be half the layer depth");
    if (encoder_stages.size() != decoder_stages.size())
      fail("every pool needs a symmetric unpool (stage counts differ)");
    if (encoder_stages.empty() || encoder_stages[0] < 1) fail("first encoder stage must hold the input conv");
    const int enc = std::accumulate(encoder_stages.begin(), encoder_stages.end(), 0);
    const int dec = std::accumulate(decoder_stages.begin(), decoder_stages.end(), 0);
    if (enc != kEncoderConvs) fail("encoder must have 13 conv layers, has " + std::to_string(enc));
    if (dec != kDecoderConvs) fail("decoder must have 12 conv layers, has " + std::to_string(dec));
    int bottlenecks = 0;
    for (const auto& l : layers()) bottlenecks += l.kind == LayerKind::kBottleneck ? 1 : 0;
    if (bottlenecks != kBottlenecks)
      fail("exactly 24 of the 25 conv layers must be bottlenecks, found " + std::to_string(bottlenecks));
    if (parameter_count() >= kParameterBudget)
      fail("parameter count " + std::to_string(parameter_count()) + " is not below 30000");
  }
};

// ---------------------------------------------------------------------------
// Cost analysis

/// Input rasters must survive every pool level exactly.
inline void require_poolable(const NetworkSpec& spec, int h, int w) {
  const int div = 1 << spec.levels();
  if (h < div || w < div || h % div != 0 || w % div != 0)
    throw ShapeError("input " + std::to_string(w) + "x" + std::to_string(h) +
                     " is not divisible by " + std::to_string(div) + " at every pool level");
}

struct LayerCost {
  std::string name;
  LayerKind kind;
  int out_c = 0;
  int out_h = 0;
  int out_w = 0;
  std::int64_t params = 0;
  std::int64_t macs_per_position = 0;
  std::int64_t macs = 0;
  int receptive_field = 0;  // cumulative; 0 for decoder layers
};

struct CostReport {
  std::vector<LayerCost> layers;
  std::int64_t total_params = 0;
  std::int64_t total_macs = 0;
};

/// Standard recurrence r <- r + (k-1) j, j <- j s; returns the running r
/// after each layer along one axis. Vertical and horizontal taps are tracked
/// separately so factorised kernels count on the right axis.
struct ReceptiveField {
  int height = 1;
  int width = 1;
  int jump = 1;

  void add(const LayerSpec& l) {
    switch (l.kind) {
      case LayerKind::kPlainConv:
      case LayerKind::kBottleneck:
      case LayerKind::kHead:
        for (const auto& c : convs_of(l)) {
          height += (c.kh - 1) * jump;
          width += (c.kw - 1) * jump;
        }
        break;
      case LayerKind::kPool:
        height += (l.kernel - 1) * jump;
        width += (l.kernel - 1) * jump;
        jump *= 2;
        break;
      case LayerKind::kUnpool:
        break;
    }
  }
};

inline std::pair<int, int> receptive_field(const std::vector<LayerSpec>& layers) {
  ReceptiveField rf;
  for (const auto& l : layers) rf.add(l);
  return {rf.height, rf.width};
}

/// Receptive field of the encoder path (conv and pool layers).
inline std::pair<int, int> receptive_field(const NetworkSpec& spec) {
  std::vector<LayerSpec> enc;
  for (const auto& l : spec.layers())
    if (l.encoder) enc.push_back(l);
  return receptive_field(enc);
}

inline CostReport analyze(const NetworkSpec& spec, int input_h, int input_w) {
  require_poolable(spec, input_h, input_w);
  CostReport rep;
  ReceptiveField rf;
  for (const auto& l : spec.layers()) {
    LayerCost c;
    c.name = l.name;
    c.kind = l.kind;
    const int scale = 1 << l.level;
    int h = input_h / scale;
    int w = input_w / scale;
    if (l.kind == LayerKind::kPool) {
      h /= 2;
      w /= 2;
    }
    c.out_c = l.kind == LayerKind::kHead ? l.out_ch : (l.out_ch > 0 ? l.out_ch : spec.depth);
    c.out_h = h;
    c.out_w = w;
    c.params = parameter_count(l);
    c.macs_per_position = macs_per_position(l);
    c.macs = c.macs_per_position * static_cast<std::int64_t>(h) * w;
    if (l.encoder) {
      rf.add(l);
      c.receptive_field = rf.height;
    }
    rep.total_params += c.params;
    rep.total_macs += c.macs;
    rep.layers.push_back(c);
  }
  return rep;
}

inline std::int64_t count_flops(const NetworkSpec& spec, int input_h, int input_w) {
  return analyze(spec, input_h, input_w).total_macs;
}

inline const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kPlainConv: return "conv";
    case LayerKind::kBottleneck: return "bottleneck";
    case LayerKind::kPool: return "pool";
    case LayerKind::kUnpool: return "unpool";
    case LayerKind::kHead: return "head";
  }
  return "?";
}

inline std::string format_table(const CostReport& rep) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "layer" << std::setw(12) << "kind" << std::right
     << std::setw(16) << "output" << std::setw(10) << "params" << std::setw(12) << "MACs/pos"
     << std::setw(16) << "MACs" << std::setw(8) << "RF" << "\n";
  for (const auto& c : rep.layers) {
    std::ostringstream shape;
    shape << c.out_c << "x" << c.out_h << "x" << c.out_w;
    os << std::left << std::setw(12) << c.name << std::setw(12) << kind_name(c.kind) << std::right
       << std::setw(16) << shape.str() << std::setw(10) << c.params << std::setw(12)
       << c.macs_per_position << std::setw(16) << c.macs << std::setw(8)
       << (c.receptive_field > 0 ? std::to_string(c.receptive_field) : "-") << "\n";
  }
  os << "total parameters: " << rep.total_params << "\n";
  os << "total MACs: " << rep.total_macs << "\n";
  return os.str();
}

inline std::string format_csv(const CostReport& rep) {
  std::ostringstream os;
  os << "name,kind,out_c,out_h,out_w,params,macs_per_position,macs,receptive_field\n";
  for (const auto& c : rep.layers) {
    os << c.name << "," << kind_name(c.kind) << "," << c.out_c << "," << c.out_h << "," << c.out_w
       << "," << c.params << "," << c.macs_per_position << "," << c.macs << ","
       << (c.receptive_field > 0 ? std::to_string(c.receptive_field) : "") << "\n";
  }
  return os.str();
}

}  // namespace cropseg::arch
