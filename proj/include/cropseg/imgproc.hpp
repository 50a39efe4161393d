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
#include <string_view>
#include <utility>
#include <vector>

#include "cropseg/baselines.hpp"
#include "cropseg/image.hpp"

namespace cropseg::imgproc {

inline constexpr int kInputWidth = 512;
inline constexpr int kInputHeight = 384;
inline constexpr int kNumChannels = 14;
inline constexpr float kCiveOffset = 18.78745f;

/// Channel names in network input order.
inline constexpr std::array<std::string_view, kNumChannels> kChannelNames = {
    "R",   "G",   "B",   "ExG", "ExR",  "CIVE",    "NDI",
    "HUE", "SAT", "VAL", "dxExG", "dyExG", "lapExG", "EDGES"};

/// Which channel stack feeds the network.
enum class ChannelSet { kRgb, kAll };

inline int channel_count(ChannelSet set) { return set == ChannelSet::kRgb ? 3 : kNumChannels; }

inline ChannelSet parse_channel_set(std::string_view s) {
  if (s == "rgb") return ChannelSet::kRgb;
  if (s == "all") return ChannelSet::kAll;
  throw ArgumentError("channel set must be 'rgb' or 'all'");
}

// ---------------------------------------------------------------------------
// Resampling

namespace detail {

struct Tap {
  int i0;
  int i1;
  float frac;
};

// Half-pixel-centred source coordinate for each destination index.
inline std::vector<Tap> bilinear_taps(int src, int dst) {
  std::vector<Tap> taps(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int d = 0; d < dst; ++d) {
    double s = (d + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, src - 1);
    taps[d] = {i0, i1, static_cast<float>(s - i0)};
  }
  return taps;
}

inline float lerp(float a, float b, float t) { return a + t * (b - a); }

}  // namespace detail

inline RgbImage resize_bilinear(const RgbImage& img, int target_w, int target_h) {
  if (target_w < 1 || target_h < 1) throw ArgumentError("resize target must be at least 1x1");
  if (img.width() < 1 || img.height() < 1) throw ArgumentError("cannot resize an empty image");
  if (target_w == img.width() && target_h == img.height()) return img;

  const auto tx = detail::bilinear_taps(img.width(), target_w);
  const auto ty = detail::bilinear_taps(img.height(), target_h);
  RgbImage out(target_w, target_h);
  for (int y = 0; y < target_h; ++y) {
    const auto& vy = ty[y];
    for (int x = 0; x < target_w; ++x) {
      const auto& vx = tx[x];
      for (int c = 0; c < 3; ++c) {
        const float top = detail::lerp(img.at(vx.i0, vy.i0, c), img.at(vx.i1, vy.i0, c), vx.frac);
        const float bot = detail::lerp(img.at(vx.i0, vy.i1, c), img.at(vx.i1, vy.i1, c), vx.frac);
        out.at(x, y, c) = std::clamp(detail::lerp(top, bot, vy.frac), 0.0f, 1.0f);
      }
    }
  }
  return out;
}

/// Nearest-neighbour resize for label rasters.
inline LabelMask resize_nearest(const LabelMask& m, int target_w, int target_h) {
  if (target_w < 1 || target_h < 1) throw ArgumentError("resize target must be at least 1x1");
  if (target_w == m.width() && target_h == m.height()) return m;
  LabelMask out(target_w, target_h);
  for (int y = 0; y < target_h; ++y) {
    const int sy = std::min(m.height() - 1, static_cast<int>((y + 0.5) * m.height() / target_h));
    for (int x = 0; x < target_w; ++x) {
      const int sx = std::min(m.width() - 1, static_cast<int>((x + 0.5) * m.width() / target_w));
      out(x, y) = m(sx, sy);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-pixel representations

struct VegetationIndices {
  Channel exg;
  Channel exr;
  Channel cive;
  Channel ndi;
};

inline VegetationIndices compute_vegetation_indices(const RgbImage& img) {
  require_valid(img);
  const int w = img.width();
  const int h = img.height();
  VegetationIndices out{Channel(w, h), Channel(w, h), Channel(w, h), Channel(w, h)};
  const auto& d = img.data();
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const float r = d[i * 3];
    const float g = d[i * 3 + 1];
    const float b = d[i * 3 + 2];
    out.exg[i] = 2.0f * g - r - b;
    out.exr[i] = 1.4f * r - g;
    out.cive[i] = 0.881f * g - 0.441f * r - 0.385f * b - kCiveOffset;
    const float sum = g + r;
    out.ndi[i] = sum > 0.0f ? (g - r) / sum : 0.0f;
  }
  return out;
}

struct Hsv {
  Channel hue;  // [0,1)
  Channel sat;
  Channel val;
};

inline std::array<float, 3> rgb_to_hsv_pixel(float r, float g, float b) {
  const float mx = std::max({r, g, b});
  const float mn = std::min({r, g, b});
  const float delta = mx - mn;
  float hue = 0.0f;
  if (delta > 0.0f) {
    float deg;
    if (mx == r) {
      deg = 60.0f * (g - b) / delta;
    } else if (mx == g) {
      deg = 60.0f * ((b - r) / delta + 2.0f);
    } else {
      deg = 60.0f * ((r - g) / delta + 4.0f);
    }
    if (deg < 0.0f) deg += 360.0f;
    hue = deg / 360.0f;
    if (hue >= 1.0f) hue = 0.0f;
  }
  const float sat = mx > 0.0f ? delta / mx : 0.0f;
  return {hue, sat, mx};
}

inline Hsv rgb_to_hsv(const RgbImage& img) {
  require_valid(img);
  const int w = img.width();
  const int h = img.height();
  Hsv out{Channel(w, h), Channel(w, h), Channel(w, h)};
  const auto& d = img.data();
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const auto hsv = rgb_to_hsv_pixel(d[i * 3], d[i * 3 + 1], d[i * 3 + 2]);
    out.hue[i] = hsv[0];
    out.sat[i] = hsv[1];
    out.val[i] = hsv[2];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Texture operators (edge-replicating borders throughout)

using Kernel3 = std::array<std::array<float, 3>, 3>;

inline constexpr Kernel3 kSobelX = {{{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}}};
inline constexpr Kernel3 kSobelY = {{{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}}};
inline constexpr Kernel3 kLaplacian = {{{0, 1, 0}, {1, -4, 1}, {0, 1, 0}}};

/// 3x3 cross-correlation with replicated borders.
inline Channel filter3x3(const Channel& ch, const Kernel3& k) {
  Channel out(ch.width(), ch.height());
  for (int y = 0; y < ch.height(); ++y) {
    for (int x = 0; x < ch.width(); ++x) {
      double s = 0.0;  // exact for constant neighbourhoods
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) s += k[dy + 1][dx + 1] * static_cast<double>(ch.clamped(x + dx, y + dy));
      out(x, y) = static_cast<float>(s);
    }
  }
  return out;
}

/// Min-max rescale to integer levels 0..255 (constant input maps to 0).
inline Channel rescale_to_8bit(const Channel& ch) {
  Channel out(ch.width(), ch.height(), 0.0f);
  if (ch.empty()) return out;
  const auto [mn, mx] = std::minmax_element(ch.data().begin(), ch.data().end());
  const double lo = *mn;
  const double range = static_cast<double>(*mx) - lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < ch.size(); ++i)
    out[i] = static_cast<float>(std::round((ch[i] - lo) / range * 255.0));
  return out;
}

/// Canny edge map on the 8-bit rescaled channel. Hysteresis thresholds are
/// (0.4 t, t) with t the Otsu threshold of the rescaled intensities.
inline Channel canny_edges(const Channel& ch) {
  const int w = ch.width();
  const int h = ch.height();
  Channel edges(w, h, 0.0f);
  const Channel u = rescale_to_8bit(ch);
  const auto otsu = baselines::otsu_threshold(u);
  if (otsu.degenerate) return edges;
  const double high = otsu.threshold;
  const double low = 0.4 * high;

  const Channel gx = filter3x3(u, kSobelX);
  const Channel gy = filter3x3(u, kSobelY);
  Plane<double> mag(w, h);
  for (std::size_t i = 0; i < mag.size(); ++i)
    mag[i] = std::sqrt(static_cast<double>(gx[i]) * gx[i] + static_cast<double>(gy[i]) * gy[i]);

  // Non-maximum suppression along the quantised gradient direction.
  Plane<std::uint8_t> state(w, h, 0);  // 0 none, 1 weak, 2 strong
  constexpr double kTan22 = 0.41421356237309503;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double m = mag(x, y);
      if (m <= low) continue;
      const double ax = std::abs(gx(x, y));
      const double ay = std::abs(gy(x, y));
      int dx1, dy1;
      if (ay <= ax * kTan22) {
        dx1 = 1, dy1 = 0;
      } else if (ax <= ay * kTan22) {
        dx1 = 0, dy1 = 1;
      } else if ((gx(x, y) > 0) == (gy(x, y) > 0)) {
        dx1 = 1, dy1 = 1;
      } else {
        dx1 = 1, dy1 = -1;
      }
      const double n1 = mag.clamped(x + dx1, y + dy1);
      const double n2 = mag.clamped(x - dx1, y - dy1);
      if (m > n1 && m >= n2) state(x, y) = m > high ? 2 : 1;
    }
  }

  // Hysteresis: grow strong pixels through 8-connected weak pixels.
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (state(x, y) == 2) {
        edges(x, y) = 1.0f;
        stack.emplace_back(x, y);
      }
  while (!stack.empty()) {
    const auto [x, y] = stack.back();
    stack.pop_back();
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx;
        const int ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        if (state(nx, ny) == 1 && edges(nx, ny) == 0.0f) {
          edges(nx, ny) = 1.0f;
          stack.emplace_back(nx, ny);
        }
      }
    }
  }
  return edges;
}

struct TextureChannels {
  Channel dx;
  Channel dy;
  Channel lap;
  Channel edges;
};

inline TextureChannels exg_texture_channels(const Channel& exg) {
  if (exg.width() < 3 || exg.height() < 3)
    throw ArgumentError("texture operators need a channel of at least 3x3");
  return {filter3x3(exg, kSobelX), filter3x3(exg, kSobelY), filter3x3(exg, kLaplacian),
          canny_edges(exg)};
}

// ---------------------------------------------------------------------------
// Input volume

struct InputVolume {
  int width = 0;
  int height = 0;
  std::vector<Channel> channels;
  std::vector<double> mean;    // applied per-channel statistics
  std::vector<double> stddev;  // 0 marks a constant channel

  int channel_count() const { return static_cast<int>(channels.size()); }
};

/// Standardise in place to zero mean / unit variance; constant channels
/// become all zeros. Returns (mean, stddev) actually applied.
inline std::pair<double, double> standardize(Channel& ch) {
  if (ch.empty()) return {0.0, 0.0};
  const auto [mn, mx] = std::minmax_element(ch.data().begin(), ch.data().end());
  double sum = 0.0;
  for (float v : ch.data()) sum += v;
  const double mean = sum / static_cast<double>(ch.size());
  if (!(*mx > *mn)) {
    std::fill(ch.data().begin(), ch.data().end(), 0.0f);
    return {mean, 0.0};
  }
  double ss = 0.0;
  for (float v : ch.data()) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(ch.size()));
  for (float& v : ch.data()) v = static_cast<float>((v - mean) / sd);
  return {mean, sd};
}

/// Raw (unstandardised) channel stack at the image's own resolution.
inline std::vector<Channel> raw_channels(const RgbImage& img, ChannelSet set = ChannelSet::kAll) {
  require_valid(img);
  std::vector<Channel> chans;
  chans.reserve(channel_count(set));
  for (int c = 0; c < 3; ++c) chans.push_back(img.plane(c));
  if (set == ChannelSet::kRgb) return chans;

  auto vi = compute_vegetation_indices(img);
  auto hsv = rgb_to_hsv(img);
  auto tex = exg_texture_channels(vi.exg);
  chans.push_back(std::move(vi.exg));
  chans.push_back(std::move(vi.exr));
  chans.push_back(std::move(vi.cive));
  chans.push_back(std::move(vi.ndi));
  chans.push_back(std::move(hsv.hue));
  chans.push_back(std::move(hsv.sat));
  chans.push_back(std::move(hsv.val));
  chans.push_back(std::move(tex.dx));
  chans.push_back(std::move(tex.dy));
  chans.push_back(std::move(tex.lap));
  chans.push_back(std::move(tex.edges));
  return chans;
}

/// Resize, derive every representation, stack in network order, standardise.
inline InputVolume assemble_input_volume(const RgbImage& img, int width = kInputWidth,
                                         int height = kInputHeight,
                                         ChannelSet set = ChannelSet::kAll) {
  require_valid(img);
  const RgbImage resized = resize_bilinear(img, width, height);
  InputVolume vol;
  vol.width = width;
  vol.height = height;
  vol.channels = raw_channels(resized, set);
  for (auto& ch : vol.channels) {
    const auto [m, s] = standardize(ch);
    vol.mean.push_back(m);
    vol.stddev.push_back(s);
  }
  return vol;
}

}  // namespace cropseg::imgproc
