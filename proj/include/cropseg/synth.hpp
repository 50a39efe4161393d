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

// Synthetic nadir field images: noisy brown soil, multi-lobed crop plants,
// small weeds with a shifted hue. Labels come straight from the render
// order, so they are pixel exact.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "cropseg/common.hpp"
#include "cropseg/image.hpp"
#include "cropseg/imgproc.hpp"

namespace cropseg::synth {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool overlaps(const Range& o) const { return lo <= o.hi && o.lo <= hi; }
};

struct FieldParams {
  int width = 128;
  int height = 96;
  int crop_min = 1, crop_max = 3;
  Range crop_radius{9.0, 14.0};
  int weed_min = 2, weed_max = 5;
  Range weed_radius{5.0, 7.0};
  std::array<double, 3> soil_rgb{0.42, 0.30, 0.20};
  double soil_noise = 0.07;
  Range crop_hue{0.27, 0.36};
  Range weed_hue{0.16, 0.21};
  Range gain{0.9, 1.1};
  // per-channel illuminant colour (white balance), on top of the overall gain
  std::array<Range, 3> cast{{{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}}};
  std::string preset = "home";
  std::uint64_t seed = 0;

  void validate() const {
    if (width < 1 || height < 1) throw ArgumentError("field size must be positive");
    if (crop_min < 0 || crop_max < crop_min || weed_min < 0 || weed_max < weed_min)
      throw ArgumentError("invalid plant count range");
    if (crop_hue.overlaps(weed_hue)) throw ArgumentError("crop and weed hue ranges must be disjoint");
    if (gain.lo <= 0.0 || gain.hi < gain.lo) throw ArgumentError("invalid illumination gain range");
    for (const auto& c : cast)
      if (c.lo <= 0.0 || c.hi < c.lo) throw ArgumentError("invalid colour cast range");
  }
};

/// "home" is the training domain; "away" shifts soil colour, lighting (level
/// and colour) and weed density while keeping the class hue ranges.
inline FieldParams preset(std::string_view name) {
  FieldParams p;
  if (name == "home") return p;
  if (name == "away") {
    p.preset = "away";
    p.soil_rgb = {0.50, 0.43, 0.37};
    p.soil_noise = 0.09;
    p.gain = {0.6, 0.8};
    p.cast = {{{1.6, 1.8}, {1.0, 1.0}, {0.5, 0.6}}};  // uncorrected ~3200 K light
    p.weed_min = 4;
    p.weed_max = 8;
    return p;
  }
  throw ArgumentError("unknown preset '" + std::string(name) + "' (expected home or away)");
}

namespace detail {

/// Smooth value noise summed over octaves with 1/f amplitude ("brown").
inline Plane<float> brown_noise(int w, int h, std::mt19937_64& rng) {
  Plane<float> out(w, h, 0.0f);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  float amp = 1.0f;
  float total = 0.0f;
  for (int cell = 32; cell >= 2; cell /= 2) {
    const int gw = w / cell + 2;
    const int gh = h / cell + 2;
    std::vector<float> grid(static_cast<std::size_t>(gw) * gh);
    for (auto& g : grid) g = u(rng);
    for (int y = 0; y < h; ++y) {
      const float fy = static_cast<float>(y) / cell;
      const int y0 = static_cast<int>(fy);
      const float ty = fy - y0;
      for (int x = 0; x < w; ++x) {
        const float fx = static_cast<float>(x) / cell;
        const int x0 = static_cast<int>(fx);
        const float tx = fx - x0;
        auto at = [&](int gx, int gy) { return grid[static_cast<std::size_t>(gy) * gw + gx]; };
        const float a = imgproc::detail::lerp(at(x0, y0), at(x0 + 1, y0), tx);
        const float b = imgproc::detail::lerp(at(x0, y0 + 1), at(x0 + 1, y0 + 1), tx);
        out(x, y) += amp * imgproc::detail::lerp(a, b, ty);
      }
    }
    total += amp;
    amp *= 0.5f;
  }
  for (auto& v : out.data()) v /= total;
  return out;
}

inline std::array<float, 3> hsv_to_rgb(double h, double s, double v) {
  const double hh = std::fmod(h, 1.0) * 6.0;
  const int i = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  double r, g, b;
  switch (i) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
  return {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
}

struct Ellipse {
  double cx, cy, a, b, angle;
  /// Normalised radial coordinate; < 1 inside.
  double rho(double x, double y) const {
    const double c = std::cos(angle), s = std::sin(angle);
    const double dx = x - cx, dy = y - cy;
    const double u = (c * dx + s * dy) / a;
    const double v = (-s * dx + c * dy) / b;
    return std::sqrt(u * u + v * v);
  }
};

/// Paints the union of ellipses with one hue; leaf shading darkens toward
/// each lobe's rim.
inline void paint_plant(RgbImage& img, LabelMask& labels, const std::vector<Ellipse>& lobes, int cls,
                        double hue, double sat, double val, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-0.04, 0.04);
  double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
  for (const auto& e : lobes) {
    const double r = std::max(e.a, e.b);
    x0 = std::min(x0, e.cx - r), x1 = std::max(x1, e.cx + r);
    y0 = std::min(y0, e.cy - r), y1 = std::max(y1, e.cy + r);
  }
  const int xa = std::max(0, static_cast<int>(std::floor(x0)));
  const int xb = std::min(img.width() - 1, static_cast<int>(std::ceil(x1)));
  const int ya = std::max(0, static_cast<int>(std::floor(y0)));
  const int yb = std::min(img.height() - 1, static_cast<int>(std::ceil(y1)));
  for (int y = ya; y <= yb; ++y)
    for (int x = xa; x <= xb; ++x) {
      double best = 2.0;
      for (const auto& e : lobes) best = std::min(best, e.rho(x + 0.5, y + 0.5));
      if (best >= 1.0) continue;
      const double shade = std::clamp(val * (1.0 - 0.35 * best * best) + jitter(rng), 0.05, 1.0);
      const auto rgb = hsv_to_rgb(hue, sat, shade);
      img.set(x, y, rgb[0], rgb[1], rgb[2]);
      labels(x, y) = static_cast<std::uint8_t>(cls);
    }
}

}  // namespace detail

/// Deterministic render of one field image and its labels.
inline Sample generate_field(const FieldParams& p) {
  p.validate();
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uni = [&](const Range& r) { return r.lo + (r.hi - r.lo) * unit(rng); };
  auto count = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  Sample s;
  s.image = RgbImage(p.width, p.height);
  s.labels = LabelMask(p.width, p.height, 0);
  s.id = p.preset + "_" + std::to_string(p.seed);

  const Plane<float> noise = detail::brown_noise(p.width, p.height, rng);
  std::normal_distribution<float> grain(0.0f, 0.015f);
  for (int y = 0; y < p.height; ++y)
    for (int x = 0; x < p.width; ++x) {
      const float n = static_cast<float>(p.soil_noise) * noise(x, y);
      for (int c = 0; c < 3; ++c)
        s.image.at(x, y, c) = static_cast<float>(p.soil_rgb[c]) * (1.0f + 1.5f * n) + grain(rng);
    }

  const double two_pi = 2.0 * std::numbers::pi;
  const int crops = count(p.crop_min, p.crop_max);
  for (int i = 0; i < crops; ++i) {
    const double R = uni(p.crop_radius);
    const double cx = R * 0.5 + unit(rng) * (p.width - R);
    const double cy = R * 0.5 + unit(rng) * (p.height - R);
    const int nlobes = count(3, 6);
    const double phase = unit(rng) * two_pi;
    std::vector<detail::Ellipse> lobes;
    for (int k = 0; k < nlobes; ++k) {
      const double ang = phase + two_pi * k / nlobes + 0.3 * (unit(rng) - 0.5);
      const double len = R * (0.75 + 0.25 * unit(rng));
      lobes.push_back({cx + 0.5 * len * std::cos(ang), cy + 0.5 * len * std::sin(ang), len,
                       len * (0.35 + 0.15 * unit(rng)), ang});
    }
    detail::paint_plant(s.image, s.labels, lobes, static_cast<int>(Label::kCrop), uni(p.crop_hue),
                        0.55 + 0.25 * unit(rng), 0.45 + 0.2 * unit(rng), rng);
  }

  const int weeds = count(p.weed_min, p.weed_max);
  for (int i = 0; i < weeds; ++i) {
    const double r = uni(p.weed_radius);
    const double cx = unit(rng) * p.width;
    const double cy = unit(rng) * p.height;
    const std::vector<detail::Ellipse> lobes = {{cx, cy, r, r * (0.8 + 0.2 * unit(rng)), unit(rng) * two_pi}};
    detail::paint_plant(s.image, s.labels, lobes, static_cast<int>(Label::kWeed), uni(p.weed_hue),
                        0.5 + 0.3 * unit(rng), 0.5 + 0.2 * unit(rng), rng);
  }

  const double g = uni(p.gain);
  std::array<float, 3> gc;
  for (int c = 0; c < 3; ++c) gc[c] = static_cast<float>(g * (p.cast[c].lo == p.cast[c].hi ? p.cast[c].lo : uni(p.cast[c])));
  auto& d = s.image.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::clamp(d[i] * gc[i % 3], 0.0f, 1.0f);
  return s;
}

/// n samples rendered from consecutive seeds starting at first_seed.
inline std::vector<Sample> generate_set(FieldParams p, int n, std::uint64_t first_seed) {
  std::vector<Sample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    p.seed = first_seed + static_cast<std::uint64_t>(i);
    out.push_back(generate_field(p));
  }
  return out;
}

}  // namespace cropseg::synth
