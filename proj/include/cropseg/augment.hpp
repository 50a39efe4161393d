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

// Random affine augmentation about the image centre. The image is sampled
// bilinearly with replicated edges; labels use nearest neighbour and fall
// back to soil outside the frame.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "cropseg/image.hpp"

namespace cropseg::augment {

struct AffineParams {
  double rotation_deg = 0.0;  // [-180, 180]
  double scale = 1.0;         // isotropic, [0.8, 1.2]
  double shear_deg = 0.0;     // [-10, 10]
  double stretch_x = 1.0;     // [0.9, 1.1]
  double stretch_y = 1.0;
};

struct AffineRanges {
  double rotation_deg = 180.0;
  double scale_lo = 0.8, scale_hi = 1.2;
  double shear_deg = 10.0;
  double stretch_lo = 0.9, stretch_hi = 1.1;
};

inline AffineParams sample_params(std::mt19937_64& rng, const AffineRanges& r = {}) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  AffineParams p;
  p.rotation_deg = in(-r.rotation_deg, r.rotation_deg);
  p.scale = in(r.scale_lo, r.scale_hi);
  p.shear_deg = in(-r.shear_deg, r.shear_deg);
  p.stretch_x = in(r.stretch_lo, r.stretch_hi);
  p.stretch_y = in(r.stretch_lo, r.stretch_hi);
  return p;
}

/// Forward matrix A = Rotation * Shear * diag(scale*sx, scale*sy).
inline std::array<double, 4> forward_matrix(const AffineParams& p) {
  constexpr double kDeg = std::numbers::pi / 180.0;
  const double c = std::cos(p.rotation_deg * kDeg);
  const double s = std::sin(p.rotation_deg * kDeg);
  const double k = std::tan(p.shear_deg * kDeg);
  const double dx = p.scale * p.stretch_x;
  const double dy = p.scale * p.stretch_y;
  // Shear [[1, k], [0, 1]] then rotation.
  const double a00 = dx, a01 = k * dy, a10 = 0.0, a11 = dy;
  return {c * a00 - s * a10, c * a01 - s * a11, s * a00 + c * a10, s * a01 + c * a11};
}

inline Sample apply(const Sample& in, const AffineParams& p) {
  const int W = in.image.width();
  const int H = in.image.height();
  const auto a = forward_matrix(p);
  const double det = a[0] * a[3] - a[1] * a[2];
  // Inverse maps output coordinates back into the source.
  const double i00 = a[3] / det, i01 = -a[1] / det, i10 = -a[2] / det, i11 = a[0] / det;
  const double cx = 0.5 * W, cy = 0.5 * H;

  Sample out;
  out.id = in.id;
  out.image = RgbImage(W, H);
  out.labels = LabelMask(W, H, 0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double ox = x + 0.5 - cx, oy = y + 0.5 - cy;
      // Source position in pixel-index coordinates (centres at integers).
      const double sx = i00 * ox + i01 * oy + cx - 0.5;
      const double sy = i10 * ox + i11 * oy + cy - 0.5;

      const long nx = std::lround(sx), ny = std::lround(sy);
      if (nx >= 0 && nx < W && ny >= 0 && ny < H)
        out.labels(x, y) = in.labels(static_cast<int>(nx), static_cast<int>(ny));

      const double fx = std::clamp(sx, 0.0, W - 1.0);
      const double fy = std::clamp(sy, 0.0, H - 1.0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int y0 = static_cast<int>(std::floor(fy));
      const int x1 = std::min(x0 + 1, W - 1);
      const int y1 = std::min(y0 + 1, H - 1);
      const float tx = static_cast<float>(fx - x0);
      const float ty = static_cast<float>(fy - y0);
      for (int c = 0; c < 3; ++c) {
        const float top = in.image.at(x0, y0, c) + tx * (in.image.at(x1, y0, c) - in.image.at(x0, y0, c));
        const float bot = in.image.at(x0, y1, c) + tx * (in.image.at(x1, y1, c) - in.image.at(x0, y1, c));
        out.image.at(x, y, c) = std::clamp(top + ty * (bot - top), 0.0f, 1.0f);
      }
    }
  }
  return out;
}

inline Sample augment(const Sample& in, std::mt19937_64& rng, const AffineRanges& r = {}) {
  return apply(in, sample_params(rng, r));
}

}  // namespace cropseg::augment
