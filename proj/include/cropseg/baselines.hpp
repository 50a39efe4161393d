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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cropseg/image.hpp"

namespace cropseg::baselines {

inline constexpr int kHistogramBins = 256;

using Histogram = std::array<std::uint64_t, kHistogramBins>;

/// Bin layout over [lo, hi]: bin k holds values in (e_k, e_{k+1}] with
/// e_j = lo + j * (hi - lo) / 256; lo itself falls into bin 0.
struct BinLayout {
  double lo = 0.0;
  double hi = 0.0;

  int bin(double v) const {
    const double t = (v - lo) / (hi - lo) * kHistogramBins;
    return std::clamp(static_cast<int>(std::ceil(t)) - 1, 0, kHistogramBins - 1);
  }
  /// Upper edge of bin k, i.e. the threshold separating bins <= k from bins > k.
  double upper_edge(int k) const { return lo + (k + 1) * (hi - lo) / kHistogramBins; }
};

/// Index k maximising the between-class variance of the split {<= k} vs {> k}.
/// Returns -1 when the histogram has fewer than two occupied bins.
inline int otsu_bin(const Histogram& hist) {
  double total = 0.0;
  double weighted = 0.0;
  for (int b = 0; b < kHistogramBins; ++b) {
    total += static_cast<double>(hist[b]);
    weighted += static_cast<double>(b) * static_cast<double>(hist[b]);
  }
  if (total <= 0.0) return -1;

  int best = -1;
  double best_var = 0.0;
  double w0 = 0.0;
  double sum0 = 0.0;
  for (int k = 0; k < kHistogramBins - 1; ++k) {
    w0 += static_cast<double>(hist[k]);
    sum0 += static_cast<double>(k) * static_cast<double>(hist[k]);
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (weighted - sum0) / w1;
    const double var = (w0 / total) * (w1 / total) * (mu0 - mu1) * (mu0 - mu1);
    if (var > best_var) {
      best_var = var;
      best = k;
    }
  }
  return best;
}

struct OtsuResult {
  double threshold = 0.0;
  int bin = -1;
  BinaryMask mask;
  bool degenerate = false;
};

/// Global Otsu threshold of a channel; mask marks pixels above the threshold.
inline OtsuResult otsu_threshold(const Channel& ch) {
  OtsuResult r;
  r.mask = BinaryMask(ch.width(), ch.height(), 0);
  if (ch.empty()) {
    r.degenerate = true;
    return r;
  }
  const auto [mn, mx] = std::minmax_element(ch.data().begin(), ch.data().end());
  const BinLayout layout{*mn, *mx};
  if (!(layout.hi > layout.lo)) {
    r.threshold = layout.lo;
    r.degenerate = true;
    return r;
  }
  Histogram hist{};
  std::vector<int> bins(ch.size());
  for (std::size_t i = 0; i < ch.size(); ++i) {
    bins[i] = layout.bin(ch[i]);
    ++hist[bins[i]];
  }
  r.bin = otsu_bin(hist);
  if (r.bin < 0) {
    r.threshold = layout.lo;
    r.degenerate = true;
    return r;
  }
  r.threshold = layout.upper_edge(r.bin);
  for (std::size_t i = 0; i < ch.size(); ++i) r.mask[i] = bins[i] > r.bin ? 1 : 0;
  return r;
}

/// Mean over a window x window neighbourhood with edge replication.
inline Plane<double> box_mean_replicated(const Channel& ch, int window) {
  const int w = ch.width();
  const int h = ch.height();
  const int half = window / 2;
  Plane<double> horiz(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int d = -half; d <= half; ++d) s += ch.clamped(x + d, y);
      horiz(x, y) = s;
    }
  }
  Plane<double> out(w, h);
  const double norm = 1.0 / (static_cast<double>(window) * window);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int d = -half; d <= half; ++d) s += horiz.clamped(x, y + d);
      out(x, y) = s * norm;
    }
  }
  return out;
}

/// Local-mean thresholding: a pixel is vegetation iff it exceeds the mean of
/// its window plus offset.
inline BinaryMask adaptive_threshold(const Channel& ch, int window, double offset) {
  if (window < 3 || window % 2 == 0)
    throw ArgumentError("adaptive_threshold window must be odd and >= 3");
  const Plane<double> mean = box_mean_replicated(ch, window);
  BinaryMask mask(ch.width(), ch.height(), 0);
  for (std::size_t i = 0; i < ch.size(); ++i) mask[i] = ch[i] > mean[i] + offset ? 1 : 0;
  return mask;
}

inline double vegetation_fraction(const BinaryMask& m) {
  if (m.empty()) return 0.0;
  std::size_t n = 0;
  for (auto v : m.data()) n += v ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(m.size());
}

}  // namespace cropseg::baselines
