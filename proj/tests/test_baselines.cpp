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
#include <gtest/gtest.h>

#include <random>

#include "cropseg/baselines.hpp"

using namespace cropseg;
using namespace cropseg::baselines;

namespace {

// Exhaustive between-class variance: evaluates every split from scratch.
int exhaustive_otsu(const Histogram& h) {
  int best = -1;
  double best_var = 0.0;
  for (int k = 0; k < kHistogramBins - 1; ++k) {
    double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (int b = 0; b <= k; ++b) n0 += h[b], s0 += double(b) * h[b];
    for (int b = k + 1; b < kHistogramBins; ++b) n1 += h[b], s1 += double(b) * h[b];
    if (n0 == 0 || n1 == 0) continue;
    const double n = n0 + n1;
    const double var = (n0 / n) * (n1 / n) * (s0 / n0 - s1 / n1) * (s0 / n0 - s1 / n1);
    if (var > best_var) best_var = var, best = k;
  }
  return best;
}

Channel disk(int size, double radius, float inside, float outside) {
  Channel ch(size, size, outside);
  const double c = (size - 1) / 2.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      if ((x - c) * (x - c) + (y - c) * (y - c) <= radius * radius) ch(x, y) = inside;
  return ch;
}

}  // namespace

TEST(Otsu, BimodalTwoValues) {
  Channel ch(10, 10, 0.0f);
  for (int i = 0; i < 10; ++i) ch[i * 10] = 1.0f;  // 10%
  const auto r = otsu_threshold(ch);
  EXPECT_FALSE(r.degenerate);
  EXPECT_GT(r.threshold, 0.0);
  EXPECT_LT(r.threshold, 1.0);
  for (std::size_t i = 0; i < ch.size(); ++i) EXPECT_EQ(r.mask[i], ch[i] == 1.0f ? 1 : 0);
}

TEST(Otsu, ConstantChannelIsDegenerate) {
  const auto r = otsu_threshold(Channel(5, 5, 0.3f));
  EXPECT_TRUE(r.degenerate);
  for (auto v : r.mask.data()) EXPECT_EQ(v, 0);
}

TEST(Otsu, MatchesExhaustiveSearchOnRandomHistograms) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    Histogram h{};
    std::uniform_int_distribution<int> occupied(2, 40), bin(0, 255), count(1, 500);
    const int k = occupied(rng);
    for (int i = 0; i < k; ++i) h[bin(rng)] += count(rng);
    EXPECT_EQ(otsu_bin(h), exhaustive_otsu(h)) << "trial " << trial;
  }
}

TEST(Otsu, ChannelThresholdUsesBinEdges) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> lo(0.2f, 0.05f), hi(0.7f, 0.05f);
  Channel ch(40, 40);
  for (std::size_t i = 0; i < ch.size(); ++i) ch[i] = i % 4 == 0 ? hi(rng) : lo(rng);
  const auto r = otsu_threshold(ch);
  const auto [mn, mx] = std::minmax_element(ch.data().begin(), ch.data().end());
  const BinLayout layout{*mn, *mx};
  Histogram h{};
  for (float v : ch.data()) ++h[layout.bin(v)];
  EXPECT_EQ(r.bin, exhaustive_otsu(h));
  for (std::size_t i = 0; i < ch.size(); ++i) EXPECT_EQ(r.mask[i], layout.bin(ch[i]) > r.bin ? 1 : 0);
  EXPECT_EQ(otsu_threshold(ch).mask, r.mask);  // idempotent
}

TEST(Adaptive, ConstantChannelWithPositiveOffsetIsBackground) {
  const auto m = adaptive_threshold(Channel(20, 20, 0.5f), 5, 0.01);
  for (auto v : m.data()) EXPECT_EQ(v, 0);
}

TEST(Adaptive, IsolatedBrightPixel) {
  Channel ch(15, 15, 0.0f);
  ch(7, 7) = 1.0f;
  const auto m = adaptive_threshold(ch, 5, 0.01);
  EXPECT_EQ(m(7, 7), 1);
  EXPECT_EQ(vegetation_fraction(m), 1.0 / 225.0);
}

TEST(Adaptive, EvenWindowRejected) {
  EXPECT_THROW(adaptive_threshold(Channel(5, 5), 4, 0.0), ArgumentError);
  EXPECT_THROW(adaptive_threshold(Channel(5, 5), 1, 0.0), ArgumentError);
}

TEST(Adaptive, LargeDiskGetsInteriorHoles) {
  const Channel ch = disk(121, 45.0, 1.0f, 0.0f);
  const auto adaptive = adaptive_threshold(ch, 15, 0.02);
  const auto otsu = otsu_threshold(ch);
  // interior: pixels deeper than one window inside the disk
  int interior = 0, adaptive_hit = 0, otsu_hit = 0;
  for (int y = 0; y < 121; ++y)
    for (int x = 0; x < 121; ++x) {
      const double d = std::hypot(x - 60.0, y - 60.0);
      if (d > 45.0 - 15) continue;
      ++interior;
      adaptive_hit += adaptive(x, y);
      otsu_hit += otsu.mask(x, y);
    }
  EXPECT_LT(static_cast<double>(adaptive_hit) / interior, 0.5);
  EXPECT_EQ(otsu_hit, interior);
}

TEST(Adaptive, HugeWindowAgreesWithGlobalMeanThreshold) {
  // A window of 2*max(H,W)+1 covers the whole image from every pixel, the
  // rest being replicated border. With the border held at the image mean,
  // every local mean equals the global mean.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(-0.05f, 0.05f);
  const int W = 24, H = 18;
  Channel ch(W, H);
  double interior = 0;
  for (int y = 1; y < H - 1; ++y)
    for (int x = 1; x < W - 1; ++x) {
      const bool plant = (x > 4 && x < 11 && y > 3 && y < 9) || (x > 14 && x < 20 && y > 8 && y < 15);
      ch(x, y) = (plant ? 0.8f : 0.2f) + u(rng);
      interior += ch(x, y);
    }
  const float mean = static_cast<float>(interior / ((W - 2) * (H - 2)));
  for (int x = 0; x < W; ++x) ch(x, 0) = ch(x, H - 1) = mean;
  for (int y = 0; y < H; ++y) ch(0, y) = ch(W - 1, y) = mean;

  const auto m = adaptive_threshold(ch, 2 * W + 1, 0.0);
  const auto [mn, mx] = std::minmax_element(ch.data().begin(), ch.data().end());
  const double bin = (*mx - *mn) / 256.0;
  int compared = 0;
  for (std::size_t i = 0; i < ch.size(); ++i) {
    if (std::abs(ch[i] - mean) <= bin) continue;  // within one bin either answer is fine
    ++compared;
    EXPECT_EQ(m[i], ch[i] > mean ? 1 : 0) << i;
  }
  EXPECT_GT(compared, 300);
  EXPECT_EQ(adaptive_threshold(ch, 2 * W + 11, 0.0), m);
}
