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

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "cropseg/eval.hpp"

using namespace cropseg;
using namespace cropseg::eval;

namespace {

LabelMask random_mask(int w, int h, std::mt19937_64& rng, double veg = 0.5) {
  LabelMask m(w, h, 0);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& v : m.data()) v = u(rng) < veg ? (u(rng) < 0.5 ? 1 : 2) : 0;
  return m;
}

// Union-find labelling, independent of the flood fill under test.
std::set<std::pair<int, std::vector<int>>> oracle_components(const LabelMask& m, int min_area) {
  const int W = m.width(), H = m.height();
  std::vector<int> parent(m.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int k = y * W + x;
      if (m[k] == 0) continue;
      if (x + 1 < W && m[k + 1] == m[k]) parent[find(k)] = find(k + 1);
      if (y + 1 < H && m[k + W] == m[k]) parent[find(k)] = find(k + W);
    }
  std::map<int, std::vector<int>> groups;
  for (int k = 0; k < static_cast<int>(m.size()); ++k)
    if (m[k]) groups[find(k)].push_back(k);
  std::set<std::pair<int, std::vector<int>>> out;
  for (auto& [root, px] : groups)
    if (static_cast<int>(px.size()) >= min_area) out.insert({m[root], px});
  return out;
}

LabelMask with_rect(LabelMask m, int x0, int y0, int w, int h, std::uint8_t cls) {
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) m(x, y) = cls;
  return m;
}

}  // namespace

TEST(PixelMetrics, PerfectDiagonal) {
  ConfusionMatrix cm;
  cm.add(0, 0, 10);
  cm.add(1, 1, 5);
  cm.add(2, 2, 7);
  const auto m = pixel_metrics(cm);
  for (const auto& c : m.per_class) {
    EXPECT_EQ(*c.iou, 1.0);
    EXPECT_EQ(*c.precision, 1.0);
    EXPECT_EQ(*c.recall, 1.0);
  }
  EXPECT_EQ(m.miou, 1.0);
}

TEST(PixelMetrics, WeedAllPredictedCrop) {
  ConfusionMatrix cm;
  cm.counts = {{{50, 0, 0}, {0, 0, 10}, {0, 0, 40}}};
  const auto m = pixel_metrics(cm);
  EXPECT_DOUBLE_EQ(*m.per_class[0].iou, 1.0);
  EXPECT_DOUBLE_EQ(*m.per_class[1].iou, 0.0);
  EXPECT_DOUBLE_EQ(*m.per_class[2].iou, 0.8);
  EXPECT_DOUBLE_EQ(m.miou, 0.6);
  EXPECT_FALSE(m.miou_partial);
}

TEST(PixelMetrics, AllSoilPredictor) {
  LabelMask gt(4, 1);
  gt[0] = 0, gt[1] = 1, gt[2] = 2, gt[3] = 0;
  const auto m = pixel_metrics(confusion(gt, LabelMask(4, 1, 0)));
  EXPECT_EQ(*m.per_class[0].recall, 1.0);
  EXPECT_EQ(*m.per_class[1].recall, 0.0);
  EXPECT_EQ(*m.per_class[2].recall, 0.0);
  EXPECT_FALSE(m.per_class[1].precision.has_value());
}

TEST(PixelMetrics, UndefinedClassIsExcludedAndFlagged) {
  const LabelMask all_soil(3, 3, 0);
  const auto m = pixel_metrics(confusion(all_soil, all_soil));
  EXPECT_FALSE(m.per_class[1].iou.has_value());
  EXPECT_TRUE(m.miou_partial);
  EXPECT_EQ(m.miou, 1.0);
}

TEST(PixelMetrics, EmptyMatrixAndBadInputRejected) {
  EXPECT_THROW(pixel_metrics(ConfusionMatrix{}), ArgumentError);
  EXPECT_THROW(confusion(LabelMask(2, 2), LabelMask(2, 3)), ShapeError);
  LabelMask bad(1, 1, 3);
  EXPECT_THROW(confusion(bad, LabelMask(1, 1)), ArgumentError);
}

TEST(PixelMetrics, MatchesBruteForceOnRandomMasks) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto gt = random_mask(16, 16, rng, 0.6);
    const auto pred = random_mask(16, 16, rng, 0.6);
    const auto cm = confusion(gt, pred);
    EXPECT_EQ(cm.total(), 256);
    const auto m = pixel_metrics(cm);
    double sum = 0;
    int defined = 0;
    for (int c = 0; c < 3; ++c) {
      int inter = 0, uni = 0, npred = 0, ngt = 0;
      for (int i = 0; i < 256; ++i) {
        inter += gt[i] == c && pred[i] == c;
        uni += gt[i] == c || pred[i] == c;
        npred += pred[i] == c;
        ngt += gt[i] == c;
      }
      if (uni) {
        EXPECT_DOUBLE_EQ(*m.per_class[c].iou, static_cast<double>(inter) / uni);
        sum += static_cast<double>(inter) / uni;
        ++defined;
      }
      if (npred) EXPECT_DOUBLE_EQ(*m.per_class[c].precision, static_cast<double>(inter) / npred);
      if (ngt) EXPECT_DOUBLE_EQ(*m.per_class[c].recall, static_cast<double>(inter) / ngt);
      EXPECT_GE(*m.per_class[c].iou, 0.0);
      EXPECT_LE(*m.per_class[c].iou, 1.0);
    }
    EXPECT_DOUBLE_EQ(m.miou, sum / defined);
  }
}

TEST(Components, AllSoilIsEmpty) { EXPECT_TRUE(connected_components(LabelMask(20, 20, 0)).empty()); }

TEST(Components, FiftyPixelThreshold) {
  EXPECT_EQ(kMinObjectArea, 50);  // 1 cm^2 / 2 mm^2 per pixel
  const LabelMask base(20, 20, 0);
  EXPECT_TRUE(connected_components(with_rect(base, 0, 0, 7, 7, 2)).empty());  // 49 px
  const auto m = with_rect(with_rect(base, 0, 0, 7, 7, 2), 7, 0, 1, 1, 2);     // 50 px
  const auto objs = connected_components(m);
  ASSERT_EQ(objs.size(), 1u);
  EXPECT_EQ(objs[0].area(), 50);
  EXPECT_EQ(objs[0].cls, 2);
}

TEST(Components, DiagonalTouchIsTwoObjects) {
  LabelMask m(4, 4, 0);
  m(0, 0) = 1;
  m(1, 1) = 1;
  EXPECT_EQ(connected_components(m, 1).size(), 2u);
}

TEST(Components, ClassesAreLabelledSeparately) {
  LabelMask m(4, 1, 0);
  m[0] = 1, m[1] = 1, m[2] = 2, m[3] = 2;
  const auto objs = connected_components(m, 1);
  ASSERT_EQ(objs.size(), 2u);
  EXPECT_EQ(objs[0].cls, 1);
  EXPECT_EQ(objs[1].cls, 2);
}

TEST(Components, MatchUnionFindOracleOnRandomMasks) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = random_mask(16, 16, rng, 0.55);
    for (int min_area : {1, 3, 50}) {
      std::set<std::pair<int, std::vector<int>>> got;
      for (auto o : connected_components(m, min_area)) {
        std::sort(o.pixels.begin(), o.pixels.end());
        got.insert({o.cls, std::vector<int>(o.pixels.begin(), o.pixels.end())});
      }
      EXPECT_EQ(got, oracle_components(m, min_area)) << "trial " << trial << " min_area " << min_area;
    }
  }
}

TEST(Components, LargerMinimumNeverAddsObjects) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_mask(24, 24, rng, 0.7);
    std::size_t prev = SIZE_MAX;
    for (int a = 1; a <= 60; a += 3) {
      const auto n = connected_components(m, a).size();
      EXPECT_LE(n, prev);
      prev = n;
    }
  }
}

TEST(ObjectMetrics, PerfectPrediction) {
  const auto gt = with_rect(with_rect(LabelMask(30, 30, 0), 0, 0, 10, 10, 1), 15, 15, 10, 10, 2);
  const auto m = object_metrics(gt, gt);
  EXPECT_EQ(*m.precision[1], 1.0);
  EXPECT_EQ(*m.precision[2], 1.0);
  EXPECT_EQ(*m.recall[1], 1.0);
  EXPECT_EQ(*m.recall[2], 1.0);
  EXPECT_EQ(*m.macc, 1.0);
}

TEST(ObjectMetrics, MajorityVoteCountsSixtyPercentAsHit) {
  const auto gt = with_rect(LabelMask(20, 20, 0), 0, 0, 10, 10, 2);
  const auto pred = with_rect(LabelMask(20, 20, 0), 0, 0, 10, 6, 2);  // 60 of 100 px
  const auto m = object_metrics(pred, gt);
  EXPECT_EQ(m.tally.gt_objects[2], 1);
  EXPECT_EQ(m.tally.gt_hits[2], 1);
  EXPECT_EQ(*m.recall[2], 1.0);
}

TEST(ObjectMetrics, TieResolvesToMiss) {
  const auto gt = with_rect(LabelMask(20, 20, 0), 0, 0, 10, 10, 2);
  const auto pred = with_rect(LabelMask(20, 20, 0), 0, 0, 10, 5, 2);  // 50/50 crop/soil
  EXPECT_EQ(object_metrics(pred, gt).tally.gt_hits[2], 0);
}

TEST(ObjectMetrics, WeedPredictedAsCrop) {
  const auto gt = with_rect(LabelMask(20, 20, 0), 2, 2, 10, 10, 1);
  const auto pred = with_rect(LabelMask(20, 20, 0), 2, 2, 10, 10, 2);
  const auto m = object_metrics(pred, gt);
  EXPECT_EQ(*m.recall[1], 0.0);
  EXPECT_EQ(*m.precision[2], 0.0);
  EXPECT_EQ(m.tally.pred_objects[2], 1);
  EXPECT_FALSE(m.recall[2].has_value());
  EXPECT_EQ(*m.macc, 0.0);
}

TEST(ObjectMetrics, TranslationInvariance) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    LabelMask gt(40, 40, 0), pred(40, 40, 0);
    std::uniform_int_distribution<int> pos(0, 20), cls(1, 2);
    for (int k = 0; k < 4; ++k) {
      gt = with_rect(gt, pos(rng), pos(rng), 8, 8, static_cast<std::uint8_t>(cls(rng)));
      pred = with_rect(pred, pos(rng), pos(rng), 8, 8, static_cast<std::uint8_t>(cls(rng)));
    }
    // shift both by (5, 3) inside a larger canvas
    LabelMask gt2(50, 50, 0), pred2(50, 50, 0);
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x) {
        gt2(x + 5, y + 3) = gt(x, y);
        pred2(x + 5, y + 3) = pred(x, y);
      }
    const auto a = object_metrics(pred, gt).tally, b = object_metrics(pred2, gt2).tally;
    EXPECT_EQ(a.gt_objects, b.gt_objects);
    EXPECT_EQ(a.gt_hits, b.gt_hits);
    EXPECT_EQ(a.pred_objects, b.pred_objects);
    EXPECT_EQ(a.pred_hits, b.pred_hits);
  }
}

TEST(ObjectMetrics, DimensionMismatchRejected) {
  EXPECT_THROW(object_metrics(LabelMask(4, 4), LabelMask(5, 4)), ShapeError);
}

TEST(Report, ContainsTablesForBothViews) {
  const auto gt = with_rect(LabelMask(20, 20, 0), 0, 0, 10, 10, 1);
  const auto s = format_report(pixel_metrics(confusion(gt, gt)), object_metrics(gt, gt));
  EXPECT_NE(s.find("mIoU"), std::string::npos);
  EXPECT_NE(s.find("mAcc"), std::string::npos);
  EXPECT_NE(s.find("weed"), std::string::npos);
}
