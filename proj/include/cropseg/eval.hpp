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
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "cropseg/common.hpp"
#include "cropseg/image.hpp"

namespace cropseg::eval {

/// 1 cm^2 minimum plant size at 2 mm^2 per pixel.
inline constexpr int kMinObjectArea = 50;

// ---------------------------------------------------------------------------
// Pixel-wise

/// Rows are ground truth, columns are predictions.
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> counts{};

  void add(int gt, int pred, std::int64_t n = 1) { counts[gt][pred] += n; }

  std::int64_t total() const {
    std::int64_t t = 0;
    for (const auto& r : counts)
      for (auto v : r) t += v;
    return t;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    for (int i = 0; i < kNumClasses; ++i)
      for (int j = 0; j < kNumClasses; ++j) counts[i][j] += o.counts[i][j];
    return *this;
  }
};

inline void require_same_size(const LabelMask& a, const LabelMask& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw ShapeError("prediction and ground truth differ in size");
}

inline ConfusionMatrix confusion(const LabelMask& gt, const LabelMask& pred) {
  require_same_size(gt, pred);
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] >= kNumClasses || pred[i] >= kNumClasses) throw ArgumentError("label outside {0,1,2}");
    cm.add(gt[i], pred[i]);
  }
  return cm;
}

/// std::nullopt marks a 0/0 ratio.
struct ClassPixelMetrics {
  std::optional<double> iou;
  std::optional<double> precision;
  std::optional<double> recall;
};

struct PixelMetrics {
  std::array<ClassPixelMetrics, kNumClasses> per_class;
  double miou = 0.0;
  bool miou_partial = false;  // some class IoU was undefined and left out
  std::int64_t pixels = 0;
};

inline std::optional<double> ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

inline PixelMetrics pixel_metrics(const ConfusionMatrix& cm) {
  PixelMetrics m;
  m.pixels = cm.total();
  if (m.pixels == 0) throw ArgumentError("empty confusion matrix");
  double sum = 0.0;
  int defined = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    const std::int64_t tp = cm.counts[c][c];
    std::int64_t fp = 0, fn = 0;
    for (int k = 0; k < kNumClasses; ++k) {
      if (k == c) continue;
      fp += cm.counts[k][c];
      fn += cm.counts[c][k];
    }
    auto& pc = m.per_class[c];
    pc.iou = ratio(tp, tp + fp + fn);
    pc.precision = ratio(tp, tp + fp);
    pc.recall = ratio(tp, tp + fn);
    if (pc.iou) {
      sum += *pc.iou;
      ++defined;
    }
  }
  m.miou_partial = defined < kNumClasses;
  m.miou = defined ? sum / defined : 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// Object-wise

struct Object {
  int cls = 0;
  std::vector<std::int32_t> pixels;  // flat row-major indices
  int area() const { return static_cast<int>(pixels.size()); }
};

using ObjectSet = std::vector<Object>;

/// 4-connected components of the weed and crop classes, each class labelled
/// separately; components smaller than min_area are dropped. Objects are
/// ordered by their first pixel in row-major order.
inline ObjectSet connected_components(const LabelMask& mask, int min_area = kMinObjectArea) {
  const int W = mask.width();
  const int H = mask.height();
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<std::int32_t> stack;
  ObjectSet out;
  for (int start = 0; start < static_cast<int>(mask.size()); ++start) {
    const int cls = mask[start];
    if (cls == 0 || seen[start]) continue;
    Object obj;
    obj.cls = cls;
    seen[start] = 1;
    stack.assign(1, start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      obj.pixels.push_back(p);
      const int x = p % W;
      const int y = p / W;
      const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& q : nb) {
        if (q[0] < 0 || q[0] >= W || q[1] < 0 || q[1] >= H) continue;
        const int k = q[1] * W + q[0];
        if (!seen[k] && mask[k] == cls) {
          seen[k] = 1;
          stack.push_back(k);
        }
      }
    }
    if (obj.area() >= min_area) out.push_back(std::move(obj));
  }
  return out;
}

/// Plurality class of `labels` over the object's footprint. A tie for the
/// top count resolves to soil, i.e. a miss.
inline int vote(const Object& obj, const LabelMask& labels) {
  std::array<std::int64_t, kNumClasses> n{};
  for (auto p : obj.pixels) ++n[labels[p]];
  int best = 0;
  bool tie = false;
  for (int c = 1; c < kNumClasses; ++c) {
    if (n[c] > n[best]) {
      best = c;
      tie = false;
    } else if (n[c] == n[best]) {
      tie = true;
    }
  }
  return tie ? 0 : best;
}

/// Object counts that can be summed across images before taking ratios.
struct ObjectTally {
  std::array<std::int64_t, kNumClasses> gt_objects{};
  std::array<std::int64_t, kNumClasses> gt_hits{};
  std::array<std::int64_t, kNumClasses> pred_objects{};
  std::array<std::int64_t, kNumClasses> pred_hits{};

  ObjectTally& operator+=(const ObjectTally& o) {
    for (int c = 0; c < kNumClasses; ++c) {
      gt_objects[c] += o.gt_objects[c];
      gt_hits[c] += o.gt_hits[c];
      pred_objects[c] += o.pred_objects[c];
      pred_hits[c] += o.pred_hits[c];
    }
    return *this;
  }
};

inline ObjectTally tally_objects(const LabelMask& pred, const LabelMask& gt, int min_area = kMinObjectArea) {
  require_same_size(pred, gt);
  ObjectTally t;
  for (const auto& o : connected_components(gt, min_area)) {
    ++t.gt_objects[o.cls];
    if (vote(o, pred) == o.cls) ++t.gt_hits[o.cls];
  }
  for (const auto& o : connected_components(pred, min_area)) {
    ++t.pred_objects[o.cls];
    if (vote(o, gt) == o.cls) ++t.pred_hits[o.cls];
  }
  return t;
}

struct ObjectMetrics {
  std::array<std::optional<double>, kNumClasses> precision;  // soil entry unused
  std::array<std::optional<double>, kNumClasses> recall;
  std::optional<double> macc;  // mean recall over weed and crop
  ObjectTally tally;
};

inline ObjectMetrics object_metrics(const ObjectTally& t) {
  ObjectMetrics m;
  m.tally = t;
  double sum = 0.0;
  int defined = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    m.precision[c] = ratio(t.pred_hits[c], t.pred_objects[c]);
    m.recall[c] = ratio(t.gt_hits[c], t.gt_objects[c]);
    if (m.recall[c]) {
      sum += *m.recall[c];
      ++defined;
    }
  }
  if (defined) m.macc = sum / defined;
  return m;
}

inline ObjectMetrics object_metrics(const LabelMask& pred, const LabelMask& gt,
                                    int min_area = kMinObjectArea) {
  return object_metrics(tally_objects(pred, gt, min_area));
}

// ---------------------------------------------------------------------------
// Reporting

inline std::string percent(const std::optional<double>& v) {
  if (!v) return "    n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%7.2f", 100.0 * *v);
  return buf;
}

/// Aligned text tables: pixel-wise IoU/precision/recall per class, then
/// object-wise precision/recall for the vegetation classes.
inline std::string format_report(const PixelMetrics& pm, const ObjectMetrics& om) {
  std::string s = "Pixel-wise      IoU[%]  Prec[%]   Rec[%]\n";
  for (int c = 0; c < kNumClasses; ++c) {
    char name[16];
    std::snprintf(name, sizeof name, "%-10s", label_name(c));
    s += std::string(name) + "   " + percent(pm.per_class[c].iou) + "  " + percent(pm.per_class[c].precision) +
         "  " + percent(pm.per_class[c].recall) + "\n";
  }
  s += "mIoU[%]      " + percent(pm.miou) + (pm.miou_partial ? "  (some classes undefined)" : "") + "\n\n";
  s += "Object-wise    Prec[%]   Rec[%]  objects\n";
  for (int c = 1; c < kNumClasses; ++c) {
    char name[16];
    std::snprintf(name, sizeof name, "%-10s", label_name(c));
    s += std::string(name) + "   " + percent(om.precision[c]) + "  " + percent(om.recall[c]) + "  " +
         std::to_string(om.tally.gt_objects[c]) + "\n";
  }
  s += "mAcc[%]      " + percent(om.macc) + "\n";
  return s;
}

}  // namespace cropseg::eval
