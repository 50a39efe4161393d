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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cropseg/common.hpp"

namespace cropseg {

/// Single-channel row-major raster.
template <typename T>
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(checked_area(width, height)), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Edge-replicating read: coordinates are clamped into the raster.
  const T& clamped(int x, int y) const {
    return (*this)(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
  }

  std::span<T> row(int y) { return {data_.data() + index(0, y), static_cast<std::size_t>(width_)}; }
  std::span<const T> row(int y) const {
    return {data_.data() + index(0, y), static_cast<std::size_t>(width_)};
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Plane&) const = default;

 private:
  static long checked_area(int w, int h) {
    if (w < 0 || h < 0) throw ArgumentError("negative raster dimensions");
    return static_cast<long>(w) * h;
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Channel = Plane<float>;
using LabelMask = Plane<std::uint8_t>;
using BinaryMask = Plane<std::uint8_t>;

/// Interleaved RGB image with values in [0,1].
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, float fill = 0.0f) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw ArgumentError("RgbImage needs width >= 1 and height >= 1");
    data_.assign(static_cast<std::size_t>(width) * height * 3, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  float& at(int x, int y, int c) { return data_[offset(x, y) + c]; }
  float at(int x, int y, int c) const { return data_[offset(x, y) + c]; }

  void set(int x, int y, float r, float g, float b) {
    const std::size_t o = offset(x, y);
    data_[o] = r;
    data_[o + 1] = g;
    data_[o + 2] = b;
  }

  /// One colour plane as a separate Channel (0 = R, 1 = G, 2 = B).
  Channel plane(int c) const {
    Channel out(width_, height_);
    for (std::size_t i = 0; i < pixel_count(); ++i) out[i] = data_[i * 3 + c];
    return out;
  }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  /// True when every sample is finite and inside [0,1].
  bool valid() const {
    if (width_ < 1 || height_ < 1) return false;
    return std::all_of(data_.begin(), data_.end(),
                       [](float v) { return std::isfinite(v) && v >= 0.0f && v <= 1.0f; });
  }

  bool operator==(const RgbImage&) const = default;

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

inline void require_valid(const RgbImage& img) {
  if (!img.valid()) throw ArgumentError("RgbImage must be non-empty with values in [0,1]");
}

/// Labelled training/evaluation example.
struct Sample {
  RgbImage image;
  LabelMask labels;
  std::string id;
};

inline void require_valid(const Sample& s) {
  require_valid(s.image);
  if (s.labels.width() != s.image.width() || s.labels.height() != s.image.height())
    throw ShapeError(s.id + ": image and label sizes differ");
  for (auto l : s.labels.data())
    if (l >= kNumClasses) throw DataError(s.id + ": label value outside {0,1,2}");
}

}  // namespace cropseg
