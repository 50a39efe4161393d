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
#include <stdexcept>
#include <string>

namespace cropseg {

inline constexpr const char* kVersion = "1.0.0";

// Error taxonomy. The CLI maps ArgumentError to exit code 1 and the
// data-side errors (DataError, LoadError) to exit code 2.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LoadError : public DataError {
 public:
  using DataError::DataError;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Label : std::uint8_t { kSoil = 0, kWeed = 1, kCrop = 2 };

inline constexpr int kNumClasses = 3;

inline const char* label_name(int c) {
  switch (c) {
    case 0: return "soil";
    case 1: return "weed";
    case 2: return "crop";
    default: return "?";
  }
}

}  // namespace cropseg
