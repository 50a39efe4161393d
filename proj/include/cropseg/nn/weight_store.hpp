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

// WeightStore file layout (all integers u32 little-endian):
//   "CSWT" | version | records...
//   record = name_len | name bytes (UTF-8) | rank | dims[rank] | f32 data
// Records run to end of file.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cropseg/fsutil.hpp"
#include "cropseg/nn/tensor.hpp"

namespace cropseg::nn {

inline constexpr std::uint32_t kWeightStoreVersion = 1;
inline constexpr char kWeightStoreMagic[4] = {'C', 'S', 'W', 'T'};

struct StoredTensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

/// Named tensors in insertion order.
class WeightStore {
 public:
  void put(const std::string& name, std::vector<std::uint32_t> dims, std::vector<float> data) {
    StoredTensor t{std::move(dims), std::move(data)};
    if (t.numel() != t.data.size()) throw ShapeError(name + ": dims do not match data length");
    if (!index_.contains(name)) order_.push_back(name);
    index_[name] = std::move(t);
  }

  template <typename T>
  void put_tensor(const std::string& name, const Tensor<T>& t, int rank) {
    const Shape s = t.shape();
    std::vector<std::uint32_t> dims;
    if (rank == 1) {
      dims = {static_cast<std::uint32_t>(s.numel())};
    } else {
      dims = {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
              static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
    }
    std::vector<float> data(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) data[i] = static_cast<float>(t[i]);
    put(name, std::move(dims), std::move(data));
  }

  bool contains(const std::string& name) const { return index_.contains(name); }
  const StoredTensor& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw LoadError("weight store has no tensor named '" + name + "'");
    return it->second;
  }
  const std::vector<std::string>& names() const { return order_; }

  /// Copies a stored tensor into t, checking element count.
  template <typename T>
  void load_into(const std::string& name, Tensor<T>& t) const {
    const StoredTensor& s = get(name);
    if (s.data.size() != t.size())
      throw LoadError(name + ": stored size " + std::to_string(s.data.size()) +
                      " does not match expected " + std::to_string(t.size()));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(s.data[i]);
  }

  std::vector<std::uint8_t> serialize() const {
    std::vector<std::uint8_t> out(kWeightStoreMagic, kWeightStoreMagic + 4);
    fs::put_u32(out, kWeightStoreVersion);
    for (const auto& name : order_) {
      const StoredTensor& t = index_.at(name);
      fs::put_u32(out, static_cast<std::uint32_t>(name.size()));
      out.insert(out.end(), name.begin(), name.end());
      fs::put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
      for (auto d : t.dims) fs::put_u32(out, d);
      for (float f : t.data) fs::put_f32(out, f);
    }
    return out;
  }

  static WeightStore deserialize(const std::vector<std::uint8_t>& bytes) {
    fs::ByteReader rd(bytes);
    if (rd.str(4) != std::string(kWeightStoreMagic, 4)) throw LoadError("not a weight store (bad magic)");
    const std::uint32_t version = rd.u32();
    if (version != kWeightStoreVersion)
      throw LoadError("weight store version " + std::to_string(version) +
                      " is not supported (this build reads version " +
                      std::to_string(kWeightStoreVersion) + ")");
    WeightStore ws;
    while (!rd.done()) {
      const std::uint32_t len = rd.u32();
      if (len > rd.remaining()) throw LoadError("corrupt record name length");
      std::string name = rd.str(len);
      const std::uint32_t rank = rd.u32();
      if (rank > 8) throw LoadError(name + ": implausible rank");
      std::vector<std::uint32_t> dims(rank);
      std::size_t count = 1;
      for (auto& d : dims) {
        d = rd.u32();
        count *= d;
      }
      if (count * 4 > rd.remaining()) throw LoadError(name + ": truncated tensor data");
      std::vector<float> data(count);
      for (auto& f : data) f = rd.f32();
      ws.put(name, std::move(dims), std::move(data));
    }
    return ws;
  }

  void save(const std::filesystem::path& path) const { fs::write_atomic(path, serialize()); }
  static WeightStore load(const std::filesystem::path& path) {
    return deserialize(fs::read_file(path));
  }

 private:
  std::vector<std::string> order_;
  std::map<std::string, StoredTensor> index_;
};

}  // namespace cropseg::nn
