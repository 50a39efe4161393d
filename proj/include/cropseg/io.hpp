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

// PNG codecs (libpng simplified API), channel dumps and the on-disk
// dataset layout:
//   <root>/images/<stem>.png   RGB
//   <root>/labels/<stem>.png   8-bit palette, indices {0,1,2}
//   <root>/manifest.json       {"stems": [...], "split": {"train": [...], ...}}

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <csetjmp>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "cropseg/common.hpp"
#include "cropseg/fsutil.hpp"
#include "cropseg/image.hpp"

namespace cropseg::io {

namespace stdfs = std::filesystem;

// ---------------------------------------------------------------------------
// PNG

/// Decodes any PNG to 8-bit samples of the requested simplified format.
inline std::vector<std::uint8_t> decode_png(const std::vector<std::uint8_t>& bytes, png_uint_32 format,
                                            int& w, int& h, const std::string& what) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    throw DataError(what + ": not a readable PNG (" + img.message + ")");
  img.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DataError(what + ": PNG decode failed (" + msg + ")");
  }
  w = static_cast<int>(img.width);
  h = static_cast<int>(img.height);
  return buf;
}

/// RGB or RGBA PNG to [0,1] floats; alpha is ignored (not composited).
inline RgbImage read_rgb_png(const stdfs::path& path) {
  int w = 0, h = 0;
  const auto buf = decode_png(fs::read_file(path), PNG_FORMAT_RGBA, w, h, path.string());
  RgbImage out(w, h);
  for (std::size_t i = 0; i < out.pixel_count(); ++i)
    for (int c = 0; c < 3; ++c) out.data()[i * 3 + c] = buf[i * 4 + c] / 255.0f;
  return out;
}

namespace detail {

struct PngReadState {
  std::vector<std::uint8_t> bytes;
  std::size_t pos = 0;
};

inline void png_read_mem(png_structp png, png_bytep out, png_size_t n) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->pos + n > st->bytes.size()) png_error(png, "truncated PNG");
  std::memcpy(out, st->bytes.data() + st->pos, n);
  st->pos += n;
}

}  // namespace detail

/// Label PNGs hold class indices directly: the palette index for palette
/// images, the grey value otherwise. Colour PNGs are rejected.
inline LabelMask read_label_png(const stdfs::path& path) {
  detail::PngReadState st{fs::read_file(path), 0};
  if (st.bytes.size() < 8 || png_sig_cmp(st.bytes.data(), 0, 8) != 0)
    throw DataError(path.string() + ": not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng initialisation failed");
  }
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 w = 0, h = 0;
  int color_type = 0;
  std::string failure;
  if (setjmp(png_jmpbuf(png))) {
    failure = path.string() + ": PNG decode failed";
  } else {
    png_set_read_fn(png, &st, detail::png_read_mem);
    png_read_info(png, info);
    w = png_get_image_width(png, info);
    h = png_get_image_height(png, info);
    color_type = png_get_color_type(png, info);
    if (color_type != PNG_COLOR_TYPE_PALETTE && color_type != PNG_COLOR_TYPE_GRAY) {
      failure = path.string() + ": label PNG must be palette or greyscale";
    } else {
      png_set_packing(png);
      png_set_strip_16(png);
      png_read_update_info(png, info);
      pixels.resize(static_cast<std::size_t>(w) * h);
      rows.resize(h);
      for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * w;
      png_read_image(png, rows.data());
      png_read_end(png, nullptr);
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (!failure.empty()) throw DataError(failure);

  LabelMask m(static_cast<int>(w), static_cast<int>(h));
  std::copy(pixels.begin(), pixels.end(), m.data().begin());
  for (auto v : m.data())
    if (v >= kNumClasses) throw DataError(path.string() + ": label value outside {0,1,2}");
  return m;
}

inline std::vector<std::uint8_t> encode_png(const std::uint8_t* data, int w, int h, png_uint_32 format,
                                            const std::uint8_t* colormap = nullptr, int entries = 0) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = format;
  img.colormap_entries = static_cast<png_uint_32>(entries);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, data, 0, colormap))
    throw DataError(std::string("PNG encode failed: ") + img.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, data, 0, colormap))
    throw DataError(std::string("PNG encode failed: ") + img.message);
  out.resize(size);
  return out;
}

inline std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline void write_rgb_png(const stdfs::path& path, const RgbImage& img) {
  std::vector<std::uint8_t> buf(img.data().size());
  std::transform(img.data().begin(), img.data().end(), buf.begin(), to_byte);
  fs::write_atomic(path, encode_png(buf.data(), img.width(), img.height(), PNG_FORMAT_RGB));
}

/// Palette entries: soil black, weed red, crop green.
inline constexpr std::uint8_t kLabelPalette[kNumClasses * 3] = {0, 0, 0, 255, 0, 0, 0, 255, 0};

/// 8-bit palette PNG whose indices are the class values.
inline void write_label_png(const stdfs::path& path, const LabelMask& m) {
  for (auto v : m.data())
    if (v >= kNumClasses) throw ArgumentError("label value outside {0,1,2}");
  fs::write_atomic(path, encode_png(m.data().data(), m.width(), m.height(), PNG_FORMAT_RGB_COLORMAP,
                                    kLabelPalette, kNumClasses));
}

inline void write_gray_png(const stdfs::path& path, const Plane<std::uint8_t>& m) {
  fs::write_atomic(path, encode_png(m.data().data(), m.width(), m.height(), PNG_FORMAT_GRAY));
}

/// Binary mask as black/white greyscale.
inline void write_mask_png(const stdfs::path& path, const BinaryMask& m) {
  Plane<std::uint8_t> g(m.width(), m.height());
  for (std::size_t i = 0; i < m.size(); ++i) g[i] = m[i] ? 255 : 0;
  write_gray_png(path, g);
}

/// Min-max rescale to 0..255 (constant channels become 0).
inline Plane<std::uint8_t> visualize(const Channel& ch) {
  Plane<std::uint8_t> out(ch.width(), ch.height(), 0);
  if (ch.empty()) return out;
  const auto [mn, mx] = std::minmax_element(ch.data().begin(), ch.data().end());
  if (!(*mx > *mn)) return out;
  const double scale = 255.0 / (static_cast<double>(*mx) - *mn);
  for (std::size_t i = 0; i < ch.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::lround((ch[i] - *mn) * scale));
  return out;
}

/// Crops tinted green and weeds red over the input image.
inline RgbImage overlay(const RgbImage& img, const LabelMask& m, float alpha = 0.5f) {
  if (img.width() != m.width() || img.height() != m.height())
    throw ShapeError("overlay: image and mask sizes differ");
  RgbImage out = img;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const int l = m(x, y);
      if (l == 0) continue;
      const float tint[3] = {l == 1 ? 1.0f : 0.0f, l == 2 ? 1.0f : 0.0f, 0.0f};
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = (1 - alpha) * img.at(x, y, c) + alpha * tint[c];
    }
  return out;
}

// ---------------------------------------------------------------------------
// Channel dumps: "CSCH" | u32 width | u32 height | u32 index | f32 data

inline constexpr char kChannelMagic[4] = {'C', 'S', 'C', 'H'};

inline std::vector<std::uint8_t> encode_channel(const Channel& ch, std::uint32_t index) {
  std::vector<std::uint8_t> out(kChannelMagic, kChannelMagic + 4);
  fs::put_u32(out, static_cast<std::uint32_t>(ch.width()));
  fs::put_u32(out, static_cast<std::uint32_t>(ch.height()));
  fs::put_u32(out, index);
  out.reserve(out.size() + ch.size() * 4);
  for (float v : ch.data()) fs::put_f32(out, v);
  return out;
}

inline Channel decode_channel(const std::vector<std::uint8_t>& bytes, std::uint32_t* index = nullptr) {
  fs::ByteReader rd(bytes);
  if (rd.str(4) != std::string(kChannelMagic, 4)) throw LoadError("not a channel dump (bad magic)");
  const auto w = rd.u32();
  const auto h = rd.u32();
  const auto i = rd.u32();
  if (index) *index = i;
  if (static_cast<std::uint64_t>(w) * h * 4 != rd.remaining()) throw LoadError("channel dump size mismatch");
  Channel ch(static_cast<int>(w), static_cast<int>(h));
  for (auto& v : ch.data()) v = rd.f32();
  return ch;
}

// ---------------------------------------------------------------------------
// Dataset layout

struct Split {
  std::vector<std::string> train, val, test;
};

struct Manifest {
  std::vector<std::string> stems;
  Split split;
};

/// Deterministic shuffled split; the test share absorbs rounding.
inline Split make_split(std::vector<std::string> stems, std::uint64_t seed, double train_frac = 0.70,
                        double val_frac = 0.15) {
  std::mt19937_64 rng(seed);
  std::shuffle(stems.begin(), stems.end(), rng);
  const auto n = stems.size();
  const auto ntrain = static_cast<std::size_t>(std::lround(train_frac * n));
  const auto nval = std::min(n - ntrain, static_cast<std::size_t>(std::lround(val_frac * n)));
  Split s;
  s.train.assign(stems.begin(), stems.begin() + ntrain);
  s.val.assign(stems.begin() + ntrain, stems.begin() + ntrain + nval);
  s.test.assign(stems.begin() + ntrain + nval, stems.end());
  return s;
}

inline nlohmann::json to_json(const Manifest& m) {
  return {{"stems", m.stems},
          {"split", {{"train", m.split.train}, {"val", m.split.val}, {"test", m.split.test}}}};
}

inline void write_manifest(const stdfs::path& root, const Manifest& m) {
  fs::write_atomic(root / "manifest.json", to_json(m).dump(2) + "\n");
}

/// Reads manifest.json; without one, every matching image/label pair is
/// listed and the split is left empty.
inline Manifest read_manifest(const stdfs::path& root) {
  Manifest m;
  const auto path = root / "manifest.json";
  if (stdfs::exists(path)) {
    const auto bytes = fs::read_file(path);
    try {
      const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
      m.stems = j.at("stems").get<std::vector<std::string>>();
      if (j.contains("split")) {
        const auto& sp = j.at("split");
        m.split.train = sp.value("train", std::vector<std::string>{});
        m.split.val = sp.value("val", std::vector<std::string>{});
        m.split.test = sp.value("test", std::vector<std::string>{});
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ": " + e.what());
    }
    return m;
  }
  if (!stdfs::is_directory(root / "images")) throw DataError(root.string() + ": no images/ directory");
  for (const auto& e : stdfs::directory_iterator(root / "images"))
    if (e.path().extension() == ".png" && stdfs::exists(root / "labels" / e.path().filename()))
      m.stems.push_back(e.path().stem().string());
  std::sort(m.stems.begin(), m.stems.end());
  return m;
}

inline Sample load_sample(const stdfs::path& root, const std::string& stem) {
  Sample s;
  s.id = stem;
  s.image = read_rgb_png(root / "images" / (stem + ".png"));
  s.labels = read_label_png(root / "labels" / (stem + ".png"));
  require_valid(s);
  return s;
}

inline std::vector<Sample> load_samples(const stdfs::path& root, const std::vector<std::string>& stems) {
  std::vector<Sample> out;
  out.reserve(stems.size());
  for (const auto& st : stems) out.push_back(load_sample(root, st));
  return out;
}

inline void write_sample(const stdfs::path& root, const Sample& s) {
  write_rgb_png(root / "images" / (s.id + ".png"), s.image);
  write_label_png(root / "labels" / (s.id + ".png"), s.labels);
}

/// Writes samples plus a manifest with a seeded 70/15/15 split.
inline Manifest write_dataset(const stdfs::path& root, const std::vector<Sample>& samples,
                              std::uint64_t split_seed) {
  Manifest m;
  for (const auto& s : samples) {
    write_sample(root, s);
    m.stems.push_back(s.id);
  }
  m.split = make_split(m.stems, split_seed);
  write_manifest(root, m);
  return m;
}

}  // namespace cropseg::io
