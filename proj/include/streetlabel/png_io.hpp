// Copyright 2026 The streetlabel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <png.h>

#include <string>

#include "streetlabel/classes.hpp"

namespace streetlabel {

namespace detail {

inline std::vector<std::uint8_t> read_png(const std::string& path, std::uint32_t format, int& width,
                                          int& height) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw Error("cannot read PNG " + path + ": " + image.message);
  image.format = format;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error("cannot decode PNG " + path + ": " + msg);
  }
  width = static_cast<int>(image.width);
  height = static_cast<int>(image.height);
  return buffer;
}

inline void write_png(const std::string& path, std::uint32_t format, int width, int height,
                      const void* data) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, data, 0, nullptr))
    throw Error("cannot write PNG " + path + ": " + image.message);
}

} // namespace detail

inline RgbImage load_rgb_png(const std::string& path) {
  int w = 0, h = 0;
  auto bytes = detail::read_png(path, PNG_FORMAT_RGB, w, h);
  RgbImage out(w, h);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.pixels[i] = {bytes[3 * i], bytes[3 * i + 1], bytes[3 * i + 2]};
  return out;
}

inline void save_rgb_png(const std::string& path, const RgbImage& image) {
  if (image.empty()) throw Error("refusing to write empty image " + path);
  static_assert(sizeof(Rgb) == 3);
  detail::write_png(path, PNG_FORMAT_RGB, image.width, image.height, image.pixels.data());
}

enum class UnknownLabelPolicy { kReject, kMapToVoid };

// 8-bit single-channel PNG whose pixel value is the class index.
inline LabelMap load_label_map(const std::string& path, const ClassTable& classes,
                               UnknownLabelPolicy policy = UnknownLabelPolicy::kReject) {
  int w = 0, h = 0;
  auto bytes = detail::read_png(path, PNG_FORMAT_GRAY, w, h);
  LabelMap out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t v = bytes[out.index(x, y)];
      if (v >= classes.size()) {
        if (policy == UnknownLabelPolicy::kReject)
          throw Error(path + ": class index " + std::to_string(v) + " at (" + std::to_string(x) + "," +
                      std::to_string(y) + ")");
        out.at(x, y) = kVoid;
      } else {
        out.at(x, y) = v;
      }
    }
  }
  return out;
}

inline void save_label_map(const std::string& path, const LabelMap& labels) {
  if (labels.empty()) throw Error("refusing to write empty label map " + path);
  detail::write_png(path, PNG_FORMAT_GRAY, labels.width, labels.height, labels.pixels.data());
}

// Palette colour per pixel; void is always black.
inline RgbImage render_label_map(const LabelMap& labels, const ClassTable& classes) {
  RgbImage out(labels.width, labels.height);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const ClassIndex c = labels.pixels[i];
    if (c >= classes.size()) throw Error("render: class index " + std::to_string(c) + " out of range");
    out.pixels[i] = c == kVoid ? Rgb{0, 0, 0} : classes.colour(c);
  }
  return out;
}

} // namespace streetlabel
