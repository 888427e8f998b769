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

#include <algorithm>
#include <cmath>

#include "streetlabel/image.hpp"

namespace streetlabel {

// sRGB (D65) <-> CIE-LAB.
namespace color {

inline constexpr double kWhiteX = 0.95047;
inline constexpr double kWhiteY = 1.0;
inline constexpr double kWhiteZ = 1.08883;

inline double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

inline double linear_to_srgb(double c) {
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

inline double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3 * delta * delta) + 4.0 / 29.0;
}

inline double lab_f_inv(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta ? t * t * t : 3 * delta * delta * (t - 4.0 / 29.0);
}

} // namespace color

inline Lab rgb_to_lab(const Rgb& px) {
  using namespace color;
  const double r = srgb_to_linear(px[0] / 255.0);
  const double g = srgb_to_linear(px[1] / 255.0);
  const double b = srgb_to_linear(px[2] / 255.0);
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const double fx = lab_f(x / kWhiteX);
  const double fy = lab_f(y / kWhiteY);
  const double fz = lab_f(z / kWhiteZ);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

inline Rgb lab_to_rgb(const Lab& lab) {
  using namespace color;
  const double fy = (lab.L + 16.0) / 116.0;
  const double fx = fy + lab.a / 500.0;
  const double fz = fy - lab.b / 200.0;
  const double x = kWhiteX * lab_f_inv(fx);
  const double y = kWhiteY * lab_f_inv(fy);
  const double z = kWhiteZ * lab_f_inv(fz);
  const double r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
  const double g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
  const double b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
  auto to8 = [](double c) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(linear_to_srgb(c), 0.0, 1.0) * 255.0));
  };
  return {to8(r), to8(g), to8(b)};
}

inline LabImage rgb_to_lab(const RgbImage& image) {
  if (image.empty()) throw Error("rgb_to_lab: zero-size image");
  LabImage out(image.width, image.height);
  for (std::size_t i = 0; i < image.size(); ++i) out.pixels[i] = rgb_to_lab(image.pixels[i]);
  return out;
}

inline RgbImage lab_to_rgb(const LabImage& image) {
  RgbImage out(image.width, image.height);
  for (std::size_t i = 0; i < image.size(); ++i) out.pixels[i] = lab_to_rgb(image.pixels[i]);
  return out;
}

} // namespace streetlabel
