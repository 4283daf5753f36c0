// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "deid/common.hpp"

namespace deid {

// Single decoded image frame: 8- or 16-bit unsigned samples, 1 or 3
// interleaved channels, row-major.
struct ImageFrame {
  int width = 0;
  int height = 0;
  int channels = 1;
  int bits = 8;  // 8 or 16
  std::vector<uint16_t> samples;

  static ImageFrame make(int w, int h, int channels = 1, int bits = 8,
                         uint16_t fill = 0) {
    ImageFrame f;
    f.width = w;
    f.height = h;
    f.channels = channels;
    f.bits = bits;
    f.samples.assign(size_t(w) * h * channels, fill);
    return f;
  }

  uint16_t at(int x, int y, int c = 0) const {
    return samples[(size_t(y) * width + x) * channels + c];
  }
  uint16_t& at(int x, int y, int c = 0) {
    return samples[(size_t(y) * width + x) * channels + c];
  }
  size_t pixel_count() const { return size_t(width) * height; }
  uint16_t max_value() const { return bits == 8 ? 255 : 65535; }
  bool same_shape(const ImageFrame& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
  bool operator==(const ImageFrame& o) const = default;
};

// Binary redaction region; 1 marks a pixel inside the region.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> on;

  static Mask zeros(int w, int h) {
    Mask m;
    m.width = w;
    m.height = h;
    m.on.assign(size_t(w) * h, 0);
    return m;
  }

  bool at(int x, int y) const { return on[size_t(y) * width + x] != 0; }
  void set(int x, int y, bool v = true) {
    on[size_t(y) * width + x] = v ? 1 : 0;
  }
  size_t count() const {
    size_t n = 0;
    for (uint8_t v : on) n += (v != 0);
    return n;
  }
  Mask& unite(const Mask& o) {
    for (size_t i = 0; i < on.size(); ++i) on[i] = on[i] || o.on[i];
    return *this;
  }
  bool operator==(const Mask& o) const = default;
};

// Per-frame min-max window used to move 16-bit data through the 8-bit
// detection/inpainting path and back.
struct WindowScale {
  uint16_t lo = 0;
  uint16_t hi = 255;
};

// Min-max scales a frame to 8 bits. 8-bit input is returned unchanged with
// the identity window so threshold semantics stay absolute.
ImageFrame window_to_8bit(const ImageFrame& frame, WindowScale* scale_out = nullptr);

// Maps an 8-bit value back into the window's original range.
uint16_t unwindow_value(uint8_t v, const WindowScale& scale);

// Bilinear resize; channels preserved. Used only by the external backend
// exchange (512x512 contract).
ImageFrame resize_bilinear(const ImageFrame& frame, int new_w, int new_h);

// Nearest-neighbor mask resize.
Mask resize_nearest(const Mask& mask, int new_w, int new_h);

}  // namespace deid
