// SPDX-License-Identifier: Apache-2.0
#include "deid/image.hpp"

#include <algorithm>
#include <cmath>

namespace deid {

ImageFrame window_to_8bit(const ImageFrame& frame, WindowScale* scale_out) {
  if (frame.bits == 8) {
    if (scale_out) *scale_out = {0, 255};
    return frame;
  }
  uint16_t lo = 65535, hi = 0;
  for (uint16_t v : frame.samples) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (scale_out) *scale_out = {lo, hi};
  ImageFrame out = ImageFrame::make(frame.width, frame.height, frame.channels, 8);
  if (hi == lo) return out;  // constant frame maps to all-zero
  double inv = 255.0 / double(hi - lo);
  for (size_t i = 0; i < frame.samples.size(); ++i) {
    out.samples[i] = uint16_t(std::lround((frame.samples[i] - lo) * inv));
  }
  return out;
}

uint16_t unwindow_value(uint8_t v, const WindowScale& scale) {
  if (scale.hi <= scale.lo) return scale.lo;
  double x = scale.lo + double(v) * double(scale.hi - scale.lo) / 255.0;
  long r = std::lround(x);
  r = std::clamp<long>(r, scale.lo, scale.hi);
  return uint16_t(r);
}

ImageFrame resize_bilinear(const ImageFrame& frame, int new_w, int new_h) {
  ImageFrame out = ImageFrame::make(new_w, new_h, frame.channels, frame.bits);
  if (frame.width <= 0 || frame.height <= 0) return out;
  double sx = double(frame.width) / new_w;
  double sy = double(frame.height) / new_h;
  for (int y = 0; y < new_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = int(std::floor(fy));
    double wy = fy - y0;
    int y1 = std::min(y0 + 1, frame.height - 1);
    y0 = std::clamp(y0, 0, frame.height - 1);
    for (int x = 0; x < new_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = int(std::floor(fx));
      double wx = fx - x0;
      int x1 = std::min(x0 + 1, frame.width - 1);
      x0 = std::clamp(x0, 0, frame.width - 1);
      for (int c = 0; c < frame.channels; ++c) {
        double v = (1 - wy) * ((1 - wx) * frame.at(x0, y0, c) + wx * frame.at(x1, y0, c)) +
                   wy * ((1 - wx) * frame.at(x0, y1, c) + wx * frame.at(x1, y1, c));
        out.at(x, y, c) = uint16_t(std::lround(std::clamp(v, 0.0, double(frame.max_value()))));
      }
    }
  }
  return out;
}

Mask resize_nearest(const Mask& mask, int new_w, int new_h) {
  Mask out = Mask::zeros(new_w, new_h);
  if (mask.width <= 0 || mask.height <= 0) return out;
  for (int y = 0; y < new_h; ++y) {
    int sy = std::min(int(size_t(y) * mask.height / new_h), mask.height - 1);
    for (int x = 0; x < new_w; ++x) {
      int sx = std::min(int(size_t(x) * mask.width / new_w), mask.width - 1);
      out.set(x, y, mask.at(sx, sy));
    }
  }
  return out;
}

}  // namespace deid
