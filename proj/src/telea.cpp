// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "deid/inpaint.hpp"

namespace deid::inpaint {

ImageFrame telea_fill(const ImageFrame& frame, const Mask& mask,
                      const InpaintConfig& config) {
  if (frame.width != mask.width || frame.height != mask.height) {
    throw Error("telea_fill: frame and mask dimensions differ");
  }
  if (config.radius < 1) throw Error("telea_fill: radius must be >= 1");

  size_t n_mask = mask.count();
  if (n_mask == 0) return frame;
  if (n_mask == frame.pixel_count()) {
    throw Error("telea_fill: mask covers the whole frame, no boundary to fill from");
  }

  DistanceMap dm = fast_march(mask);

  // Working copy in doubles so quantization error does not compound while
  // the front propagates; rounded once at the end.
  int channels = frame.channels;
  std::vector<double> work(frame.samples.begin(), frame.samples.end());
  std::vector<uint8_t> known(frame.pixel_count());
  for (size_t i = 0; i < known.size(); ++i) known[i] = mask.on[i] ? 0 : 1;

  // Precomputed disk offsets, fixed iteration order.
  int R = config.radius;
  struct Offset {
    int dx, dy;
    double inv_d2;
  };
  std::vector<Offset> disk;
  for (int dy = -R; dy <= R; ++dy) {
    for (int dx = -R; dx <= R; ++dx) {
      int d2 = dx * dx + dy * dy;
      if (d2 == 0 || d2 > R * R) continue;
      disk.push_back({dx, dy, 1.0 / d2});
    }
  }

  std::vector<double> acc;
  acc.resize(size_t(channels));
  for (int idx : dm.order) {
    int x = idx % frame.width;
    int y = idx / frame.width;
    auto normal = boundary_normal(dm, x, y);

    for (int pass = 0; pass < 2; ++pass) {
      double weight_sum = 0.0;
      for (auto& a : acc) a = 0.0;
      for (const auto& o : disk) {
        int qx = x + o.dx;
        int qy = y + o.dy;
        if (!dm.in_bounds(qx, qy)) continue;
        size_t qidx = size_t(qy) * frame.width + qx;
        if (!known[qidx]) continue;
        double w;
        if (pass == 0) {
          // w = max(0, (p-q).n) / |p-q|^2 with n oriented inward
          double dir = -o.dx * normal[0] - o.dy * normal[1];
          if (dir <= 0.0) continue;
          w = dir * o.inv_d2;
        } else {
          w = o.inv_d2;
        }
        weight_sum += w;
        for (int c = 0; c < channels; ++c) {
          acc[size_t(c)] += w * work[qidx * channels + size_t(c)];
        }
      }
      if (weight_sum > 0.0) {
        for (int c = 0; c < channels; ++c) {
          work[size_t(idx) * channels + size_t(c)] = acc[size_t(c)] / weight_sum;
        }
        break;
      }
      // weight_sum == 0: every candidate sat behind the normal gate (or the
      // normal degenerated); retry with plain inverse-square weights.
    }
    known[size_t(idx)] = 1;
  }

  ImageFrame out = frame;
  double maxv = frame.max_value();
  for (int idx : dm.order) {
    for (int c = 0; c < channels; ++c) {
      double v = work[size_t(idx) * channels + size_t(c)];
      long r = std::lround(v);
      if (r < 0) r = 0;
      if (r > long(maxv)) r = long(maxv);
      out.samples[size_t(idx) * channels + size_t(c)] = uint16_t(r);
    }
  }
  return out;
}

ImageFrame composite_identity(const ImageFrame& original, const ImageFrame& restored,
                              const Mask& mask) {
  if (!original.same_shape(restored) || original.width != mask.width ||
      original.height != mask.height) {
    throw Error("composite_identity: dimensions differ");
  }
  ImageFrame out = original;
  int channels = original.channels;
  for (size_t i = 0; i < mask.on.size(); ++i) {
    if (!mask.on[i]) continue;
    for (int c = 0; c < channels; ++c) {
      out.samples[i * channels + size_t(c)] = restored.samples[i * channels + size_t(c)];
    }
  }
  return out;
}

}  // namespace deid::inpaint
