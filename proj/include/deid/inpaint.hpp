// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "deid/image.hpp"

namespace deid::inpaint {

enum class PixelState : uint8_t { Known, Band, Inside };

// Eikonal distance field over a frame. Pixels outside the masked region
// stay Known at D=0 (the marching boundary condition); masked pixels
// receive their arrival distance, and `order` records extraction order.
struct DistanceMap {
  int width = 0;
  int height = 0;
  std::vector<double> d;
  std::vector<PixelState> state;
  std::vector<int> order;  // row-major pixel indices in pop order

  double dist(int x, int y) const { return d[size_t(y) * width + x]; }
  PixelState at(int x, int y) const { return state[size_t(y) * width + x]; }
  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
};

// Solves the discretized |grad D| = 1 update at one pixel from its four
// axis neighbors (minimum over the four quadrant solutions). Infinity when
// no usable neighbor exists.
double eikonal_update(const DistanceMap& dm, int x, int y);

// Fast-marching distance transform of the masked region. Extraction order
// is monotone in D; ties break by row-major index.
DistanceMap fast_march(const Mask& mask);

// Unit inward normal at p: normalized central-difference gradient of D
// (one-sided at borders and Inside neighbors). Zero vector when the
// gradient degenerates.
std::array<double, 2> boundary_normal(const DistanceMap& dm, int x, int y);

struct InpaintConfig {
  int radius = 3;
  enum class Backend { Telea, External } backend = Backend::Telea;
};

// Fast-marching inpainting: masked pixels are filled in marching order with
// the normal-aligned inverse-square-distance weighted average of known or
// already-filled neighbors within the radius. Falls back to plain
// inverse-square weights when every neighbor sits behind the normal gate.
ImageFrame telea_fill(const ImageFrame& frame, const Mask& mask,
                      const InpaintConfig& config = {});

// output = original where mask==0, restored where mask==1 (exact copies).
ImageFrame composite_identity(const ImageFrame& original, const ImageFrame& restored,
                              const Mask& mask);

// External generative backend exchange (HTTP POST, JSON body with
// PNG-encoded payloads; see README for the wire contract).
struct BackendRequest {
  ImageFrame masked_frame;
  Mask mask;
  std::string prompt;      // empty for the no-context variant
  std::string request_id;
};

struct BackendConfig {
  std::string endpoint;  // host:port or http://host:port
  int timeout_ms = 30000;
  int retries = 2;
  bool fail_hard = false;
};

// Sends the request (resampled to the backend's 512x512 3-channel
// contract), resamples the reply back, and always applies
// composite_identity against the request frame. Throws BackendError on
// transport or protocol failure.
ImageFrame external_inpaint(const BackendRequest& request, const BackendConfig& config);

}  // namespace deid::inpaint
