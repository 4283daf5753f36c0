// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "httplib.h"
#include "json.hpp"

#include "deid/digest.hpp"
#include "deid/inpaint.hpp"
#include "deid/png_io.hpp"

namespace deid::inpaint {

namespace {

constexpr int kBackendSize = 512;

ImageFrame to_three_channel_8bit(const ImageFrame& frame) {
  ImageFrame src = window_to_8bit(frame);
  ImageFrame out = ImageFrame::make(src.width, src.height, 3, 8);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = src.at(x, y, src.channels == 3 ? c : 0);
      }
    }
  }
  return out;
}

ImageFrame from_backend_frame(const ImageFrame& reply, const ImageFrame& like) {
  ImageFrame sized = resize_bilinear(reply, like.width, like.height);
  ImageFrame out = ImageFrame::make(like.width, like.height, like.channels, like.bits);
  double scale = like.bits == 16 ? 257.0 : 1.0;
  for (int y = 0; y < like.height; ++y) {
    for (int x = 0; x < like.width; ++x) {
      for (int c = 0; c < like.channels; ++c) {
        double v;
        if (sized.channels == 3 && like.channels == 1) {
          v = (sized.at(x, y, 0) + sized.at(x, y, 1) + sized.at(x, y, 2)) / 3.0;
        } else {
          v = sized.at(x, y, sized.channels == 3 ? c : 0);
        }
        long r = std::lround(v * scale);
        if (r < 0) r = 0;
        if (r > like.max_value()) r = like.max_value();
        out.at(x, y, c) = uint16_t(r);
      }
    }
  }
  return out;
}

std::string endpoint_url(const std::string& endpoint) {
  if (endpoint.rfind("http://", 0) == 0 || endpoint.rfind("https://", 0) == 0) {
    return endpoint;
  }
  return "http://" + endpoint;
}

}  // namespace

ImageFrame external_inpaint(const BackendRequest& request, const BackendConfig& config) {
  if (request.masked_frame.width != request.mask.width ||
      request.masked_frame.height != request.mask.height) {
    throw Error("external_inpaint: frame and mask dimensions differ");
  }
  if (config.endpoint.empty()) throw BackendError("no backend endpoint configured");

  // 512x512, 3-channel exchange per the backend contract.
  ImageFrame send_frame =
      resize_bilinear(to_three_channel_8bit(request.masked_frame), kBackendSize, kBackendSize);
  Mask send_mask = resize_nearest(request.mask, kBackendSize, kBackendSize);

  nlohmann::json body;
  body["request_id"] = request.request_id;
  body["prompt"] = request.prompt;
  body["frame_png"] = base64_encode(encode_png(send_frame));
  {
    ImageFrame mask_img = ImageFrame::make(kBackendSize, kBackendSize, 1, 8);
    for (size_t i = 0; i < send_mask.on.size(); ++i) {
      mask_img.samples[i] = send_mask.on[i] ? 255 : 0;
    }
    body["mask_png"] = base64_encode(encode_png(mask_img));
  }
  std::string payload = body.dump();

  httplib::Client client(endpoint_url(config.endpoint));
  client.set_connection_timeout(0, config.timeout_ms * 1000LL);
  client.set_read_timeout(config.timeout_ms / 1000, (config.timeout_ms % 1000) * 1000);

  std::string error;
  for (int attempt = 0; attempt <= config.retries; ++attempt) {
    auto res = client.Post("/inpaint", payload, "application/json");
    if (!res) {
      error = "backend unreachable (" + httplib::to_string(res.error()) + ")";
      continue;
    }
    if (res->status != 200) {
      error = "backend returned HTTP " + std::to_string(res->status);
      continue;
    }
    try {
      auto reply = nlohmann::json::parse(res->body);
      if (reply.at("request_id").get<std::string>() != request.request_id) {
        throw BackendError("backend reply has mismatched request id");
      }
      auto png = base64_decode(reply.at("image_png").get<std::string>());
      ImageFrame decoded = decode_png(png);
      if (decoded.width != kBackendSize || decoded.height != kBackendSize) {
        throw BackendError("backend reply has wrong dimensions");
      }
      ImageFrame restored = from_backend_frame(decoded, request.masked_frame);
      return composite_identity(request.masked_frame, restored, request.mask);
    } catch (const BackendError&) {
      throw;
    } catch (const std::exception& e) {
      error = std::string("bad backend reply: ") + e.what();
    }
  }
  throw BackendError(error.empty() ? "backend request failed" : error);
}

}  // namespace deid::inpaint
