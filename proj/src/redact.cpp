// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstdio>

#include "deid/redact.hpp"

namespace deid::redact {

std::pair<ImageFrame, Mask> redact(const ImageFrame& frame,
                                   const std::vector<TextBox>& boxes) {
  ImageFrame out = frame;
  Mask mask = Mask::zeros(frame.width, frame.height);
  for (const auto& b : boxes) {
    int x0 = std::max(0, b.x);
    int y0 = std::max(0, b.y);
    int x1 = std::min(frame.width, b.x + b.w);
    int y1 = std::min(frame.height, b.y + b.h);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        for (int c = 0; c < frame.channels; ++c) out.at(x, y, c) = 0;
        mask.set(x, y);
      }
    }
  }
  return {std::move(out), std::move(mask)};
}

void sequester_header(std::ostream& out) {
  out << "image_id,frame_index,x,y,w,h,transcript,confidence\n";
}

void sequester(std::ostream& out, const std::string& image_id,
               const std::vector<TextBox>& boxes) {
  char conf[32];
  for (const auto& b : boxes) {
    std::string quoted = "\"";
    for (char c : b.transcript) {
      if (c == '"') quoted += "\"\"";
      else quoted.push_back(c);
    }
    quoted += "\"";
    std::snprintf(conf, sizeof(conf), "%.6f", b.confidence);
    out << image_id << ',' << b.frame_index << ',' << b.x << ',' << b.y << ','
        << b.w << ',' << b.h << ',' << quoted << ',' << conf << '\n';
    if (!out) throw Error("sidecar CSV write failed");
  }
}

}  // namespace deid::redact
