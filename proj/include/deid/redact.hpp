// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "deid/image.hpp"

namespace deid::redact {

struct TextBox {
  int x = 0, y = 0, w = 0, h = 0;
  std::string transcript;
  double confidence = 0.0;
  int frame_index = 0;
};

struct DetectorParams {
  // Near-saturated threshold on 8-bit values (scaled for 16-bit frames).
  int intensity_floor = 230;
  // Components on one line merge into a word when their gap is at most
  // word_gap_factor times the line's median glyph extent.
  double word_gap_factor = 1.5;
  int min_component_pixels = 1;
};

// Detector seam: the production CRNN sits behind this interface; the
// bundled reference detector keeps the pipeline runnable without it.
class Detector {
public:
  virtual ~Detector() = default;
  virtual std::vector<TextBox> detect(const ImageFrame& frame) const = 0;
  virtual std::string name() const = 0;
};

// Thresholds near-saturated pixels, groups 8-connected components into
// word boxes (horizontal lines and vertical stacks), and transcribes each
// box by per-column template scoring against the bundled font, decoded
// with lexicon-free best-path CTC decoding.
class ReferenceDetector : public Detector {
public:
  explicit ReferenceDetector(DetectorParams params = {});
  std::vector<TextBox> detect(const ImageFrame& frame) const override;
  std::string name() const override { return "reference"; }

private:
  DetectorParams params_;
};

std::unique_ptr<Detector> make_detector(const std::string& name,
                                        const DetectorParams& params = {});

// Sets every pixel inside any box to 0 (all channels) and returns the new
// frame with the union mask of the boxes.
std::pair<ImageFrame, Mask> redact(const ImageFrame& frame,
                                   const std::vector<TextBox>& boxes);

// Sidecar CSV: one row per box, RFC 4180 quoting for the transcript.
void sequester_header(std::ostream& out);
void sequester(std::ostream& out, const std::string& image_id,
               const std::vector<TextBox>& boxes);

}  // namespace deid::redact
