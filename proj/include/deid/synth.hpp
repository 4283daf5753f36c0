// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "deid/font.hpp"
#include "deid/image.hpp"

namespace deid::synth {

enum class TextKind { Name, Address, Mrn, Date, SequenceLabel, Institution };

const char* kind_name(TextKind kind);
TextKind kind_from_name(const std::string& name);

// Fully deterministic mock-PHI text from bundled word lists and templates.
std::string fabricate_text(uint64_t rng_seed, TextKind kind);

// Word lists exposed for membership checks.
const std::vector<std::string>& first_names();
const std::vector<std::string>& last_names();

struct OverlayItem {
  std::string text;
  int anchor_x = 0;  // top-left of the rendered (rotated) bounding box
  int anchor_y = 0;
  int font_px = 12;
  double rotation_deg = 0.0;
  uint8_t intensity = 255;
  int spacing = 1;  // inter-character gap, pixels
};

struct BBox {
  int x = 0, y = 0, w = 0, h = 0;

  bool contains(int px, int py) const {
    return px >= x && px < x + w && py >= y && py < y + h;
  }
};

struct GroundTruthItem {
  OverlayItem item;
  BBox bbox;  // tight over this item's rendered pixels
};

struct GroundTruth {
  Mask mask;  // exactly the rendered glyph pixels
  std::vector<GroundTruthItem> items;
};

// Size of the rotated axis-aligned box an item renders into.
void rendered_extent(const OverlayItem& item, int& w, int& h);

// Burns items onto a copy of the frame. Glyph pixels take the item
// intensity (bumped by one level when that would equal the original value,
// so the painted set is exactly the changed set). Throws when an item's
// box clips the frame.
std::pair<ImageFrame, GroundTruth> render_overlay(const ImageFrame& frame,
                                                  const std::vector<OverlayItem>& items);

struct SynthConfig {
  int min_items = 1;
  int max_items = 6;
  int font_min = 8;
  int font_max = 24;
  double rotation_jitter = 5.0;  // degrees around 0 or 90
  int intensity_floor = 230;     // near-white overlays
  int margin = 2;
  int min_item_gap = 32;  // pixels between item boxes
  int placement_tries = 40;
};

struct ManifestRow {
  std::string image_id;
  int item_index = 0;
  std::string kind;
  std::string text;
  int x = 0, y = 0, w = 0, h = 0;
  int font_px = 0;
  double rotation = 0.0;
};

// Generates n overlaid images from the PNG files in clean_dir (round
// robin). Writes <id>.png, <id>_mask.png (1-bit), <id>_clean.png and
// manifest.csv into out_dir. Deterministic for a fixed seed; image i uses
// stream seed ^ i.
std::vector<ManifestRow> generate_corpus(const std::string& clean_dir,
                                         const std::string& out_dir, int n,
                                         const SynthConfig& config, uint64_t seed);

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::string& path);

// Smooth synthetic backgrounds (capped below the detector's intensity
// floor) for self-contained corpus runs and tests.
std::vector<std::string> make_phantom_cleans(const std::string& dir, int count,
                                             int size, uint64_t seed);

}  // namespace deid::synth
