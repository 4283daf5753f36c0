// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace deid::synth {

// Bundled public-domain 5x7 stroke font. Rendering and the reference
// transcriber share these tables, which keeps the corpus bit-exact across
// platforms (no system font dependency).
inline constexpr int kFontRows = 7;
inline constexpr int kFontCols = 5;

struct Glyph {
  char ch;
  uint8_t rows[kFontRows];  // bit 4 = leftmost column
};

// Drawable characters in class order (CTC class index = position + 1).
const std::string& font_charset();
const Glyph* font_glyph(char c);  // nullptr for unsupported chars and space
bool font_supports(char c);      // drawable or space

struct ScaledGlyph {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> bits;  // row-major 0/1

  bool at(int x, int y) const { return bits[size_t(y) * width + x] != 0; }
};

// Nearest-neighbor scaling with integer floor mapping; deterministic on any
// platform. Width tracks the 5:7 aspect.
int scaled_glyph_width(int font_px);
ScaledGlyph scale_glyph(const Glyph& glyph, int font_px);

}  // namespace deid::synth
