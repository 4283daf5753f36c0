// SPDX-License-Identifier: Apache-2.0
#include "deid/font.hpp"

#include <array>

#include "deid/common.hpp"

namespace deid::synth {

namespace {

struct GlyphArt {
  char ch;
  const char* rows[kFontRows];
};

// clang-format off
constexpr GlyphArt kArt[] = {
  {'A', {".###.",
         "#...#",
         "#...#",
         "#####",
         "#...#",
         "#...#",
         "#...#"}},
  {'B', {"####.",
         "#...#",
         "#...#",
         "####.",
         "#...#",
         "#...#",
         "####."}},
  {'C', {".###.",
         "#...#",
         "#....",
         "#....",
         "#....",
         "#...#",
         ".###."}},
  {'D', {"####.",
         "#...#",
         "#...#",
         "#...#",
         "#...#",
         "#...#",
         "####."}},
  {'E', {"#####",
         "#....",
         "#....",
         "####.",
         "#....",
         "#....",
         "#####"}},
  {'F', {"#####",
         "#....",
         "#....",
         "####.",
         "#....",
         "#....",
         "#...."}},
  {'G', {".###.",
         "#...#",
         "#....",
         "#.###",
         "#...#",
         "#...#",
         ".###."}},
  {'H', {"#...#",
         "#...#",
         "#...#",
         "#####",
         "#...#",
         "#...#",
         "#...#"}},
  {'I', {".###.",
         "..#..",
         "..#..",
         "..#..",
         "..#..",
         "..#..",
         ".###."}},
  {'J', {"..###",
         "...#.",
         "...#.",
         "...#.",
         "...#.",
         "#..#.",
         ".##.."}},
  {'K', {"#...#",
         "#..#.",
         "#.#..",
         "##...",
         "#.#..",
         "#..#.",
         "#...#"}},
  {'L', {"#....",
         "#....",
         "#....",
         "#....",
         "#....",
         "#....",
         "#####"}},
  {'M', {"#...#",
         "##.##",
         "#.#.#",
         "#.#.#",
         "#...#",
         "#...#",
         "#...#"}},
  {'N', {"#...#",
         "##..#",
         "#.#.#",
         "#..##",
         "#...#",
         "#...#",
         "#...#"}},
  {'O', {".###.",
         "#...#",
         "#...#",
         "#...#",
         "#...#",
         "#...#",
         ".###."}},
  {'P', {"####.",
         "#...#",
         "#...#",
         "####.",
         "#....",
         "#....",
         "#...."}},
  {'Q', {".###.",
         "#...#",
         "#...#",
         "#...#",
         "#.#.#",
         "#..#.",
         ".##.#"}},
  {'R', {"####.",
         "#...#",
         "#...#",
         "####.",
         "#.#..",
         "#..#.",
         "#...#"}},
  {'S', {".####",
         "#....",
         "#....",
         ".###.",
         "....#",
         "....#",
         "####."}},
  {'T', {"#####",
         "..#..",
         "..#..",
         "..#..",
         "..#..",
         "..#..",
         "..#.."}},
  {'U', {"#...#",
         "#...#",
         "#...#",
         "#...#",
         "#...#",
         "#...#",
         ".###."}},
  {'V', {"#...#",
         "#...#",
         "#...#",
         "#...#",
         "#...#",
         ".#.#.",
         "..#.."}},
  {'W', {"#...#",
         "#...#",
         "#...#",
         "#.#.#",
         "#.#.#",
         "##.##",
         "#...#"}},
  {'X', {"#...#",
         "#...#",
         ".#.#.",
         "..#..",
         ".#.#.",
         "#...#",
         "#...#"}},
  {'Y', {"#...#",
         "#...#",
         ".#.#.",
         "..#..",
         "..#..",
         "..#..",
         "..#.."}},
  {'Z', {"#####",
         "....#",
         "...#.",
         "..#..",
         ".#...",
         "#....",
         "#####"}},
  {'0', {".###.",
         "#...#",
         "#..##",
         "#.#.#",
         "##..#",
         "#...#",
         ".###."}},
  {'1', {"..#..",
         ".##..",
         "..#..",
         "..#..",
         "..#..",
         "..#..",
         ".###."}},
  {'2', {".###.",
         "#...#",
         "....#",
         "...#.",
         "..#..",
         ".#...",
         "#####"}},
  {'3', {"#####",
         "...#.",
         "..#..",
         "...#.",
         "....#",
         "#...#",
         ".###."}},
  {'4', {"...#.",
         "..##.",
         ".#.#.",
         "#..#.",
         "#####",
         "...#.",
         "...#."}},
  {'5', {"#####",
         "#....",
         "####.",
         "....#",
         "....#",
         "#...#",
         "####."}},
  {'6', {"..##.",
         ".#...",
         "#....",
         "####.",
         "#...#",
         "#...#",
         ".###."}},
  {'7', {"#####",
         "....#",
         "...#.",
         "..#..",
         ".#...",
         ".#...",
         ".#..."}},
  {'8', {".###.",
         "#...#",
         "#...#",
         ".###.",
         "#...#",
         "#...#",
         ".###."}},
  {'9', {".###.",
         "#...#",
         "#...#",
         ".####",
         "....#",
         "...#.",
         ".##.."}},
  {'.', {".....",
         ".....",
         ".....",
         ".....",
         ".....",
         ".##..",
         ".##.."}},
  {',', {".....",
         ".....",
         ".....",
         ".....",
         ".##..",
         "..#..",
         ".#..."}},
  {':', {".....",
         ".##..",
         ".##..",
         ".....",
         ".##..",
         ".##..",
         "....."}},
  {'/', {"....#",
         "....#",
         "...#.",
         "..#..",
         ".#...",
         "#....",
         "#...."}},
  {'-', {".....",
         ".....",
         ".....",
         "#####",
         ".....",
         ".....",
         "....."}},
  {'#', {".#.#.",
         ".#.#.",
         "#####",
         ".#.#.",
         "#####",
         ".#.#.",
         ".#.#."}},
  {'(', {"...#.",
         "..#..",
         ".#...",
         ".#...",
         ".#...",
         "..#..",
         "...#."}},
  {')', {".#...",
         "..#..",
         "...#.",
         "...#.",
         "...#.",
         "..#..",
         ".#..."}},
  {'\'', {"..#..",
          "..#..",
          ".#...",
          ".....",
          ".....",
          ".....",
          "....."}},
};
// clang-format on

constexpr int kGlyphCount = int(sizeof(kArt) / sizeof(kArt[0]));

struct FontTables {
  std::string charset;
  std::array<Glyph, kGlyphCount> glyphs;
  int index[128];

  FontTables() {
    for (int& i : index) i = -1;
    for (int g = 0; g < kGlyphCount; ++g) {
      const GlyphArt& art = kArt[g];
      Glyph& glyph = glyphs[size_t(g)];
      glyph.ch = art.ch;
      for (int r = 0; r < kFontRows; ++r) {
        uint8_t bits = 0;
        for (int c = 0; c < kFontCols; ++c) {
          if (art.rows[r][c] == '#') bits |= uint8_t(1u << (kFontCols - 1 - c));
        }
        glyph.rows[r] = bits;
      }
      charset.push_back(art.ch);
      index[int(uint8_t(art.ch))] = g;
    }
  }
};

const FontTables& tables() {
  static const FontTables t;
  return t;
}

}  // namespace

const std::string& font_charset() { return tables().charset; }

const Glyph* font_glyph(char c) {
  if (uint8_t(c) > 0x7f) return nullptr;
  int idx = tables().index[int(uint8_t(c))];
  if (idx < 0) return nullptr;
  return &tables().glyphs[size_t(idx)];
}

bool font_supports(char c) { return c == ' ' || font_glyph(c) != nullptr; }

int scaled_glyph_width(int font_px) {
  int w = (kFontCols * font_px + kFontRows / 2) / kFontRows;
  return w < 1 ? 1 : w;
}

ScaledGlyph scale_glyph(const Glyph& glyph, int font_px) {
  if (font_px < 1) throw Error("font_px must be positive");
  ScaledGlyph out;
  out.width = scaled_glyph_width(font_px);
  out.height = font_px;
  out.bits.assign(size_t(out.width) * out.height, 0);
  for (int y = 0; y < out.height; ++y) {
    int sy = y * kFontRows / out.height;
    for (int x = 0; x < out.width; ++x) {
      int sx = x * kFontCols / out.width;
      if (glyph.rows[sy] & (1u << (kFontCols - 1 - sx))) {
        out.bits[size_t(y) * out.width + x] = 1;
      }
    }
  }
  return out;
}

}  // namespace deid::synth
