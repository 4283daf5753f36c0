// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>

#include "deid/ctc.hpp"
#include "deid/font.hpp"
#include "deid/redact.hpp"

namespace deid::redact {

namespace {

using synth::font_charset;
using synth::font_glyph;
using synth::Glyph;
using synth::kFontCols;
using synth::kFontRows;

struct Component {
  int min_x, min_y, max_x, max_y;
  int pixels = 0;

  int w() const { return max_x - min_x + 1; }
  int h() const { return max_y - min_y + 1; }
};

struct Box {
  int x, y, w, h;

  int right() const { return x + w; }
  int bottom() const { return y + h; }
};

std::vector<uint8_t> threshold_frame(const ImageFrame& frame, int floor8) {
  int threshold = frame.bits == 16 ? floor8 * 257 : floor8;
  std::vector<uint8_t> binary(frame.pixel_count(), 0);
  int channels = frame.channels;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      uint16_t v = 0;
      for (int c = 0; c < channels; ++c) v = std::max(v, frame.at(x, y, c));
      binary[size_t(y) * frame.width + x] = v >= threshold ? 1 : 0;
    }
  }
  return binary;
}

// 8-connected components by scanline flood fill; labels follow scan order,
// so results do not depend on thread count.
std::vector<Component> find_components(const std::vector<uint8_t>& binary, int width,
                                       int height, int min_pixels) {
  std::vector<int> label(binary.size(), -1);
  std::vector<Component> comps;
  std::vector<int> stack;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      size_t idx = size_t(y) * width + x;
      if (!binary[idx] || label[idx] >= 0) continue;
      int id = int(comps.size());
      comps.push_back({x, y, x, y, 0});
      stack.push_back(int(idx));
      label[idx] = id;
      while (!stack.empty()) {
        int cur = stack.back();
        stack.pop_back();
        int cx = cur % width;
        int cy = cur / width;
        Component& comp = comps[size_t(id)];
        comp.min_x = std::min(comp.min_x, cx);
        comp.max_x = std::max(comp.max_x, cx);
        comp.min_y = std::min(comp.min_y, cy);
        comp.max_y = std::max(comp.max_y, cy);
        comp.pixels += 1;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
            size_t nidx = size_t(ny) * width + nx;
            if (!binary[nidx] || label[nidx] >= 0) continue;
            label[nidx] = id;
            stack.push_back(int(nidx));
          }
        }
      }
    }
  }
  std::vector<Component> kept;
  for (const auto& c : comps) {
    if (c.pixels >= min_pixels) kept.push_back(c);
  }
  return kept;
}

int median_of(std::vector<int> values) {
  if (values.empty()) return 1;
  std::sort(values.begin(), values.end());
  return values[values.size() / 2];
}

bool v_overlap(const Box& a, const Box& b) {
  return a.y < b.bottom() && b.y < a.bottom();
}
bool h_overlap_frac(const Box& a, const Box& b, double frac) {
  int lo = std::max(a.x, b.x);
  int hi = std::min(a.right(), b.right());
  int overlap = hi - lo;
  return overlap > 0 && overlap >= int(frac * std::min(a.w, b.w));
}

Box merge_boxes(const Box& a, const Box& b) {
  int x0 = std::min(a.x, b.x);
  int y0 = std::min(a.y, b.y);
  int x1 = std::max(a.right(), b.right());
  int y1 = std::max(a.bottom(), b.bottom());
  return {x0, y0, x1 - x0, y1 - y0};
}

// Groups same-line components into word boxes, then stitches vertically
// stacked boxes (rotated text) into column boxes.
std::vector<Box> group_boxes(const std::vector<Component>& comps, double gap_factor) {
  std::vector<Box> boxes;
  for (const auto& c : comps) boxes.push_back({c.min_x, c.min_y, c.w(), c.h()});

  // line grouping by vertical-interval overlap chains
  std::vector<int> line(boxes.size());
  for (size_t i = 0; i < boxes.size(); ++i) line[i] = int(i);
  auto find = [&](int i) {
    while (line[size_t(i)] != i) i = line[size_t(i)] = line[size_t(line[size_t(i)])];
    return i;
  };
  for (size_t i = 0; i < boxes.size(); ++i) {
    for (size_t j = i + 1; j < boxes.size(); ++j) {
      if (v_overlap(boxes[i], boxes[j])) line[size_t(find(int(j)))] = find(int(i));
    }
  }

  std::vector<Box> words;
  std::vector<char> used(boxes.size(), 0);
  for (size_t i = 0; i < boxes.size(); ++i) {
    if (used[i]) continue;
    int root = find(int(i));
    std::vector<Box> members;
    std::vector<int> widths;
    for (size_t j = 0; j < boxes.size(); ++j) {
      if (find(int(j)) == root && !used[j]) {
        members.push_back(boxes[j]);
        widths.push_back(boxes[j].w);
        used[j] = 1;
      }
    }
    double word_gap = gap_factor * median_of(widths);
    std::sort(members.begin(), members.end(),
              [](const Box& a, const Box& b) { return a.x < b.x; });
    Box cur = members[0];
    for (size_t m = 1; m < members.size(); ++m) {
      if (members[m].x - cur.right() <= word_gap) {
        cur = merge_boxes(cur, members[m]);
      } else {
        words.push_back(cur);
        cur = members[m];
      }
    }
    words.push_back(cur);
  }

  // vertical stitch: stacked boxes with strong horizontal overlap
  std::sort(words.begin(), words.end(), [](const Box& a, const Box& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });
  std::vector<Box> out;
  std::vector<char> taken(words.size(), 0);
  for (size_t i = 0; i < words.size(); ++i) {
    if (taken[i]) continue;
    Box cur = words[i];
    taken[i] = 1;
    bool grew = true;
    while (grew) {
      grew = false;
      std::vector<int> heights{cur.h};
      for (size_t j = 0; j < words.size(); ++j) {
        if (taken[j]) continue;
        double vgap_limit = gap_factor * std::min(median_of({cur.h}), words[j].h);
        int vgap = words[j].y >= cur.bottom() ? words[j].y - cur.bottom()
                                              : cur.y - words[j].bottom();
        if (h_overlap_frac(cur, words[j], 0.5) && vgap <= vgap_limit) {
          cur = merge_boxes(cur, words[j]);
          taken[j] = 1;
          grew = true;
        }
      }
    }
    out.push_back(cur);
  }
  std::sort(out.begin(), out.end(), [](const Box& a, const Box& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Per-box transcription: column segmentation, 5x7 template scoring, CTC
// best-path decoding over the resulting probability matrix.

struct Crop {
  int w = 0, h = 0;
  std::vector<uint8_t> bits;

  bool at(int x, int y) const { return bits[size_t(y) * w + x] != 0; }
};

Crop crop_binary(const std::vector<uint8_t>& binary, int stride, const Box& box) {
  Crop crop;
  crop.w = box.w;
  crop.h = box.h;
  crop.bits.resize(size_t(box.w) * box.h);
  for (int y = 0; y < box.h; ++y) {
    for (int x = 0; x < box.w; ++x) {
      crop.bits[size_t(y) * box.w + x] = binary[size_t(box.y + y) * stride + box.x + x];
    }
  }
  return crop;
}

Crop rotate_crop_to_horizontal(const Crop& crop) {
  // Rendered 90-degree text reads top to bottom; map rows back to columns.
  Crop out;
  out.w = crop.h;
  out.h = crop.w;
  out.bits.resize(crop.bits.size());
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      out.bits[size_t(y) * out.w + x] = crop.at(crop.w - 1 - y, x) ? 1 : 0;
    }
  }
  return out;
}

// Tight ink rectangle of a bit grid.
struct InkRect {
  int x0 = 0, y0 = 0, w = 0, h = 0;
};

template <typename GridAt>
InkRect ink_rect(int width, int height, GridAt at) {
  int x0 = width, y0 = height, x1 = -1, y1 = -1;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!at(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < x0) return {};
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

struct InkTemplate {
  int w = 0, h = 0;
  std::vector<uint8_t> bits;

  bool at(int x, int y) const { return bits[size_t(y) * w + x] != 0; }
};

// Ink-tight renderings of every glyph at a given font height, produced by
// the same scaler the overlay renderer uses. Lazily cached per size.
const std::vector<InkTemplate>& templates_for(int font_px) {
  static std::map<int, std::vector<InkTemplate>> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(font_px);
  if (it != cache.end()) return it->second;
  std::vector<InkTemplate> out;
  for (char c : font_charset()) {
    synth::ScaledGlyph g = synth::scale_glyph(*font_glyph(c), font_px);
    InkRect rect = ink_rect(g.width, g.height, [&](int x, int y) { return g.at(x, y); });
    InkTemplate t;
    t.w = rect.w;
    t.h = rect.h;
    t.bits.resize(size_t(rect.w) * rect.h);
    for (int y = 0; y < rect.h; ++y) {
      for (int x = 0; x < rect.w; ++x) {
        t.bits[size_t(y) * rect.w + x] = g.at(rect.x0 + x, rect.y0 + y) ? 1 : 0;
      }
    }
    out.push_back(std::move(t));
  }
  return cache.emplace(font_px, std::move(out)).first->second;
}

// Rows of the unscaled 5x7 grid each glyph inks, for font-size estimation.
const std::vector<int>& glyph_ink_rows() {
  static const std::vector<int> rows = [] {
    std::vector<int> out;
    for (char c : font_charset()) {
      const Glyph* g = font_glyph(c);
      int r0 = kFontRows, r1 = -1;
      for (int y = 0; y < kFontRows; ++y) {
        if (g->rows[y]) {
          r0 = std::min(r0, y);
          r1 = std::max(r1, y);
        }
      }
      out.push_back(r1 - r0 + 1);
    }
    return out;
  }();
  return rows;
}

struct Slot {
  int x0, x1;  // inclusive column range
  int y0, y1;  // tight vertical extent
};

std::vector<Slot> find_slots(const Crop& crop) {
  std::vector<Slot> slots;
  int x = 0;
  while (x < crop.w) {
    bool nonempty = false;
    for (int y = 0; y < crop.h; ++y) {
      if (crop.at(x, y)) {
        nonempty = true;
        break;
      }
    }
    if (!nonempty) {
      ++x;
      continue;
    }
    Slot slot{x, x, crop.h, -1};
    while (slot.x1 < crop.w) {
      bool any = false;
      for (int y = 0; y < crop.h; ++y) {
        if (crop.at(slot.x1, y)) {
          any = true;
          slot.y0 = std::min(slot.y0, y);
          slot.y1 = std::max(slot.y1, y);
        }
      }
      if (!any) break;
      ++slot.x1;
    }
    --slot.x1;
    slots.push_back(slot);
    x = slot.x1 + 2;
  }
  return slots;
}

// Fraction of template cells the slot ink reproduces, after nearest
// resampling of the slot ink onto the template grid. Exact (score 1) when
// the slot is an unrotated rendering of the glyph at the tried size.
double match_score(const Crop& crop, const Slot& slot, const InkTemplate& tmpl) {
  if (tmpl.w <= 0 || tmpl.h <= 0) return 0.0;
  int sw = slot.x1 - slot.x0 + 1;
  int sh = slot.y1 - slot.y0 + 1;
  int matching = 0;
  for (int ty = 0; ty < tmpl.h; ++ty) {
    int sy = slot.y0 + ty * sh / tmpl.h;
    for (int tx = 0; tx < tmpl.w; ++tx) {
      int sx = slot.x0 + tx * sw / tmpl.w;
      if (crop.at(sx, sy) == tmpl.at(tx, ty)) ++matching;
    }
  }
  double raw = double(matching) / (double(tmpl.w) * tmpl.h);
  // a grossly different ink aspect means the size estimate was wrong for
  // this glyph; damp such matches so coarse tiny templates cannot tie
  double aspect_s = double(sw) / sh;
  double aspect_t = double(tmpl.w) / tmpl.h;
  double agree = std::min(aspect_s, aspect_t) / std::max(aspect_s, aspect_t);
  if (tmpl.w * tmpl.h < 4) raw *= 0.5;
  return raw * std::sqrt(agree);
}

struct Transcription {
  std::string text;
  double confidence = 0.0;
};

Transcription transcribe_crop(const Crop& crop) {
  const std::string& charset = font_charset();
  const std::vector<int>& ink_rows = glyph_ink_rows();
  int classes = int(charset.size()) + 1;

  auto slots = find_slots(crop);
  if (slots.empty()) return {};

  ctc::ProbMatrix y = ctc::ProbMatrix::make(crop.w, classes);
  for (int t = 0; t < crop.w; ++t) {
    y.at(t, ctc::kBlank) = 1.0;  // overwritten for slot columns below
  }
  constexpr double kBeta = 40.0;  // softmax sharpness over match scores
  for (const auto& slot : slots) {
    int sh = slot.y1 - slot.y0 + 1;
    std::vector<double> scores(size_t(classes), 0.0);
    scores[0] = 0.35;  // blank rarely wins inside ink
    // Glyphs with few inked source rows extrapolate huge size estimates;
    // clamping keeps the template cache and the scoring cost bounded.
    constexpr int kMaxTemplatePx = 96;
    for (int k = 1; k < classes; ++k) {
      int rows = ink_rows[size_t(k - 1)];
      int f_est = std::max(1, (sh * kFontRows + rows / 2) / rows);
      if (f_est > kMaxTemplatePx) {
        scores[size_t(k)] = 0.0;
        continue;
      }
      double best = 0.0;
      for (int f : {f_est - 1, f_est, f_est + 1}) {
        if (f < 1 || f > kMaxTemplatePx) continue;
        best = std::max(best, match_score(crop, slot, templates_for(f)[size_t(k - 1)]));
      }
      scores[size_t(k)] = best;
    }
    double sum = 0.0;
    std::vector<double> p(size_t(classes), 0.0);
    for (int k = 0; k < classes; ++k) {
      p[size_t(k)] = std::exp(kBeta * (scores[size_t(k)] - 1.0));
      sum += p[size_t(k)];
    }
    for (int t = slot.x0; t <= slot.x1; ++t) {
      for (int k = 0; k < classes; ++k) y.at(t, k) = p[size_t(k)] / sum;
    }
  }

  auto decoded = ctc::best_path_decode(y);
  Transcription out;
  out.confidence = decoded.confidence;

  // spaces separate slots whose gap clearly exceeds the glyph spacing
  std::vector<int> widths;
  for (const auto& s : slots) widths.push_back(s.x1 - s.x0 + 1);
  int glyph_w = median_of(widths);
  if (decoded.labels.size() == slots.size()) {
    for (size_t i = 0; i < slots.size(); ++i) {
      if (i > 0) {
        int gap = slots[i].x0 - slots[i - 1].x1 - 1;
        if (gap >= std::max(2, int(0.6 * glyph_w))) out.text.push_back(' ');
      }
      out.text.push_back(charset[size_t(decoded.labels[i] - 1)]);
    }
  } else {
    for (int label : decoded.labels) out.text.push_back(charset[size_t(label - 1)]);
  }
  return out;
}

}  // namespace

ReferenceDetector::ReferenceDetector(DetectorParams params) : params_(params) {}

std::vector<TextBox> ReferenceDetector::detect(const ImageFrame& frame) const {
  std::vector<uint8_t> binary = threshold_frame(frame, params_.intensity_floor);
  auto comps = find_components(binary, frame.width, frame.height,
                               params_.min_component_pixels);
  auto boxes = group_boxes(comps, params_.word_gap_factor);

  std::vector<TextBox> out;
  for (const auto& b : boxes) {
    Crop crop = crop_binary(binary, frame.width, {b.x, b.y, b.w, b.h});
    if (b.h > 2 * b.w) crop = rotate_crop_to_horizontal(crop);
    Transcription tr = transcribe_crop(crop);
    TextBox tb;
    tb.x = b.x;
    tb.y = b.y;
    tb.w = b.w;
    tb.h = b.h;
    tb.transcript = tr.text;
    tb.confidence = tr.confidence;
    out.push_back(std::move(tb));
  }
  return out;
}

std::unique_ptr<Detector> make_detector(const std::string& name,
                                        const DetectorParams& params) {
  if (name == "reference") return std::make_unique<ReferenceDetector>(params);
  throw ConfigError("unknown detector '" + name + "'");
}

}  // namespace deid::redact
