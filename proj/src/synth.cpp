// SPDX-License-Identifier: Apache-2.0
#include "deid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "deid/png_io.hpp"
#include "deid/rng.hpp"

namespace deid::synth {

namespace fs = std::filesystem;

const char* kind_name(TextKind kind) {
  switch (kind) {
    case TextKind::Name: return "name";
    case TextKind::Address: return "address";
    case TextKind::Mrn: return "mrn";
    case TextKind::Date: return "date";
    case TextKind::SequenceLabel: return "sequence_label";
    case TextKind::Institution: return "institution";
  }
  return "?";
}

TextKind kind_from_name(const std::string& name) {
  for (TextKind k : {TextKind::Name, TextKind::Address, TextKind::Mrn, TextKind::Date,
                     TextKind::SequenceLabel, TextKind::Institution}) {
    if (name == kind_name(k)) return k;
  }
  throw Error("unknown text kind " + name);
}

namespace {

const std::vector<std::string> kFirstNames = {
    "JAMES",   "MARY",     "ROBERT",  "PATRICIA", "JOHN",    "JENNIFER",
    "MICHAEL", "LINDA",    "DAVID",   "ELIZABETH", "WILLIAM", "BARBARA",
    "RICHARD", "SUSAN",    "JOSEPH",  "JESSICA",  "THOMAS",  "SARAH",
    "CHARLES", "KAREN",    "DANIEL",  "LISA",     "MATTHEW", "NANCY",
    "ANTHONY", "BETTY",    "MARK",    "MARGARET", "STEVEN",  "SANDRA",
    "PAUL",    "ASHLEY"};

const std::vector<std::string> kLastNames = {
    "SMITH",    "JOHNSON",  "WILLIAMS", "BROWN",   "JONES",    "GARCIA",
    "MILLER",   "DAVIS",    "RODRIGUEZ", "MARTINEZ", "HERNANDEZ", "LOPEZ",
    "GONZALEZ", "WILSON",   "ANDERSON", "THOMAS",  "TAYLOR",   "MOORE",
    "JACKSON",  "MARTIN",   "LEE",      "PEREZ",   "THOMPSON", "WHITE",
    "HARRIS",   "SANCHEZ",  "CLARK",    "RAMIREZ", "LEWIS",    "ROBINSON",
    "WALKER",   "YOUNG"};

const std::vector<std::string> kStreets = {
    "MAPLE",  "OAK",    "CEDAR",    "ELM",    "WASHINGTON", "LAKE",
    "HILL",   "MAIN",   "PARK",     "PINE",   "RIVER",      "SUNSET",
    "HIGHLAND", "FOREST", "MEADOW", "SPRING", "VALLEY",     "CHURCH",
    "MILL",   "BRIDGE", "GARDEN",   "CENTER", "UNION",      "FRANKLIN"};

const std::vector<std::string> kStreetSuffixes = {"ST", "AVE", "RD", "BLVD",
                                                  "LN", "DR",  "WAY", "CT"};

const std::vector<std::string> kSequenceLabels = {
    "T1 AXIAL",   "T2 SAG",      "FLAIR COR",  "DWI B1000",
    "CINE 4CH",   "PA CHEST",    "LAT VIEW",   "DOPPLER",
    "T1 POST GAD", "SCOUT",      "AX CONTRAST", "LOC 3PL",
    "M-MODE",     "COLOR FLOW",  "BONE WINDOW", "LUNG WINDOW"};

const std::vector<std::string> kInstitutionStems = {
    "ST JUDE",   "RIVERSIDE", "LAKEVIEW",  "NORTHGATE", "TRINITY",  "SUMMIT",
    "PARKLAND",  "WESTBROOK", "EASTSIDE",  "HILLCREST", "BAYVIEW",  "CENTRAL",
    "MERIDIAN",  "OAKWOOD",   "PINECREST", "HARBORVIEW"};

const std::vector<std::string> kInstitutionTypes = {
    "MEDICAL CENTER", "GENERAL HOSPITAL", "CLINIC",
    "IMAGING CENTER", "HEALTH SYSTEM",    "REGIONAL HOSPITAL"};

const std::string& pick(Pcg32& rng, const std::vector<std::string>& list) {
  return list[size_t(rng.bounded(uint32_t(list.size())))];
}

}  // namespace

const std::vector<std::string>& first_names() { return kFirstNames; }
const std::vector<std::string>& last_names() { return kLastNames; }

std::string fabricate_text(uint64_t rng_seed, TextKind kind) {
  Pcg32 rng(rng_seed);
  switch (kind) {
    case TextKind::Name:
      return pick(rng, kFirstNames) + " " + pick(rng, kLastNames);
    case TextKind::Address: {
      int number = rng.range(100, 9899);
      return std::to_string(number) + " " + pick(rng, kStreets) + " " +
             pick(rng, kStreetSuffixes);
    }
    case TextKind::Mrn: {
      std::string out(1, char('A' + rng.range(0, 25)));
      for (int i = 0; i < 7; ++i) out.push_back(char('0' + rng.range(0, 9)));
      return out;
    }
    case TextKind::Date: {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%02d/%02d/%04d", rng.range(1, 12),
                    rng.range(1, 28), rng.range(1950, 2024));
      return buf;
    }
    case TextKind::SequenceLabel:
      return pick(rng, kSequenceLabels);
    case TextKind::Institution:
      return pick(rng, kInstitutionStems) + " " + pick(rng, kInstitutionTypes);
  }
  throw Error("unreachable text kind");
}

// ---------------------------------------------------------------------------
// Rendering.

namespace {

// cos/sin quantized to 2^-16 so boundary samples cannot wobble across libm
// implementations.
void rotation_terms(double deg, double& c, double& s) {
  double rad = deg * 3.14159265358979323846 / 180.0;
  c = std::nearbyint(std::cos(rad) * 65536.0) / 65536.0;
  s = std::nearbyint(std::sin(rad) * 65536.0) / 65536.0;
}

struct TextBlock {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> bits;

  bool at(int x, int y) const { return bits[size_t(y) * width + x] != 0; }
};

TextBlock layout_text(const OverlayItem& item) {
  TextBlock block;
  block.height = item.font_px;
  int pen = 0;
  struct Placed {
    const Glyph* glyph;
    int x;
  };
  std::vector<Placed> placed;
  int glyph_w = scaled_glyph_width(item.font_px);
  for (char c : item.text) {
    if (!font_supports(c)) throw Error(std::string("unsupported overlay character '") + c + "'");
    if (c != ' ') placed.push_back({font_glyph(c), pen});
    pen += glyph_w + item.spacing;
  }
  block.width = std::max(1, pen - item.spacing);
  block.bits.assign(size_t(block.width) * block.height, 0);
  for (const auto& p : placed) {
    ScaledGlyph g = scale_glyph(*p.glyph, item.font_px);
    for (int y = 0; y < g.height; ++y) {
      for (int x = 0; x < g.width; ++x) {
        if (g.at(x, y)) block.bits[size_t(y) * block.width + p.x + x] = 1;
      }
    }
  }
  return block;
}

struct RenderedItem {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> bits;
};

RenderedItem rotate_block(const TextBlock& block, double deg) {
  double c, s;
  rotation_terms(deg, c, s);
  double w = block.width, h = block.height;
  RenderedItem out;
  out.width = int(std::ceil(std::abs(w * c) + std::abs(h * s)));
  out.height = int(std::ceil(std::abs(w * s) + std::abs(h * c)));
  out.width = std::max(out.width, 1);
  out.height = std::max(out.height, 1);
  out.bits.assign(size_t(out.width) * out.height, 0);
  double cx = w / 2.0, cy = h / 2.0;
  double ox = out.width / 2.0, oy = out.height / 2.0;
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      double dx = x + 0.5 - ox;
      double dy = y + 0.5 - oy;
      // inverse rotation back into block coordinates
      double bx = c * dx + s * dy + cx;
      double by = -s * dx + c * dy + cy;
      int ix = int(std::floor(bx));
      int iy = int(std::floor(by));
      if (ix < 0 || iy < 0 || ix >= block.width || iy >= block.height) continue;
      if (block.at(ix, iy)) out.bits[size_t(y) * out.width + x] = 1;
    }
  }
  return out;
}

}  // namespace

void rendered_extent(const OverlayItem& item, int& w, int& h) {
  TextBlock block = layout_text(item);
  if (item.rotation_deg == 0.0) {
    w = block.width;
    h = block.height;
    return;
  }
  double c, s;
  rotation_terms(item.rotation_deg, c, s);
  w = std::max(1, int(std::ceil(std::abs(block.width * c) + std::abs(block.height * s))));
  h = std::max(1, int(std::ceil(std::abs(block.width * s) + std::abs(block.height * c))));
}

std::pair<ImageFrame, GroundTruth> render_overlay(const ImageFrame& frame,
                                                  const std::vector<OverlayItem>& items) {
  ImageFrame out = frame;
  GroundTruth truth;
  truth.mask = Mask::zeros(frame.width, frame.height);

  for (const auto& item : items) {
    TextBlock block = layout_text(item);
    RenderedItem rendered = rotate_block(block, item.rotation_deg);
    if (item.anchor_x < 0 || item.anchor_y < 0 ||
        item.anchor_x + rendered.width > frame.width ||
        item.anchor_y + rendered.height > frame.height) {
      throw Error("overlay item clips the frame boundary");
    }

    int min_x = frame.width, min_y = frame.height, max_x = -1, max_y = -1;
    uint16_t level = item.intensity;
    if (frame.bits == 16) level = uint16_t(item.intensity * 257);
    for (int y = 0; y < rendered.height; ++y) {
      for (int x = 0; x < rendered.width; ++x) {
        if (!rendered.bits[size_t(y) * rendered.width + x]) continue;
        int fx = item.anchor_x + x;
        int fy = item.anchor_y + y;
        // A write equal to the original value is nudged one level down so
        // the mask stays exactly the changed-pixel set.
        uint16_t value = level;
        if (frame.at(fx, fy, 0) == value) value = uint16_t(value - 1);
        for (int ch = 0; ch < frame.channels; ++ch) out.at(fx, fy, ch) = value;
        truth.mask.set(fx, fy);
        min_x = std::min(min_x, fx);
        min_y = std::min(min_y, fy);
        max_x = std::max(max_x, fx);
        max_y = std::max(max_y, fy);
      }
    }
    BBox box;
    if (max_x >= min_x) box = {min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
    truth.items.push_back({item, box});
  }
  return {std::move(out), std::move(truth)};
}

// ---------------------------------------------------------------------------
// Corpus generation.

namespace {

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

int spacing_for_font(Pcg32& rng, int font_px) {
  // Keep inter-character gaps below a quarter of the glyph width so word
  // grouping in the reference detector holds together across spaces.
  int lo = std::max(1, font_px / kFontRows);
  int hi = std::max(lo, scaled_glyph_width(font_px) / 4);
  return rng.range(lo, hi);
}

struct PlacedBox {
  BBox box;
};

bool too_close(const BBox& a, const BBox& b, int gap) {
  return a.x < b.x + b.w + gap && b.x < a.x + a.w + gap &&
         a.y < b.y + b.h + gap && b.y < a.y + a.h + gap;
}

}  // namespace

std::vector<ManifestRow> generate_corpus(const std::string& clean_dir,
                                         const std::string& out_dir, int n,
                                         const SynthConfig& config, uint64_t seed) {
  std::vector<std::string> cleans;
  for (const auto& entry : fs::directory_iterator(clean_dir)) {
    if (entry.path().extension() == ".png") cleans.push_back(entry.path().string());
  }
  std::sort(cleans.begin(), cleans.end());
  if (cleans.empty()) throw Error("no PNG images in " + clean_dir);
  fs::create_directories(out_dir);

  std::vector<std::vector<ManifestRow>> per_image;
  per_image.resize(size_t(n));
  std::vector<std::string> errors;
  errors.resize(size_t(n));

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      Pcg32 rng(seed ^ uint64_t(i));
      ImageFrame clean = read_png(cleans[size_t(i) % cleans.size()]);
      char idbuf[32];
      std::snprintf(idbuf, sizeof(idbuf), "synth_%06d", i);
      std::string id = idbuf;

      int want = rng.range(config.min_items, config.max_items);
      std::vector<OverlayItem> items;
      std::vector<BBox> boxes;
      std::vector<TextKind> kinds;
      for (int k = 0; k < want; ++k) {
        bool placed = false;
        for (int attempt = 0; attempt < config.placement_tries && !placed; ++attempt) {
          TextKind kind = TextKind(rng.range(0, 5));
          uint64_t text_seed = (uint64_t(rng.next()) << 32) | rng.next();
          OverlayItem item;
          item.text = fabricate_text(text_seed, kind);
          item.font_px = rng.range(config.font_min, config.font_max);
          item.spacing = spacing_for_font(rng, item.font_px);
          double base = rng.range(0, 1) ? 90.0 : 0.0;
          item.rotation_deg = base + rng.uniform(-config.rotation_jitter,
                                                 config.rotation_jitter);
          item.intensity = rng.range(0, 1)
                               ? 255
                               : uint8_t(rng.range(config.intensity_floor, 255));
          int w = 0, h = 0;
          rendered_extent(item, w, h);
          int max_x = clean.width - config.margin - w;
          int max_y = clean.height - config.margin - h;
          if (max_x <= config.margin || max_y <= config.margin) continue;
          item.anchor_x = rng.range(config.margin, max_x);
          item.anchor_y = rng.range(config.margin, max_y);
          BBox candidate{item.anchor_x, item.anchor_y, w, h};
          bool collides = false;
          for (const auto& other : boxes) {
            if (too_close(candidate, other, config.min_item_gap)) {
              collides = true;
              break;
            }
          }
          if (collides) continue;
          items.push_back(item);
          boxes.push_back(candidate);
          kinds.push_back(kind);
          placed = true;
        }
      }

      auto [overlaid, truth] = render_overlay(clean, items);
      fs::path base = fs::path(out_dir) / id;
      write_png(base.string() + ".png", overlaid);
      write_mask_png(base.string() + "_mask.png", truth.mask);
      write_png(base.string() + "_clean.png", clean);

      for (size_t k = 0; k < truth.items.size(); ++k) {
        const auto& gt = truth.items[k];
        ManifestRow row;
        row.image_id = id;
        row.item_index = int(k);
        row.kind = kind_name(kinds[k]);
        row.text = gt.item.text;
        row.x = gt.bbox.x;
        row.y = gt.bbox.y;
        row.w = gt.bbox.w;
        row.h = gt.bbox.h;
        row.font_px = gt.item.font_px;
        row.rotation = gt.item.rotation_deg;
        per_image[size_t(i)].push_back(std::move(row));
      }
    } catch (const std::exception& e) {
      errors[size_t(i)] = e.what();
    }
  }

  for (int i = 0; i < n; ++i) {
    if (!errors[size_t(i)].empty()) {
      throw Error("corpus image " + std::to_string(i) + ": " + errors[size_t(i)]);
    }
  }

  std::vector<ManifestRow> manifest;
  for (auto& rows : per_image) {
    for (auto& r : rows) manifest.push_back(std::move(r));
  }
  write_manifest((fs::path(out_dir) / "manifest.csv").string(), manifest);
  return manifest;
}

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write manifest " + path);
  out << "image_id,item_index,kind,text,x,y,w,h,font_px,rotation\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.2f", r.rotation);
    out << r.image_id << ',' << r.item_index << ',' << r.kind << ','
        << csv_quote(r.text) << ',' << r.x << ',' << r.y << ',' << r.w << ','
        << r.h << ',' << r.font_px << ',' << buf << '\n';
  }
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read manifest " + path);
  std::vector<ManifestRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    // split honoring quotes
    std::vector<std::string> cols;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
      char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          cur.push_back(c);
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        cols.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    cols.push_back(cur);
    if (cols.size() != 10) throw Error("manifest row with wrong column count");
    ManifestRow r;
    r.image_id = cols[0];
    r.item_index = std::stoi(cols[1]);
    r.kind = cols[2];
    r.text = cols[3];
    r.x = std::stoi(cols[4]);
    r.y = std::stoi(cols[5]);
    r.w = std::stoi(cols[6]);
    r.h = std::stoi(cols[7]);
    r.font_px = std::stoi(cols[8]);
    r.rotation = std::stod(cols[9]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<std::string> make_phantom_cleans(const std::string& dir, int count,
                                             int size, uint64_t seed) {
  fs::create_directories(dir);
  std::vector<std::string> paths;
  paths.resize(size_t(count));

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) {
    Pcg32 rng(seed ^ (0xC0FFEEull + uint64_t(i) * 0x9E3779B97F4A7C15ull));
    ImageFrame img = ImageFrame::make(size, size, 1, 8);
    double base = rng.range(15, 55);
    double gx = rng.uniform(-0.08, 0.08);
    double gy = rng.uniform(-0.08, 0.08);
    struct Blob {
      double cx, cy, sigma, amp;
    };
    std::vector<Blob> blobs;
    int nblobs = rng.range(2, 5);
    for (int b = 0; b < nblobs; ++b) {
      blobs.push_back({rng.uniform(0.15, 0.85) * size, rng.uniform(0.15, 0.85) * size,
                       rng.uniform(0.08, 0.3) * size, rng.uniform(40.0, 120.0)});
    }
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        double v = base + gx * x + gy * y;
        for (const auto& b : blobs) {
          double dx = x - b.cx, dy = y - b.cy;
          v += b.amp * std::exp(-(dx * dx + dy * dy) / (2 * b.sigma * b.sigma));
        }
        v += rng.uniform(-5.0, 5.0);
        // stay well below near-saturated overlay intensities
        img.at(x, y) = uint16_t(std::clamp(v, 0.0, 210.0));
      }
    }
    char name[32];
    std::snprintf(name, sizeof(name), "clean_%04d.png", i);
    std::string path = (fs::path(dir) / name).string();
    write_png(path, img);
    paths[size_t(i)] = path;
  }
  return paths;
}

}  // namespace deid::synth
