// SPDX-License-Identifier: Apache-2.0
#include "deid/dicom.hpp"

namespace deid::dicom {

namespace {

struct PixelLayout {
  int rows = 0, cols = 0, spp = 1, bits = 8, frames = 1;
};

PixelLayout read_layout(const DataSet& ds) {
  PixelLayout l;
  auto req = [&](Tag t, const char* name) {
    const DataElement* e = ds.find(t);
    if (!e) throw Error(std::string("missing ") + name);
    auto v = e->as_int();
    if (!v) throw Error(std::string("unreadable ") + name);
    return int(*v);
  };
  l.rows = req(tags::kRows, "Rows");
  l.cols = req(tags::kColumns, "Columns");
  l.bits = req(tags::kBitsAllocated, "BitsAllocated");
  if (const DataElement* e = ds.find(tags::kSamplesPerPixel)) {
    l.spp = int(e->as_int().value_or(1));
  }
  if (const DataElement* e = ds.find(tags::kNumberOfFrames)) {
    l.frames = int(e->as_int().value_or(1));
  }
  if (const DataElement* e = ds.find(tags::kPixelRepresentation)) {
    if (e->as_int().value_or(0) != 0) throw Error("signed pixel data not supported");
  }
  if (l.bits != 8 && l.bits != 16) throw Error("BitsAllocated must be 8 or 16");
  if (l.spp != 1 && l.spp != 3) throw Error("SamplesPerPixel must be 1 or 3");
  if (l.rows <= 0 || l.cols <= 0 || l.frames <= 0) throw Error("bad pixel geometry");
  return l;
}

}  // namespace

std::vector<ImageFrame> get_frames(const DataSet& ds) {
  if (ds.syntax == TransferSyntax::Other) {
    throw UnsupportedCodecError("compressed transfer syntax " + ds.syntax_uid);
  }
  const DataElement* px = ds.find(tags::kPixelData);
  if (!px) throw Error("no PixelData element");
  if (px->undefined_length) {
    throw UnsupportedCodecError("encapsulated pixel data");
  }
  PixelLayout l = read_layout(ds);
  size_t per_sample = l.bits == 16 ? 2 : 1;
  size_t frame_bytes = size_t(l.rows) * l.cols * l.spp * per_sample;
  if (px->value.size() < frame_bytes * size_t(l.frames)) {
    throw Error("PixelData shorter than Rows*Columns*SamplesPerPixel*frames");
  }

  std::vector<ImageFrame> frames;
  frames.reserve(l.frames);
  for (int f = 0; f < l.frames; ++f) {
    ImageFrame frame = ImageFrame::make(l.cols, l.rows, l.spp, l.bits);
    const uint8_t* src = px->value.data() + frame_bytes * size_t(f);
    size_t n = frame.samples.size();
    if (l.bits == 16) {
      for (size_t i = 0; i < n; ++i) {
        frame.samples[i] = uint16_t(src[2 * i] | (src[2 * i + 1] << 8));
      }
    } else {
      for (size_t i = 0; i < n; ++i) frame.samples[i] = src[i];
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

DataSet put_frames(DataSet ds, const std::vector<ImageFrame>& frames) {
  PixelLayout l = read_layout(ds);
  if (int(frames.size()) != l.frames) {
    throw Error("frame count does not match NumberOfFrames");
  }
  for (const auto& f : frames) {
    if (f.width != l.cols || f.height != l.rows || f.channels != l.spp ||
        f.bits != l.bits) {
      throw Error("frame dimensions do not match dataset geometry");
    }
  }
  size_t per_sample = l.bits == 16 ? 2 : 1;
  size_t frame_bytes = size_t(l.rows) * l.cols * l.spp * per_sample;
  std::vector<uint8_t> bytes;
  bytes.reserve(frame_bytes * frames.size() + 1);
  for (const auto& f : frames) {
    if (l.bits == 16) {
      for (uint16_t v : f.samples) {
        bytes.push_back(uint8_t(v & 0xff));
        bytes.push_back(uint8_t(v >> 8));
      }
    } else {
      for (uint16_t v : f.samples) bytes.push_back(uint8_t(v & 0xff));
    }
  }
  if (bytes.size() % 2 != 0) bytes.push_back(0);

  DataElement* px = ds.find(tags::kPixelData);
  Vr vr = px ? px->vr : (l.bits == 16 ? Vr::OW : Vr::OB);
  DataElement e = DataElement::make_bytes(tags::kPixelData, vr, std::move(bytes));
  ds.set(std::move(e));
  return ds;
}

}  // namespace deid::dicom
