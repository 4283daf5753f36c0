// SPDX-License-Identifier: Apache-2.0
#include "deid/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <memory>

namespace deid {

namespace {

struct MemReader {
  const uint8_t* data;
  size_t size;
  size_t pos;
};

void mem_read_fn(png_structp png, png_bytep out, png_size_t len) {
  MemReader* r = static_cast<MemReader*>(png_get_io_ptr(png));
  if (r->pos + len > r->size) {
    png_error(png, "png: read past end of buffer");
  }
  std::memcpy(out, r->data + r->pos, len);
  r->pos += len;
}

void mem_write_fn(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void mem_flush_fn(png_structp) {}

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};

ImageFrame read_png_impl(png_structp png, png_infop info) {
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // libpng hands big-endian; we want host LE
  png_read_update_info(png, info);

  color = png_get_color_type(png, info);
  depth = png_get_bit_depth(png, info);
  int channels = (color == PNG_COLOR_TYPE_RGB) ? 3 : 1;
  if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_RGB) {
    png_error(png, "png: unsupported color type");
  }
  if (channels == 3 && depth == 16) png_error(png, "png: 16-bit RGB unsupported");

  ImageFrame frame = ImageFrame::make(int(w), int(h), channels, depth == 16 ? 16 : 8);
  std::vector<uint8_t> row(size_t(w) * channels * (depth == 16 ? 2 : 1));
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < w * png_uint_32(channels); ++x) {
      uint16_t v;
      if (depth == 16) {
        std::memcpy(&v, &row[2 * x], 2);
      } else {
        v = row[x];
      }
      frame.samples[size_t(y) * w * channels + x] = v;
    }
  }
  png_read_end(png, nullptr);
  return frame;
}

}  // namespace

ImageFrame decode_png(const std::vector<uint8_t>& bytes) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  MemReader reader{bytes.data(), bytes.size(), 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("failed to decode PNG buffer");
  }
  png_set_read_fn(png, &reader, mem_read_fn);
  ImageFrame frame = read_png_impl(png, info);
  png_destroy_read_struct(&png, &info, nullptr);
  return frame;
}

ImageFrame read_png(const std::string& path) {
  std::unique_ptr<FILE, FileCloser> f(std::fopen(path.c_str(), "rb"));
  if (!f) throw Error("cannot open PNG: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("failed to read PNG: " + path);
  }
  png_init_io(png, f.get());
  ImageFrame frame = read_png_impl(png, info);
  png_destroy_read_struct(&png, &info, nullptr);
  return frame;
}

namespace {

void write_png_impl(png_structp png, png_infop info, const ImageFrame& frame) {
  int color = frame.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  png_set_IHDR(png, info, frame.width, frame.height, frame.bits, color,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  size_t row_samples = size_t(frame.width) * frame.channels;
  if (frame.bits == 16) {
    std::vector<uint8_t> row(row_samples * 2);
    for (int y = 0; y < frame.height; ++y) {
      for (size_t x = 0; x < row_samples; ++x) {
        uint16_t v = frame.samples[size_t(y) * row_samples + x];
        row[2 * x] = uint8_t(v >> 8);
        row[2 * x + 1] = uint8_t(v & 0xff);
      }
      png_write_row(png, row.data());
    }
  } else {
    std::vector<uint8_t> row(row_samples);
    for (int y = 0; y < frame.height; ++y) {
      for (size_t x = 0; x < row_samples; ++x) {
        row[x] = uint8_t(frame.samples[size_t(y) * row_samples + x] & 0xff);
      }
      png_write_row(png, row.data());
    }
  }
  png_write_end(png, nullptr);
}

}  // namespace

void write_png(const std::string& path, const ImageFrame& frame) {
  if (frame.bits == 16 && frame.channels != 1)
    throw Error("16-bit PNG output is grayscale only");
  std::unique_ptr<FILE, FileCloser> f(std::fopen(path.c_str(), "wb"));
  if (!f) throw Error("cannot create PNG: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("failed to write PNG: " + path);
  }
  png_init_io(png, f.get());
  write_png_impl(png, info, frame);
  png_destroy_write_struct(&png, &info);
}

std::vector<uint8_t> encode_png(const ImageFrame& frame) {
  std::vector<uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("failed to encode PNG buffer");
  }
  png_set_write_fn(png, &out, mem_write_fn, mem_flush_fn);
  write_png_impl(png, info, frame);
  png_destroy_write_struct(&png, &info);
  return out;
}

namespace {

void write_mask_impl(png_structp png, png_infop info, const Mask& mask) {
  png_set_IHDR(png, info, mask.width, mask.height, 1, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  size_t stride = (size_t(mask.width) + 7) / 8;
  std::vector<uint8_t> row(stride);
  for (int y = 0; y < mask.height; ++y) {
    std::fill(row.begin(), row.end(), 0);
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y)) row[x / 8] |= uint8_t(0x80u >> (x % 8));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

}  // namespace

void write_mask_png(const std::string& path, const Mask& mask) {
  std::unique_ptr<FILE, FileCloser> f(std::fopen(path.c_str(), "wb"));
  if (!f) throw Error("cannot create PNG: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("failed to write PNG: " + path);
  }
  png_init_io(png, f.get());
  write_mask_impl(png, info, mask);
  png_destroy_write_struct(&png, &info);
}

std::vector<uint8_t> encode_mask_png(const Mask& mask) {
  std::vector<uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("failed to encode PNG buffer");
  }
  png_set_write_fn(png, &out, mem_write_fn, mem_flush_fn);
  write_mask_impl(png, info, mask);
  png_destroy_write_struct(&png, &info);
  return out;
}

Mask read_mask_png(const std::string& path) {
  ImageFrame f = read_png(path);
  Mask m = Mask::zeros(f.width, f.height);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) m.set(x, y, f.at(x, y, 0) != 0);
  return m;
}

}  // namespace deid
