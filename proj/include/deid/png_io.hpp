// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "deid/image.hpp"

namespace deid {

// PNG I/O over libpng. Grayscale 8/16-bit and RGB 8-bit; palette and alpha
// inputs are expanded/stripped on read.
ImageFrame read_png(const std::string& path);
void write_png(const std::string& path, const ImageFrame& frame);

// In-memory variants used by the external inpainting backend exchange.
ImageFrame decode_png(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> encode_png(const ImageFrame& frame);

// Masks are stored as 1-bit grayscale PNG. Reading accepts any grayscale
// depth; nonzero means inside the mask.
void write_mask_png(const std::string& path, const Mask& mask);
std::vector<uint8_t> encode_mask_png(const Mask& mask);
Mask read_mask_png(const std::string& path);

}  // namespace deid
