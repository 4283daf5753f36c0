// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace deid {

// SHA-256 (FIPS 180-4). Used for keyed pseudonyms, date-jitter offsets and
// output-tree hashing; no external crypto dependency wanted for those.
class Sha256 {
public:
  Sha256();
  void update(const void* data, size_t len);
  void update(std::string_view s) { update(s.data(), s.size()); }
  std::array<uint8_t, 32> finish();

  static std::array<uint8_t, 32> hash(std::span<const uint8_t> data);
  static std::string hex(std::span<const uint8_t> digest);

private:
  void process_block(const uint8_t* block);

  uint32_t h_[8];
  uint64_t total_ = 0;
  uint8_t buf_[64];
  size_t buf_len_ = 0;
};

// HMAC-SHA256 keyed hash.
std::array<uint8_t, 32> hmac_sha256(std::span<const uint8_t> key,
                                    std::string_view message);

std::string base64_encode(std::span<const uint8_t> data);
std::vector<uint8_t> base64_decode(std::string_view text);

}  // namespace deid
