// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

// Test fixture helpers. ByteBuilder hand-encodes DICOM streams directly from
// the encoding rules so parser tests do not depend on the serializer.
namespace testsupport {

struct ByteBuilder {
  std::vector<uint8_t> bytes;

  ByteBuilder& u8(uint8_t v) {
    bytes.push_back(v);
    return *this;
  }
  ByteBuilder& u16(uint16_t v) {
    bytes.push_back(uint8_t(v & 0xff));
    bytes.push_back(uint8_t(v >> 8));
    return *this;
  }
  ByteBuilder& u32(uint32_t v) {
    u16(uint16_t(v & 0xffff));
    u16(uint16_t(v >> 16));
    return *this;
  }
  ByteBuilder& tag(uint16_t g, uint16_t e) {
    u16(g);
    u16(e);
    return *this;
  }
  ByteBuilder& ascii(std::string_view s) {
    bytes.insert(bytes.end(), s.begin(), s.end());
    return *this;
  }
  ByteBuilder& raw(const std::vector<uint8_t>& v) {
    bytes.insert(bytes.end(), v.begin(), v.end());
    return *this;
  }
  ByteBuilder& preamble_magic() {
    bytes.insert(bytes.end(), 128, 0);
    return ascii("DICM");
  }
  // Explicit-VR short-form element with text value (must be even length).
  ByteBuilder& elem_short(uint16_t g, uint16_t e, std::string_view vr,
                          std::string_view value) {
    tag(g, e).ascii(vr).u16(uint16_t(value.size())).ascii(value);
    return *this;
  }
  // Implicit-VR element with text value.
  ByteBuilder& elem_implicit(uint16_t g, uint16_t e, std::string_view value) {
    tag(g, e).u32(uint32_t(value.size())).ascii(value);
    return *this;
  }
};

// Unique scratch directory under the build tree, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() /
            ("deid_test_" + name + "_" + std::to_string(counter_++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

}  // namespace testsupport
