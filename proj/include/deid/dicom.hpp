// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deid/common.hpp"
#include "deid/image.hpp"

namespace deid::dicom {

struct Tag {
  uint16_t group = 0;
  uint16_t element = 0;

  auto operator<=>(const Tag&) const = default;
  bool is_private() const { return (group & 1) != 0; }
  std::string str() const;  // "(gggg,eeee)"

  static std::optional<Tag> parse(std::string_view text);  // "(gggg,eeee)" or "gggg,eeee"
};

// Standard value representations. Codes not in this list are preserved on
// the wire and handled as UN.
enum class Vr : uint8_t {
  AE, AS, AT, CS, DA, DS, DT, FD, FL, IS, LO, LT, OB, OD, OF, OL, OW,
  PN, SH, SL, SQ, SS, ST, TM, UC, UI, UL, UN, UR, US, UT, UV, SV,
};

const char* vr_code(Vr vr);
std::optional<Vr> vr_from_code(std::string_view code);
// Explicit VR: these use the reserved 2 bytes + 4-byte length form.
bool vr_has_long_header(Vr vr);
// Text-decodable VRs (string value semantics).
bool vr_is_text(Vr vr);
char vr_pad_byte(Vr vr);  // ' ' for text, '\0' for UI and binary

// Tag dictionary loaded once from the embedded text resource; maps tags to
// standard VRs and keyword names for implicit-VR parsing and keyword-pattern
// policy matching.
class Dictionary {
public:
  struct Entry {
    Tag tag;
    Vr vr;
    std::string keyword;
  };

  static const Dictionary& standard();
  static Dictionary from_text(std::string_view text);

  const Entry* find(Tag tag) const;
  const Entry* find_keyword(std::string_view keyword) const;
  Vr vr_for(Tag tag) const;                // UN when unknown
  std::string keyword_for(Tag tag) const;  // "" when unknown
  size_t size() const { return entries_.size(); }

private:
  std::vector<Entry> entries_;  // sorted by tag
};

struct DataSet;

struct DataElement {
  Tag tag;
  Vr vr = Vr::UN;
  std::vector<uint8_t> value;  // raw bytes; SQ keeps items instead

  // SQ structure. item_undefined_length mirrors items.
  std::vector<DataSet> items;
  std::vector<uint8_t> item_undefined_length;
  bool undefined_length = false;

  // Unrecognized explicit VR code, preserved verbatim for round-tripping.
  char wire_vr[2] = {0, 0};

  std::string text() const;  // trailing pad stripped
  void set_text(std::string_view s);
  std::optional<long long> as_int() const;  // IS/US/UL/SS/SL decoding
  bool empty_value() const;

  static DataElement make(Tag tag, Vr vr, std::string_view text);
  static DataElement make_us(Tag tag, uint16_t v);
  static DataElement make_bytes(Tag tag, Vr vr, std::vector<uint8_t> bytes);
};

enum class TransferSyntax { ImplicitLE, ExplicitLE, Other };

inline constexpr const char* kImplicitLEUid = "1.2.840.10008.1.2";
inline constexpr const char* kExplicitLEUid = "1.2.840.10008.1.2.1";

// Ordered DICOM data set. Elements (including the group-0002 file meta,
// minus the regenerated group length) are kept strictly ascending by tag.
struct DataSet {
  TransferSyntax syntax = TransferSyntax::ExplicitLE;
  std::string syntax_uid = kExplicitLEUid;
  bool has_preamble = true;
  std::vector<uint8_t> preamble;  // 128 bytes; empty means all zeros

  std::vector<DataElement> elements;

  const DataElement* find(Tag tag) const;
  DataElement* find(Tag tag);
  void set(DataElement element);  // insert preserving order, or replace
  bool remove(Tag tag);
  std::string text(Tag tag) const;  // "" when absent

  // Walks this data set and every nested sequence item.
  template <typename Fn>
  void for_each_element(Fn&& fn) {
    for (auto& e : elements) {
      fn(e);
      for (auto& item : e.items) item.for_each_element(fn);
    }
  }
  template <typename Fn>
  void for_each_element(Fn&& fn) const {
    for (const auto& e : elements) {
      fn(e);
      for (const auto& item : e.items) item.for_each_element(fn);
    }
  }
};

struct ParseOptions {
  bool accept_raw = false;  // allow datasets without preamble/magic
};

DataSet parse_dicom(std::span<const uint8_t> bytes, ParseOptions options = {});
std::vector<uint8_t> serialize_dicom(const DataSet& ds);

// Frame access. Requires uncompressed pixel data; throws
// UnsupportedCodecError for encapsulated transfer syntaxes.
std::vector<ImageFrame> get_frames(const DataSet& ds);
DataSet put_frames(DataSet ds, const std::vector<ImageFrame>& frames);

// Well-known tags used across the pipeline.
namespace tags {
inline constexpr Tag kTransferSyntaxUid{0x0002, 0x0010};
inline constexpr Tag kPatientName{0x0010, 0x0010};
inline constexpr Tag kPatientId{0x0010, 0x0020};
inline constexpr Tag kRows{0x0028, 0x0010};
inline constexpr Tag kColumns{0x0028, 0x0011};
inline constexpr Tag kSamplesPerPixel{0x0028, 0x0002};
inline constexpr Tag kNumberOfFrames{0x0028, 0x0008};
inline constexpr Tag kBitsAllocated{0x0028, 0x0100};
inline constexpr Tag kPixelRepresentation{0x0028, 0x0103};
inline constexpr Tag kPixelData{0x7FE0, 0x0010};
}  // namespace tags

}  // namespace deid::dicom
