// SPDX-License-Identifier: Apache-2.0
#include <cstring>

#include "deid/dicom.hpp"

namespace deid::dicom {

namespace {

constexpr Tag kItemTag{0xFFFE, 0xE000};
constexpr Tag kItemDelimiter{0xFFFE, 0xE00D};
constexpr Tag kSequenceDelimiter{0xFFFE, 0xE0DD};
constexpr uint32_t kUndefinedLength = 0xFFFFFFFFu;
constexpr Tag kFileMetaGroupLength{0x0002, 0x0000};

struct Cursor {
  std::span<const uint8_t> data;
  size_t pos = 0;

  size_t remaining() const { return data.size() - pos; }
  void need(size_t n, const char* what) const {
    if (remaining() < n) {
      throw ParseError(std::string("truncated ") + what, pos);
    }
  }
  uint8_t u8() {
    need(1, "byte");
    return data[pos++];
  }
  uint16_t u16() {
    need(2, "uint16");
    uint16_t v = uint16_t(data[pos] | (data[pos + 1] << 8));
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4, "uint32");
    uint32_t v = uint32_t(data[pos]) | (uint32_t(data[pos + 1]) << 8) |
                 (uint32_t(data[pos + 2]) << 16) | (uint32_t(data[pos + 3]) << 24);
    pos += 4;
    return v;
  }
  Tag tag() {
    uint16_t g = u16();
    uint16_t e = u16();
    return {g, e};
  }
  Tag peek_tag() const {
    Cursor c = *this;
    return c.tag();
  }
  std::vector<uint8_t> bytes(size_t n, const char* what) {
    need(n, what);
    std::vector<uint8_t> out(data.begin() + pos, data.begin() + pos + n);
    pos += n;
    return out;
  }
};

void parse_elements(Cursor& cur, TransferSyntax syntax, DataSet& out,
                    std::optional<size_t> end_pos, bool single = false);

// Parses the items of one sequence. end_pos is set for defined-length
// sequences; undefined-length sequences run to the sequence delimiter.
void parse_items(Cursor& cur, TransferSyntax syntax, DataElement& elem,
                 std::optional<size_t> end_pos) {
  for (;;) {
    if (end_pos) {
      if (cur.pos > *end_pos) throw ParseError("sequence overran its length", cur.pos);
      if (cur.pos == *end_pos) return;
    }
    size_t header_at = cur.pos;
    Tag t = cur.tag();
    uint32_t len = cur.u32();
    if (t == kSequenceDelimiter) {
      if (end_pos) throw ParseError("unexpected sequence delimiter", header_at);
      if (len != 0) throw ParseError("sequence delimiter with nonzero length", header_at);
      return;
    }
    if (t != kItemTag) throw ParseError("expected item tag in sequence", header_at);

    DataSet item;
    item.syntax = syntax;
    item.has_preamble = false;
    bool item_undef = (len == kUndefinedLength);
    if (item_undef) {
      // Runs to the item delimitation element.
      for (;;) {
        size_t at = cur.pos;
        Tag nt = cur.peek_tag();
        if (nt == kItemDelimiter) {
          cur.tag();
          uint32_t dl = cur.u32();
          if (dl != 0) throw ParseError("item delimiter with nonzero length", at);
          break;
        }
        parse_elements(cur, syntax, item, std::nullopt, /*single=*/true);
      }
    } else {
      cur.need(len, "sequence item");
      size_t item_end = cur.pos + len;
      parse_elements(cur, syntax, item, item_end);
      if (cur.pos != item_end) throw ParseError("item content length mismatch", cur.pos);
    }
    elem.items.push_back(std::move(item));
    elem.item_undefined_length.push_back(item_undef ? 1 : 0);
  }
}

// Reads raw encapsulated pixel-data fragments verbatim (item headers
// included) up to, but not including, the sequence delimiter.
std::vector<uint8_t> read_fragments_raw(Cursor& cur) {
  size_t start = cur.pos;
  for (;;) {
    size_t at = cur.pos;
    Tag t = cur.tag();
    uint32_t len = cur.u32();
    if (t == kSequenceDelimiter) {
      if (len != 0) throw ParseError("fragment delimiter with nonzero length", at);
      std::vector<uint8_t> raw(cur.data.begin() + start, cur.data.begin() + at);
      return raw;
    }
    if (t != kItemTag) throw ParseError("expected fragment item", at);
    cur.need(len, "pixel fragment");
    cur.pos += len;
  }
}

// Parses elements until end_pos (exclusive) or end of stream; with single
// set, parses exactly one element.
void parse_elements(Cursor& cur, TransferSyntax syntax, DataSet& out,
                    std::optional<size_t> end_pos, bool single) {
  while (cur.remaining() > 0) {
    if (end_pos && cur.pos >= *end_pos) break;

    size_t elem_at = cur.pos;
    DataElement elem;
    elem.tag = cur.tag();

    bool explicit_vr = (syntax != TransferSyntax::ImplicitLE) || elem.tag.group == 0x0002;
    uint32_t len = 0;
    if (explicit_vr) {
      cur.need(2, "VR code");
      char code[2] = {char(cur.data[cur.pos]), char(cur.data[cur.pos + 1])};
      cur.pos += 2;
      auto vr = vr_from_code(std::string_view(code, 2));
      if (vr) {
        elem.vr = *vr;
        if (vr_has_long_header(*vr)) {
          cur.u16();  // reserved
          len = cur.u32();
        } else {
          len = cur.u16();
        }
      } else {
        // Unknown VR: preserved verbatim, short header form.
        elem.vr = Vr::UN;
        elem.wire_vr[0] = code[0];
        elem.wire_vr[1] = code[1];
        len = cur.u16();
      }
    } else {
      len = cur.u32();
      elem.vr = Dictionary::standard().vr_for(elem.tag);
    }

    if (len == kUndefinedLength) {
      elem.undefined_length = true;
      if (elem.vr == Vr::SQ || (elem.vr == Vr::UN && elem.wire_vr[0] == 0)) {
        if (elem.vr == Vr::UN) elem.vr = Vr::SQ;  // undefined-length UN holds items
        parse_items(cur, syntax, elem, std::nullopt);
      } else if (elem.vr == Vr::OB || elem.vr == Vr::OW) {
        elem.value = read_fragments_raw(cur);
      } else {
        throw ParseError("undefined length on non-sequence element", elem_at);
      }
    } else if (elem.vr == Vr::SQ) {
      cur.need(len, "sequence");
      parse_items(cur, syntax, elem, cur.pos + len);
    } else {
      if (len % 2 != 0) throw ParseError("odd element length", elem_at);
      elem.value = cur.bytes(len, "element value");
    }

    if (!out.elements.empty() && !(out.elements.back().tag < elem.tag)) {
      throw ParseError("elements out of ascending tag order", elem_at);
    }
    out.elements.push_back(std::move(elem));
    if (single) break;
  }
}

TransferSyntax syntax_from_uid(const std::string& uid) {
  if (uid == kImplicitLEUid) return TransferSyntax::ImplicitLE;
  if (uid == kExplicitLEUid) return TransferSyntax::ExplicitLE;
  return TransferSyntax::Other;
}

// Sniffs explicit vs implicit VR for raw datasets: a plausible VR code in
// bytes 4..5 means explicit.
TransferSyntax sniff_syntax(std::span<const uint8_t> bytes) {
  if (bytes.size() >= 6) {
    char code[2] = {char(bytes[4]), char(bytes[5])};
    if (vr_from_code(std::string_view(code, 2))) return TransferSyntax::ExplicitLE;
  }
  return TransferSyntax::ImplicitLE;
}

}  // namespace

DataSet parse_dicom(std::span<const uint8_t> bytes, ParseOptions options) {
  DataSet ds;
  Cursor cur{bytes, 0};

  bool magic = bytes.size() >= 132 && std::memcmp(bytes.data() + 128, "DICM", 4) == 0;
  if (magic) {
    ds.has_preamble = true;
    ds.preamble.assign(bytes.begin(), bytes.begin() + 128);
    cur.pos = 132;
  } else if (options.accept_raw) {
    ds.has_preamble = false;
  } else {
    throw ParseError("missing DICM magic (pass the raw-dataset flag to accept)", 0);
  }

  // File meta group (0002,xxxx) is always explicit little endian. The group
  // length element is validated against the actual extent and regenerated on
  // write.
  if (cur.remaining() >= 8 && cur.peek_tag().group == 0x0002) {
    size_t at = cur.pos;
    Tag t = cur.tag();
    std::optional<size_t> meta_end;
    if (t == kFileMetaGroupLength) {
      cur.need(2, "VR code");
      cur.pos += 2;
      uint32_t l = cur.u16();
      if (l != 4) throw ParseError("file meta group length must be UL/4", at);
      uint32_t group_len = cur.u32();
      meta_end = cur.pos + group_len;
    } else {
      cur.pos = at;
    }
    while (cur.remaining() >= 8 && cur.peek_tag().group == 0x0002) {
      if (meta_end && cur.pos >= *meta_end) break;
      parse_elements(cur, TransferSyntax::ExplicitLE, ds, std::nullopt, /*single=*/true);
    }
    if (meta_end && cur.pos != *meta_end) {
      throw ParseError("file meta group length mismatch", cur.pos);
    }
  }

  std::string ts_uid = ds.text(tags::kTransferSyntaxUid);
  if (!ts_uid.empty()) {
    ds.syntax_uid = ts_uid;
    ds.syntax = syntax_from_uid(ts_uid);
    if (ds.syntax == TransferSyntax::Other) {
      // Encapsulated syntaxes still use explicit LE dataset encoding. Big
      // endian and deflated streams are not parseable here.
      if (ts_uid == "1.2.840.10008.1.2.2" || ts_uid == "1.2.840.10008.1.2.1.99") {
        throw ParseError("unsupported transfer syntax " + ts_uid, cur.pos);
      }
    }
  } else {
    ds.syntax = sniff_syntax(bytes.subspan(cur.pos));
    ds.syntax_uid = ds.syntax == TransferSyntax::ImplicitLE ? kImplicitLEUid : kExplicitLEUid;
  }

  TransferSyntax body = ds.syntax == TransferSyntax::Other ? TransferSyntax::ExplicitLE
                                                           : ds.syntax;
  // Body elements must follow group 0002.
  DataSet body_ds;
  parse_elements(cur, body, body_ds, std::nullopt);
  for (auto& e : body_ds.elements) {
    if (e.tag.group == 0x0002) throw ParseError("file meta element after body", 0);
    if (!ds.elements.empty() && !(ds.elements.back().tag < e.tag)) {
      throw ParseError("elements out of ascending tag order", 0);
    }
    ds.elements.push_back(std::move(e));
  }
  return ds;
}

namespace {

class Writer {
public:
  std::vector<uint8_t> out;

  void u8(uint8_t v) { out.push_back(v); }
  void u16(uint16_t v) {
    out.push_back(uint8_t(v & 0xff));
    out.push_back(uint8_t(v >> 8));
  }
  void u32(uint32_t v) {
    out.push_back(uint8_t(v & 0xff));
    out.push_back(uint8_t((v >> 8) & 0xff));
    out.push_back(uint8_t((v >> 16) & 0xff));
    out.push_back(uint8_t((v >> 24) & 0xff));
  }
  void tag(Tag t) {
    u16(t.group);
    u16(t.element);
  }
  void raw(std::span<const uint8_t> bytes) {
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
};

void write_element(Writer& w, const DataElement& e, TransferSyntax syntax);

void write_dataset_body(Writer& w, const DataSet& ds, TransferSyntax syntax) {
  for (const auto& e : ds.elements) write_element(w, e, syntax);
}

uint32_t element_content_length(const DataElement& e, TransferSyntax syntax);

uint32_t dataset_body_length(const DataSet& ds, TransferSyntax syntax) {
  Writer w;
  write_dataset_body(w, ds, syntax);
  return uint32_t(w.out.size());
}

void write_items(Writer& w, const DataElement& e, TransferSyntax syntax) {
  for (size_t i = 0; i < e.items.size(); ++i) {
    bool undef = i < e.item_undefined_length.size() && e.item_undefined_length[i];
    w.tag(kItemTag);
    if (undef) {
      w.u32(kUndefinedLength);
      write_dataset_body(w, e.items[i], syntax);
      w.tag(kItemDelimiter);
      w.u32(0);
    } else {
      w.u32(dataset_body_length(e.items[i], syntax));
      write_dataset_body(w, e.items[i], syntax);
    }
  }
}

uint32_t element_content_length(const DataElement& e, TransferSyntax syntax) {
  if (e.vr == Vr::SQ) {
    Writer w;
    write_items(w, e, syntax);
    return uint32_t(w.out.size());
  }
  return uint32_t(e.value.size());
}

void write_element(Writer& w, const DataElement& e, TransferSyntax syntax) {
  if (e.vr != Vr::SQ && !e.undefined_length && e.value.size() % 2 != 0) {
    throw Error("element " + e.tag.str() + " violates the even-length rule");
  }
  w.tag(e.tag);
  bool explicit_vr = (syntax != TransferSyntax::ImplicitLE) || e.tag.group == 0x0002;

  uint32_t len = e.undefined_length ? kUndefinedLength : element_content_length(e, syntax);

  if (explicit_vr) {
    if (e.wire_vr[0] != 0) {
      w.u8(uint8_t(e.wire_vr[0]));
      w.u8(uint8_t(e.wire_vr[1]));
      w.u16(uint16_t(len));
    } else {
      const char* code = vr_code(e.vr);
      w.u8(uint8_t(code[0]));
      w.u8(uint8_t(code[1]));
      if (vr_has_long_header(e.vr)) {
        w.u16(0);
        w.u32(len);
      } else {
        if (len > 0xFFFF) throw Error("value too long for short VR form at " + e.tag.str());
        w.u16(uint16_t(len));
      }
    }
  } else {
    w.u32(len);
  }

  if (e.vr == Vr::SQ) {
    write_items(w, e, syntax);
    if (e.undefined_length) {
      w.tag(kSequenceDelimiter);
      w.u32(0);
    }
  } else if (e.undefined_length) {
    // Encapsulated fragments preserved verbatim.
    w.raw(e.value);
    w.tag(kSequenceDelimiter);
    w.u32(0);
  } else {
    w.raw(e.value);
  }
}

}  // namespace

std::vector<uint8_t> serialize_dicom(const DataSet& ds) {
  Writer w;
  if (ds.has_preamble) {
    if (ds.preamble.empty()) {
      w.out.assign(128, 0);
    } else {
      if (ds.preamble.size() != 128) throw Error("preamble must be 128 bytes");
      w.raw(ds.preamble);
    }
    w.raw(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>("DICM"), 4));
  }

  TransferSyntax body = ds.syntax == TransferSyntax::Other ? TransferSyntax::ExplicitLE
                                                           : ds.syntax;

  // File meta group, preceded by its regenerated group length.
  Writer meta;
  size_t i = 0;
  for (; i < ds.elements.size() && ds.elements[i].tag.group == 0x0002; ++i) {
    write_element(meta, ds.elements[i], TransferSyntax::ExplicitLE);
  }
  if (!meta.out.empty()) {
    w.tag(kFileMetaGroupLength);
    w.u8('U');
    w.u8('L');
    w.u16(4);
    w.u32(uint32_t(meta.out.size()));
    w.raw(meta.out);
  }

  for (; i < ds.elements.size(); ++i) {
    write_element(w, ds.elements[i], body);
  }
  return w.out;
}

}  // namespace deid::dicom
