// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstring>

#include "deid/dicom.hpp"

namespace deid::dicom {

std::string Tag::str() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "(%04x,%04x)", group, element);
  return buf;
}

std::optional<Tag> Tag::parse(std::string_view text) {
  std::string s;
  for (char c : text) {
    if (c == '(' || c == ')' || c == ' ') continue;
    s.push_back(c);
  }
  size_t comma = s.find(',');
  if (comma == std::string::npos || comma != 4 || s.size() != 9) return std::nullopt;
  auto hex4 = [](std::string_view h) -> std::optional<uint16_t> {
    uint16_t v = 0;
    for (char c : h) {
      int d;
      if (c >= '0' && c <= '9') d = c - '0';
      else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
      else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
      else return std::nullopt;
      v = uint16_t(v << 4 | d);
    }
    return v;
  };
  auto g = hex4(s.substr(0, 4));
  auto e = hex4(s.substr(5, 4));
  if (!g || !e) return std::nullopt;
  return Tag{*g, *e};
}

namespace {

struct VrInfo {
  Vr vr;
  const char* code;
  bool long_header;
  bool text;
  char pad;
};

constexpr VrInfo kVrTable[] = {
    {Vr::AE, "AE", false, true, ' '},  {Vr::AS, "AS", false, true, ' '},
    {Vr::AT, "AT", false, false, 0},   {Vr::CS, "CS", false, true, ' '},
    {Vr::DA, "DA", false, true, ' '},  {Vr::DS, "DS", false, true, ' '},
    {Vr::DT, "DT", false, true, ' '},  {Vr::FD, "FD", false, false, 0},
    {Vr::FL, "FL", false, false, 0},   {Vr::IS, "IS", false, true, ' '},
    {Vr::LO, "LO", false, true, ' '},  {Vr::LT, "LT", false, true, ' '},
    {Vr::OB, "OB", true, false, 0},    {Vr::OD, "OD", true, false, 0},
    {Vr::OF, "OF", true, false, 0},    {Vr::OL, "OL", true, false, 0},
    {Vr::OW, "OW", true, false, 0},    {Vr::PN, "PN", false, true, ' '},
    {Vr::SH, "SH", false, true, ' '},  {Vr::SL, "SL", false, false, 0},
    {Vr::SQ, "SQ", true, false, 0},    {Vr::SS, "SS", false, false, 0},
    {Vr::ST, "ST", false, true, ' '},  {Vr::TM, "TM", false, true, ' '},
    {Vr::UC, "UC", true, true, ' '},   {Vr::UI, "UI", false, true, 0},
    {Vr::UL, "UL", false, false, 0},   {Vr::UN, "UN", true, false, 0},
    {Vr::UR, "UR", true, true, ' '},   {Vr::US, "US", false, false, 0},
    {Vr::UT, "UT", true, true, ' '},   {Vr::UV, "UV", true, false, 0},
    {Vr::SV, "SV", true, false, 0},
};

const VrInfo& vr_info(Vr vr) {
  for (const auto& i : kVrTable)
    if (i.vr == vr) return i;
  return kVrTable[27];  // UN
}

}  // namespace

const char* vr_code(Vr vr) { return vr_info(vr).code; }

std::optional<Vr> vr_from_code(std::string_view code) {
  if (code.size() != 2) return std::nullopt;
  for (const auto& i : kVrTable)
    if (code[0] == i.code[0] && code[1] == i.code[1]) return i.vr;
  return std::nullopt;
}

bool vr_has_long_header(Vr vr) { return vr_info(vr).long_header; }
bool vr_is_text(Vr vr) { return vr_info(vr).text; }
char vr_pad_byte(Vr vr) {
  const auto& i = vr_info(vr);
  if (i.vr == Vr::UI) return 0;
  return i.text ? ' ' : 0;
}

std::string DataElement::text() const {
  std::string s(reinterpret_cast<const char*>(value.data()), value.size());
  while (!s.empty() && (s.back() == ' ' || s.back() == '\0')) s.pop_back();
  return s;
}

void DataElement::set_text(std::string_view s) {
  value.assign(s.begin(), s.end());
  if (value.size() % 2 != 0) value.push_back(uint8_t(vr_pad_byte(vr)));
}

std::optional<long long> DataElement::as_int() const {
  switch (vr) {
    case Vr::US:
      if (value.size() < 2) return std::nullopt;
      return (long long)(value[0] | (value[1] << 8));
    case Vr::UL:
      if (value.size() < 4) return std::nullopt;
      return (long long)(uint32_t(value[0]) | (uint32_t(value[1]) << 8) |
                         (uint32_t(value[2]) << 16) | (uint32_t(value[3]) << 24));
    case Vr::SS:
      if (value.size() < 2) return std::nullopt;
      return (long long)(int16_t(value[0] | (value[1] << 8)));
    default: {
      std::string t = text();
      size_t i = 0;
      while (i < t.size() && t[i] == ' ') ++i;
      long long v = 0;
      auto [p, ec] = std::from_chars(t.data() + i, t.data() + t.size(), v);
      if (ec != std::errc()) return std::nullopt;
      return v;
    }
  }
}

bool DataElement::empty_value() const {
  if (vr == Vr::SQ) return items.empty();
  return text().empty() && value.empty();
}

DataElement DataElement::make(Tag tag, Vr vr, std::string_view text) {
  DataElement e;
  e.tag = tag;
  e.vr = vr;
  e.set_text(text);
  return e;
}

DataElement DataElement::make_us(Tag tag, uint16_t v) {
  DataElement e;
  e.tag = tag;
  e.vr = Vr::US;
  e.value = {uint8_t(v & 0xff), uint8_t(v >> 8)};
  return e;
}

DataElement DataElement::make_bytes(Tag tag, Vr vr, std::vector<uint8_t> bytes) {
  DataElement e;
  e.tag = tag;
  e.vr = vr;
  e.value = std::move(bytes);
  return e;
}

const DataElement* DataSet::find(Tag tag) const {
  auto it = std::lower_bound(elements.begin(), elements.end(), tag,
                             [](const DataElement& e, Tag t) { return e.tag < t; });
  if (it != elements.end() && it->tag == tag) return &*it;
  return nullptr;
}

DataElement* DataSet::find(Tag tag) {
  return const_cast<DataElement*>(static_cast<const DataSet*>(this)->find(tag));
}

void DataSet::set(DataElement element) {
  auto it = std::lower_bound(
      elements.begin(), elements.end(), element.tag,
      [](const DataElement& e, Tag t) { return e.tag < t; });
  if (it != elements.end() && it->tag == element.tag) {
    *it = std::move(element);
  } else {
    elements.insert(it, std::move(element));
  }
}

bool DataSet::remove(Tag tag) {
  auto it = std::lower_bound(elements.begin(), elements.end(), tag,
                             [](const DataElement& e, Tag t) { return e.tag < t; });
  if (it != elements.end() && it->tag == tag) {
    elements.erase(it);
    return true;
  }
  return false;
}

std::string DataSet::text(Tag tag) const {
  const DataElement* e = find(tag);
  return e ? e->text() : std::string();
}

}  // namespace deid::dicom
