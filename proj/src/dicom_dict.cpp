// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <sstream>

#include "deid/dicom.hpp"

#include "dicom_dict.inc"

namespace deid::dicom {

Dictionary Dictionary::from_text(std::string_view text) {
  Dictionary dict;
  std::istringstream in{std::string(text)};
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string group, element, vr, keyword;
    if (!(ls >> group >> element >> vr >> keyword)) {
      throw Error("tag dictionary: malformed line " + std::to_string(lineno));
    }
    auto tag = Tag::parse(group + "," + element);
    auto v = vr_from_code(vr);
    if (!tag || !v) {
      throw Error("tag dictionary: bad tag or VR at line " + std::to_string(lineno));
    }
    dict.entries_.push_back({*tag, *v, keyword});
  }
  std::sort(dict.entries_.begin(), dict.entries_.end(),
            [](const Entry& a, const Entry& b) { return a.tag < b.tag; });
  return dict;
}

const Dictionary& Dictionary::standard() {
  static const Dictionary dict = from_text(k_dicom_dict);
  return dict;
}

const Dictionary::Entry* Dictionary::find(Tag tag) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), tag,
                             [](const Entry& e, Tag t) { return e.tag < t; });
  if (it != entries_.end() && it->tag == tag) return &*it;
  return nullptr;
}

const Dictionary::Entry* Dictionary::find_keyword(std::string_view keyword) const {
  for (const auto& e : entries_)
    if (e.keyword == keyword) return &e;
  return nullptr;
}

Vr Dictionary::vr_for(Tag tag) const {
  const Entry* e = find(tag);
  return e ? e->vr : Vr::UN;
}

std::string Dictionary::keyword_for(Tag tag) const {
  const Entry* e = find(tag);
  return e ? e->keyword : std::string();
}

}  // namespace deid::dicom
