// SPDX-License-Identifier: Apache-2.0
#include "deid/scrub.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "deid/digest.hpp"

#include "policy_default.inc"

namespace deid::scrub {

using dicom::DataElement;
using dicom::DataSet;
using dicom::Dictionary;
using dicom::Tag;
using dicom::Vr;

const char* action_name(ActionKind kind) {
  switch (kind) {
    case ActionKind::Keep: return "KEEP";
    case ActionKind::Remove: return "REMOVE";
    case ActionKind::NullOut: return "NULL_OUT";
    case ActionKind::Pseudonym: return "PSEUDONYM";
    case ActionKind::DateShift: return "DATE_SHIFT";
    case ActionKind::Generalize: return "GENERALIZE";
    case ActionKind::ScanPattern: return "SCAN_PATTERN";
  }
  return "?";
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = char(std::tolower(uint8_t(c)));
  return out;
}

constexpr const char* kHipaaCategories[18] = {
    "H01-NAME",        "H02-GEOGRAPHIC", "H03-DATES",       "H04-PHONE",
    "H05-FAX",         "H06-EMAIL",      "H07-SSN",         "H08-MRN",
    "H09-HEALTH-PLAN", "H10-ACCOUNT",    "H11-CERT-LICENSE", "H12-VEHICLE",
    "H13-DEVICE-ID",   "H14-URL",        "H15-IP",          "H16-BIOMETRIC",
    "H17-PHOTO",       "H18-OTHER-ID"};

}  // namespace

bool PolicyEntry::matches(Tag tag, const Dictionary& dict) const {
  switch (pattern) {
    case Pattern::Exact:
      return (tag.group & group_mask) == group && (tag.element & element_mask) == element;
    case Pattern::PrivateAll:
      return tag.is_private();
    case Pattern::Keyword: {
      std::string kw = dict.keyword_for(tag);
      if (kw.empty()) return false;
      return std::regex_match(kw, keyword_regex);
    }
  }
  return false;
}

PolicyTable PolicyTable::parse(std::string_view text) {
  PolicyTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    std::vector<std::string> cols;
    size_t start = 0;
    for (;;) {
      size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        cols.push_back(line.substr(start));
        break;
      }
      cols.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (cols.size() != 3) {
      throw PolicyError("policy line " + std::to_string(lineno) +
                        ": expected pattern<TAB>action<TAB>category");
    }

    PolicyEntry entry;
    const std::string& pat = cols[0];
    if (pat == "private:*") {
      entry.pattern = PolicyEntry::Pattern::PrivateAll;
    } else if (pat.rfind("name:", 0) == 0) {
      entry.pattern = PolicyEntry::Pattern::Keyword;
      entry.keyword_regex_src = pat.substr(5);
      try {
        entry.keyword_regex = std::regex(entry.keyword_regex_src);
      } catch (const std::regex_error&) {
        throw PolicyError("policy line " + std::to_string(lineno) + ": bad regex");
      }
    } else {
      // (gggg,eeee) with x as nibble wildcard
      std::string s;
      for (char c : pat) {
        if (c == '(' || c == ')' || c == ' ') continue;
        s.push_back(char(std::tolower(uint8_t(c))));
      }
      if (s.size() != 9 || s[4] != ',') {
        throw PolicyError("policy line " + std::to_string(lineno) + ": bad tag pattern");
      }
      auto hex_masked = [&](std::string_view hex, uint16_t& value, uint16_t& mask) {
        value = 0;
        mask = 0;
        for (char c : hex) {
          value = uint16_t(value << 4);
          mask = uint16_t(mask << 4);
          if (c == 'x') continue;
          int d;
          if (c >= '0' && c <= '9') d = c - '0';
          else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
          else throw PolicyError("policy line " + std::to_string(lineno) + ": bad tag hex");
          value = uint16_t(value | d);
          mask = uint16_t(mask | 0xf);
        }
      };
      entry.pattern = PolicyEntry::Pattern::Exact;
      hex_masked(s.substr(0, 4), entry.group, entry.group_mask);
      hex_masked(s.substr(5, 4), entry.element, entry.element_mask);
    }

    const std::string& act = cols[1];
    if (act == "KEEP") entry.action.kind = ActionKind::Keep;
    else if (act == "REMOVE") entry.action.kind = ActionKind::Remove;
    else if (act == "NULL_OUT") entry.action.kind = ActionKind::NullOut;
    else if (act == "PSEUDONYM") entry.action.kind = ActionKind::Pseudonym;
    else if (act == "DATE_SHIFT") entry.action.kind = ActionKind::DateShift;
    else if (act == "SCAN_PATTERN") entry.action.kind = ActionKind::ScanPattern;
    else if (act.rfind("GENERALIZE:", 0) == 0) {
      entry.action.kind = ActionKind::Generalize;
      std::string map_spec = act.substr(11);
      std::istringstream ms(map_spec);
      std::string kv;
      while (std::getline(ms, kv, ';')) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos) {
          throw PolicyError("policy line " + std::to_string(lineno) +
                            ": GENERALIZE expects key=value pairs");
        }
        entry.action.generalize_map.emplace_back(lower(kv.substr(0, eq)), kv.substr(eq + 1));
      }
      if (entry.action.generalize_map.empty()) {
        throw PolicyError("policy line " + std::to_string(lineno) + ": empty GENERALIZE map");
      }
    } else {
      throw PolicyError("policy line " + std::to_string(lineno) + ": unknown action " + act);
    }

    entry.category = cols[2];
    table.entries_.push_back(std::move(entry));
  }

  std::vector<std::string> missing = table.missing_categories();
  if (!missing.empty()) {
    std::string msg = "policy does not cover HIPAA categories:";
    for (const auto& m : missing) msg += " " + m;
    throw PolicyError(msg);
  }
  return table;
}

const PolicyTable& PolicyTable::default_table() {
  static const PolicyTable table = parse(k_policy_default);
  return table;
}

const PolicyEntry* PolicyTable::match(Tag tag) const {
  const Dictionary& dict = Dictionary::standard();
  for (const auto& e : entries_) {
    if (e.matches(tag, dict)) return &e;
  }
  return nullptr;
}

std::vector<std::string> PolicyTable::missing_categories() const {
  std::vector<std::string> missing;
  for (const char* cat : kHipaaCategories) {
    bool found = false;
    for (const auto& e : entries_) {
      if (e.category == cat) {
        found = true;
        break;
      }
    }
    if (!found) missing.emplace_back(cat);
  }
  return missing;
}

JitterKey JitterKey::from_bytes(std::vector<uint8_t> bytes) {
  if (bytes.size() < 16) throw ConfigError("jitter key must be at least 16 bytes");
  return JitterKey{std::move(bytes)};
}

JitterKey JitterKey::from_env(const std::string& var) {
  const char* v = std::getenv(var.c_str());
  if (!v || !*v) throw ConfigError("environment variable " + var + " is not set");
  return from_bytes(std::vector<uint8_t>(v, v + std::strlen(v)));
}

JitterKey JitterKey::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read key file " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  while (!bytes.empty() && (bytes.back() == '\n' || bytes.back() == '\r')) bytes.pop_back();
  return from_bytes(std::move(bytes));
}

int derive_offset(const JitterKey& key, std::string_view patient_id) {
  if (patient_id.empty()) throw Error("derive_offset: empty patient id");
  std::string msg = "offset\x1f";
  msg.append(patient_id);
  auto mac = hmac_sha256(key.secret, msg);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | mac[i];
  uint32_t m = uint32_t(v % 670);
  int magnitude = 31 + int(m / 2);
  return (m & 1) ? -magnitude : magnitude;
}

std::string pseudonymize(const JitterKey& key, std::string_view original,
                         std::string_view context) {
  if (original.empty()) return "";
  std::string ctx;
  for (char c : context) {
    if (std::isalnum(uint8_t(c))) ctx.push_back(char(std::toupper(uint8_t(c))));
  }
  if (ctx.empty()) ctx = "ID";
  std::string msg = ctx;
  msg.push_back('\x1f');
  msg.append(original);
  auto mac = hmac_sha256(key.secret, msg);
  std::string hex = Sha256::hex(std::span<const uint8_t>(mac.data(), 6));
  return "ANON-" + ctx + "-" + hex;
}

bool is_pseudonym(std::string_view value) {
  static const std::regex re("ANON-[A-Z0-9]+-[0-9a-f]{12}");
  return std::regex_match(std::string(value), re);
}

// ---------------------------------------------------------------------------
// Calendar arithmetic (proleptic Gregorian, Howard Hinnant's algorithms).

namespace {

int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  int64_t era = (y >= 0 ? y : y - 399) / 400;
  unsigned yoe = unsigned(y - era * 400);
  unsigned doy = (153u * unsigned(m + (m > 2 ? -3 : 9)) + 2u) / 5u + unsigned(d) - 1u;
  unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + int64_t(doe) - 719468;
}

void civil_from_days(int64_t z, int& y, int& m, int& d) {
  z += 719468;
  int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  unsigned doe = unsigned(z - era * 146097);
  unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  int64_t yy = int64_t(yoe) + era * 400;
  unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  unsigned mp = (5 * doy + 2) / 153;
  d = int(doy - (153 * mp + 2) / 5 + 1);
  m = int(mp + (mp < 10 ? 3 : -9));
  y = int(yy + (m <= 2));
}

}  // namespace

std::optional<int64_t> parse_dicom_date(std::string_view da) {
  if (da.size() != 8) return std::nullopt;
  for (char c : da)
    if (!std::isdigit(uint8_t(c))) return std::nullopt;
  int y = (da[0] - '0') * 1000 + (da[1] - '0') * 100 + (da[2] - '0') * 10 + (da[3] - '0');
  int m = (da[4] - '0') * 10 + (da[5] - '0');
  int d = (da[6] - '0') * 10 + (da[7] - '0');
  if (m < 1 || m > 12 || d < 1 || d > 31) return std::nullopt;
  int64_t days = days_from_civil(y, m, d);
  int yy, mm, dd;
  civil_from_days(days, yy, mm, dd);
  if (yy != y || mm != m || dd != d) return std::nullopt;  // e.g. Feb 30
  return days;
}

std::string format_dicom_date(int64_t days) {
  int y, m, d;
  civil_from_days(days, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d%02d%02d", y, m, d);
  return buf;
}

std::optional<std::string> shift_date_value(Vr vr, std::string_view value,
                                            int offset_days) {
  if (vr == Vr::TM) return std::string(value);  // times of day do not move
  if (vr == Vr::DA) {
    auto days = parse_dicom_date(value);
    if (!days) return std::nullopt;
    return format_dicom_date(*days + offset_days);
  }
  if (vr == Vr::DT) {
    if (value.size() < 8) return std::nullopt;
    auto days = parse_dicom_date(value.substr(0, 8));
    if (!days) return std::nullopt;
    return format_dicom_date(*days + offset_days) + std::string(value.substr(8));
  }
  return std::nullopt;
}

DataSet shift_dates(const DataSet& ds, int offset_days, ScrubReport* report) {
  DataSet out = ds;
  out.for_each_element([&](DataElement& e) {
    if (e.vr != Vr::DA && e.vr != Vr::DT) return;
    std::string v = e.text();
    if (v.empty()) return;
    auto shifted = shift_date_value(e.vr, v, offset_days);
    if (shifted) {
      e.set_text(*shifted);
    } else {
      e.set_text("");
      if (report) {
        report->residual.push_back({e.tag, "unparseable date blanked"});
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Private-tag pattern scan.

const PatternSet& PatternSet::defaults() {
  static const PatternSet set = from_strings({
      {"person-name", R"([A-Z][A-Za-z'\-]+\^[A-Z][A-Za-z'\-]*|[A-Z]{2,}\s*,\s+[A-Z]{2,})"},
      {"phone", R"(\(?\d{3}\)?[-. ]\d{3}[-. ]\d{4})"},
      {"ssn", R"(\b\d{3}-\d{2}-\d{4}\b)"},
      {"date", R"(\b(19|20)\d{2}(0[1-9]|1[0-2])(0[1-9]|[12]\d|3[01])\b|\b\d{1,2}/\d{1,2}/(19|20)\d{2}\b)"},
      {"mrn", R"(\bMRN[:#\s-]*[A-Za-z0-9]+\b|\b[A-Z]?\d{6,10}\b)"},
  });
  return set;
}

PatternSet PatternSet::from_strings(
    const std::vector<std::pair<std::string, std::string>>& specs) {
  PatternSet set;
  for (const auto& [name, src] : specs) {
    try {
      set.patterns.emplace_back(name, std::regex(src));
    } catch (const std::regex_error&) {
      throw ConfigError("bad scan pattern '" + name + "'");
    }
  }
  return set;
}

namespace {

bool printable_text(const std::vector<uint8_t>& bytes) {
  if (bytes.empty()) return false;
  for (uint8_t b : bytes) {
    if (b == 0 || b == ' ') continue;
    if (b < 0x20 || b > 0x7e) return false;
  }
  return true;
}

bool text_decodable(const DataElement& e) {
  if (e.vr == Vr::SQ) return false;
  if (dicom::vr_is_text(e.vr)) return true;
  return e.vr == Vr::UN && printable_text(e.value);
}

}  // namespace

std::vector<PrivateFinding> scan_private(const DataSet& ds, const PatternSet& patterns,
                                         int* opaque_count) {
  std::vector<PrivateFinding> findings;
  ds.for_each_element([&](const DataElement& e) {
    if (!e.tag.is_private()) return;
    if (!text_decodable(e)) {
      if (!e.empty_value() && opaque_count) ++*opaque_count;
      return;
    }
    std::string text = e.text();
    if (text.empty()) return;
    for (const auto& [name, re] : patterns.patterns) {
      if (std::regex_search(text, re)) {
        findings.push_back({e.tag, name});
        return;
      }
    }
  });
  return findings;
}

// ---------------------------------------------------------------------------
// Scrub and revalidate.

namespace {

std::string category_short(std::string_view category) {
  std::string_view rest = category;
  if (rest.size() > 4 && rest[0] == 'H' && std::isdigit(uint8_t(rest[1])) &&
      std::isdigit(uint8_t(rest[2])) && rest[3] == '-') {
    rest.remove_prefix(4);
  }
  std::string out;
  for (char c : rest) {
    if (std::isalnum(uint8_t(c))) out.push_back(char(std::toupper(uint8_t(c))));
  }
  return out.empty() ? "ID" : out;
}

std::optional<std::string> generalize_value(const TagAction& action,
                                            const std::string& value) {
  // Outputs are fixed points.
  for (const auto& [k, v] : action.generalize_map) {
    if (v == value) return value;
  }
  std::string key = lower(value);
  const std::string* fallback = nullptr;
  for (const auto& [k, v] : action.generalize_map) {
    if (k == "*") fallback = &v;
    else if (k == key) return v;
  }
  if (fallback) return *fallback;
  return std::string();  // unmapped values are emptied
}

// Applies policy actions to one data set level, recursing into sequences.
void apply_policy(DataSet& ds, const PolicyTable& policy, const JitterKey& key,
                  int offset, ScrubReport& report) {
  std::vector<Tag> to_remove;
  for (auto& e : ds.elements) {
    const PolicyEntry* entry = policy.match(e.tag);
    for (auto& item : e.items) apply_policy(item, policy, key, offset, report);
    if (!entry) continue;
    switch (entry->action.kind) {
      case ActionKind::Keep:
      case ActionKind::ScanPattern:
        break;
      case ActionKind::Remove:
        to_remove.push_back(e.tag);
        ++report.action_counts["remove"];
        break;
      case ActionKind::NullOut:
        if (!e.empty_value()) {
          e.value.clear();
          e.items.clear();
          e.item_undefined_length.clear();
          ++report.action_counts["null_out"];
        }
        break;
      case ActionKind::Pseudonym: {
        std::string v = e.text();
        if (!v.empty() && !is_pseudonym(v)) {
          e.set_text(pseudonymize(key, v, category_short(entry->category)));
          ++report.action_counts["pseudonym"];
        }
        break;
      }
      case ActionKind::DateShift: {
        if (e.vr == Vr::TM) break;
        if (e.vr != Vr::DA && e.vr != Vr::DT) break;
        std::string v = e.text();
        if (v.empty()) break;
        auto shifted = shift_date_value(e.vr, v, offset);
        if (shifted) {
          e.set_text(*shifted);
          ++report.action_counts["date_shift"];
        } else {
          e.set_text("");
          ++report.action_counts["date_blanked"];
        }
        break;
      }
      case ActionKind::Generalize: {
        std::string v = e.text();
        if (!v.empty()) {
          auto g = generalize_value(entry->action, v);
          if (*g != v) {
            e.set_text(*g);
            ++report.action_counts["generalize"];
          }
        }
        break;
      }
    }
  }
  for (Tag t : to_remove) ds.remove(t);
}

void null_private_findings(DataSet& ds, const std::vector<PrivateFinding>& findings,
                           ScrubReport& report) {
  for (const auto& f : findings) {
    bool nulled = false;
    ds.for_each_element([&](DataElement& e) {
      if (e.tag == f.tag && !e.empty_value()) {
        e.value.clear();
        nulled = true;
      }
    });
    if (nulled) ++report.action_counts["private_nulled"];
  }
}

}  // namespace

ScrubResult scrub(const DataSet& ds, const PolicyTable& policy, const JitterKey& key) {
  ScrubResult result{ds, {}};
  ScrubReport& report = result.report;

  std::string pid = ds.text(dicom::tags::kPatientId);
  if (pid.empty()) {
    report.quarantined = true;
    report.quarantine_reason = "missing or empty PatientID";
    report.pass = false;
    return result;
  }

  // The offset comes from the original PatientID. A pseudonymized id marks
  // an already scrubbed file, whose dates have moved once already.
  int offset = is_pseudonym(pid) ? 0 : derive_offset(key, pid);

  apply_policy(result.dataset, policy, key, offset, report);

  int opaque = 0;
  auto findings = scan_private(result.dataset, PatternSet::defaults(), &opaque);
  report.opaque_private = opaque;
  null_private_findings(result.dataset, findings, report);

  ScrubReport reval = revalidate(result.dataset, policy);
  report.residual = std::move(reval.residual);
  report.pass = report.residual.empty() && !report.quarantined;
  return result;
}

ScrubReport revalidate(const DataSet& ds, const PolicyTable& policy) {
  ScrubReport report;
  ds.for_each_element([&](const DataElement& e) {
    const PolicyEntry* entry = policy.match(e.tag);
    if (!entry) return;
    switch (entry->action.kind) {
      case ActionKind::Keep:
      case ActionKind::ScanPattern:
        return;
      case ActionKind::Remove:
      case ActionKind::NullOut:
        if (!e.empty_value()) {
          report.residual.push_back({e.tag, std::string(action_name(entry->action.kind)) +
                                                " target still has a value"});
        }
        return;
      case ActionKind::Pseudonym: {
        std::string v = e.text();
        if (!v.empty() && !is_pseudonym(v)) {
          report.residual.push_back({e.tag, "value is not pseudonym-format"});
        }
        return;
      }
      case ActionKind::DateShift: {
        if (e.vr == Vr::TM) return;
        if (e.vr != Vr::DA && e.vr != Vr::DT) return;
        std::string v = e.text();
        if (v.empty()) return;
        bool ok = e.vr == Vr::DA ? parse_dicom_date(v).has_value()
                                 : (v.size() >= 8 && parse_dicom_date(v.substr(0, 8)).has_value());
        if (!ok) report.residual.push_back({e.tag, "value is not a parseable date"});
        return;
      }
      case ActionKind::Generalize: {
        std::string v = e.text();
        if (v.empty()) return;
        for (const auto& [k, mapped] : entry->action.generalize_map) {
          if (mapped == v) return;
        }
        report.residual.push_back({e.tag, "value is not a generalized label"});
        return;
      }
    }
  });

  int opaque = 0;
  for (const auto& f : scan_private(ds, PatternSet::defaults(), &opaque)) {
    report.residual.push_back({f.tag, "private value matches pattern " + f.pattern_class});
  }
  report.opaque_private = opaque;
  report.pass = report.residual.empty();
  return report;
}

std::string ScrubReport::to_json_line(std::string_view file_id) const {
  nlohmann::json j;
  j["file"] = std::string(file_id);
  j["pass"] = pass;
  j["quarantined"] = quarantined;
  if (!quarantine_reason.empty()) j["quarantine_reason"] = quarantine_reason;
  j["actions"] = action_counts;
  j["opaque_private"] = opaque_private;
  nlohmann::json res = nlohmann::json::array();
  for (const auto& f : residual) {
    res.push_back({{"tag", f.tag.str()}, {"reason", f.reason}});
  }
  j["residual"] = res;
  return j.dump();
}

}  // namespace deid::scrub
