// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "deid/dicom.hpp"

namespace deid::scrub {

enum class ActionKind {
  Keep,
  Remove,
  NullOut,
  Pseudonym,
  DateShift,
  Generalize,
  ScanPattern,
};

const char* action_name(ActionKind kind);

struct TagAction {
  ActionKind kind = ActionKind::Keep;
  // Generalize mapping; keys compared case-insensitively, "*" is the
  // default. Values already in the output set are left unchanged so the
  // action stays idempotent.
  std::vector<std::pair<std::string, std::string>> generalize_map;
};

struct PolicyEntry {
  enum class Pattern { Exact, Keyword, PrivateAll };
  Pattern pattern = Pattern::Exact;
  // Exact pattern with nibble wildcards: tag matches when
  // (tag & mask) == value.
  uint16_t group = 0, element = 0;
  uint16_t group_mask = 0xffff, element_mask = 0xffff;
  std::string keyword_regex_src;
  std::regex keyword_regex;
  TagAction action;
  std::string category;

  bool matches(dicom::Tag tag, const dicom::Dictionary& dict) const;
};

class PolicyTable {
public:
  static PolicyTable parse(std::string_view text);  // throws PolicyError
  static const PolicyTable& default_table();

  const PolicyEntry* match(dicom::Tag tag) const;  // first match or nullptr
  const std::vector<PolicyEntry>& entries() const { return entries_; }
  // Of the 18 HIPAA identifier categories, those not named by any entry.
  std::vector<std::string> missing_categories() const;

private:
  std::vector<PolicyEntry> entries_;
};

struct JitterKey {
  std::vector<uint8_t> secret;

  static JitterKey from_bytes(std::vector<uint8_t> bytes);  // >= 16 bytes
  static JitterKey from_env(const std::string& var);
  static JitterKey from_file(const std::string& path);
};

// Deterministic patient-specific day offset; |offset| in [31,365], sign and
// magnitude from a keyed hash reduced mod 670.
int derive_offset(const JitterKey& key, std::string_view patient_id);

// Deterministic surrogate of the form ANON-<CONTEXT>-<12 hex digits>.
std::string pseudonymize(const JitterKey& key, std::string_view original,
                         std::string_view context);
bool is_pseudonym(std::string_view value);

struct Finding {
  dicom::Tag tag;
  std::string reason;
};

struct ScrubReport {
  std::map<std::string, int> action_counts;
  std::vector<Finding> residual;
  int opaque_private = 0;
  bool quarantined = false;
  std::string quarantine_reason;
  bool pass = false;

  std::string to_json_line(std::string_view file_id) const;
};

// Calendar helpers (proleptic Gregorian day numbers).
std::optional<int64_t> parse_dicom_date(std::string_view da);  // YYYYMMDD
std::string format_dicom_date(int64_t days);
// Shifts one DA/DT value; TM values are returned unchanged; nullopt means
// the value does not parse as a date.
std::optional<std::string> shift_date_value(dicom::Vr vr, std::string_view value,
                                            int offset_days);

// Shifts every parseable DA/DT value in the data set by offset_days.
// Unparseable dates are blanked and recorded in the report.
dicom::DataSet shift_dates(const dicom::DataSet& ds, int offset_days,
                           ScrubReport* report = nullptr);

struct PatternSet {
  std::vector<std::pair<std::string, std::regex>> patterns;
  static const PatternSet& defaults();
  static PatternSet from_strings(
      const std::vector<std::pair<std::string, std::string>>& specs);
};

struct PrivateFinding {
  dicom::Tag tag;
  std::string pattern_class;
};

// Scans private elements' decoded text for PHI-shaped content. Does not
// modify the data set; binary values are counted as opaque.
std::vector<PrivateFinding> scan_private(const dicom::DataSet& ds,
                                         const PatternSet& patterns = PatternSet::defaults(),
                                         int* opaque_count = nullptr);

struct ScrubResult {
  dicom::DataSet dataset;
  ScrubReport report;
};

ScrubResult scrub(const dicom::DataSet& ds, const PolicyTable& policy,
                  const JitterKey& key);
ScrubReport revalidate(const dicom::DataSet& ds, const PolicyTable& policy);

}  // namespace deid::scrub
