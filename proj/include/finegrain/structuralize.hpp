#pragma once

#include <array>
#include <regex>
#include <string>
#include <vector>

#include "finegrain/corpus.hpp"

namespace finegrain {

// ---------------------------------------------------------------------------
// Preprocessing rule table: seven ordered operation classes, each an ordered
// list of regex -> replacement rules applied globally. Patterns are validated
// when the table is built; a bad pattern never surfaces at note time.
// ---------------------------------------------------------------------------

struct Rule {
  std::string pattern;
  std::string replacement;
  std::regex re;
};

inline constexpr int kNumRuleClasses = 7;
inline constexpr std::array<const char*, kNumRuleClasses> kRuleClassNames = {
    "comment_removal",     "emphasis_stripping",     "punctuation_spacing_removal",
    "punctuation_unification", "typo_correction",    "measurement_number_unification",
    "phrasing_unification"};

struct RuleTable {
  std::array<std::vector<Rule>, kNumRuleClasses> classes;

  static RuleTable from_json_text(const std::string& text);
  static RuleTable load(const std::string& path);
  std::string to_json_text() const;
};

CleanNote preprocess(const RawNote& raw, const RuleTable& rules);
std::string preprocess_text(const std::string& text, const RuleTable& rules);

// ---------------------------------------------------------------------------
// Extraction schema: ordered fields, each with a single-capture regex. Order
// defines the index layout of the structured vector; F = fields.size().
// ---------------------------------------------------------------------------

enum class FieldKind { kNumeric, kSign };

struct FieldSpec {
  std::string name;
  std::string unit;
  FieldKind kind = FieldKind::kNumeric;
  std::string pattern;
  std::regex re;
};

struct FieldSchema {
  std::vector<FieldSpec> fields;

  int width() const { return static_cast<int>(fields.size()); }
  int index_of(const std::string& name) const;  // -1 if absent

  static FieldSchema from_json_text(const std::string& text);
  static FieldSchema load(const std::string& path);
  std::string to_json_text() const;
  uint64_t hash() const { return fnv1a64(to_json_text()); }
};

struct StructuredRecord {
  std::string id;
  std::vector<double> values;     // width F, zero-filled when absent
  std::vector<uint8_t> present;   // width F
  std::string residual_text;
};

// Sign-result mapping: a run of n identical signs -> +/-n, "k+" -> +k.
// Returns false when the capture is not a recognizable sign form.
bool parse_sign_value(const std::string& capture, double* out);

// First match per field wins; every matched span is removed from the text.
// Parse failures mark the field absent and bump *warn_count.
StructuredRecord extract(const CleanNote& note, const FieldSchema& schema,
                         long* warn_count = nullptr);

struct DensityReport {
  struct Row {
    std::string name;
    long non_empty = 0;
    long total = 0;
    double density = 0.0;
  };
  std::vector<Row> rows;
  std::string to_json_text() const;
  std::string to_table() const;
};

DensityReport density_report(const std::vector<StructuredRecord>& records,
                             const FieldSchema& schema);

// Retains fields with density strictly greater than threshold, in order.
FieldSchema prune_schema(const FieldSchema& schema, const DensityReport& report,
                         double threshold = 0.075);

// Records file helpers (JSONL: id, values, present, residual).
void save_records(const std::string& path, const std::vector<StructuredRecord>& records);
std::vector<StructuredRecord> load_records(const std::string& path);

}  // namespace finegrain
