#include "finegrain/synth.hpp"

namespace finegrain {

// Field inventory follows the retained clinical set (demographics, vital
// signs, blood routine, blood gas) plus a handful of sparse extras that the
// density pruning step is expected to drop.
const std::string& default_schema_json() {
  static const std::string text = R"json({
  "fields": [
    {"name": "gender",     "unit": "",     "kind": "numeric", "pattern": "\\bgender ([01])\\b"},
    {"name": "age",        "unit": "y",    "kind": "numeric", "pattern": "\\bage ([0-9]+[.]?[0-9]*)y\\b"},
    {"name": "temp",       "unit": "degc", "kind": "numeric", "pattern": "\\btemp ([0-9]+[.]?[0-9]*) ?degc\\b"},
    {"name": "hr",         "unit": "bpm",  "kind": "numeric", "pattern": "\\bhr ([0-9]+[.]?[0-9]*)bpm\\b"},
    {"name": "br",         "unit": "rpm",  "kind": "numeric", "pattern": "\\bbr ([0-9]+[.]?[0-9]*)rpm\\b"},
    {"name": "sbp",        "unit": "mmhg", "kind": "numeric", "pattern": "\\bsbp ([0-9]+[.]?[0-9]*)mmhg\\b"},
    {"name": "dbp",        "unit": "mmhg", "kind": "numeric", "pattern": "\\bdbp ([0-9]+[.]?[0-9]*)mmhg\\b"},
    {"name": "spo2",       "unit": "pct",  "kind": "numeric", "pattern": "\\bspo2 ([0-9]+[.]?[0-9]*)pct\\b"},
    {"name": "wbc",        "unit": "e9l",  "kind": "numeric", "pattern": "\\bwbc ([0-9]+[.]?[0-9]*)e9l\\b"},
    {"name": "neut",       "unit": "pct",  "kind": "numeric", "pattern": "\\bneut ([0-9]+[.]?[0-9]*)pct\\b"},
    {"name": "crp",        "unit": "mgl",  "kind": "numeric", "pattern": "\\bcrp ([0-9]+[.]?[0-9]*)mgl\\b"},
    {"name": "hemoglobin", "unit": "g/l",  "kind": "numeric", "pattern": "\\bhemoglobin ([0-9]+[.]?[0-9]*)g/l\\b"},
    {"name": "plt",        "unit": "e9l",  "kind": "numeric", "pattern": "\\bplt ([0-9]+[.]?[0-9]*)e9l\\b"},
    {"name": "lymph",      "unit": "pct",  "kind": "numeric", "pattern": "\\blymph ([0-9]+[.]?[0-9]*)pct\\b"},
    {"name": "bph",        "unit": "ph",   "kind": "numeric", "pattern": "\\bbph ([0-9]+[.]?[0-9]*)ph\\b"},
    {"name": "pco2",       "unit": "mmhg", "kind": "numeric", "pattern": "\\bpco2 ([0-9]+[.]?[0-9]*)mmhg\\b"},
    {"name": "po2",        "unit": "mmhg", "kind": "numeric", "pattern": "\\bpo2 ([0-9]+[.]?[0-9]*)mmhg\\b"},
    {"name": "k",          "unit": "mmol", "kind": "numeric", "pattern": "\\bk ([0-9]+[.]?[0-9]*)mmol\\b"},
    {"name": "na",         "unit": "mmol", "kind": "numeric", "pattern": "\\bna ([0-9]+[.]?[0-9]*)mmol\\b"},
    {"name": "wt",         "unit": "kg",   "kind": "numeric", "pattern": "\\bwt ([0-9]+[.]?[0-9]*)kg\\b"},
    {"name": "gra",        "unit": "e9l",  "kind": "numeric", "pattern": "\\bgra ([0-9]+[.]?[0-9]*)e9l\\b"},
    {"name": "rbc",        "unit": "e12l", "kind": "numeric", "pattern": "\\brbc ([0-9]+[.]?[0-9]*)e12l\\b"},
    {"name": "leu",        "unit": "",     "kind": "sign",    "pattern": "\\bleu[:>< ]*([+\\-]+|[0-9]+\\+)"},
    {"name": "blo",        "unit": "",     "kind": "sign",    "pattern": "\\bblo[:>< ]*([+\\-]+|[0-9]+\\+)"},
    {"name": "pro",        "unit": "",     "kind": "sign",    "pattern": "\\bpro[:>< ]*([+\\-]+|[0-9]+\\+)"}
  ]
})json";
  return text;
}

const std::string& default_rules_json() {
  static const std::string text = R"json({
  "classes": [
    {"id": 1, "name": "comment_removal", "rules": [
      {"pattern": "\\(\\s*[+\\-]\\s*\\)", "replace": ""},
      {"pattern": "\\(\\s*\\)", "replace": ""}
    ]},
    {"id": 2, "name": "emphasis_stripping", "rules": [
      {"pattern": "\\(([^()]*[0-9][^()]*)\\)", "replace": "$1"},
      {"pattern": "\\*([^*]+)\\*", "replace": "$1"}
    ]},
    {"id": 3, "name": "punctuation_spacing_removal", "rules": [
      {"pattern": "[,;]", "replace": " "},
      {"pattern": "，", "replace": " "},
      {"pattern": "；", "replace": " "},
      {"pattern": "。", "replace": " "},
      {"pattern": "\\.(?![0-9])", "replace": " "}
    ]},
    {"id": 4, "name": "punctuation_unification", "rules": [
      {"pattern": "（", "replace": "("},
      {"pattern": "）", "replace": ")"},
      {"pattern": "：", "replace": ":"}
    ]},
    {"id": 5, "name": "typo_correction", "rules": [
      {"pattern": "\\b([tT]) ([0-9]\\.[0-9]) degrees", "replace": "$1 3$2 degrees"}
    ]},
    {"id": 6, "name": "measurement_number_unification", "rules": [
      {"pattern": "degrees [cC]\\b", "replace": "degc"},
      {"pattern": "°[cC]", "replace": "degc"},
      {"pattern": "([0-9]) degc\\b", "replace": "$1degc"}
    ]},
    {"id": 7, "name": "phrasing_unification", "rules": [
      {"pattern": "\\b[tT] ([0-9])", "replace": "temp $1"},
      {"pattern": "\\bHemoglobin\\b", "replace": "hemoglobin"},
      {"pattern": "g/L\\b", "replace": "g/l"},
      {"pattern": "\\bheart rate ([0-9])", "replace": "hr $1"},
      {"pattern": "\\bLeucocyte Esterase\\b", "replace": "leu"},
      {"pattern": "\\bgender male\\b", "replace": "gender 1"},
      {"pattern": "\\bgender female\\b", "replace": "gender 0"}
    ]}
  ]
})json";
  return text;
}

const FieldSchema& default_schema() {
  static const FieldSchema schema = FieldSchema::from_json_text(default_schema_json());
  return schema;
}

const RuleTable& default_rules() {
  static const RuleTable rules = RuleTable::from_json_text(default_rules_json());
  return rules;
}

const std::array<DiseaseRule, 4>& disease_rules() {
  static const std::array<DiseaseRule, 4> rules = {{
      {"grippor", "crp", {40.0, 80.0, 110.0}},  // pneumonia
      {"snuffal", "temp", {38.2, 39.1, 40.0}},  // rti
      {"wheezal", "wbc", {12.0, 18.0, 24.0}},   // bronchitis
      {"gaspen", "br", {28.0, 38.0, 48.0}},     // asthma
  }};
  return rules;
}

const std::array<std::string, kSeverityLevels>& severity_words() {
  static const std::array<std::string, kSeverityLevels> words = {"askren", "kronal", "velgra"};
  return words;
}

}  // namespace finegrain
