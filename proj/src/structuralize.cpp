#include "finegrain/structuralize.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"

namespace finegrain {

using nlohmann::json;

namespace {

std::regex compile_pattern(const std::string& pattern, const std::string& where) {
  try {
    return std::regex(pattern, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw ConfigError(where + ": malformed pattern '" + pattern + "': " + e.what());
  }
}

}  // namespace

RuleTable RuleTable::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("rule table is not valid JSON: ") + e.what());
  }
  RuleTable table;
  if (!j.contains("classes") || !j["classes"].is_array() || j["classes"].size() != kNumRuleClasses) {
    throw ConfigError("rule table must contain exactly 7 operation classes");
  }
  for (int i = 0; i < kNumRuleClasses; ++i) {
    const json& cls = j["classes"][static_cast<size_t>(i)];
    int id = cls.at("id").get<int>();
    if (id != i + 1) throw ConfigError("rule classes must be listed in order 1..7");
    for (const auto& r : cls.at("rules")) {
      Rule rule;
      rule.pattern = r.at("pattern").get<std::string>();
      rule.replacement = r.at("replace").get<std::string>();
      rule.re = compile_pattern(rule.pattern, std::string("rule class ") + std::to_string(id));
      table.classes[static_cast<size_t>(i)].push_back(std::move(rule));
    }
  }
  return table;
}

RuleTable RuleTable::load(const std::string& path) {
  return from_json_text(read_text_file(path));
}

std::string RuleTable::to_json_text() const {
  json j;
  j["classes"] = json::array();
  for (int i = 0; i < kNumRuleClasses; ++i) {
    json cls;
    cls["id"] = i + 1;
    cls["name"] = kRuleClassNames[static_cast<size_t>(i)];
    cls["rules"] = json::array();
    for (const auto& r : classes[static_cast<size_t>(i)]) {
      cls["rules"].push_back({{"pattern", r.pattern}, {"replace", r.replacement}});
    }
    j["classes"].push_back(cls);
  }
  return j.dump(2);
}

std::string preprocess_text(const std::string& text, const RuleTable& rules) {
  std::string s = text;
  for (const auto& cls : rules.classes) {
    for (const auto& rule : cls) {
      s = std::regex_replace(s, rule.re, rule.replacement);
    }
  }
  return collapse_spaces(s);
}

CleanNote preprocess(const RawNote& raw, const RuleTable& rules) {
  return CleanNote{raw.id, preprocess_text(raw.text, rules)};
}

int FieldSchema::index_of(const std::string& name) const {
  for (size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

FieldSchema FieldSchema::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("schema is not valid JSON: ") + e.what());
  }
  FieldSchema schema;
  for (const auto& f : j.at("fields")) {
    FieldSpec spec;
    spec.name = f.at("name").get<std::string>();
    spec.unit = f.value("unit", std::string());
    std::string kind = f.at("kind").get<std::string>();
    if (kind == "numeric") {
      spec.kind = FieldKind::kNumeric;
    } else if (kind == "sign") {
      spec.kind = FieldKind::kSign;
    } else {
      throw ConfigError("field " + spec.name + ": kind must be numeric|sign");
    }
    spec.pattern = f.at("pattern").get<std::string>();
    spec.re = compile_pattern(spec.pattern, "field " + spec.name);
    if (spec.re.mark_count() != 1) {
      throw ConfigError("field " + spec.name + ": pattern must have exactly one capture group");
    }
    if (schema.index_of(spec.name) >= 0) throw ConfigError("duplicate field name: " + spec.name);
    schema.fields.push_back(std::move(spec));
  }
  return schema;
}

FieldSchema FieldSchema::load(const std::string& path) {
  return from_json_text(read_text_file(path));
}

std::string FieldSchema::to_json_text() const {
  json j;
  j["fields"] = json::array();
  for (const auto& f : fields) {
    j["fields"].push_back({{"name", f.name},
                           {"unit", f.unit},
                           {"kind", f.kind == FieldKind::kNumeric ? "numeric" : "sign"},
                           {"pattern", f.pattern}});
  }
  return j.dump(2);
}

bool parse_sign_value(const std::string& capture, double* out) {
  if (capture.empty()) return false;
  // "k+" form: digits followed by a single plus
  if (capture.back() == '+' && capture.size() > 1 &&
      capture.find_first_not_of("0123456789", 0) == capture.size() - 1) {
    *out = std::stod(capture.substr(0, capture.size() - 1));
    return true;
  }
  char first = capture[0];
  if (first != '+' && first != '-') return false;
  for (char c : capture) {
    if (c != first) return false;
  }
  double n = static_cast<double>(capture.size());
  *out = first == '+' ? n : -n;
  return true;
}

StructuredRecord extract(const CleanNote& note, const FieldSchema& schema, long* warn_count) {
  StructuredRecord rec;
  rec.id = note.id;
  rec.values.assign(schema.fields.size(), 0.0);
  rec.present.assign(schema.fields.size(), 0);
  std::string text = note.text;

  for (size_t fi = 0; fi < schema.fields.size(); ++fi) {
    const FieldSpec& field = schema.fields[fi];
    bool first = true;
    std::string reduced;
    reduced.reserve(text.size());
    auto begin = std::sregex_iterator(text.begin(), text.end(), field.re);
    auto end = std::sregex_iterator();
    size_t consumed = 0;
    for (auto it = begin; it != end; ++it) {
      const std::smatch& m = *it;
      if (first) {
        first = false;
        std::string capture = m[1].str();
        if (field.kind == FieldKind::kNumeric) {
          try {
            size_t used = 0;
            double v = std::stod(capture, &used);
            if (used != capture.size()) throw std::invalid_argument("trailing junk");
            rec.values[fi] = v;
            rec.present[fi] = 1;
          } catch (const std::exception&) {
            if (warn_count) ++(*warn_count);
            log_debug("field " + field.name + ": unparseable capture '" + capture + "' in note " +
                      note.id);
          }
        } else {
          double v = 0.0;
          if (parse_sign_value(capture, &v)) {
            rec.values[fi] = v;
            rec.present[fi] = 1;
          } else {
            if (warn_count) ++(*warn_count);
            log_debug("field " + field.name + ": unrecognized sign form '" + capture +
                      "' in note " + note.id);
          }
        }
      }
      // every match of the pattern is removed from the text, replaced by a
      // space so deletion cannot splice new matches together
      size_t pos = static_cast<size_t>(m.position(0));
      reduced.append(text, consumed, pos - consumed);
      reduced.push_back(' ');
      consumed = pos + static_cast<size_t>(m.length(0));
    }
    reduced.append(text, consumed, text.size() - consumed);
    text = std::move(reduced);
  }
  rec.residual_text = collapse_spaces(text);
  return rec;
}

DensityReport density_report(const std::vector<StructuredRecord>& records,
                             const FieldSchema& schema) {
  if (records.empty()) throw ContractError("density_report requires a non-empty corpus");
  DensityReport report;
  size_t width = schema.fields.size();
  for (const auto& rec : records) {
    if (rec.values.size() != width) {
      throw ContractError("record " + rec.id + " width " + std::to_string(rec.values.size()) +
                          " does not match schema width " + std::to_string(width));
    }
  }
  for (size_t fi = 0; fi < width; ++fi) {
    DensityReport::Row row;
    row.name = schema.fields[fi].name;
    row.total = static_cast<long>(records.size());
    for (const auto& rec : records) row.non_empty += rec.present[fi] ? 1 : 0;
    row.density = static_cast<double>(row.non_empty) / static_cast<double>(row.total);
    report.rows.push_back(row);
  }
  return report;
}

std::string DensityReport::to_json_text() const {
  json j = json::array();
  for (const auto& row : rows) {
    j.push_back({{"name", row.name},
                 {"non_empty", row.non_empty},
                 {"total", row.total},
                 {"density", row.density}});
  }
  return j.dump(2);
}

std::string DensityReport::to_table() const {
  std::ostringstream ss;
  ss << "field                non-empty      total    density\n";
  for (const auto& row : rows) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-20s %9ld %10ld   %8.4f\n", row.name.c_str(), row.non_empty,
                  row.total, row.density);
    ss << buf;
  }
  return ss.str();
}

FieldSchema prune_schema(const FieldSchema& schema, const DensityReport& report, double threshold) {
  if (threshold <= 0.0 || threshold >= 1.0) {
    throw ConfigError("prune threshold must be in (0,1), got " + std::to_string(threshold));
  }
  if (report.rows.size() != schema.fields.size()) {
    throw ContractError("density report does not match schema");
  }
  FieldSchema pruned;
  for (size_t i = 0; i < schema.fields.size(); ++i) {
    if (report.rows[i].name != schema.fields[i].name) {
      throw ContractError("density report order does not match schema order");
    }
    if (report.rows[i].density > threshold) pruned.fields.push_back(schema.fields[i]);
  }
  if (pruned.fields.empty()) {
    throw ConfigError("pruning at threshold " + std::to_string(threshold) +
                      " retained zero fields; the model requires F >= 1");
  }
  return pruned;
}

void save_records(const std::string& path, const std::vector<StructuredRecord>& records) {
  std::ostringstream out;
  for (const auto& rec : records) {
    json j;
    j["id"] = rec.id;
    j["values"] = rec.values;
    j["present"] = json::array();
    for (uint8_t p : rec.present) j["present"].push_back(p != 0);
    j["residual"] = rec.residual_text;
    out << j.dump() << "\n";
  }
  write_text_file(path, out.str());
}

std::vector<StructuredRecord> load_records(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<StructuredRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    StructuredRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.values = j.at("values").get<std::vector<double>>();
    for (bool p : j.at("present").get<std::vector<bool>>()) rec.present.push_back(p ? 1 : 0);
    rec.residual_text = j.at("residual").get<std::string>();
    if (rec.present.size() != rec.values.size()) {
      throw ValidationError("record " + rec.id + ": present/values width mismatch");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace finegrain
