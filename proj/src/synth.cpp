#include "finegrain/synth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "finegrain/embedding.hpp"
#include "json.hpp"

namespace finegrain {

using nlohmann::json;

Preset preset_from_string(const std::string& s) {
  if (s == "text") return Preset::kTextOnly;
  if (s == "struct") return Preset::kStructOnly;
  if (s == "mixed") return Preset::kMixed;
  throw ConfigError("preset must be text|struct|mixed, got " + s);
}

std::string preset_to_string(Preset p) {
  switch (p) {
    case Preset::kTextOnly: return "text";
    case Preset::kStructOnly: return "struct";
    case Preset::kMixed: return "mixed";
  }
  throw ContractError("bad preset enum");
}

void GeneratorConfig::validate() const {
  if (n_notes < 1) throw ConfigError("generator needs n_notes >= 1");
  double total = p_single + p_double + p_triple;
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("disease-count proportions must sum to 1, got " + std::to_string(total));
  }
  if (confound_text_rate + confound_struct_rate > 1.0) {
    throw ConfigError("confound rates must sum to at most 1");
  }
  if (distractors_min < 0 || distractors_max < distractors_min) {
    throw ConfigError("bad distractor count range");
  }
  if (dirt_rate < 0.0 || dirt_rate > 1.0) throw ConfigError("dirt_rate must be in [0,1]");
  if (value_margin <= 0.0 || value_margin >= 0.5) throw ConfigError("value_margin must be in (0,0.5)");
  for (const auto& rule : disease_rules()) {
    if (rule.trigger.empty() || default_schema().index_of(rule.field) < 0) {
      throw ConfigError("disease rule references an unknown schema field");
    }
    for (int level = 1; level < kSeverityLevels; ++level) {
      if (rule.thresholds[static_cast<size_t>(level)] <=
          rule.thresholds[static_cast<size_t>(level - 1)]) {
        throw ConfigError("disease rule thresholds must increase with severity");
      }
    }
  }
}

std::string GeneratorConfig::to_json_text() const {
  json j;
  j["n_notes"] = n_notes;
  j["seed"] = seed;
  j["preset"] = preset_to_string(preset);
  j["p_single"] = p_single;
  j["p_double"] = p_double;
  j["p_triple"] = p_triple;
  j["confound_text_rate"] = confound_text_rate;
  j["confound_struct_rate"] = confound_struct_rate;
  j["distractors_min"] = distractors_min;
  j["distractors_max"] = distractors_max;
  j["dirt_rate"] = dirt_rate;
  j["value_margin"] = value_margin;
  j["seasonal_skew"] = seasonal_skew;
  j["id_prefix"] = id_prefix;
  return j.dump(2);
}

namespace {

// Constructed neutral vocabulary; trigger words are never in this list.
const std::vector<std::string>& distractor_words() {
  static const std::vector<std::string> words = {
      "lorvat", "mintal", "crenor",  "dovret", "surpin", "haldet", "weelor", "pinnot", "garnel",
      "sortep", "velmin", "tarsec",  "ovlan",  "rikset", "maldor", "tunveb", "lepsor", "gannet",
      "virdal", "moxtel", "serbin",  "kolvat", "nestor", "drumel", "paffin", "welkor", "sintal",
      "borvex", "cludam", "fertol",  "gromit", "ilvert", "jasmor", "kelrod", "lumeth", "norvil",
      "ostrel", "prandt", "quilmer", "ruvone"};
  return words;
}

struct FieldModel {
  const char* name;
  double presence;
  double lo, hi;     // sampling range (numeric fields)
  bool is_sign;
};

// Presence rates loosely follow the clinical field densities: demographics
// and vitals dense, blood gas sparse, extras below the pruning threshold.
const std::vector<FieldModel>& field_models() {
  static const std::vector<FieldModel> models = {
      {"gender", 0.90, 0.0, 1.0, false},    {"age", 1.00, 0.1, 17.9, false},
      {"temp", 0.95, 36.0, 41.0, false},    {"hr", 0.85, 80.0, 200.0, false},
      {"br", 0.85, 15.0, 60.0, false},      {"sbp", 0.60, 70.0, 130.0, false},
      {"dbp", 0.60, 40.0, 90.0, false},     {"spo2", 0.45, 88.0, 100.0, false},
      {"wbc", 0.80, 4.0, 30.0, false},      {"neut", 0.65, 20.0, 90.0, false},
      {"crp", 0.80, 1.0, 150.0, false},     {"hemoglobin", 0.68, 90.0, 160.0, false},
      {"plt", 0.68, 150.0, 500.0, false},   {"lymph", 0.49, 10.0, 70.0, false},
      {"bph", 0.11, 7.25, 7.50, false},     {"pco2", 0.10, 30.0, 50.0, false},
      {"po2", 0.09, 60.0, 100.0, false},    {"k", 0.10, 3.2, 5.5, false},
      {"na", 0.09, 130.0, 150.0, false},    {"wt", 0.04, 5.0, 40.0, false},
      {"gra", 0.03, 0.5, 3.0, false},       {"rbc", 0.04, 3.5, 5.5, false},
      {"leu", 0.05, 0.0, 0.0, true},        {"blo", 0.045, 0.0, 0.0, true},
      {"pro", 0.055, 0.0, 0.0, true}};
  return models;
}

double round1(double v) { return std::round(v * 10.0) / 10.0; }

std::string format_value(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return std::string(buf);
}

// Renders a field occurrence; dirty variants exercise the preprocessing rules
// and must normalize back to the canonical extractable form.
std::string render_field(const std::string& name, const std::string& unit, double value,
                         bool dirty, Rng& rng) {
  std::string vs = format_value(value);
  if (name == "gender") return std::string("gender ") + (value > 0.5 ? "male" : "female");
  if (dirty && name == "temp") {
    switch (rng.range(0, 2)) {
      case 0: return "T (" + vs + " degrees C)";
      case 1: {
        // class-5 typo form: leading 3 dropped, single digit before the dot
        if (value >= 36.0 && value < 40.0 && std::abs(value - std::round(value)) > 1e-9) {
          return "T " + format_value(round1(value - 30.0)) + " degrees C";
        }
        return "T " + vs + " degrees C";
      }
      default: return "temp " + vs + " degc";
    }
  }
  if (dirty && name == "hemoglobin") return "Hemoglobin " + vs + "g/L";
  if (dirty && name == "hr" && rng.bernoulli(0.5)) return "heart rate " + vs + "bpm";
  return name + " " + vs + unit;
}

std::string render_sign(const std::string& name, double value, Rng& rng) {
  int n = static_cast<int>(std::abs(value));
  if (value > 0 && rng.bernoulli(0.3)) return name + " " + std::to_string(n) + "+";  // "k+" form
  std::string signs(static_cast<size_t>(n), value >= 0 ? '+' : '-');
  if (rng.bernoulli(0.3)) return name + ": " + signs;
  return name + " " + signs;
}

}  // namespace

SplitSizes paper_split(int n) {
  SplitSizes s;
  s.train = static_cast<int>(std::lround(n * 11100.0 / 14697.0));
  s.val = static_cast<int>(std::lround(n * 1821.0 / 14697.0));
  s.test = n - s.train - s.val;
  if (s.test < 0) throw ConfigError("corpus too small to split");
  return s;
}

GeneratedCorpus generate(const GeneratorConfig& config) {
  config.validate();
  const FieldSchema& schema = default_schema();
  const auto& rules = disease_rules();
  const auto& fields = field_models();
  const auto& words = distractor_words();

  std::array<int, 4> rule_field_idx{};
  for (int d = 0; d < 4; ++d) {
    rule_field_idx[static_cast<size_t>(d)] = schema.index_of(rules[static_cast<size_t>(d)].field);
  }

  static const std::array<double, 12> month_weights = {1.6, 1.4, 1.2, 1.0, 0.8, 0.7,
                                                       0.7, 0.8, 1.0, 1.3, 1.5, 1.7};
  double month_total = 0.0;
  for (double w : month_weights) month_total += w;

  GeneratedCorpus corpus;
  corpus.notes.reserve(static_cast<size_t>(config.n_notes));
  corpus.planted.reserve(static_cast<size_t>(config.n_notes));

  for (int idx = 0; idx < config.n_notes; ++idx) {
    Rng rng = Rng::derive(config.seed, static_cast<uint64_t>(idx));
    RawNote note;
    char id[64];
    std::snprintf(id, sizeof(id), "%s-%06d", config.id_prefix.c_str(), idx);
    note.id = id;

    NoteMeta meta;
    double years = std::min(17.9, std::max(0.05, -3.0 * std::log(1.0 - rng.unit())));
    meta.age_days = static_cast<int>(std::lround(years * 365.25));
    meta.gender = rng.bernoulli(0.64) ? "male" : "female";
    if (config.seasonal_skew) {
      double u = rng.unit() * month_total;
      int month = 0;
      double acc = 0.0;
      for (int m = 0; m < 12; ++m) {
        acc += month_weights[static_cast<size_t>(m)];
        if (u < acc) {
          month = m;
          break;
        }
      }
      meta.admit_month = month + 1;
    } else {
      meta.admit_month = rng.range(1, 12);
    }
    note.meta = meta;

    // disease subset per the co-occurrence targets
    double u = rng.unit();
    int count = u < config.p_single ? 1 : (u < config.p_single + config.p_double ? 2 : 3);
    std::vector<int> order = {0, 1, 2, 3};
    rng.shuffle(order);
    std::array<bool, 4> labeled{};
    for (int i = 0; i < count; ++i) labeled[static_cast<size_t>(order[static_cast<size_t>(i)])] = true;

    // severity word: exactly one per note; MIXED thresholds follow its level
    int severity = rng.range(0, kSeverityLevels - 1);

    // plan rule fields and triggers
    std::array<bool, 4> trigger_present{};
    std::array<int, 4> rule_field_state{};  // 0 absent, 1 low, 2 high (vs the active threshold)
    for (int d = 0; d < 4; ++d) {
      if (labeled[static_cast<size_t>(d)]) {
        trigger_present[static_cast<size_t>(d)] = true;
        rule_field_state[static_cast<size_t>(d)] = 2;
        continue;
      }
      switch (config.preset) {
        case Preset::kMixed: {
          double c = rng.unit();
          if (c < config.confound_text_rate) {
            trigger_present[static_cast<size_t>(d)] = true;
            rule_field_state[static_cast<size_t>(d)] = 1;
          } else if (c < config.confound_text_rate + config.confound_struct_rate) {
            rule_field_state[static_cast<size_t>(d)] = 2;
          } else {
            rule_field_state[static_cast<size_t>(d)] = rng.bernoulli(0.7) ? 1 : 0;
          }
          break;
        }
        case Preset::kTextOnly:
          // labels come from triggers alone; field values stay random
          rule_field_state[static_cast<size_t>(d)] = -1;
          break;
        case Preset::kStructOnly:
          rule_field_state[static_cast<size_t>(d)] = rng.bernoulli(0.75) ? 1 : 0;
          break;
      }
    }
    if (config.preset == Preset::kTextOnly) {
      for (int d = 0; d < 4; ++d) {
        if (!labeled[static_cast<size_t>(d)]) {
          trigger_present[static_cast<size_t>(d)] = false;
        }
        rule_field_state[static_cast<size_t>(d)] = -1;  // unconstrained
      }
    }
    if (config.preset == Preset::kStructOnly) {
      // triggers are uninformative noise words in this preset
      for (int d = 0; d < 4; ++d) trigger_present[static_cast<size_t>(d)] = rng.bernoulli(0.3);
    }

    // sample every field
    std::vector<std::pair<int, double>> planted;
    std::vector<std::string> segments;
    segments.push_back(severity_words()[static_cast<size_t>(severity)]);
    for (size_t fi = 0; fi < fields.size(); ++fi) {
      const FieldModel& fm = fields[fi];
      int schema_idx = schema.index_of(fm.name);
      int state = -1;  // -1: base presence, unconstrained value
      const DiseaseRule* active_rule = nullptr;
      for (int d = 0; d < 4; ++d) {
        if (rule_field_idx[static_cast<size_t>(d)] == schema_idx &&
            rule_field_state[static_cast<size_t>(d)] >= 0) {
          state = rule_field_state[static_cast<size_t>(d)];
          active_rule = &rules[static_cast<size_t>(d)];
        }
      }
      bool present;
      if (state == 0) {
        present = false;
      } else if (state == 1 || state == 2) {
        present = true;
      } else {
        present = rng.bernoulli(fm.presence);
      }
      if (!present) continue;

      double value;
      std::string segment;
      if (fm.is_sign) {
        int n = rng.range(1, 3);
        bool positive = rng.bernoulli(0.6);
        value = positive ? n : -n;
        segment = render_sign(fm.name, value, rng);
        // the "k+" form is always positive
        if (segment.find('+') != std::string::npos && segment.find('-') == std::string::npos) {
          value = std::abs(value);
        }
      } else if (fm.name == std::string("gender")) {
        value = meta.gender == "male" ? 1.0 : 0.0;
        segment = render_field(fm.name, "", value, false, rng);
      } else if (fm.name == std::string("age")) {
        value = round1(years);
        segment = render_field(fm.name, "y", value, false, rng);
        value = std::stod(format_value(value));
      } else {
        double lo = fm.lo, hi = fm.hi;
        if (state == 1 || state == 2) {
          // margins scale with the field range so every band stays reachable
          double margin = config.value_margin * (fm.hi - fm.lo);
          int level = config.preset == Preset::kStructOnly ? 0 : severity;
          double active = active_rule->thresholds[static_cast<size_t>(level)];
          if (state == 2) {
            lo = std::max(lo, active + margin);
          } else if (level > 0 && config.preset == Preset::kMixed && rng.bernoulli(0.6)) {
            // sub-threshold confound in the band just below the active
            // threshold: it would have fired at the next-lower severity
            lo = std::max(lo, active_rule->thresholds[static_cast<size_t>(level - 1)] + margin);
            hi = std::min(hi, active - margin);
          } else {
            hi = std::min(hi, active_rule->thresholds[0] - margin);
          }
          value = round1(rng.uniform(lo, hi));
          // rounding must not cross the active threshold
          if (state == 1 && value > active) value = round1(active - 0.1);
          if (state == 2 && value <= active) value = round1(active + 0.1 + margin);
        } else {
          value = round1(rng.uniform(lo, hi));
        }
        value = std::stod(format_value(value));
        const FieldSpec& spec = schema.fields[static_cast<size_t>(schema_idx)];
        bool dirty = rng.bernoulli(config.dirt_rate);
        segment = render_field(fm.name, spec.unit, value, dirty, rng);
      }
      planted.emplace_back(schema_idx, value);
      segments.push_back(segment);
    }

    for (int d = 0; d < 4; ++d) {
      if (trigger_present[static_cast<size_t>(d)]) {
        segments.push_back(rules[static_cast<size_t>(d)].trigger);
      }
    }
    int n_distract = rng.range(config.distractors_min, config.distractors_max);
    for (int i = 0; i < n_distract; ++i) {
      segments.push_back(words[rng.below(words.size())]);
    }
    if (rng.bernoulli(config.dirt_rate)) segments.push_back("(+)");
    rng.shuffle(segments);

    std::string text;
    for (size_t i = 0; i < segments.size(); ++i) {
      if (i) {
        double s = rng.unit();
        if (s < 0.12) {
          text += " ， ";
        } else if (s < 0.3) {
          text += ", ";
        } else if (s < 0.36) {
          text += "  ";
        } else {
          text += " ";
        }
      }
      text += segments[i];
    }
    note.text = text;

    std::array<int, 4> labels{};
    for (int d = 0; d < 4; ++d) labels[static_cast<size_t>(d)] = labeled[static_cast<size_t>(d)] ? 1 : 0;
    note.labels = labels;

    corpus.notes.push_back(std::move(note));
    corpus.planted.push_back(std::move(planted));
  }
  return corpus;
}

std::array<int, 4> labels_from_pipeline(const RawNote& note, Preset preset) {
  const auto& rules = disease_rules();
  CleanNote clean = preprocess(note, default_rules());
  StructuredRecord rec = extract(clean, default_schema());
  auto tokens = tokenize(rec.residual_text, TokenizerMode::kWord);
  int severity = 0;
  for (int level = 0; level < kSeverityLevels; ++level) {
    if (std::find(tokens.begin(), tokens.end(), severity_words()[static_cast<size_t>(level)]) !=
        tokens.end()) {
      severity = level;
    }
  }
  std::array<int, 4> labels{};
  for (int d = 0; d < 4; ++d) {
    const DiseaseRule& rule = rules[static_cast<size_t>(d)];
    bool trig = std::find(tokens.begin(), tokens.end(), rule.trigger) != tokens.end();
    int fi = default_schema().index_of(rule.field);
    // the severity word in the text selects the active threshold
    double threshold =
        rule.thresholds[static_cast<size_t>(preset == Preset::kMixed ? severity : 0)];
    bool high = rec.present[static_cast<size_t>(fi)] &&
                rec.values[static_cast<size_t>(fi)] > threshold;
    bool on = false;
    switch (preset) {
      case Preset::kTextOnly: on = trig; break;
      case Preset::kStructOnly: on = high; break;
      case Preset::kMixed: on = trig && high; break;
    }
    labels[static_cast<size_t>(d)] = on ? 1 : 0;
  }
  return labels;
}

CorpusStats corpus_stats(const std::vector<RawNote>& notes) {
  CorpusStats stats;
  stats.n_notes = static_cast<long>(notes.size());
  stats.meta_available = !notes.empty();
  for (const auto& note : notes) {
    if (!note.meta) {
      stats.meta_available = false;
      continue;
    }
    int bucket = std::min(18, note.meta->age_days / 365);
    ++stats.age_years_hist[static_cast<size_t>(bucket)];
    if (note.meta->gender == "male") {
      ++stats.gender_male;
    } else {
      ++stats.gender_female;
    }
    ++stats.admits_per_month[static_cast<size_t>(note.meta->admit_month - 1)];
    if (note.labels) {
      for (int d = 0; d < 4; ++d) {
        if ((*note.labels)[static_cast<size_t>(d)]) {
          ++stats.disease_per_month[static_cast<size_t>(note.meta->admit_month - 1)]
                                   [static_cast<size_t>(d)];
        }
      }
    }
  }
  for (const auto& note : notes) {
    if (!note.labels) continue;
    int count = 0;
    for (int d = 0; d < 4; ++d) {
      count += (*note.labels)[static_cast<size_t>(d)];
      stats.disease_counts[static_cast<size_t>(d)] += (*note.labels)[static_cast<size_t>(d)];
    }
    if (count >= 1 && count <= 3) ++stats.disease_count_dist[static_cast<size_t>(count - 1)];
  }
  return stats;
}

std::string CorpusStats::to_table() const {
  std::ostringstream ss;
  ss << "notes: " << n_notes << "\n";
  if (!meta_available) ss << "meta: unavailable for at least one note\n";
  ss << "gender: male " << gender_male << ", female " << gender_female << "\n";
  ss << "diseases:";
  for (int d = 0; d < 4; ++d) ss << " " << kDiseaseNames[static_cast<size_t>(d)] << "=" << disease_counts[static_cast<size_t>(d)];
  ss << "\ndiseases per note: 1->" << disease_count_dist[0] << " 2->" << disease_count_dist[1]
     << " 3->" << disease_count_dist[2] << "\n";
  ss << "age histogram (years):";
  for (size_t i = 0; i < age_years_hist.size(); ++i) ss << " " << i << ":" << age_years_hist[i];
  ss << "\nadmissions per month:";
  for (int m = 0; m < 12; ++m) ss << " " << (m + 1) << ":" << admits_per_month[static_cast<size_t>(m)];
  ss << "\n";
  return ss.str();
}

}  // namespace finegrain
