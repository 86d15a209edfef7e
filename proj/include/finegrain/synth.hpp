#pragma once

#include <array>
#include <string>
#include <vector>

#include "finegrain/corpus.hpp"
#include "finegrain/structuralize.hpp"

namespace finegrain {

// Shipped default configuration (also used by the synthetic generator).
const std::string& default_schema_json();
const std::string& default_rules_json();
const FieldSchema& default_schema();
const RuleTable& default_rules();

enum class Preset { kTextOnly, kStructOnly, kMixed };

Preset preset_from_string(const std::string& s);
std::string preset_to_string(Preset p);

// One rule per disease: a trigger word and a numeric threshold predicate on
// one schema field. TEXT uses the trigger alone, STRUCT the level-0
// threshold alone, MIXED their conjunction with the threshold selected by
// the note's severity word, so the decision boundary is jointly determined
// by both modalities.
inline constexpr int kSeverityLevels = 3;

struct DiseaseRule {
  std::string trigger;
  std::string field;
  std::array<double, kSeverityLevels> thresholds;  // strictly increasing
};

const std::array<DiseaseRule, 4>& disease_rules();

// Every generated note carries exactly one severity word; its level indexes
// the rule thresholds.
const std::array<std::string, kSeverityLevels>& severity_words();

struct GeneratorConfig {
  int n_notes = 1000;
  uint64_t seed = 1;
  Preset preset = Preset::kMixed;
  // disease-count proportions per note
  double p_single = 0.775;
  double p_double = 0.222;
  double p_triple = 0.003;
  // for unlabeled diseases: trigger-without-high-value and
  // high-value-without-trigger confound rates (MIXED preset)
  double confound_text_rate = 0.5;
  double confound_struct_rate = 0.4;
  int distractors_min = 6;
  int distractors_max = 14;
  double dirt_rate = 0.25;      // messy renderings the preprocessor must clean
  double value_margin = 0.015;  // range-relative gap kept around thresholds
  bool seasonal_skew = true;
  std::string id_prefix = "note";

  void validate() const;
  std::string to_json_text() const;
};

struct GeneratedCorpus {
  std::vector<RawNote> notes;
  // per note: (schema field index, planted value) for every rendered field
  std::vector<std::vector<std::pair<int, double>>> planted;
};

GeneratedCorpus generate(const GeneratorConfig& config);

// Re-derives labels from rendered text through the real pipeline
// (preprocess -> extract -> rule evaluation). The generator's invariant is
// that this matches the stored labels for every note.
std::array<int, 4> labels_from_pipeline(const RawNote& note, Preset preset);

struct SplitSizes {
  int train = 0, val = 0, test = 0;
};
// Paper-proportioned split (11100:1821:1776 rescaled to n).
SplitSizes paper_split(int n);

struct CorpusStats {
  bool meta_available = false;
  std::array<long, 19> age_years_hist{};         // bucket i = [i, i+1) years
  long gender_male = 0, gender_female = 0;
  std::array<long, 4> disease_counts{};
  std::array<long, 3> disease_count_dist{};      // 1, 2, 3 diseases
  std::array<long, 12> admits_per_month{};
  std::array<std::array<long, 4>, 12> disease_per_month{};
  long n_notes = 0;

  std::string to_table() const;
};

CorpusStats corpus_stats(const std::vector<RawNote>& notes);

}  // namespace finegrain
