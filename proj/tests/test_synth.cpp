#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "finegrain/synth.hpp"

using namespace finegrain;

TEST_CASE("generation is bit-identical under a fixed seed") {
  GeneratorConfig cfg;
  cfg.n_notes = 60;
  cfg.seed = 123;
  auto a = generate(cfg);
  auto b = generate(cfg);
  REQUIRE(a.notes.size() == b.notes.size());
  for (size_t i = 0; i < a.notes.size(); ++i) {
    CHECK(a.notes[i].text == b.notes[i].text);
    CHECK(a.notes[i].labels == b.notes[i].labels);
  }
  cfg.seed = 124;
  auto c = generate(cfg);
  bool any_diff = false;
  for (size_t i = 0; i < a.notes.size(); ++i) any_diff |= a.notes[i].text != c.notes[i].text;
  CHECK(any_diff);
}

TEST_CASE("labels are a pure function of rendered note content") {
  for (Preset preset : {Preset::kMixed, Preset::kTextOnly, Preset::kStructOnly}) {
    GeneratorConfig cfg;
    cfg.preset = preset;
    cfg.n_notes = 250;
    cfg.seed = 7;
    auto corpus = generate(cfg);
    for (const auto& note : corpus.notes) {
      auto derived = labels_from_pipeline(note, preset);
      REQUIRE(note.labels.has_value());
      CHECK(derived == *note.labels);
    }
  }
}

TEST_CASE("structuralizer round trip recovers every planted value") {
  GeneratorConfig cfg;
  cfg.n_notes = 300;
  cfg.seed = 9;
  cfg.dirt_rate = 0.5;  // stress the cleanup rules
  auto corpus = generate(cfg);
  const auto& schema = default_schema();
  const auto& rules = default_rules();
  for (size_t i = 0; i < corpus.notes.size(); ++i) {
    auto rec = extract(preprocess(corpus.notes[i], rules), schema);
    for (const auto& [field_idx, value] : corpus.planted[i]) {
      CHECK(rec.present[static_cast<size_t>(field_idx)]);
      CHECK(rec.values[static_cast<size_t>(field_idx)] == value);
    }
  }
}

TEST_CASE("empirical label co-occurrence tracks the configured proportions") {
  GeneratorConfig cfg;
  cfg.n_notes = 10000;
  cfg.seed = 31;
  auto corpus = generate(cfg);
  std::array<long, 3> dist{};
  for (const auto& note : corpus.notes) {
    int count = 0;
    for (int d = 0; d < 4; ++d) count += (*note.labels)[static_cast<size_t>(d)];
    REQUIRE(count >= 1);
    REQUIRE(count <= 3);
    ++dist[static_cast<size_t>(count - 1)];
  }
  double n = static_cast<double>(cfg.n_notes);
  CHECK(std::abs(dist[0] / n - 0.775) < 0.02);
  CHECK(std::abs(dist[1] / n - 0.222) < 0.02);
  CHECK(std::abs(dist[2] / n - 0.003) < 0.02);
}

TEST_CASE("per-field densities land within binomial bounds of the planted rates") {
  GeneratorConfig cfg;
  cfg.n_notes = 4000;
  cfg.seed = 77;
  cfg.preset = Preset::kTextOnly;  // field presence stays at base rates
  auto corpus = generate(cfg);
  const auto& schema = default_schema();
  const auto& rules = default_rules();
  std::vector<StructuredRecord> records;
  for (const auto& note : corpus.notes) records.push_back(extract(preprocess(note, rules), schema));
  auto report = density_report(records, schema);
  // spot totals: age always present, sparse extras rare
  int age_idx = schema.index_of("age");
  CHECK(report.rows[static_cast<size_t>(age_idx)].density == 1.0);
  struct Expect {
    const char* field;
    double p;
  };
  for (const Expect& e : {Expect{"sbp", 0.60}, Expect{"wt", 0.04}, Expect{"lymph", 0.49}}) {
    int idx = schema.index_of(e.field);
    double got = report.rows[static_cast<size_t>(idx)].density;
    double sigma = std::sqrt(e.p * (1 - e.p) / cfg.n_notes);
    CHECK(std::abs(got - e.p) < 3 * sigma + 1e-9);
  }
}

TEST_CASE("paper split proportions rescale") {
  auto s = paper_split(14697);
  CHECK(s.train == 11100);
  CHECK(s.val == 1821);
  CHECK(s.test == 1776);
  auto small = paper_split(1000);
  CHECK(small.train + small.val + small.test == 1000);
  CHECK(small.train > 700);
}

TEST_CASE("corpus statistics reflect the planted distributions") {
  GeneratorConfig cfg;
  cfg.n_notes = 4000;
  cfg.seed = 15;
  auto corpus = generate(cfg);
  auto stats = corpus_stats(corpus.notes);
  CHECK(stats.meta_available);
  CHECK(stats.n_notes == 4000);
  CHECK(stats.gender_male + stats.gender_female == 4000);
  CHECK(std::abs(stats.gender_male / 4000.0 - 0.64) < 0.03);
  long winter = stats.admits_per_month[11] + stats.admits_per_month[0];  // dec + jan
  long summer = stats.admits_per_month[5] + stats.admits_per_month[6];   // jun + jul
  CHECK(winter > summer);  // planted seasonal skew survives
  long month_total = 0;
  for (long m : stats.admits_per_month) month_total += m;
  CHECK(month_total == stats.n_notes);
  long count_total = stats.disease_count_dist[0] + stats.disease_count_dist[1] +
                     stats.disease_count_dist[2];
  CHECK(count_total == stats.n_notes);
  CHECK(stats.to_table().find("gender") != std::string::npos);
}

TEST_CASE("stats mark missing meta without aborting") {
  std::vector<RawNote> notes;
  RawNote n;
  n.id = "x";
  n.text = "plain";
  notes.push_back(n);
  auto stats = corpus_stats(notes);
  CHECK_FALSE(stats.meta_available);
}

TEST_CASE("two-note gender split is exact") {
  std::vector<RawNote> notes(2);
  notes[0].id = "a";
  notes[0].meta = NoteMeta{100, "male", 1};
  notes[1].id = "b";
  notes[1].meta = NoteMeta{100, "female", 2};
  auto stats = corpus_stats(notes);
  CHECK(stats.gender_male == 1);
  CHECK(stats.gender_female == 1);
}

TEST_CASE("generator config validation") {
  GeneratorConfig cfg;
  cfg.p_single = 0.5;  // no longer sums to 1
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = GeneratorConfig{};
  cfg.n_notes = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = GeneratorConfig{};
  cfg.confound_text_rate = 0.7;
  cfg.confound_struct_rate = 0.7;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("presets separate the modalities as designed") {
  // TEXT preset: trigger presence alone decides the label
  GeneratorConfig tcfg;
  tcfg.preset = Preset::kTextOnly;
  tcfg.n_notes = 150;
  tcfg.seed = 3;
  auto text_corpus = generate(tcfg);
  for (const auto& note : text_corpus.notes) {
    for (int d = 0; d < 4; ++d) {
      bool trig = note.text.find(disease_rules()[static_cast<size_t>(d)].trigger) !=
                  std::string::npos;
      CHECK(trig == ((*note.labels)[static_cast<size_t>(d)] == 1));
    }
  }
  // MIXED preset: some notes carry a trigger without its label (text
  // confounds) and some carry a high field value without its label
  GeneratorConfig mcfg;
  mcfg.n_notes = 400;
  mcfg.seed = 4;
  auto mixed = generate(mcfg);
  int text_confounds = 0;
  for (const auto& note : mixed.notes) {
    for (int d = 0; d < 4; ++d) {
      bool trig = note.text.find(disease_rules()[static_cast<size_t>(d)].trigger) !=
                  std::string::npos;
      if (trig && (*note.labels)[static_cast<size_t>(d)] == 0) ++text_confounds;
    }
  }
  CHECK(text_confounds > 50);
}
