// finegrain: clinical-note structuralization, two-stream training, and
// evaluation pipeline in one executable.

#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "finegrain/metrics.hpp"
#include "finegrain/model.hpp"
#include "finegrain/saliency.hpp"
#include "finegrain/synth.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace finegrain;
using nlohmann::json;

namespace {

void write_snapshot(const std::string& out_dir, const json& resolved) {
  write_text_file(out_dir + "/resolved_config.json", resolved.dump(2) + "\n");
}

std::string ensure_out_dir(const std::string& out) {
  fs::create_directories(out);
  return out;
}

struct Pipeline {
  FieldSchema schema;
  RuleTable rules;
};

Pipeline load_pipeline(const std::string& schema_path, const std::string& rules_path) {
  Pipeline p;
  p.schema = schema_path.empty() ? default_schema() : FieldSchema::load(schema_path);
  p.rules = rules_path.empty() ? default_rules() : RuleTable::load(rules_path);
  return p;
}

struct PreparedCorpus {
  std::vector<LabeledNote> labeled;
  std::vector<std::string> residuals;
  std::vector<std::string> ids;
  std::vector<StructuredRecord> records;
};

PreparedCorpus prepare(const std::vector<RawNote>& notes, const Pipeline& pipe,
                       const Vocabulary* vocab, int L, TokenizerMode mode, bool need_labels) {
  PreparedCorpus out;
  long warnings = 0;
  for (const auto& note : notes) {
    auto rec = extract(preprocess(note, pipe.rules), pipe.schema, &warnings);
    LabeledNote ln;
    ln.input.structured = rec.values;
    if (vocab) ln.input.seq = tokenize_and_pad(rec.residual_text, *vocab, L, mode);
    if (need_labels) {
      if (!note.labels) throw ValidationError("note " + note.id + " has no labels");
      for (int c = 0; c < 4; ++c) ln.labels[static_cast<size_t>(c)] = (*note.labels)[static_cast<size_t>(c)];
    }
    out.labeled.push_back(std::move(ln));
    out.residuals.push_back(rec.residual_text);
    out.ids.push_back(note.id);
    out.records.push_back(std::move(rec));
  }
  if (warnings > 0) log_info(std::to_string(warnings) + " field captures failed to parse");
  return out;
}

int run_synth(const std::string& out, int n, uint64_t seed, const std::string& preset_name,
              int n_train, int n_val, int n_test) {
  ensure_out_dir(out);
  GeneratorConfig cfg;
  cfg.n_notes = n;
  cfg.seed = seed;
  cfg.preset = preset_from_string(preset_name);
  auto corpus = generate(cfg);

  SplitSizes split = paper_split(n);
  if (n_train >= 0) {
    split.train = n_train;
    split.val = n_val;
    split.test = n_test;
    if (split.train + split.val + split.test != n) {
      throw ValidationError("explicit split sizes must sum to --n");
    }
  }
  auto begin = corpus.notes.begin();
  save_corpus(out + "/train.jsonl", {begin, begin + split.train});
  save_corpus(out + "/val.jsonl", {begin + split.train, begin + split.train + split.val});
  save_corpus(out + "/test.jsonl", {begin + split.train + split.val, corpus.notes.end()});
  write_text_file(out + "/schema.json", default_schema_json());
  write_text_file(out + "/rules.json", default_rules_json());
  json prov;
  prov["generator_config"] = json::parse(cfg.to_json_text());
  prov["seed"] = seed;
  prov["split"] = {{"train", split.train}, {"val", split.val}, {"test", split.test}};
  write_text_file(out + "/provenance.json", prov.dump(2) + "\n");
  write_snapshot(out, {{"subcommand", "synth"},
                       {"n", n},
                       {"seed", seed},
                       {"preset", preset_name},
                       {"split", {split.train, split.val, split.test}}});
  std::cout << "wrote " << n << " notes (" << split.train << "/" << split.val << "/" << split.test
            << ") to " << out << "\n";
  return 0;
}

int run_stats(const std::string& in, const std::string& out) {
  ensure_out_dir(out);
  auto notes = load_corpus(in);
  auto stats = corpus_stats(notes);
  write_text_file(out + "/stats.txt", stats.to_table());

  std::string age = "years\tcount\n";
  for (size_t i = 0; i < stats.age_years_hist.size(); ++i) {
    age += std::to_string(i) + "\t" + std::to_string(stats.age_years_hist[i]) + "\n";
  }
  write_text_file(out + "/age_hist.tsv", age);
  write_text_file(out + "/gender.tsv", "gender\tcount\nmale\t" + std::to_string(stats.gender_male) +
                                           "\nfemale\t" + std::to_string(stats.gender_female) + "\n");
  std::string diseases = "disease\tcount\n";
  for (int d = 0; d < 4; ++d) {
    diseases += std::string(kDiseaseNames[static_cast<size_t>(d)]) + "\t" +
                std::to_string(stats.disease_counts[static_cast<size_t>(d)]) + "\n";
  }
  write_text_file(out + "/disease_counts.tsv", diseases);
  std::string dist = "diseases_per_note\tcount\n";
  for (int c = 0; c < 3; ++c) {
    dist += std::to_string(c + 1) + "\t" + std::to_string(stats.disease_count_dist[static_cast<size_t>(c)]) + "\n";
  }
  write_text_file(out + "/disease_count_dist.tsv", dist);
  std::string monthly = "month\tadmissions\tpneumonia\trti\tbronchitis\tasthma\n";
  for (int m = 0; m < 12; ++m) {
    monthly += std::to_string(m + 1) + "\t" + std::to_string(stats.admits_per_month[static_cast<size_t>(m)]);
    for (int d = 0; d < 4; ++d) {
      monthly += "\t" + std::to_string(stats.disease_per_month[static_cast<size_t>(m)][static_cast<size_t>(d)]);
    }
    monthly += "\n";
  }
  write_text_file(out + "/per_month.tsv", monthly);
  write_snapshot(out, {{"subcommand", "stats"}, {"in", in}});
  std::cout << stats.to_table();
  return 0;
}

int run_structuralize(const std::string& in, const std::string& schema_path,
                      const std::string& rules_path, const std::string& out) {
  ensure_out_dir(out);
  auto pipe = load_pipeline(schema_path, rules_path);
  auto notes = load_corpus(in);
  long warnings = 0;
  std::vector<StructuredRecord> records;
  records.reserve(notes.size());
  for (const auto& note : notes) {
    records.push_back(extract(preprocess(note, pipe.rules), pipe.schema, &warnings));
  }
  save_records(out + "/records.jsonl", records);
  auto report = density_report(records, pipe.schema);
  write_text_file(out + "/density.json", report.to_json_text() + "\n");
  write_text_file(out + "/density.txt", report.to_table());
  write_snapshot(out, {{"subcommand", "structuralize"},
                       {"in", in},
                       {"schema", schema_path},
                       {"rules", rules_path},
                       {"notes", notes.size()},
                       {"parse_warnings", warnings}});
  std::cout << "structuralized " << notes.size() << " notes (" << warnings
            << " capture warnings)\n";
  return 0;
}

int run_prune(const std::string& records_path, const std::string& schema_path, double threshold,
              const std::string& out) {
  ensure_out_dir(out);
  FieldSchema schema = schema_path.empty() ? default_schema() : FieldSchema::load(schema_path);
  auto records = load_records(records_path);
  auto report = density_report(records, schema);
  auto pruned = prune_schema(schema, report, threshold);
  write_text_file(out + "/pruned_schema.json", pruned.to_json_text() + "\n");
  write_text_file(out + "/density.json", report.to_json_text() + "\n");
  write_text_file(out + "/density.txt", report.to_table());
  write_snapshot(out, {{"subcommand", "prune"},
                       {"records", records_path},
                       {"schema", schema_path},
                       {"threshold", threshold},
                       {"retained", pruned.width()}});
  std::cout << "retained " << pruned.width() << " of " << schema.width() << " fields\n";
  return 0;
}

struct TrainCliOptions {
  std::string train_path, val_path, schema_path, rules_path, out;
  int C = 64, L = 256, blocks = 4, r = 4, hidden = -1;
  int depth_text = -1, depth_struct = -1;
  double dropout = 0.5;
  std::string variant = "full";
  std::string tokenizer = "char";
  int epochs = 50, batch = 32;
  double lr = 1e-3;
  uint64_t seed = 1;
  int min_count = 1;
  double early_stop_map = -1.0;
  int patience = 0;
  int word2vec_epochs = 0;
};

int run_train(const TrainCliOptions& opt) {
  ensure_out_dir(opt.out);
  auto pipe = load_pipeline(opt.schema_path, opt.rules_path);
  TokenizerMode mode = tokenizer_mode_from_string(opt.tokenizer);

  auto train_notes = load_corpus(opt.train_path);
  auto val_notes = load_corpus(opt.val_path);
  auto train_pre = prepare(train_notes, pipe, nullptr, opt.L, mode, true);
  auto vocab = build_vocab(train_pre.residuals, opt.min_count, mode);
  auto train_set = prepare(train_notes, pipe, &vocab, opt.L, mode, true);
  auto val_set = prepare(val_notes, pipe, &vocab, opt.L, mode, true);

  ModelConfig cfg;
  cfg.C = opt.C;
  cfg.L = opt.L;
  cfg.F = pipe.schema.width();
  cfg.r = opt.r;
  cfg.n_blocks = opt.blocks;
  cfg.dropout = opt.dropout;
  cfg.depth_text = opt.depth_text;
  cfg.depth_struct = opt.depth_struct;
  cfg.hidden = opt.hidden;
  cfg.vocab_size = vocab.size();
  cfg.variant = variant_from_string(opt.variant);
  cfg.tokenizer = mode;
  cfg.validate();

  FineGrainNet net(cfg);
  TensorPtr pretrained;
  if (opt.word2vec_epochs > 0 && cfg.variant != ModelVariant::kStructOnly) {
    Word2VecConfig w2v;
    w2v.dim = cfg.C;
    w2v.epochs = opt.word2vec_epochs;
    w2v.seed = opt.seed;
    pretrained = train_word2vec(train_pre.residuals, vocab, mode, w2v);
    log_info("word2vec pretraining done");
  }
  net.init_params(opt.seed, pretrained);

  TrainOptions topt;
  topt.max_epochs = opt.epochs;
  topt.batch_size = opt.batch;
  topt.adam.lr = opt.lr;
  topt.seed = opt.seed;
  topt.early_stop_map = opt.early_stop_map;
  topt.patience = opt.patience;
  topt.verbose = true;
  auto history = train_model(net, train_set.labeled, val_set.labeled, topt);

  net.save_checkpoint(opt.out + "/model.ckpt", pipe.schema.hash(), vocab.hash());
  vocab.save(opt.out + "/vocab.txt");
  write_text_file(opt.out + "/schema.json", pipe.schema.to_json_text() + "\n");
  write_text_file(opt.out + "/rules.json", pipe.rules.to_json_text() + "\n");
  write_text_file(opt.out + "/history.json", history.to_json_text() + "\n");
  write_snapshot(opt.out, {{"subcommand", "train"},
                           {"train", opt.train_path},
                           {"val", opt.val_path},
                           {"model_config", json::parse(cfg.to_json_text())},
                           {"epochs", opt.epochs},
                           {"batch", opt.batch},
                           {"lr", opt.lr},
                           {"seed", opt.seed},
                           {"min_count", opt.min_count},
                           {"word2vec_epochs", opt.word2vec_epochs},
                           {"early_stop_map", opt.early_stop_map},
                           {"patience", opt.patience}});
  std::cout << "best val mAP " << history.best_val_map << " at epoch " << history.best_epoch
            << "; checkpoint written to " << opt.out << "/model.ckpt\n";
  return 0;
}

struct LoadedModel {
  Pipeline pipe;
  Vocabulary vocab;
  FineGrainNet net;
};

LoadedModel load_model_dir(const std::string& dir) {
  Pipeline pipe = load_pipeline(dir + "/schema.json", dir + "/rules.json");
  Vocabulary vocab = Vocabulary::load(dir + "/vocab.txt");
  FineGrainNet net =
      FineGrainNet::load_checkpoint(dir + "/model.ckpt", pipe.schema.hash(), vocab.hash());
  return LoadedModel{std::move(pipe), std::move(vocab), std::move(net)};
}

int run_evaluate(const std::string& test_path, const std::string& model_dir,
                 const std::string& out, int n_resamples, double threshold, uint64_t seed,
                 bool correlation) {
  ensure_out_dir(out);
  auto model = load_model_dir(model_dir);
  const ModelConfig& cfg = model.net.config();
  auto notes = load_corpus(test_path);
  auto prep = prepare(notes, model.pipe, &model.vocab, cfg.L, cfg.tokenizer, true);

  std::vector<NoteInput> inputs;
  for (const auto& ln : prep.labeled) inputs.push_back(ln.input);
  auto probs = predict_batch(model.net, inputs);
  ScoredSet set;
  for (size_t i = 0; i < prep.labeled.size(); ++i) {
    std::array<int, 4> labels{};
    for (int c = 0; c < 4; ++c) labels[static_cast<size_t>(c)] = prep.labeled[i].labels[static_cast<size_t>(c)] > 0.5;
    set.push(probs[i], labels);
  }
  save_scores(out + "/scores.txt", set);
  auto report = summarize(set, threshold);
  if (n_resamples > 0) {
    report.map_ci = bootstrap_ci(set, map_metric(), n_resamples, 0.95, seed);
    report.macro_f1_ci = bootstrap_ci(set, macro_f1_metric(threshold), n_resamples, 0.95, seed + 1);
  }
  write_text_file(out + "/report.json", report.to_json_text() + "\n");
  write_text_file(out + "/report.txt", report.to_table());

  if (correlation) {
    CorrelationReport corr;
    for (int fi = 0; fi < model.pipe.schema.width(); ++fi) {
      for (int d = 0; d < 4; ++d) {
        std::vector<double> values;
        std::vector<int> labels;
        for (size_t i = 0; i < prep.records.size(); ++i) {
          if (!prep.records[i].present[static_cast<size_t>(fi)]) continue;  // absent samples ignored
          values.push_back(prep.records[i].values[static_cast<size_t>(fi)]);
          labels.push_back(set.labels[i][static_cast<size_t>(d)]);
        }
        if (values.empty()) continue;
        auto res = field_correlation(values, labels);
        corr.rows.push_back({model.pipe.schema.fields[static_cast<size_t>(fi)].name,
                             kDiseaseNames[static_cast<size_t>(d)], res.cov, res.shift, res.n});
      }
    }
    write_text_file(out + "/correlation.json", corr.to_json_text() + "\n");
    write_text_file(out + "/correlation.txt", corr.to_table());
  }
  write_snapshot(out, {{"subcommand", "evaluate"},
                       {"test", test_path},
                       {"model", model_dir},
                       {"n_resamples", n_resamples},
                       {"threshold", threshold},
                       {"seed", seed}});
  std::cout << report.to_table();
  return 0;
}

int run_compare(const std::string& a_path, const std::string& b_path, const std::string& out,
                long draws, uint64_t seed, double threshold) {
  auto a = load_scores(a_path);
  auto b = load_scores(b_path);
  if (a.size() != b.size()) throw ValidationError("score files must pair line by line");
  // per-note contribution: mean over the 4 classes of decision correctness
  auto contributions = [threshold](const ScoredSet& s) {
    std::vector<double> c;
    for (size_t i = 0; i < s.size(); ++i) {
      double correct = 0;
      for (int k = 0; k < 4; ++k) {
        bool pred = s.scores[i][static_cast<size_t>(k)] > threshold;
        correct += pred == (s.labels[i][static_cast<size_t>(k)] == 1) ? 1.0 : 0.0;
      }
      c.push_back(correct / 4.0);
    }
    return c;
  };
  auto res = permutation_test(contributions(a), contributions(b), 20, draws, seed);
  json j;
  j["a"] = a_path;
  j["b"] = b_path;
  j["map_a"] = summarize(a, threshold).map;
  j["map_b"] = summarize(b, threshold).map;
  j["observed_mean_difference"] = res.observed;
  j["p_value"] = res.p;
  j["exact"] = res.exact;
  j["draws"] = res.draws;
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) {
    ensure_out_dir(out);
    write_text_file(out + "/compare.json", j.dump(2) + "\n");
    write_snapshot(out, {{"subcommand", "compare"},
                         {"a", a_path},
                         {"b", b_path},
                         {"draws", draws},
                         {"seed", seed}});
  }
  return 0;
}

int run_explain(const std::string& in, const std::string& note_id, const std::string& model_dir,
                int target_class, const std::string& out, const std::string& reduce_name) {
  ensure_out_dir(out);
  auto model = load_model_dir(model_dir);
  const ModelConfig& cfg = model.net.config();
  auto notes = load_corpus(in);
  const RawNote* chosen = nullptr;
  for (const auto& note : notes) {
    if (note.id == note_id) chosen = &note;
  }
  if (!chosen) throw ValidationError("note id not found in corpus: " + note_id);
  auto prep = prepare({*chosen}, model.pipe, &model.vocab, cfg.L, cfg.tokenizer, false);
  SaliencyReduce reduce =
      reduce_name == "l2" ? SaliencyReduce::kL2 : SaliencyReduce::kSignedSum;
  auto map = saliency(model.net, prep.labeled[0].input, model.vocab, target_class, note_id, reduce);
  auto [tsv, html] = render_saliency(map, out);
  write_snapshot(out, {{"subcommand", "explain"},
                       {"in", in},
                       {"note_id", note_id},
                       {"class", target_class},
                       {"reduce", reduce_name}});
  std::cout << "wrote " << tsv << " and " << html << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fine-grained respiratory disease identification pipeline"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with planted labels");
  std::string synth_out, synth_preset = "mixed";
  int synth_n = 1000, synth_train = -1, synth_val = -1, synth_test = -1;
  uint64_t synth_seed = 1;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--n", synth_n, "number of notes");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--preset", synth_preset, "text|struct|mixed");
  synth->add_option("--n-train", synth_train, "explicit train split size");
  synth->add_option("--n-val", synth_val, "explicit val split size");
  synth->add_option("--n-test", synth_test, "explicit test split size");

  // stats
  auto* stats = app.add_subcommand("stats", "corpus distribution tables");
  std::string stats_in, stats_out;
  stats->add_option("--in", stats_in, "corpus jsonl")->required();
  stats->add_option("--out", stats_out, "output directory")->required();

  // structuralize
  auto* structuralize = app.add_subcommand("structuralize", "preprocess and extract a corpus");
  std::string st_in, st_schema, st_rules, st_out;
  structuralize->add_option("--in", st_in, "corpus jsonl")->required();
  structuralize->add_option("--schema", st_schema, "schema json (default: built-in)");
  structuralize->add_option("--rules", st_rules, "rule table json (default: built-in)");
  structuralize->add_option("--out", st_out, "output directory")->required();

  // prune
  auto* prune = app.add_subcommand("prune", "density report and schema pruning");
  std::string pr_records, pr_schema, pr_out;
  double pr_threshold = 0.075;
  prune->add_option("--records", pr_records, "records jsonl from structuralize")->required();
  prune->add_option("--schema", pr_schema, "candidate schema json (default: built-in)");
  prune->add_option("--threshold", pr_threshold, "density threshold (strictly greater retained)");
  prune->add_option("--out", pr_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "train the two-stream classifier");
  TrainCliOptions topt;
  train->add_option("--train", topt.train_path, "train corpus jsonl")->required();
  train->add_option("--val", topt.val_path, "validation corpus jsonl")->required();
  train->add_option("--schema", topt.schema_path, "pruned schema json (default: built-in)");
  train->add_option("--rules", topt.rules_path, "rule table json (default: built-in)");
  train->add_option("--out", topt.out, "output directory")->required();
  train->add_option("--channels", topt.C, "embedding/channel width C");
  train->add_option("--length", topt.L, "token length L");
  train->add_option("--blocks", topt.blocks, "infusion block count");
  train->add_option("--ratio", topt.r, "bottleneck ratio r");
  train->add_option("--hidden", topt.hidden, "head hidden width (-1: C)");
  train->add_option("--depth-text", topt.depth_text, "text-stream block count (-1: blocks)");
  train->add_option("--depth-struct", topt.depth_struct, "struct-stream block count (-1: blocks)");
  train->add_option("--dropout", topt.dropout, "head dropout rate");
  train->add_option("--variant", topt.variant,
                    "full|infusion_only|two_stream|text_only|struct_only");
  train->add_option("--tokenizer", topt.tokenizer, "char|word");
  train->add_option("--epochs", topt.epochs, "max epochs");
  train->add_option("--batch", topt.batch, "minibatch size");
  train->add_option("--lr", topt.lr, "Adam learning rate");
  train->add_option("--seed", topt.seed, "training seed");
  train->add_option("--min-count", topt.min_count, "vocabulary min count");
  train->add_option("--early-stop-map", topt.early_stop_map,
                    "stop once val mAP reaches this (<0 disables)");
  train->add_option("--patience", topt.patience, "early-stop patience in epochs (0 disables)");
  train->add_option("--word2vec-epochs", topt.word2vec_epochs,
                    "skip-gram pretraining epochs (0: joint training only)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score a test corpus with a trained model");
  std::string ev_test, ev_model, ev_out;
  int ev_resamples = 0;
  double ev_threshold = 0.5;
  uint64_t ev_seed = 1;
  bool ev_no_correlation = false;
  evaluate->add_option("--test", ev_test, "test corpus jsonl")->required();
  evaluate->add_option("--model", ev_model, "model directory from train")->required();
  evaluate->add_option("--out", ev_out, "output directory")->required();
  evaluate->add_option("--n-resamples", ev_resamples, "bootstrap resamples (0 disables)");
  evaluate->add_option("--threshold", ev_threshold, "decision threshold");
  evaluate->add_option("--seed", ev_seed, "bootstrap seed");
  evaluate->add_flag("--no-correlation", ev_no_correlation, "skip the field-disease table");

  // compare
  auto* compare = app.add_subcommand("compare", "paired permutation test between two score files");
  std::string cp_a, cp_b, cp_out;
  long cp_draws = 10000;
  uint64_t cp_seed = 1;
  double cp_threshold = 0.5;
  compare->add_option("--a", cp_a, "first score file")->required();
  compare->add_option("--b", cp_b, "second score file")->required();
  compare->add_option("--out", cp_out, "optional output directory");
  compare->add_option("--n-resamples", cp_draws, "Monte-Carlo draws when pairs > 20");
  compare->add_option("--seed", cp_seed, "permutation seed");
  compare->add_option("--threshold", cp_threshold, "decision threshold for contributions");

  // explain
  auto* explain = app.add_subcommand("explain", "gradient saliency for one note");
  std::string ex_in, ex_note, ex_model, ex_out, ex_reduce = "signed";
  int ex_class = 0;
  explain->add_option("--in", ex_in, "corpus jsonl containing the note")->required();
  explain->add_option("--note-id", ex_note, "note id")->required();
  explain->add_option("--model", ex_model, "model directory from train")->required();
  explain->add_option("--class", ex_class, "target class 0..3")->required();
  explain->add_option("--out", ex_out, "output directory")->required();
  explain->add_option("--reduce", ex_reduce, "signed|l2 channel reduction");

  try {
    app.parse(argc, argv);
    if (*synth) return run_synth(synth_out, synth_n, synth_seed, synth_preset, synth_train,
                                 synth_val, synth_test);
    if (*stats) return run_stats(stats_in, stats_out);
    if (*structuralize) return run_structuralize(st_in, st_schema, st_rules, st_out);
    if (*prune) return run_prune(pr_records, pr_schema, pr_threshold, pr_out);
    if (*train) return run_train(topt);
    if (*evaluate) return run_evaluate(ev_test, ev_model, ev_out, ev_resamples, ev_threshold,
                                       ev_seed, !ev_no_correlation);
    if (*compare) return run_compare(cp_a, cp_b, cp_out, cp_draws, cp_seed, cp_threshold);
    if (*explain) return run_explain(ex_in, ex_note, ex_model, ex_class, ex_out, ex_reduce);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);  // usage errors -> nonzero
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}
