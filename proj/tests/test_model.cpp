#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "finegrain/model.hpp"
#include "gradcheck.hpp"

using namespace finegrain;
using fgtest::finite_diff_check;

namespace {

ModelConfig tiny_config(int C = 8, int L = 12, int F = 5, int blocks = 1) {
  ModelConfig cfg;
  cfg.C = C;
  cfg.L = L;
  cfg.F = F;
  cfg.n_blocks = blocks;
  cfg.dropout = 0.0;
  cfg.vocab_size = 7;
  cfg.tokenizer = TokenizerMode::kWord;
  return cfg;
}

NoteInput make_note(Rng& rng, const ModelConfig& cfg, int true_length) {
  NoteInput note;
  note.seq.ids.assign(static_cast<size_t>(cfg.L), 0);
  note.seq.true_length = true_length;
  for (int i = 0; i < true_length; ++i) {
    note.seq.ids[static_cast<size_t>(i)] = 2 + static_cast<int>(rng.below(
        static_cast<uint64_t>(cfg.vocab_size - 2)));
  }
  note.structured.resize(static_cast<size_t>(cfg.F));
  for (auto& v : note.structured) v = rng.uniform(-1.5, 1.5);
  return note;
}

double sum_distribution(const TensorPtr& t) {
  double s = 0;
  for (double v : t->values) s += v;
  return s;
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig cfg = tiny_config();
  cfg.F = 20;  // F > L
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.C = 10;  // not divisible by r
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.n_classes = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  auto round = ModelConfig::from_json_text(cfg.to_json_text());
  CHECK(round.C == cfg.C);
  CHECK(round.to_json_text() == cfg.to_json_text());
}

TEST_CASE("forward trace shapes and distribution invariants") {
  ModelConfig cfg = tiny_config(16, 24, 7, 2);
  FineGrainNet net(cfg);
  net.init_params(3);
  Rng rng(1);
  auto note = make_note(rng, cfg, 9);
  Tape tape;
  Rng drop(0);
  ForwardTrace trace;
  auto logits = net.forward(tape, {note}, false, drop, &trace);

  CHECK(trace.t_embed->shape == std::vector<int>{1, cfg.C, cfg.L});
  REQUIRE(trace.blocks.size() == 2);
  for (const auto& bt : trace.blocks) {
    CHECK(bt.t_res->shape == std::vector<int>{1, cfg.C, cfg.L});
    CHECK(bt.s_res->shape == std::vector<int>{1, cfg.C, cfg.F});
    CHECK(bt.s0_struct->shape == std::vector<int>{1, 1, cfg.F});
    CHECK(bt.alpha->shape == std::vector<int>{1, 1, cfg.F});
    CHECK(bt.s_r->shape == std::vector<int>{1, cfg.C, 1});
    CHECK(bt.s0_text->shape == std::vector<int>{1, 1, cfg.L});
    CHECK(bt.beta->shape == std::vector<int>{1, 1, cfg.L});
    CHECK(bt.t_r->shape == std::vector<int>{1, cfg.C, 1});
    CHECK(std::abs(sum_distribution(bt.alpha) - 1.0) < 1e-9);
    CHECK(std::abs(sum_distribution(bt.beta) - 1.0) < 1e-9);
    for (int l = note.seq.true_length; l < cfg.L; ++l) {
      CHECK(bt.beta->values[static_cast<size_t>(l)] == 0.0);  // masked exactly
    }
  }
  CHECK(trace.t_m->shape == std::vector<int>{1, cfg.C, cfg.L});
  CHECK(trace.s_m->shape == std::vector<int>{1, cfg.C, cfg.L});
  CHECK(trace.s_p->shape == std::vector<int>{1, 1, cfg.L});
  CHECK(trace.t_p->shape == std::vector<int>{1, 1, cfg.L});
  CHECK(std::abs(sum_distribution(trace.s_p) - 1.0) < 1e-9);
  CHECK(std::abs(sum_distribution(trace.t_p) - 1.0) < 1e-9);
  for (int l = note.seq.true_length; l < cfg.L; ++l) {
    CHECK(trace.t_p->values[static_cast<size_t>(l)] == 0.0);
  }
  CHECK(trace.a_s->shape == std::vector<int>{1, 1, cfg.C});
  CHECK(trace.a_t->shape == std::vector<int>{1, 1, cfg.C});
  CHECK(trace.t_o->shape == std::vector<int>{1, cfg.C, cfg.L});
  CHECK(trace.s_o->shape == std::vector<int>{1, cfg.C, cfg.F});
  CHECK(trace.t_c->shape == std::vector<int>{1, 1, cfg.C});
  CHECK(trace.s_c->shape == std::vector<int>{1, 1, cfg.F});
  CHECK(trace.m->shape == std::vector<int>{1, cfg.C + cfg.F});
  CHECK(logits->shape == std::vector<int>{1, 4});
  CHECK(all_finite(*logits));
}

TEST_CASE("uniform infusion attention reduces to row means") {
  ModelConfig cfg = tiny_config(8, 12, 5, 1);
  FineGrainNet net(cfg);
  net.init_params(5);
  // zero squeeze conv -> S0 constant -> alpha uniform -> reweighted = row mean
  auto sw = net.store().get("block0.into_text.squeeze.w");
  auto sb = net.store().get("block0.into_text.squeeze.b");
  std::fill(sw->values.begin(), sw->values.end(), 0.0);
  std::fill(sb->values.begin(), sb->values.end(), 0.0);
  Rng rng(2);
  auto note = make_note(rng, cfg, 6);
  Tape tape;
  Rng drop(0);
  ForwardTrace trace;
  net.forward(tape, {note}, false, drop, &trace);
  const auto& bt = trace.blocks[0];
  for (int f = 0; f < cfg.F; ++f) {
    CHECK(bt.alpha->values[static_cast<size_t>(f)] == doctest::Approx(1.0 / cfg.F));
  }
  for (int c = 0; c < cfg.C; ++c) {
    double mean = 0;
    for (int f = 0; f < cfg.F; ++f) {
      mean += bt.s_res->values[static_cast<size_t>(c) * cfg.F + f];
    }
    mean /= cfg.F;
    CHECK(bt.s_r->values[static_cast<size_t>(c)] == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("zeroed cross-stream paths equal the two-stream baseline exactly") {
  ModelConfig cfg = tiny_config(8, 16, 6, 2);
  FineGrainNet full(cfg);
  full.init_params(11);
  full.zero_cross_stream_paths();

  ModelConfig base_cfg = cfg;
  base_cfg.variant = ModelVariant::kTwoStream;
  FineGrainNet baseline(base_cfg);
  baseline.init_params(11);
  // share every weight the baseline owns
  baseline.store().for_each_param([&](const std::string& name, const TensorPtr& t) {
    t->values = full.store().get(name)->values;
  });
  baseline.store().for_each_buffer([&](const std::string& name, const TensorPtr& t) {
    t->values = full.store().get(name)->values;
  });

  Rng rng(4);
  for (int trial = 0; trial < 3; ++trial) {
    auto note = make_note(rng, cfg, 5 + trial * 3);
    Tape tape_a, tape_b;
    Rng da(0), db(0);
    auto la = full.forward(tape_a, {note}, false, da);
    auto lb = baseline.forward(tape_b, {note}, false, db);
    for (int i = 0; i < 4; ++i) {
      CHECK(la->values[static_cast<size_t>(i)] == lb->values[static_cast<size_t>(i)]);
    }
  }
}

TEST_CASE("eval forward is deterministic and batch-order invariant") {
  ModelConfig cfg = tiny_config(8, 12, 5, 1);
  cfg.dropout = 0.5;  // must be inert in eval mode
  FineGrainNet net(cfg);
  net.init_params(7);
  Rng rng(9);
  std::vector<NoteInput> notes;
  for (int i = 0; i < 3; ++i) notes.push_back(make_note(rng, cfg, 4 + i));

  auto p1 = predict(net, notes[0]);
  auto p2 = predict(net, notes[0]);
  CHECK(p1.probs == p2.probs);  // bitwise deterministic

  auto batched = predict_batch(net, notes, 3);
  auto singles = predict_batch(net, notes, 1);
  for (size_t i = 0; i < notes.size(); ++i) {
    for (int c = 0; c < 4; ++c) {
      CHECK(batched[i][static_cast<size_t>(c)] == singles[i][static_cast<size_t>(c)]);
    }
  }
}

TEST_CASE("two identical notes in one eval batch produce identical logits") {
  ModelConfig cfg = tiny_config(8, 12, 5, 1);
  FineGrainNet net(cfg);
  net.init_params(13);
  Rng rng(3);
  auto note = make_note(rng, cfg, 7);
  Tape tape;
  Rng drop(0);
  auto logits = net.forward(tape, {note, note}, false, drop);
  for (int c = 0; c < 4; ++c) {
    CHECK(logits->values[static_cast<size_t>(c)] == logits->values[4 + static_cast<size_t>(c)]);
  }
}

TEST_CASE("predict decision thresholding is strict") {
  ModelConfig cfg = tiny_config();
  FineGrainNet net(cfg);
  net.init_params(1);
  // zero the head so logits equal the final bias
  auto w2 = net.store().get("head.fc2.w");
  auto b2 = net.store().get("head.fc2.b");
  std::fill(w2->values.begin(), w2->values.end(), 0.0);
  auto w1 = net.store().get("head.fc1.w");
  std::fill(w1->values.begin(), w1->values.end(), 0.0);
  b2->values = {0, 0, 0, 0};
  Rng rng(5);
  auto note = make_note(rng, cfg, 4);
  auto pred = predict(net, note);
  for (int c = 0; c < 4; ++c) {
    CHECK(pred.probs[static_cast<size_t>(c)] == doctest::Approx(0.5));
    CHECK(pred.decisions[static_cast<size_t>(c)] == 0);  // strict >
  }
  b2->values = {3, -3, 3, -3};
  pred = predict(net, note);
  CHECK(pred.decisions == std::array<int, 4>{1, 0, 1, 0});
}

TEST_CASE("parameter count is a pure function of the config") {
  ModelConfig cfg = tiny_config(8, 12, 5, 1);
  FineGrainNet a(cfg), b(cfg);
  CHECK(a.param_count() == b.param_count());
  CHECK(a.param_count() == 1025);  // pinned for C=8, L=12, F=5, 1 block, vocab 7

  ModelConfig deeper = tiny_config(8, 12, 5, 2);
  FineGrainNet c(deeper);
  CHECK(c.param_count() > a.param_count());
}

TEST_CASE("asymmetric stream depths are honored") {
  ModelConfig cfg = tiny_config(8, 12, 5, 2);
  cfg.depth_text = 1;
  cfg.depth_struct = 2;
  FineGrainNet net(cfg);
  net.init_params(2);
  CHECK_FALSE(net.store().has("block1.text.res.reduce.w"));
  CHECK(net.store().has("block1.struct.res.reduce.w"));
  Rng rng(6);
  auto note = make_note(rng, cfg, 6);
  auto pred = predict(net, note);  // runs without shape errors
  CHECK(std::isfinite(pred.probs[0]));
}

TEST_CASE("end-to-end parameter gradients match finite differences (tiny config)") {
  ModelConfig cfg = tiny_config(8, 12, 5, 1);
  FineGrainNet net(cfg);
  // seed picked away from ReLU/max-pool kinks, where central differences
  // are valid; the residual error then scales as O(eps^2)
  net.init_params(23);
  Rng rng(162);
  std::vector<NoteInput> batch = {make_note(rng, cfg, 6), make_note(rng, cfg, 9)};  // true lengths 6 and 9
  auto targets = tensor_from({2, 4}, {1, 0, 0, 1, 0, 1, 1, 0});

  auto loss_value = [&]() {
    Tape tape;
    Rng drop(0);
    auto logits = net.forward(tape, batch, true, drop);
    return bce_with_logits_mean(tape, logits, targets)->values[0];
  };
  {
    Tape tape;
    Rng drop(0);
    auto logits = net.forward(tape, batch, true, drop);
    auto loss = bce_with_logits_mean(tape, logits, targets);
    net.store().zero_grad();
    tape.backward(loss);
  }
  std::vector<fgtest::CheckEntry> params;
  net.store().for_each_param([&](const std::string& name, const TensorPtr& t) {
    // the embedding pad row is frozen by contract and receives no gradient
    size_t begin = name == "embedding.table" ? static_cast<size_t>(cfg.C) : 0;
    params.push_back({name, t, begin});
  });
  auto res = finite_diff_check(params, loss_value, 1e-4);
  INFO("worst entry: ", res.worst);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("single-stream variants run and reject fusion-only inputs") {
  ModelConfig cfg = tiny_config();
  cfg.variant = ModelVariant::kTextOnly;
  FineGrainNet text_net(cfg);
  text_net.init_params(8);
  Rng rng(10);
  auto note = make_note(rng, cfg, 5);
  CHECK(std::isfinite(predict(text_net, note).probs[0]));

  ModelConfig scf = tiny_config();
  scf.variant = ModelVariant::kStructOnly;
  FineGrainNet struct_net(scf);
  struct_net.init_params(8);
  CHECK(std::isfinite(predict(struct_net, note).probs[0]));

  NoteInput bad = note;
  bad.structured.resize(3);
  CHECK_THROWS_AS(predict(struct_net, bad), ContractError);
}

TEST_CASE("one epoch on a learnable toy decreases the training loss") {
  ModelConfig cfg = tiny_config(8, 12, 5, 1);
  FineGrainNet net(cfg);
  net.init_params(17);
  // class 0 fires iff token 2 is present
  std::vector<LabeledNote> train;
  Rng rng(50);
  for (int i = 0; i < 8; ++i) {
    LabeledNote ln;
    ln.input = make_note(rng, cfg, 6);
    bool pos = i % 2 == 0;
    for (int l = 0; l < 6; ++l) {
      ln.input.seq.ids[static_cast<size_t>(l)] = pos ? 2 : 3;
    }
    ln.labels = {pos ? 1.0 : 0.0, 0.0, pos ? 0.0 : 1.0, 0.0};
    train.push_back(ln);
  }
  TrainOptions opts;
  opts.max_epochs = 3;
  opts.batch_size = 4;
  opts.seed = 5;
  auto history = train_model(net, train, train, opts);
  REQUIRE(history.epochs.size() >= 2);
  CHECK(history.epochs.back().train_loss < history.epochs.front().train_loss);
}

TEST_CASE("training is bit-reproducible under a fixed seed") {
  ModelConfig cfg = tiny_config(8, 12, 5, 1);
  cfg.dropout = 0.3;
  Rng rng(60);
  std::vector<LabeledNote> data;
  for (int i = 0; i < 10; ++i) {
    LabeledNote ln;
    ln.input = make_note(rng, cfg, 8);
    ln.labels = {static_cast<double>(i % 2), 0.0, 1.0, 0.0};
    data.push_back(ln);
  }
  TrainOptions opts;
  opts.max_epochs = 3;
  opts.batch_size = 4;
  opts.seed = 77;

  FineGrainNet a(cfg), b(cfg);
  a.init_params(77);
  b.init_params(77);
  auto ha = train_model(a, data, data, opts);
  auto hb = train_model(b, data, data, opts);
  REQUIRE(ha.epochs.size() == hb.epochs.size());
  for (size_t i = 0; i < ha.epochs.size(); ++i) {
    CHECK(ha.epochs[i].train_loss == hb.epochs[i].train_loss);  // bitwise
    CHECK(ha.epochs[i].val_map == hb.epochs[i].val_map);
  }
  std::string pa = "build_test_a.ckpt", pb = "build_test_b.ckpt";
  a.save_checkpoint(pa, 1, 2);
  b.save_checkpoint(pb, 1, 2);
  CHECK(read_text_file(pa) == read_text_file(pb));
  std::remove(pa.c_str());
  std::remove(pb.c_str());
  std::remove((pa + ".manifest.json").c_str());
  std::remove((pb + ".manifest.json").c_str());
}

TEST_CASE("checkpoints reload and refuse mismatched artifacts") {
  ModelConfig cfg = tiny_config();
  FineGrainNet net(cfg);
  net.init_params(99);
  std::string path = "build_test_model.ckpt";
  net.save_checkpoint(path, /*schema_hash=*/111, /*vocab_hash=*/222);

  auto loaded = FineGrainNet::load_checkpoint(path, 111, 222);
  Rng rng(1);
  auto note = make_note(rng, cfg, 5);
  auto p0 = predict(net, note);
  auto p1 = predict(loaded, note);
  for (int c = 0; c < 4; ++c) {
    CHECK(p1.probs[static_cast<size_t>(c)] ==
          doctest::Approx(p0.probs[static_cast<size_t>(c)]).epsilon(1e-5));
  }
  CHECK_THROWS_AS(FineGrainNet::load_checkpoint(path, 999, 222), ValidationError);
  CHECK_THROWS_AS(FineGrainNet::load_checkpoint(path, 111, 999), ValidationError);
  std::remove(path.c_str());
  std::remove((path + ".manifest.json").c_str());
}
