#include "finegrain/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "finegrain/metrics.hpp"
#include "json.hpp"

namespace finegrain {

using nlohmann::json;

ModelVariant variant_from_string(const std::string& s) {
  if (s == "full") return ModelVariant::kFull;
  if (s == "infusion_only") return ModelVariant::kInfusionOnly;
  if (s == "two_stream") return ModelVariant::kTwoStream;
  if (s == "text_only") return ModelVariant::kTextOnly;
  if (s == "struct_only") return ModelVariant::kStructOnly;
  throw ConfigError("unknown model variant: " + s);
}

std::string variant_to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::kFull: return "full";
    case ModelVariant::kInfusionOnly: return "infusion_only";
    case ModelVariant::kTwoStream: return "two_stream";
    case ModelVariant::kTextOnly: return "text_only";
    case ModelVariant::kStructOnly: return "struct_only";
  }
  throw ContractError("bad variant enum");
}

int ModelConfig::head_input_width() const {
  if (variant == ModelVariant::kTextOnly) return C;
  if (variant == ModelVariant::kStructOnly) return F;
  return C + F;
}

void ModelConfig::validate() const {
  if (C < 1 || L < 1 || F < 1) throw ConfigError("C, L, F must all be >= 1");
  if (r < 1) throw ConfigError("bottleneck ratio r must be >= 1");
  if (C % r != 0) throw ConfigError("C must be divisible by r");
  if (F > L) throw ConfigError("fusion requires F <= L, got F=" + std::to_string(F) +
                               " L=" + std::to_string(L));
  if (n_classes != 4) throw ConfigError("the classifier is fixed at 4 classes");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
  if (n_blocks < 1) throw ConfigError("n_blocks must be >= 1");
  if (depth_text < -1 || depth_struct < -1) throw ConfigError("stream depths must be >= 0 (or -1)");
  if (hidden == 0 || hidden < -1) throw ConfigError("hidden must be >= 1 (or -1)");
  if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2 (pad + unk)");
}

std::string ModelConfig::to_json_text() const {
  json j;
  j["C"] = C;
  j["L"] = L;
  j["F"] = F;
  j["r"] = r;
  j["n_blocks"] = n_blocks;
  j["n_classes"] = n_classes;
  j["dropout"] = dropout;
  j["depth_text"] = depth_text;
  j["depth_struct"] = depth_struct;
  j["hidden"] = hidden;
  j["vocab_size"] = vocab_size;
  j["variant"] = variant_to_string(variant);
  j["tokenizer"] = tokenizer_mode_to_string(tokenizer);
  return j.dump();
}

ModelConfig ModelConfig::from_json_text(const std::string& text) {
  json j = json::parse(text);
  ModelConfig cfg;
  cfg.C = j.at("C").get<int>();
  cfg.L = j.at("L").get<int>();
  cfg.F = j.at("F").get<int>();
  cfg.r = j.value("r", 4);
  cfg.n_blocks = j.value("n_blocks", 4);
  cfg.n_classes = j.value("n_classes", 4);
  cfg.dropout = j.value("dropout", 0.5);
  cfg.depth_text = j.value("depth_text", -1);
  cfg.depth_struct = j.value("depth_struct", -1);
  cfg.hidden = j.value("hidden", -1);
  cfg.vocab_size = j.at("vocab_size").get<int>();
  cfg.variant = variant_from_string(j.value("variant", std::string("full")));
  cfg.tokenizer = tokenizer_mode_from_string(j.value("tokenizer", std::string("char")));
  cfg.validate();
  return cfg;
}

FineGrainNet::ConvParam FineGrainNet::add_conv(const std::string& name, int c_out, int c_in,
                                               int k) {
  ConvParam p;
  p.w = store_.add_param(name + ".w", {c_out, c_in, k});
  p.b = store_.add_param(name + ".b", {c_out});
  return p;
}

BatchNormState FineGrainNet::add_bn(const std::string& name, int c) {
  BatchNormState bn;
  bn.gamma = store_.add_param(name + ".gamma", {c});
  bn.beta = store_.add_param(name + ".beta", {c});
  bn.running_mean = store_.add_buffer(name + ".running_mean", {c}, 0.0);
  bn.running_var = store_.add_buffer(name + ".running_var", {c}, 1.0);
  return bn;
}

FineGrainNet::TransferParams FineGrainNet::add_transfer(const std::string& name) {
  TransferParams p;
  int cr = cfg_.C / cfg_.r;
  p.encode = add_conv(name + ".encode", cr, cfg_.C, 1);
  p.ln_gain = store_.add_param(name + ".ln.gain", {cr});
  p.ln_bias = store_.add_param(name + ".ln.bias", {cr});
  p.decode = add_conv(name + ".decode", cfg_.C, cr, 1);
  return p;
}

FineGrainNet::ResBlockParams FineGrainNet::add_res_block(const std::string& name) {
  ResBlockParams p;
  int cr = cfg_.C / cfg_.r;
  p.reduce = add_conv(name + ".reduce", cr, cfg_.C, 1);
  p.bn1 = add_bn(name + ".bn1", cr);
  p.mid = add_conv(name + ".mid", cr, cr, 3);
  p.bn2 = add_bn(name + ".bn2", cr);
  p.expand = add_conv(name + ".expand", cfg_.C, cr, 1);
  p.bn3 = add_bn(name + ".bn3", cfg_.C);
  return p;
}

FineGrainNet::InfusionParams FineGrainNet::add_infusion(const std::string& name) {
  InfusionParams p;
  p.squeeze = add_conv(name + ".squeeze", 1, cfg_.C, 1);
  p.transfer = add_transfer(name + ".transfer");
  return p;
}

FineGrainNet::FineGrainNet(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (has_text()) {
    embedding_ = store_.add_param("embedding.table", {cfg_.vocab_size, cfg_.C});
    stem_text1_ = add_conv("stem_text.conv1", cfg_.C, cfg_.C, 3);
    stem_bn_ = add_bn("stem_text.bn", cfg_.C);
    stem_text2_ = add_conv("stem_text.conv2", cfg_.C, cfg_.C, 3);
  }
  if (has_struct()) {
    stem_struct_ = add_conv("stem_struct.conv", cfg_.C, 1, 1);
    scaler_mean_ = store_.add_buffer("input_scaler.mean", {cfg_.F}, 0.0);
    scaler_std_ = store_.add_buffer("input_scaler.std", {cfg_.F}, 1.0);
  }
  int slots = 0;
  if (has_text() && has_struct()) {
    slots = std::max(cfg_.depth_text_eff(), cfg_.depth_struct_eff());
  } else if (has_text()) {
    slots = cfg_.depth_text_eff();
  } else {
    slots = cfg_.depth_struct_eff();
  }
  for (int i = 0; i < slots; ++i) {
    BlockParams bp;
    std::string base = "block" + std::to_string(i);
    if (has_text() && i < cfg_.depth_text_eff()) bp.res_text = add_res_block(base + ".text.res");
    if (has_struct() && i < cfg_.depth_struct_eff()) {
      bp.res_struct = add_res_block(base + ".struct.res");
    }
    if (use_infusion()) {
      bp.into_text = add_infusion(base + ".into_text");
      bp.into_struct = add_infusion(base + ".into_struct");
    }
    blocks_.push_back(std::move(bp));
  }
  if (has_text() && has_struct()) {
    if (use_fusion()) {
      fusion_.dist_text = add_conv("fusion.text.dist", 1, cfg_.C, 1);
      fusion_.dist_struct = add_conv("fusion.struct.dist", 1, cfg_.C, 1);
      fusion_.transfer_text = add_transfer("fusion.text.transfer");
      fusion_.transfer_struct = add_transfer("fusion.struct.transfer");
    }
    fusion_.merge = add_conv("fusion.merge", 1, cfg_.C, 1);
  } else if (has_struct()) {
    fusion_.merge = add_conv("fusion.merge", 1, cfg_.C, 1);
  }
  int d_in = cfg_.head_input_width();
  int hidden = cfg_.hidden_eff();
  head_w1_ = store_.add_param("head.fc1.w", {d_in, hidden});
  head_b1_ = store_.add_param("head.fc1.b", {hidden});
  head_w2_ = store_.add_param("head.fc2.w", {hidden, cfg_.n_classes});
  head_b2_ = store_.add_param("head.fc2.b", {cfg_.n_classes});
}

namespace {

void he_uniform(Rng& rng, const TensorPtr& w, int fan_in) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : w->values) v = rng.uniform(-limit, limit);
}

void fill_const(const TensorPtr& t, double v) { std::fill(t->values.begin(), t->values.end(), v); }

}  // namespace

void FineGrainNet::init_params(uint64_t seed, const TensorPtr& pretrained_embedding) {
  Rng rng(splitmix64(seed ^ 0xF1E26A11ULL));
  auto init_conv = [&](ConvParam& p) {
    if (!p.w) return;
    he_uniform(rng, p.w, p.w->dim(1) * p.w->dim(2));
    fill_const(p.b, 0.0);
  };
  auto init_bn = [&](BatchNormState& bn) {
    if (!bn.gamma) return;
    fill_const(bn.gamma, 1.0);
    fill_const(bn.beta, 0.0);
    fill_const(bn.running_mean, 0.0);
    fill_const(bn.running_var, 1.0);
  };
  auto init_transfer = [&](TransferParams& p) {
    if (!p.encode.w) return;
    init_conv(p.encode);
    fill_const(p.ln_gain, 1.0);
    fill_const(p.ln_bias, 0.0);
    init_conv(p.decode);
  };
  auto init_res = [&](ResBlockParams& p) {
    if (!p.reduce.w) return;
    init_conv(p.reduce);
    init_bn(p.bn1);
    init_conv(p.mid);
    init_bn(p.bn2);
    init_conv(p.expand);
    init_bn(p.bn3);
  };

  if (embedding_) {
    if (pretrained_embedding) {
      if (pretrained_embedding->shape != embedding_->shape) {
        throw ContractError("pretrained embedding " + shape_str(pretrained_embedding->shape) +
                            " does not match " + shape_str(embedding_->shape));
      }
      embedding_->values = pretrained_embedding->values;
    } else {
      for (double& v : embedding_->values) v = rng.uniform(-0.5 / cfg_.C, 0.5 / cfg_.C);
    }
    std::fill_n(embedding_->values.begin(), cfg_.C, 0.0);  // pad row
  }
  init_conv(stem_text1_);
  init_bn(stem_bn_);
  init_conv(stem_text2_);
  init_conv(stem_struct_);
  for (auto& bp : blocks_) {
    init_res(bp.res_text);
    init_res(bp.res_struct);
    if (bp.into_text.squeeze.w) {
      init_conv(bp.into_text.squeeze);
      init_transfer(bp.into_text.transfer);
      init_conv(bp.into_struct.squeeze);
      init_transfer(bp.into_struct.transfer);
    }
  }
  init_conv(fusion_.dist_text);
  init_conv(fusion_.dist_struct);
  init_transfer(fusion_.transfer_text);
  init_transfer(fusion_.transfer_struct);
  init_conv(fusion_.merge);
  he_uniform(rng, head_w1_, head_w1_->dim(0));
  fill_const(head_b1_, 0.0);
  he_uniform(rng, head_w2_, head_w2_->dim(0));
  fill_const(head_b2_, 0.0);
}

void FineGrainNet::fit_input_scaler(const std::vector<LabeledNote>& train_set) {
  if (!has_struct()) return;
  if (train_set.empty()) throw ContractError("input scaler needs a non-empty train set");
  const int F = cfg_.F;
  std::vector<double> mean(static_cast<size_t>(F), 0.0);
  std::vector<double> var(static_cast<size_t>(F), 0.0);
  for (const auto& ln : train_set) {
    if (static_cast<int>(ln.input.structured.size()) != F) {
      throw ContractError("structured width does not match model F while fitting the scaler");
    }
    for (int f = 0; f < F; ++f) mean[static_cast<size_t>(f)] += ln.input.structured[static_cast<size_t>(f)];
  }
  for (int f = 0; f < F; ++f) mean[static_cast<size_t>(f)] /= static_cast<double>(train_set.size());
  for (const auto& ln : train_set) {
    for (int f = 0; f < F; ++f) {
      double d = ln.input.structured[static_cast<size_t>(f)] - mean[static_cast<size_t>(f)];
      var[static_cast<size_t>(f)] += d * d;
    }
  }
  for (int f = 0; f < F; ++f) {
    double sd = std::sqrt(var[static_cast<size_t>(f)] / static_cast<double>(train_set.size()));
    scaler_mean_->values[static_cast<size_t>(f)] = mean[static_cast<size_t>(f)];
    scaler_std_->values[static_cast<size_t>(f)] = sd > 1e-12 ? sd : 1.0;
  }
}

void FineGrainNet::zero_frozen_grads() {
  if (embedding_ && !embedding_->grad.empty()) {
    std::fill_n(embedding_->grad.begin(), cfg_.C, 0.0);
  }
}

void FineGrainNet::zero_cross_stream_paths() {
  auto zero_conv = [](ConvParam& p) {
    if (!p.w) return;
    std::fill(p.w->values.begin(), p.w->values.end(), 0.0);
    std::fill(p.b->values.begin(), p.b->values.end(), 0.0);
  };
  auto zero_transfer = [&](TransferParams& p) {
    if (!p.encode.w) return;
    zero_conv(p.encode);
    std::fill(p.ln_gain->values.begin(), p.ln_gain->values.end(), 0.0);
    std::fill(p.ln_bias->values.begin(), p.ln_bias->values.end(), 0.0);
    zero_conv(p.decode);
  };
  for (auto& bp : blocks_) {
    zero_conv(bp.into_text.squeeze);
    zero_transfer(bp.into_text.transfer);
    zero_conv(bp.into_struct.squeeze);
    zero_transfer(bp.into_struct.transfer);
  }
  zero_conv(fusion_.dist_text);
  zero_conv(fusion_.dist_struct);
  zero_transfer(fusion_.transfer_text);
  zero_transfer(fusion_.transfer_struct);
}

TensorPtr FineGrainNet::run_res_block(Tape& tape, const TensorPtr& x, ResBlockParams& p,
                                      bool train) {
  auto y = conv1d(tape, x, p.reduce.w, p.reduce.b, 0);
  y = batch_norm(tape, y, p.bn1, train);
  y = relu(tape, y);
  y = conv1d(tape, y, p.mid.w, p.mid.b, 1);
  y = batch_norm(tape, y, p.bn2, train);
  y = relu(tape, y);
  y = conv1d(tape, y, p.expand.w, p.expand.b, 0);
  y = batch_norm(tape, y, p.bn3, train);
  return relu(tape, add(tape, x, y));
}

TensorPtr FineGrainNet::run_transfer(Tape& tape, const TensorPtr& x, TransferParams& p) {
  auto h = conv1d(tape, x, p.encode.w, p.encode.b, 0);
  h = layer_norm(tape, h, p.ln_gain, p.ln_bias);
  return conv1d(tape, h, p.decode.w, p.decode.b, 0);
}

TensorPtr FineGrainNet::infuse(Tape& tape, const TensorPtr& infusion_stream, InfusionParams& p,
                               const std::vector<int>* mask, ForwardTrace* trace,
                               TensorPtr* trace_s0, TensorPtr* trace_alpha,
                               TensorPtr* trace_reweighted) {
  auto s0 = conv1d(tape, infusion_stream, p.squeeze.w, p.squeeze.b, 0);  // [B,1,N]
  auto alpha = mask ? softmax_last(tape, s0, *mask) : softmax_last(tape, s0);
  auto reweighted = matmul(tape, infusion_stream, transpose_cn(tape, alpha));  // [B,C,1]
  if (trace) {
    *trace_s0 = s0;
    *trace_alpha = alpha;
    *trace_reweighted = reweighted;
  }
  return run_transfer(tape, reweighted, p.transfer);
}

TensorPtr FineGrainNet::forward(Tape& tape, const std::vector<NoteInput>& batch, bool train,
                                Rng& dropout_rng, ForwardTrace* trace) {
  if (batch.empty()) throw ContractError("forward requires a non-empty batch");
  if (trace && batch.size() != 1) throw ContractError("trace capture requires a batch of one");
  const int B = static_cast<int>(batch.size());
  const int C = cfg_.C, L = cfg_.L, F = cfg_.F;

  std::vector<int> valid;
  TensorPtr t, s;
  if (has_text()) {
    std::vector<TokenSequence> seqs;
    seqs.reserve(batch.size());
    for (const auto& note : batch) {
      if (static_cast<int>(note.seq.ids.size()) != L) {
        throw ContractError("token sequence length does not match model L");
      }
      seqs.push_back(note.seq);
      valid.push_back(note.seq.true_length);
    }
    auto t_embed = embed_batch(tape, embedding_, seqs);
    if (trace) trace->t_embed = t_embed;
    t = conv1d(tape, t_embed, stem_text1_.w, stem_text1_.b, 1);
    t = batch_norm(tape, t, stem_bn_, train);
    t = relu(tape, t);
    t = conv1d(tape, t, stem_text2_.w, stem_text2_.b, 1);
  }
  if (has_struct()) {
    auto s_in = make_tensor({B, 1, F});
    for (int b = 0; b < B; ++b) {
      if (static_cast<int>(batch[static_cast<size_t>(b)].structured.size()) != F) {
        throw ContractError("structured vector width " +
                            std::to_string(batch[static_cast<size_t>(b)].structured.size()) +
                            " does not match model F=" + std::to_string(F));
      }
      for (int f = 0; f < F; ++f) {
        double v = batch[static_cast<size_t>(b)].structured[static_cast<size_t>(f)];
        s_in->values[static_cast<size_t>(b) * F + f] =
            (v - scaler_mean_->values[static_cast<size_t>(f)]) /
            scaler_std_->values[static_cast<size_t>(f)];
      }
    }
    s = conv1d(tape, s_in, stem_struct_.w, stem_struct_.b, 0);
  }

  for (size_t slot = 0; slot < blocks_.size(); ++slot) {
    BlockParams& bp = blocks_[slot];
    if (t && static_cast<int>(slot) < cfg_.depth_text_eff()) {
      t = run_res_block(tape, t, bp.res_text, train);
    }
    if (s && static_cast<int>(slot) < cfg_.depth_struct_eff()) {
      s = run_res_block(tape, s, bp.res_struct, train);
    }
    ForwardTrace::BlockTrace bt;
    if (trace) {
      bt.t_res = t;
      bt.s_res = s;
    }
    if (use_infusion() && t && s) {
      auto into_text = infuse(tape, s, bp.into_text, nullptr, trace, &bt.s0_struct, &bt.alpha,
                              &bt.s_r);
      auto into_struct = infuse(tape, t, bp.into_struct, &valid, trace, &bt.s0_text, &bt.beta,
                                &bt.t_r);
      t = add(tape, t, replicate_length(tape, into_text, L));
      s = add(tape, s, replicate_length(tape, into_struct, F));
    }
    if (trace) trace->blocks.push_back(bt);
  }

  TensorPtr m_flat;
  if (t && s) {
    auto t_m = t;
    auto s_m = zero_pad_last(tape, s, L);
    TensorPtr t_o, s_o;
    if (use_fusion()) {
      auto s_p = softmax_last(tape, conv1d(tape, s_m, fusion_.dist_struct.w, fusion_.dist_struct.b, 0));
      auto t_p = softmax_last(tape, conv1d(tape, t_m, fusion_.dist_text.w, fusion_.dist_text.b, 0),
                              valid);
      auto a_s = matmul(tape, s_p, transpose_cn(tape, t_m));  // [B,1,C]
      auto a_t = matmul(tape, t_p, transpose_cn(tape, s_m));  // [B,1,C]
      auto ts = run_transfer(tape, transpose_cn(tape, a_s), fusion_.transfer_struct);
      auto tt = run_transfer(tape, transpose_cn(tape, a_t), fusion_.transfer_text);
      t_o = add(tape, t_m, replicate_length(tape, tt, L));
      s_o = slice_last(tape, add(tape, s_m, replicate_length(tape, ts, L)), F);
      if (trace) {
        trace->s_p = s_p;
        trace->t_p = t_p;
        trace->a_s = a_s;
        trace->a_t = a_t;
      }
    } else {
      t_o = t_m;
      s_o = slice_last(tape, s_m, F);
    }
    auto t_c = max_pool_length(tape, t_o);
    auto s_c = conv1d(tape, s_o, fusion_.merge.w, fusion_.merge.b, 0);
    auto m3 = concat_last(tape, t_c, s_c);
    m_flat = reshape_copy(tape, m3, {B, C + F});
    if (trace) {
      trace->t_m = t_m;
      trace->s_m = s_m;
      trace->t_o = t_o;
      trace->s_o = s_o;
      trace->t_c = t_c;
      trace->s_c = s_c;
      trace->m = m_flat;
    }
  } else if (t) {
    auto t_c = max_pool_length(tape, t);
    m_flat = reshape_copy(tape, t_c, {B, C});
    if (trace) {
      trace->t_m = t;
      trace->t_c = t_c;
      trace->m = m_flat;
    }
  } else {
    auto s_c = conv1d(tape, s, fusion_.merge.w, fusion_.merge.b, 0);
    m_flat = reshape_copy(tape, s_c, {B, F});
    if (trace) {
      trace->s_m = s;
      trace->s_c = s_c;
      trace->m = m_flat;
    }
  }

  auto x = dropout(tape, m_flat, cfg_.dropout, train, dropout_rng);
  auto h = relu(tape, add_bias_rows(tape, matmul(tape, x, head_w1_), head_b1_));
  auto logits = add_bias_rows(tape, matmul(tape, h, head_w2_), head_b2_);
  if (trace) trace->logits = logits;
  return logits;
}

void FineGrainNet::save_checkpoint(const std::string& path, uint64_t schema_hash,
                                   uint64_t vocab_hash) {
  json header;
  header["format_version"] = 1;
  header["model_config"] = json::parse(cfg_.to_json_text());
  header["schema_hash"] = hex64(schema_hash);
  header["vocab_hash"] = hex64(vocab_hash);
  store_.save(path, header.dump());
  write_text_file(path + ".manifest.json", header.dump(2) + "\n");
}

FineGrainNet FineGrainNet::load_checkpoint(const std::string& path, uint64_t expect_schema_hash,
                                           uint64_t expect_vocab_hash) {
  json header = json::parse(ParamStore::peek_header(path));
  ModelConfig cfg = ModelConfig::from_json_text(header.at("model_config").dump());
  std::string schema_hash = header.at("schema_hash").get<std::string>();
  std::string vocab_hash = header.at("vocab_hash").get<std::string>();
  if (schema_hash != hex64(expect_schema_hash)) {
    throw ValidationError("checkpoint was trained with a different schema (hash " + schema_hash +
                          " vs " + hex64(expect_schema_hash) + ")");
  }
  if (vocab_hash != hex64(expect_vocab_hash)) {
    throw ValidationError("checkpoint was trained with a different vocabulary (hash " +
                          vocab_hash + " vs " + hex64(expect_vocab_hash) + ")");
  }
  FineGrainNet net(cfg);
  net.store_.load(path);
  return net;
}

Prediction predict(FineGrainNet& net, const NoteInput& note, double threshold) {
  Tape tape;
  Rng rng(0);
  auto logits = net.forward(tape, {note}, /*train=*/false, rng);
  Prediction pred{};
  for (int i = 0; i < 4; ++i) {
    double p = 1.0 / (1.0 + std::exp(-logits->values[static_cast<size_t>(i)]));
    pred.probs[static_cast<size_t>(i)] = p;
    pred.decisions[static_cast<size_t>(i)] = p > threshold ? 1 : 0;
  }
  return pred;
}

std::vector<std::array<double, 4>> predict_batch(FineGrainNet& net,
                                                 const std::vector<NoteInput>& notes,
                                                 int batch_size) {
  std::vector<std::array<double, 4>> probs;
  probs.reserve(notes.size());
  Rng rng(0);
  for (size_t start = 0; start < notes.size(); start += static_cast<size_t>(batch_size)) {
    size_t stop = std::min(notes.size(), start + static_cast<size_t>(batch_size));
    std::vector<NoteInput> batch(notes.begin() + static_cast<long>(start),
                                 notes.begin() + static_cast<long>(stop));
    Tape tape;
    auto logits = net.forward(tape, batch, /*train=*/false, rng);
    for (size_t b = 0; b < batch.size(); ++b) {
      std::array<double, 4> row{};
      for (int i = 0; i < 4; ++i) {
        row[static_cast<size_t>(i)] =
            1.0 / (1.0 + std::exp(-logits->values[b * 4 + static_cast<size_t>(i)]));
      }
      probs.push_back(row);
    }
  }
  return probs;
}

double validation_map(FineGrainNet& net, const std::vector<LabeledNote>& val_set, int batch_size) {
  std::vector<NoteInput> inputs;
  inputs.reserve(val_set.size());
  for (const auto& ln : val_set) inputs.push_back(ln.input);
  auto probs = predict_batch(net, inputs, batch_size);
  ScoredSet set;
  for (size_t i = 0; i < val_set.size(); ++i) {
    std::array<int, 4> labels{};
    for (int c = 0; c < 4; ++c) {
      labels[static_cast<size_t>(c)] = val_set[i].labels[static_cast<size_t>(c)] > 0.5 ? 1 : 0;
    }
    set.push(probs[i], labels);
  }
  return summarize(set).map;
}

std::string TrainHistory::to_json_text() const {
  json j;
  j["epochs"] = json::array();
  for (const auto& e : epochs) {
    j["epochs"].push_back({{"train_loss", e.train_loss}, {"val_map", e.val_map}});
  }
  j["best_epoch"] = best_epoch;
  j["best_val_map"] = best_val_map;
  return j.dump(2);
}

TrainHistory train_model(FineGrainNet& net, const std::vector<LabeledNote>& train_set,
                         const std::vector<LabeledNote>& val_set, const TrainOptions& opts) {
  if (train_set.empty() || val_set.empty()) {
    throw ContractError("training requires non-empty train and validation sets");
  }
  Rng shuffle_rng = Rng::derive(opts.seed, 0x5u);
  Rng dropout_rng = Rng::derive(opts.seed, 0xDu);
  net.fit_input_scaler(train_set);

  TrainHistory history;
  auto best_snapshot = net.store().snapshot();
  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < opts.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    size_t seen = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(opts.batch_size)) {
      size_t stop = std::min(order.size(), start + static_cast<size_t>(opts.batch_size));
      size_t bsz = stop - start;
      std::vector<NoteInput> batch;
      batch.reserve(bsz);
      auto targets = make_tensor({static_cast<int>(bsz), 4});
      for (size_t i = start; i < stop; ++i) {
        const LabeledNote& ln = train_set[order[i]];
        batch.push_back(ln.input);
        for (int c = 0; c < 4; ++c) {
          targets->values[(i - start) * 4 + static_cast<size_t>(c)] =
              ln.labels[static_cast<size_t>(c)];
        }
      }
      Tape tape;
      auto logits = net.forward(tape, batch, /*train=*/true, dropout_rng);
      auto loss = bce_with_logits_mean(tape, logits, targets);
      if (!std::isfinite(loss->values[0])) {
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch starting at " +
                                 std::to_string(start));
      }
      net.store().zero_grad();
      tape.backward(loss);
      net.zero_frozen_grads();
      net.store().adam_step(opts.adam);
      loss_sum += loss->values[0] * static_cast<double>(bsz);
      seen += bsz;
    }
    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(seen);
    stats.val_map = validation_map(net, val_set);
    history.epochs.push_back(stats);
    if (opts.verbose) {
      log_info("epoch " + std::to_string(epoch) + ": train_loss " +
               std::to_string(stats.train_loss) + ", val_map " + std::to_string(stats.val_map));
    }
    if (history.best_epoch < 0 || stats.val_map > history.best_val_map) {
      history.best_epoch = epoch;
      history.best_val_map = stats.val_map;
      best_snapshot = net.store().snapshot();
    }
    if (opts.early_stop_map > 0.0 && history.best_val_map >= opts.early_stop_map) break;
    if (opts.patience > 0 && epoch - history.best_epoch >= opts.patience) break;
  }
  net.store().restore(best_snapshot);
  return history;
}

}  // namespace finegrain
