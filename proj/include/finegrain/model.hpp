#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "finegrain/embedding.hpp"
#include "finegrain/optim.hpp"
#include "finegrain/structuralize.hpp"
#include "finegrain/tensor.hpp"

namespace finegrain {

// Ablation variants. kTwoStream keeps both stems and ResBlocks but disables
// the infusion and fusion transfer paths; it is structurally equal to the
// full model with those weights zeroed.
enum class ModelVariant { kFull, kInfusionOnly, kTwoStream, kTextOnly, kStructOnly };

ModelVariant variant_from_string(const std::string& s);
std::string variant_to_string(ModelVariant v);

struct ModelConfig {
  int C = 64;        // embedding / channel width
  int L = 256;       // token length
  int F = 19;        // structured width after pruning
  int r = 4;         // bottleneck ratio
  int n_blocks = 4;  // infusion blocks
  int n_classes = 4;
  double dropout = 0.5;
  int depth_text = -1;    // -1 -> n_blocks
  int depth_struct = -1;  // -1 -> n_blocks
  int hidden = -1;        // head hidden width, -1 -> C
  int vocab_size = 2;
  ModelVariant variant = ModelVariant::kFull;
  TokenizerMode tokenizer = TokenizerMode::kChar;

  int depth_text_eff() const { return depth_text < 0 ? n_blocks : depth_text; }
  int depth_struct_eff() const { return depth_struct < 0 ? n_blocks : depth_struct; }
  int hidden_eff() const { return hidden < 0 ? C : hidden; }
  int head_input_width() const;
  void validate() const;
  std::string to_json_text() const;
  static ModelConfig from_json_text(const std::string& text);
};

struct NoteInput {
  TokenSequence seq;
  std::vector<double> structured;  // width F
};

struct LabeledNote {
  NoteInput input;
  std::array<double, 4> labels;
};

// Intermediates of a single-note forward pass (entries carry a leading batch
// dimension of 1). Block entries are per infusion slot.
struct ForwardTrace {
  struct BlockTrace {
    TensorPtr s0_struct;  // squeeze of the structural stream, [1,1,F]
    TensorPtr alpha;      // [1,1,F]
    TensorPtr s_r;        // reweighted structural vector, [1,C,1]
    TensorPtr s0_text;    // squeeze of the text stream, [1,1,L]
    TensorPtr beta;       // [1,1,L], masked to true length
    TensorPtr t_r;        // reweighted text vector, [1,C,1]
    TensorPtr t_res;      // text ResBlock output, [1,C,L]
    TensorPtr s_res;      // structural ResBlock output, [1,C,F]
  };
  TensorPtr t_embed;  // [1,C,L]
  std::vector<BlockTrace> blocks;
  TensorPtr t_m, s_m;        // fusion inputs, [1,C,L] each (s_m zero padded)
  TensorPtr s_p, t_p;        // [1,1,L]
  TensorPtr a_s, a_t;        // cross-attention vectors, [1,1,C]
  TensorPtr t_o;             // [1,C,L]
  TensorPtr s_o;             // [1,C,F]
  TensorPtr t_c;             // [1,1,C]
  TensorPtr s_c;             // [1,1,F]
  TensorPtr m;               // [1,C+F]
  TensorPtr logits;          // [1,4]
};

class FineGrainNet {
 public:
  explicit FineGrainNet(ModelConfig cfg);

  // Deterministic parameter init; pretrained_embedding, when given, must be
  // [vocab_size, C] and seeds the embedding table (pad row re-zeroed).
  void init_params(uint64_t seed, const TensorPtr& pretrained_embedding = nullptr);

  TensorPtr forward(Tape& tape, const std::vector<NoteInput>& batch, bool train, Rng& dropout_rng,
                    ForwardTrace* trace = nullptr);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& store() { return store_; }
  size_t param_count() const { return store_.param_count(); }
  TensorPtr embedding_table() const { return embedding_; }

  // Per-field affine scaling of the structured vector, fitted on the train
  // split and carried in the checkpoint as buffers. Defaults to identity.
  void fit_input_scaler(const std::vector<LabeledNote>& train_set);

  // Zeroes grads that must never update (embedding pad row).
  void zero_frozen_grads();

  // Zeroes the infusion-direction and fusion-transfer weights in place; the
  // resulting forward equals the kTwoStream build parameter-for-parameter.
  void zero_cross_stream_paths();

  void save_checkpoint(const std::string& path, uint64_t schema_hash, uint64_t vocab_hash);
  // Builds the net from the checkpoint header and loads all weights.
  static FineGrainNet load_checkpoint(const std::string& path, uint64_t expect_schema_hash,
                                      uint64_t expect_vocab_hash);

 private:
  struct ConvParam {
    TensorPtr w, b;
  };
  struct ResBlockParams {
    ConvParam reduce, mid, expand;
    BatchNormState bn1, bn2, bn3;
  };
  struct TransferParams {
    ConvParam encode, decode;
    TensorPtr ln_gain, ln_bias;
  };
  struct InfusionParams {
    ConvParam squeeze;
    TransferParams transfer;
  };
  struct BlockParams {
    ResBlockParams res_text, res_struct;
    InfusionParams into_text, into_struct;
  };
  struct FusionParams {
    ConvParam dist_text, dist_struct;
    TransferParams transfer_text, transfer_struct;
    ConvParam merge;
  };

  ConvParam add_conv(const std::string& name, int c_out, int c_in, int k);
  BatchNormState add_bn(const std::string& name, int c);
  TransferParams add_transfer(const std::string& name);
  ResBlockParams add_res_block(const std::string& name);
  InfusionParams add_infusion(const std::string& name);

  TensorPtr run_res_block(Tape& tape, const TensorPtr& x, ResBlockParams& p, bool train);
  TensorPtr run_transfer(Tape& tape, const TensorPtr& x, TransferParams& p);
  // Eqs. 1-3 plus domain transfer: squeeze -> softmax -> reweight -> transfer.
  TensorPtr infuse(Tape& tape, const TensorPtr& infusion_stream, InfusionParams& p,
                   const std::vector<int>* mask, ForwardTrace* trace, TensorPtr* trace_s0,
                   TensorPtr* trace_alpha, TensorPtr* trace_reweighted);

  ModelConfig cfg_;
  ParamStore store_;
  TensorPtr embedding_;
  TensorPtr scaler_mean_, scaler_std_;  // buffers, identity until fitted
  ConvParam stem_text1_, stem_text2_, stem_struct_;
  BatchNormState stem_bn_;
  std::vector<BlockParams> blocks_;
  FusionParams fusion_;
  TensorPtr head_w1_, head_b1_, head_w2_, head_b2_;

  bool has_text() const { return cfg_.variant != ModelVariant::kStructOnly; }
  bool has_struct() const { return cfg_.variant != ModelVariant::kTextOnly; }
  bool use_infusion() const {
    return (cfg_.variant == ModelVariant::kFull || cfg_.variant == ModelVariant::kInfusionOnly);
  }
  bool use_fusion() const { return cfg_.variant == ModelVariant::kFull; }
};

struct Prediction {
  std::array<double, 4> probs;
  std::array<int, 4> decisions;
};

Prediction predict(FineGrainNet& net, const NoteInput& note, double threshold = 0.5);
std::vector<std::array<double, 4>> predict_batch(FineGrainNet& net,
                                                 const std::vector<NoteInput>& notes,
                                                 int batch_size = 64);

struct TrainOptions {
  int max_epochs = 50;
  int batch_size = 32;
  AdamConfig adam;
  uint64_t seed = 1;
  double early_stop_map = -1.0;  // stop once val mAP reaches this, <0 disables
  int patience = 0;              // epochs without val improvement, 0 disables
  bool verbose = false;
};

struct EpochStats {
  double train_loss = 0.0;
  double val_map = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
  double best_val_map = 0.0;
  std::string to_json_text() const;
};

// Minibatch BCE training with best-validation-mAP model selection; the net
// holds the selected parameters on return.
TrainHistory train_model(FineGrainNet& net, const std::vector<LabeledNote>& train_set,
                         const std::vector<LabeledNote>& val_set, const TrainOptions& opts);

double validation_map(FineGrainNet& net, const std::vector<LabeledNote>& val_set,
                      int batch_size = 64);

}  // namespace finegrain
