#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "finegrain/tensor.hpp"

namespace finegrain {

enum class TokenizerMode { kChar, kWord };

TokenizerMode tokenizer_mode_from_string(const std::string& s);
std::string tokenizer_mode_to_string(TokenizerMode mode);

// Character mode splits into unicode codepoints (whitespace dropped); word
// mode splits on whitespace.
std::vector<std::string> tokenize(const std::string& text, TokenizerMode mode);

// Reserved ids 0 (pad) and 1 (unknown); corpus tokens start at 2, ordered by
// descending frequency then lexicographically.
struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  std::vector<std::string> id_to_token;  // index = id; [0]="<pad>", [1]="<unk>"
  std::unordered_map<std::string, int> token_to_id;

  int size() const { return static_cast<int>(id_to_token.size()); }
  int id_of(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kUnk : it->second;
  }
  const std::string& token_of(int id) const { return id_to_token[static_cast<size_t>(id)]; }

  void save(const std::string& path) const;  // one corpus token per line, line i = id i+2
  static Vocabulary load(const std::string& path);
  uint64_t hash() const;
};

Vocabulary build_vocab(const std::vector<std::string>& texts, int min_count, TokenizerMode mode);

struct TokenSequence {
  std::vector<int> ids;   // length L; entries beyond true_length are pad
  int true_length = 0;    // >= 1
};

// Tail truncation and tail padding; empty text maps to a single unknown.
TokenSequence tokenize_and_pad(const std::string& text, const Vocabulary& vocab, int L,
                               TokenizerMode mode);

// table: [V, C]; output column i is table row ids[i]. Row 0 (pad) is frozen:
// pad columns are zero and receive no gradient.
TensorPtr embed(Tape& tape, const TensorPtr& table, const TokenSequence& seq);
TensorPtr embed_batch(Tape& tape, const TensorPtr& table, const std::vector<TokenSequence>& seqs);

// Skip-gram with negative sampling; single-threaded and fully deterministic
// under seed. Returns a [V, C] table with the pad row zeroed, usable as
// embedding initialization.
struct Word2VecConfig {
  int dim = 64;
  int window = 4;
  int negatives = 5;
  int epochs = 3;
  double lr = 0.025;
  uint64_t seed = 1;
};

TensorPtr train_word2vec(const std::vector<std::string>& texts, const Vocabulary& vocab,
                         TokenizerMode mode, const Word2VecConfig& cfg);

double cosine_similarity(const TensorPtr& table, int id_a, int id_b);

}  // namespace finegrain
