#include "finegrain/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace finegrain {

TokenizerMode tokenizer_mode_from_string(const std::string& s) {
  if (s == "char") return TokenizerMode::kChar;
  if (s == "word") return TokenizerMode::kWord;
  throw ConfigError("tokenizer mode must be char|word, got " + s);
}

std::string tokenizer_mode_to_string(TokenizerMode mode) {
  return mode == TokenizerMode::kChar ? "char" : "word";
}

std::vector<std::string> tokenize(const std::string& text, TokenizerMode mode) {
  if (mode == TokenizerMode::kWord) return split_whitespace(text);
  std::vector<std::string> out;
  for (auto& cp : utf8_codepoints(text)) {
    if (cp.size() == 1 && std::isspace(static_cast<unsigned char>(cp[0]))) continue;
    out.push_back(std::move(cp));
  }
  return out;
}

Vocabulary build_vocab(const std::vector<std::string>& texts, int min_count, TokenizerMode mode) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  if (texts.empty()) throw ContractError("build_vocab requires a non-empty corpus");
  std::map<std::string, long> counts;
  for (const auto& text : texts) {
    for (auto& tok : tokenize(text, mode)) ++counts[tok];
  }
  std::vector<std::pair<std::string, long>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary vocab;
  vocab.id_to_token = {"<pad>", "<unk>"};
  for (auto& [tok, n] : kept) {
    vocab.token_to_id[tok] = vocab.size();
    vocab.id_to_token.push_back(tok);
  }
  return vocab;
}

void Vocabulary::save(const std::string& path) const {
  std::ostringstream out;
  for (size_t i = 2; i < id_to_token.size(); ++i) out << id_to_token[i] << "\n";
  write_text_file(path, out.str());
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::istringstream in(read_text_file(path));
  Vocabulary vocab;
  vocab.id_to_token = {"<pad>", "<unk>"};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (vocab.token_to_id.count(line)) throw ValidationError("duplicate vocabulary token: " + line);
    vocab.token_to_id[line] = vocab.size();
    vocab.id_to_token.push_back(line);
  }
  return vocab;
}

uint64_t Vocabulary::hash() const {
  std::string joined;
  for (size_t i = 2; i < id_to_token.size(); ++i) {
    joined += id_to_token[i];
    joined.push_back('\n');
  }
  return fnv1a64(joined);
}

TokenSequence tokenize_and_pad(const std::string& text, const Vocabulary& vocab, int L,
                               TokenizerMode mode) {
  if (L < 1) throw ConfigError("sequence length L must be >= 1");
  auto tokens = tokenize(text, mode);
  TokenSequence seq;
  seq.ids.assign(static_cast<size_t>(L), Vocabulary::kPad);
  if (tokens.empty()) {
    seq.ids[0] = Vocabulary::kUnk;
    seq.true_length = 1;
    return seq;
  }
  seq.true_length = std::min<int>(L, static_cast<int>(tokens.size()));
  for (int i = 0; i < seq.true_length; ++i) {
    seq.ids[static_cast<size_t>(i)] = vocab.id_of(tokens[static_cast<size_t>(i)]);
  }
  return seq;
}

TensorPtr embed_batch(Tape& tape, const TensorPtr& table, const std::vector<TokenSequence>& seqs) {
  if (table->rank() != 2) throw DimError("embedding table must be [V,C], got " + shape_str(table->shape));
  if (seqs.empty()) throw ContractError("embed_batch requires at least one sequence");
  int V = table->dim(0), C = table->dim(1);
  int L = static_cast<int>(seqs[0].ids.size());
  int B = static_cast<int>(seqs.size());
  auto ids = std::make_shared<std::vector<int>>();
  ids->reserve(static_cast<size_t>(B) * L);
  for (const auto& seq : seqs) {
    if (static_cast<int>(seq.ids.size()) != L) throw ContractError("embed_batch: ragged sequence lengths");
    for (int id : seq.ids) {
      if (id < 0 || id >= V) {
        throw ContractError("token id " + std::to_string(id) + " out of range for table " +
                            shape_str(table->shape));
      }
      ids->push_back(id);
    }
  }
  auto out = make_tensor({B, C, L});
  for (int b = 0; b < B; ++b) {
    for (int l = 0; l < L; ++l) {
      int id = (*ids)[static_cast<size_t>(b) * L + l];
      const double* row = table->values.data() + static_cast<size_t>(id) * C;
      double* ob = out->values.data() + static_cast<size_t>(b) * C * L;
      for (int c = 0; c < C; ++c) ob[static_cast<size_t>(c) * L + l] = row[c];
    }
  }
  return tape.record("embed", out, [table, out, ids, B, C, L]() {
    table->ensure_grad();
    for (int b = 0; b < B; ++b) {
      const double* gb = out->grad.data() + static_cast<size_t>(b) * C * L;
      for (int l = 0; l < L; ++l) {
        int id = (*ids)[static_cast<size_t>(b) * L + l];
        if (id == Vocabulary::kPad) continue;  // pad row is frozen
        double* grow = table->grad.data() + static_cast<size_t>(id) * C;
        for (int c = 0; c < C; ++c) grow[c] += gb[static_cast<size_t>(c) * L + l];
      }
    }
  });
}

TensorPtr embed(Tape& tape, const TensorPtr& table, const TokenSequence& seq) {
  auto out = embed_batch(tape, table, {seq});
  return reshape_copy(tape, out, {table->dim(1), static_cast<int>(seq.ids.size())});
}

TensorPtr train_word2vec(const std::vector<std::string>& texts, const Vocabulary& vocab,
                         TokenizerMode mode, const Word2VecConfig& cfg) {
  if (texts.empty()) throw ContractError("train_word2vec requires a non-empty corpus");
  if (cfg.window < 1) throw ConfigError("word2vec window must be >= 1");
  if (cfg.negatives < 0) throw ConfigError("word2vec negatives must be >= 0");
  if (cfg.dim < 1) throw ConfigError("word2vec dim must be >= 1");
  const int V = vocab.size(), C = cfg.dim;
  Rng rng(splitmix64(cfg.seed));

  auto table = make_tensor({V, C});
  for (int v = Vocabulary::kUnk; v < V; ++v) {
    for (int c = 0; c < C; ++c) {
      table->values[static_cast<size_t>(v) * C + c] = rng.uniform(-0.5 / C, 0.5 / C);
    }
  }
  if (cfg.epochs == 0) return table;

  // id sequences, skipping pad/unk
  std::vector<std::vector<int>> sentences;
  std::vector<long> counts(static_cast<size_t>(V), 0);
  long total_tokens = 0;
  for (const auto& text : texts) {
    std::vector<int> sent;
    for (auto& tok : tokenize(text, mode)) {
      int id = vocab.id_of(tok);
      if (id < 2) continue;
      sent.push_back(id);
      ++counts[static_cast<size_t>(id)];
      ++total_tokens;
    }
    if (!sent.empty()) sentences.push_back(std::move(sent));
  }
  if (total_tokens == 0) return table;

  // unigram^0.75 cumulative table for negative sampling
  std::vector<double> cumulative(static_cast<size_t>(V), 0.0);
  double acc = 0.0;
  for (int v = 2; v < V; ++v) {
    acc += std::pow(static_cast<double>(counts[static_cast<size_t>(v)]), 0.75);
    cumulative[static_cast<size_t>(v)] = acc;
  }
  auto draw_negative = [&]() {
    double x = rng.unit() * acc;
    auto it = std::upper_bound(cumulative.begin() + 2, cumulative.end(), x);
    return static_cast<int>(it - cumulative.begin());
  };

  std::vector<double> syn1(static_cast<size_t>(V) * C, 0.0);
  std::vector<double> hidden_grad(static_cast<size_t>(C));
  const long total_steps = static_cast<long>(cfg.epochs) * total_tokens;
  long processed = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& sent : sentences) {
      int n = static_cast<int>(sent.size());
      for (int pos = 0; pos < n; ++pos) {
        double lr = cfg.lr * (1.0 - static_cast<double>(processed) / (total_steps + 1));
        lr = std::max(lr, cfg.lr * 1e-4);
        ++processed;
        int b = static_cast<int>(rng.below(static_cast<uint64_t>(cfg.window)));  // dynamic window
        for (int off = b - cfg.window; off <= cfg.window - b; ++off) {
          if (off == 0) continue;
          int ctx_pos = pos + off;
          if (ctx_pos < 0 || ctx_pos >= n) continue;
          int center = sent[static_cast<size_t>(pos)];
          int context = sent[static_cast<size_t>(ctx_pos)];
          double* v_in = table->values.data() + static_cast<size_t>(context) * C;
          std::fill(hidden_grad.begin(), hidden_grad.end(), 0.0);
          for (int k = 0; k <= cfg.negatives; ++k) {
            int target;
            double label;
            if (k == 0) {
              target = center;
              label = 1.0;
            } else {
              target = V > 2 ? draw_negative() : center;
              if (target == center) continue;
              label = 0.0;
            }
            double* v_out = syn1.data() + static_cast<size_t>(target) * C;
            double dot = 0.0;
            for (int c = 0; c < C; ++c) dot += v_in[c] * v_out[c];
            double sig = 1.0 / (1.0 + std::exp(-dot));
            double g = (label - sig) * lr;
            for (int c = 0; c < C; ++c) {
              hidden_grad[static_cast<size_t>(c)] += g * v_out[c];
              v_out[c] += g * v_in[c];
            }
          }
          for (int c = 0; c < C; ++c) v_in[c] += hidden_grad[static_cast<size_t>(c)];
        }
      }
    }
  }
  return table;
}

double cosine_similarity(const TensorPtr& table, int id_a, int id_b) {
  int C = table->dim(1);
  const double* a = table->values.data() + static_cast<size_t>(id_a) * C;
  const double* b = table->values.data() + static_cast<size_t>(id_b) * C;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int c = 0; c < C; ++c) {
    dot += a[c] * b[c];
    na += a[c] * a[c];
    nb += b[c] * b[c];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace finegrain
