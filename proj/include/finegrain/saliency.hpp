#pragma once

#include <string>
#include <vector>

#include "finegrain/model.hpp"

namespace finegrain {

enum class SaliencyReduce { kSignedSum, kL2 };

struct SaliencyMap {
  std::string note_id;
  int target_class = 0;
  std::vector<std::string> tokens;  // real tokens only, padding excluded
  std::vector<double> values;       // signed per-token influence on the logit
};

// Gradient of the target-class logit with respect to the embedding matrix,
// reduced over channels per token. Eval mode, dropout off, deterministic.
SaliencyMap saliency(FineGrainNet& net, const NoteInput& note, const Vocabulary& vocab,
                     int target_class, const std::string& note_id,
                     SaliencyReduce reduce = SaliencyReduce::kSignedSum);

// Tab-separated token/value file; values survive a parse round-trip exactly.
void render_saliency_tsv(const SaliencyMap& map, const std::string& path);
SaliencyMap parse_saliency_tsv(const std::string& path);

// Self-contained HTML: negatives blue, positives red, opacity |v|/max|v|.
void render_saliency_html(const SaliencyMap& map, const std::string& path);

// {note_id}.{class}.saliency.{tsv|html} under out_dir; returns the two paths.
std::pair<std::string, std::string> render_saliency(const SaliencyMap& map,
                                                    const std::string& out_dir);

}  // namespace finegrain
