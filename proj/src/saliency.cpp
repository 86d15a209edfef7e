#include "finegrain/saliency.hpp"

#include <cmath>
#include <sstream>

namespace finegrain {

SaliencyMap saliency(FineGrainNet& net, const NoteInput& note, const Vocabulary& vocab,
                     int target_class, const std::string& note_id, SaliencyReduce reduce) {
  if (target_class < 0 || target_class >= 4) {
    throw ContractError("target_class must be in [0,4), got " + std::to_string(target_class));
  }
  Tape tape;
  Rng rng(0);
  ForwardTrace trace;
  auto logits = net.forward(tape, {note}, /*train=*/false, rng, &trace);
  auto target = take_scalar(tape, logits, static_cast<size_t>(target_class));
  tape.backward(target);

  const TensorPtr& t_embed = trace.t_embed;
  if (!t_embed) throw ContractError("saliency requires a model with a text stream");
  const int C = net.config().C, L = net.config().L;
  SaliencyMap map;
  map.note_id = note_id;
  map.target_class = target_class;
  for (int l = 0; l < note.seq.true_length && l < L; ++l) {
    double v = 0.0;
    for (int c = 0; c < C; ++c) {
      double g = t_embed->grad.empty() ? 0.0 : t_embed->grad[static_cast<size_t>(c) * L + l];
      v += reduce == SaliencyReduce::kSignedSum ? g : g * g;
    }
    if (reduce == SaliencyReduce::kL2) v = std::sqrt(v);
    map.values.push_back(v);
    map.tokens.push_back(vocab.token_of(note.seq.ids[static_cast<size_t>(l)]));
  }
  return map;
}

void render_saliency_tsv(const SaliencyMap& map, const std::string& path) {
  std::ostringstream out;
  out << "# note_id\t" << map.note_id << "\tclass\t" << map.target_class << "\n";
  for (size_t i = 0; i < map.tokens.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", map.values[i]);
    out << map.tokens[i] << "\t" << buf << "\n";
  }
  write_text_file(path, out.str());
}

SaliencyMap parse_saliency_tsv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  SaliencyMap map;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      size_t p1 = line.find('\t');
      size_t p2 = line.find('\t', p1 + 1);
      size_t p3 = line.find('\t', p2 + 1);
      map.note_id = line.substr(p1 + 1, p2 - p1 - 1);
      map.target_class = std::stoi(line.substr(p3 + 1));
      continue;
    }
    size_t tab = line.rfind('\t');
    if (tab == std::string::npos) throw ValidationError("malformed saliency line: " + line);
    map.tokens.push_back(line.substr(0, tab));
    map.values.push_back(std::stod(line.substr(tab + 1)));
  }
  return map;
}

namespace {

std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

void render_saliency_html(const SaliencyMap& map, const std::string& path) {
  double max_abs = 0.0;
  for (double v : map.values) max_abs = std::max(max_abs, std::abs(v));
  std::ostringstream out;
  out << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">\n"
      << "<title>saliency " << html_escape(map.note_id) << " class " << map.target_class
      << "</title>\n"
      << "<style>body{font-family:monospace;line-height:1.9;margin:2em}"
      << "span{padding:1px 3px;margin:1px;border-radius:3px}</style></head>\n<body>\n"
      << "<p>note " << html_escape(map.note_id) << ", class " << map.target_class << "</p>\n<p>\n";
  for (size_t i = 0; i < map.tokens.size(); ++i) {
    double v = map.values[i];
    double opacity = max_abs > 0.0 ? std::abs(v) / max_abs : 0.0;
    const char* rgb = v >= 0.0 ? "220,40,40" : "40,70,220";
    char buf[96];
    std::snprintf(buf, sizeof(buf), "<span style=\"background:rgba(%s,%.4f)\">", rgb, opacity);
    out << buf << html_escape(map.tokens[i]) << "</span>\n";
  }
  out << "</p>\n</body></html>\n";
  write_text_file(path, out.str());
}

std::pair<std::string, std::string> render_saliency(const SaliencyMap& map,
                                                    const std::string& out_dir) {
  std::string base = out_dir + "/" + map.note_id + "." + std::to_string(map.target_class) +
                     ".saliency.";
  std::string tsv = base + "tsv";
  std::string html = base + "html";
  render_saliency_tsv(map, tsv);
  render_saliency_html(map, html);
  return {tsv, html};
}

}  // namespace finegrain
