#include "finegrain/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace finegrain {

using nlohmann::json;

std::string note_to_json_line(const RawNote& note) {
  json j;
  j["id"] = note.id;
  j["text"] = note.text;
  if (note.labels) j["labels"] = *note.labels;
  if (note.meta) {
    j["meta"] = {{"age_days", note.meta->age_days},
                 {"gender", note.meta->gender},
                 {"admit_month", note.meta->admit_month}};
  }
  return j.dump();
}

RawNote note_from_json_line(const std::string& line) {
  json j = json::parse(line);
  RawNote note;
  note.id = j.at("id").get<std::string>();
  note.text = j.at("text").get<std::string>();
  if (j.contains("labels") && !j["labels"].is_null()) {
    auto v = j["labels"].get<std::vector<int>>();
    if (v.size() != 4) throw ValidationError("note " + note.id + ": labels must have 4 entries");
    std::array<int, 4> labels{};
    int ones = 0;
    for (int i = 0; i < 4; ++i) {
      if (v[i] != 0 && v[i] != 1) throw ValidationError("note " + note.id + ": labels must be 0/1");
      labels[i] = v[i];
      ones += v[i];
    }
    if (ones == 0) throw ValidationError("note " + note.id + ": labels must contain at least one 1");
    note.labels = labels;
  }
  if (j.contains("meta") && !j["meta"].is_null()) {
    NoteMeta meta;
    meta.age_days = j["meta"].at("age_days").get<int>();
    meta.gender = j["meta"].at("gender").get<std::string>();
    meta.admit_month = j["meta"].at("admit_month").get<int>();
    if (meta.age_days < 0) throw ValidationError("note " + note.id + ": age_days must be >= 0");
    if (meta.gender != "male" && meta.gender != "female") {
      throw ValidationError("note " + note.id + ": gender must be male|female");
    }
    if (meta.admit_month < 1 || meta.admit_month > 12) {
      throw ValidationError("note " + note.id + ": admit_month must be in 1..12");
    }
    note.meta = meta;
  }
  return note;
}

std::vector<RawNote> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::vector<RawNote> notes;
  std::set<std::string> ids;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    RawNote note;
    try {
      note = note_from_json_line(line);
    } catch (const json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!ids.insert(note.id).second) {
      throw ValidationError(path + ": duplicate note id " + note.id);
    }
    notes.push_back(std::move(note));
  }
  return notes;
}

void save_corpus(const std::string& path, const std::vector<RawNote>& notes) {
  std::ostringstream out;
  for (const auto& note : notes) out << note_to_json_line(note) << "\n";
  write_text_file(path, out.str());
}

}  // namespace finegrain
