#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "finegrain/common.hpp"

namespace finegrain {

inline constexpr std::array<const char*, 4> kDiseaseNames = {"pneumonia", "rti", "bronchitis",
                                                             "asthma"};
inline constexpr int kNumClasses = 4;

struct NoteMeta {
  int age_days = 0;          // >= 0
  std::string gender;        // "male" | "female"
  int admit_month = 1;       // 1..12
};

struct RawNote {
  std::string id;
  std::string text;
  std::optional<std::array<int, 4>> labels;  // at least one 1 when present
  std::optional<NoteMeta> meta;
};

struct CleanNote {
  std::string id;
  std::string text;
};

// Corpus files are JSONL, one note per line, UTF-8.
std::vector<RawNote> load_corpus(const std::string& path);
void save_corpus(const std::string& path, const std::vector<RawNote>& notes);
std::string note_to_json_line(const RawNote& note);
RawNote note_from_json_line(const std::string& line);

}  // namespace finegrain
