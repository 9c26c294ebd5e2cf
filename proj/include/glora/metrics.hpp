#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glora/korean.hpp"

namespace glora {

struct EditCounts {
  int64_t sub = 0;
  int64_t del = 0;
  int64_t ins = 0;
  int64_t total() const { return sub + del + ins; }
};

// Unit-cost Levenshtein with a deterministic backtrace; ties resolve
// substitution > deletion > insertion.
EditCounts edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);
EditCounts edit_distance_ids(const std::vector<int>& ref, const std::vector<int>& hyp);

enum class ErrorUnit { Word, Char, Jamo };

ErrorUnit unit_from_string(const std::string& s);
std::string unit_to_string(ErrorUnit u);

// One utterance at one granularity. rate = (S+D+I) / ref_len; insertions
// can push it above 1.
struct RateRow {
  ErrorUnit unit = ErrorUnit::Word;
  EditCounts counts;
  int64_t ref_len = 0;
  double rate = 0.0;
};

// Segmentation: words split on whitespace; char and jamo exclude
// whitespace; jamo expands syllables via to_jamo_sequence. Both texts are
// jamo-normalized to `lineup` before segmentation (None = leave as is).
RateRow rate(const std::string& ref, const std::string& hyp, ErrorUnit unit, JamoLineup lineup);

struct ErrorRateReport {
  std::vector<std::vector<RateRow>> per_utterance;  // [utterance][unit]
  std::vector<RateRow> aggregate;                   // pooled: sum errors / sum lengths
  std::vector<ErrorUnit> units;
  JamoLineup lineup = JamoLineup::Compatibility;
};

// Corpus-level pooling: aggregate rate is sum(S+D+I) / sum(N), invariant
// under row permutation.
std::vector<RateRow> aggregate(const std::vector<std::vector<RateRow>>& rows);

ErrorRateReport evaluate_pairs(const std::vector<std::pair<std::string, std::string>>& pairs,
                               const std::vector<ErrorUnit>& units, JamoLineup lineup);

// "ref<TAB>hyp" per line.
std::vector<std::pair<std::string, std::string>> read_pair_file(const std::string& path);

}  // namespace glora
