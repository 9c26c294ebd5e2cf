#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace glora {

// --- UTF-8 <-> code points ---------------------------------------------

std::vector<char32_t> utf8_decode(const std::string& s);
std::string utf8_encode(const std::vector<char32_t>& cps);
std::string utf8_encode(char32_t cp);

// --- Hangul syllable arithmetic -----------------------------------------

// Indices follow the Unicode composition rule for the precomposed block:
// code = 0xAC00 + (choseong * 21 + jungseong) * 28 + jongseong.
struct JamoTriple {
  int choseong = 0;   // [0, 18]
  int jungseong = 0;  // [0, 20]
  int jongseong = 0;  // [0, 27], 0 = absent
};

bool is_precomposed_syllable(char32_t cp);

JamoTriple decompose_syllable(char32_t cp);  // throws outside [U+AC00, U+D7A3]
char32_t compose_syllable(const JamoTriple& t);

// Two Unicode encodings for isolated jamo: the conjoining lineup
// (U+1100/U+1161/U+11A8 families) and the compatibility block (U+31xx).
enum class JamoLineup { Conjoining, Compatibility, None };

JamoLineup lineup_from_string(const std::string& s);
std::string lineup_to_string(JamoLineup m);

// Expands every precomposed syllable into its 2-3 jamo in the requested
// lineup; everything else (including whitespace) passes through unchanged.
std::string to_jamo_sequence(const std::string& text, JamoLineup lineup);

// Maps isolated jamo characters onto the target lineup via a fixed
// bidirectional table. Precomposed syllables and non-jamo are untouched;
// archaic jamo outside the table pass through and bump *warnings.
// The conjoining->compatibility direction is many-to-one (a consonant's
// choseong and jongseong forms share one compatibility code point); the
// reverse picks the choseong form when one exists, otherwise the
// jongseong-only cluster form.
std::string normalize_jamo(const std::string& text, JamoLineup target,
                           int* warnings = nullptr);

// --- Character-level token table ----------------------------------------

// Bijective token <-> id table. Ids 0-3 are reserved for the specials
// <pad>, <bos>, <eos>, <blank> and are never re-assigned; extension only
// appends. Text passes through the table's jamo normalization before any
// lookup.
class TokenTable {
 public:
  static constexpr int pad_id = 0;
  static constexpr int bos_id = 1;
  static constexpr int eos_id = 2;
  static constexpr int blank_id = 3;

  explicit TokenTable(JamoLineup mode = JamoLineup::Compatibility);

  JamoLineup mode() const { return mode_; }
  int size() const { return static_cast<int>(tokens_.size()); }
  bool contains(const std::string& token) const { return ids_.count(token) > 0; }
  int id_of(const std::string& token) const;
  const std::string& token_of(int id) const;

  std::string normalize(const std::string& text) const;

  // Appends every character occurring in the texts but absent from the
  // table, in first-occurrence order. Returns the number appended.
  int extend(const std::vector<std::string>& texts);

  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;  // skips specials

  void save(const std::string& path) const;
  static TokenTable load(const std::string& path);

 private:
  JamoLineup mode_;
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
  void append(const std::string& token);
};

}  // namespace glora
