#include "glora/korean.hpp"

#include <array>
#include <fstream>
#include <stdexcept>

namespace glora {

namespace {

constexpr char32_t kSyllableBase = 0xAC00;
constexpr char32_t kSyllableEnd = 0xD7A3;
constexpr char32_t kChoseongBase = 0x1100;   // 19 consecutive
constexpr char32_t kJungseongBase = 0x1161;  // 21 consecutive
constexpr char32_t kJongseongBase = 0x11A8;  // 27 consecutive (index 1..27)

// compatibility code points per choseong index 0..18
constexpr std::array<char32_t, 19> kChoseongCompat = {
    0x3131, 0x3132, 0x3134, 0x3137, 0x3138, 0x3139, 0x3141, 0x3142, 0x3143, 0x3145,
    0x3146, 0x3147, 0x3148, 0x3149, 0x314A, 0x314B, 0x314C, 0x314D, 0x314E};

// compatibility code points per jongseong index 1..27
constexpr std::array<char32_t, 27> kJongseongCompat = {
    0x3131, 0x3132, 0x3133, 0x3134, 0x3135, 0x3136, 0x3137, 0x3139, 0x313A,
    0x313B, 0x313C, 0x313D, 0x313E, 0x313F, 0x3140, 0x3141, 0x3142, 0x3144,
    0x3145, 0x3146, 0x3147, 0x3148, 0x314A, 0x314B, 0x314C, 0x314D, 0x314E};

bool is_conjoining_choseong(char32_t c) { return c >= kChoseongBase && c < kChoseongBase + 19; }
bool is_conjoining_jungseong(char32_t c) { return c >= kJungseongBase && c < kJungseongBase + 21; }
bool is_conjoining_jongseong(char32_t c) { return c >= kJongseongBase && c < kJongseongBase + 27; }
bool is_compat_consonant(char32_t c) { return c >= 0x3131 && c <= 0x314E; }
bool is_compat_vowel(char32_t c) { return c >= 0x314F && c <= 0x3163; }

int choseong_index_of_compat(char32_t c) {
  for (size_t i = 0; i < kChoseongCompat.size(); ++i)
    if (kChoseongCompat[i] == c) return static_cast<int>(i);
  return -1;
}

int jongseong_index_of_compat(char32_t c) {
  for (size_t i = 0; i < kJongseongCompat.size(); ++i)
    if (kJongseongCompat[i] == c) return static_cast<int>(i) + 1;
  return -1;
}

}  // namespace

// ---------------------------------------------------------------------------
// UTF-8

std::vector<char32_t> utf8_decode(const std::string& s) {
  std::vector<char32_t> out;
  size_t i = 0;
  while (i < s.size()) {
    unsigned char b0 = static_cast<unsigned char>(s[i]);
    char32_t cp = 0;
    int extra = 0;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      extra = 1;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      extra = 2;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      extra = 3;
    } else {
      throw std::invalid_argument("invalid UTF-8 at byte " + std::to_string(i));
    }
    if (i + static_cast<size_t>(extra) >= s.size())
      throw std::invalid_argument("truncated UTF-8 sequence at byte " + std::to_string(i));
    for (int k = 1; k <= extra; ++k) {
      unsigned char b = static_cast<unsigned char>(s[i + static_cast<size_t>(k)]);
      if ((b & 0xC0) != 0x80)
        throw std::invalid_argument("invalid UTF-8 continuation at byte " + std::to_string(i + static_cast<size_t>(k)));
      cp = (cp << 6) | (b & 0x3F);
    }
    out.push_back(cp);
    i += static_cast<size_t>(extra) + 1;
  }
  return out;
}

std::string utf8_encode(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

std::string utf8_encode(const std::vector<char32_t>& cps) {
  std::string out;
  for (char32_t cp : cps) out += utf8_encode(cp);
  return out;
}

// ---------------------------------------------------------------------------
// Syllable arithmetic

bool is_precomposed_syllable(char32_t cp) {
  return cp >= kSyllableBase && cp <= kSyllableEnd;
}

JamoTriple decompose_syllable(char32_t cp) {
  if (!is_precomposed_syllable(cp))
    throw std::invalid_argument("not a precomposed syllable: U+" + std::to_string(static_cast<uint32_t>(cp)));
  int index = static_cast<int>(cp - kSyllableBase);
  JamoTriple t;
  t.choseong = index / 588;
  t.jungseong = (index % 588) / 28;
  t.jongseong = index % 28;
  return t;
}

char32_t compose_syllable(const JamoTriple& t) {
  if (t.choseong < 0 || t.choseong > 18 || t.jungseong < 0 || t.jungseong > 20 ||
      t.jongseong < 0 || t.jongseong > 27)
    throw std::invalid_argument("jamo indices out of range");
  return kSyllableBase + static_cast<char32_t>((t.choseong * 21 + t.jungseong) * 28 + t.jongseong);
}

JamoLineup lineup_from_string(const std::string& s) {
  if (s == "conjoining") return JamoLineup::Conjoining;
  if (s == "compatibility") return JamoLineup::Compatibility;
  if (s == "none") return JamoLineup::None;
  throw std::invalid_argument("unknown jamo lineup: " + s);
}

std::string lineup_to_string(JamoLineup m) {
  switch (m) {
    case JamoLineup::Conjoining: return "conjoining";
    case JamoLineup::Compatibility: return "compatibility";
    case JamoLineup::None: return "none";
  }
  return "none";
}

std::string to_jamo_sequence(const std::string& text, JamoLineup lineup) {
  if (lineup == JamoLineup::None)
    throw std::invalid_argument("to_jamo_sequence: lineup must be conjoining or compatibility");
  std::vector<char32_t> out;
  for (char32_t cp : utf8_decode(text)) {
    if (!is_precomposed_syllable(cp)) {
      out.push_back(cp);
      continue;
    }
    JamoTriple t = decompose_syllable(cp);
    if (lineup == JamoLineup::Conjoining) {
      out.push_back(kChoseongBase + static_cast<char32_t>(t.choseong));
      out.push_back(kJungseongBase + static_cast<char32_t>(t.jungseong));
      if (t.jongseong > 0) out.push_back(kJongseongBase + static_cast<char32_t>(t.jongseong - 1));
    } else {
      out.push_back(kChoseongCompat[static_cast<size_t>(t.choseong)]);
      out.push_back(0x314F + static_cast<char32_t>(t.jungseong));
      if (t.jongseong > 0) out.push_back(kJongseongCompat[static_cast<size_t>(t.jongseong - 1)]);
    }
  }
  return utf8_encode(out);
}

std::string normalize_jamo(const std::string& text, JamoLineup target, int* warnings) {
  if (target == JamoLineup::None) return text;
  std::vector<char32_t> out;
  for (char32_t cp : utf8_decode(text)) {
    char32_t mapped = cp;
    if (target == JamoLineup::Compatibility) {
      if (is_conjoining_choseong(cp)) {
        mapped = kChoseongCompat[cp - kChoseongBase];
      } else if (is_conjoining_jungseong(cp)) {
        mapped = 0x314F + (cp - kJungseongBase);
      } else if (is_conjoining_jongseong(cp)) {
        mapped = kJongseongCompat[cp - kJongseongBase];
      } else if ((cp >= 0x1100 && cp <= 0x11FF) && warnings) {
        ++*warnings;  // archaic conjoining jamo outside the modern table
      }
    } else {
      if (is_compat_consonant(cp)) {
        int cho = choseong_index_of_compat(cp);
        if (cho >= 0) {
          mapped = kChoseongBase + static_cast<char32_t>(cho);
        } else {
          int jong = jongseong_index_of_compat(cp);
          if (jong >= 1) mapped = kJongseongBase + static_cast<char32_t>(jong - 1);
        }
      } else if (is_compat_vowel(cp)) {
        mapped = kJungseongBase + (cp - 0x314F);
      } else if (cp >= 0x3165 && cp <= 0x318E && warnings) {
        ++*warnings;  // archaic compatibility jamo
      }
    }
    out.push_back(mapped);
  }
  return utf8_encode(out);
}

// ---------------------------------------------------------------------------
// TokenTable

namespace {
const std::array<const char*, 4> kSpecials = {"<pad>", "<bos>", "<eos>", "<blank>"};

std::string escape_token(const std::string& t) {
  std::string out;
  for (char c : t) {
    if (c == '\\') out += "\\\\";
    else if (c == '\t') out += "\\t";
    else if (c == '\n') out += "\\n";
    else out.push_back(c);
  }
  return out;
}

std::string unescape_token(const std::string& t) {
  std::string out;
  for (size_t i = 0; i < t.size(); ++i) {
    if (t[i] != '\\' || i + 1 == t.size()) {
      out.push_back(t[i]);
      continue;
    }
    ++i;
    if (t[i] == 't') out.push_back('\t');
    else if (t[i] == 'n') out.push_back('\n');
    else out.push_back(t[i]);
  }
  return out;
}
}  // namespace

TokenTable::TokenTable(JamoLineup mode) : mode_(mode) {
  for (const char* s : kSpecials) append(s);
}

void TokenTable::append(const std::string& token) {
  ids_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
}

int TokenTable::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) throw std::out_of_range("token not in table: '" + token + "'");
  return it->second;
}

const std::string& TokenTable::token_of(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("token id out of range: " + std::to_string(id));
  return tokens_[static_cast<size_t>(id)];
}

std::string TokenTable::normalize(const std::string& text) const {
  return normalize_jamo(text, mode_);
}

int TokenTable::extend(const std::vector<std::string>& texts) {
  int appended = 0;
  for (const std::string& raw : texts) {
    for (char32_t cp : utf8_decode(normalize(raw))) {
      std::string tok = utf8_encode(cp);
      if (!contains(tok)) {
        append(tok);
        ++appended;
      }
    }
  }
  return appended;
}

std::vector<int> TokenTable::encode(const std::string& text) const {
  std::vector<int> ids;
  for (char32_t cp : utf8_decode(normalize(text))) {
    std::string tok = utf8_encode(cp);
    auto it = ids_.find(tok);
    if (it == ids_.end())
      throw std::invalid_argument("encode: character '" + tok + "' not covered by the token table");
    ids.push_back(it->second);
  }
  return ids;
}

std::string TokenTable::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id >= 0 && id <= blank_id) continue;
    out += token_of(id);
  }
  return out;
}

void TokenTable::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "#mode\t" << lineup_to_string(mode_) << "\n";
  for (int i = 0; i < size(); ++i)
    f << i << "\t" << escape_token(tokens_[static_cast<size_t>(i)]) << "\n";
  if (!f) throw std::runtime_error("write failed: " + path);
}

TokenTable TokenTable::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open token table: " + path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("#mode\t", 0) != 0)
    throw std::runtime_error("token table missing #mode header: " + path);
  TokenTable table(lineup_from_string(line.substr(6)));
  int expect = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("malformed token table line: " + line);
    int id = std::stoi(line.substr(0, tab));
    std::string tok = unescape_token(line.substr(tab + 1));
    if (id != expect) throw std::runtime_error("token table ids must be consecutive from 0");
    if (id <= blank_id) {
      if (tok != kSpecials[static_cast<size_t>(id)])
        throw std::runtime_error("token table special mismatch at id " + std::to_string(id));
    } else {
      table.append(tok);
    }
    ++expect;
  }
  return table;
}

}  // namespace glora
