#include "glora/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace glora {

namespace {

// DP over cost; backtrace prefers substitution, then deletion, then
// insertion when costs tie.
template <typename Seq>
EditCounts levenshtein(const Seq& ref, const Seq& hyp) {
  size_t n = ref.size(), m = hyp.size();
  std::vector<int64_t> dp((n + 1) * (m + 1));
  auto at = [&](size_t i, size_t j) -> int64_t& { return dp[i * (m + 1) + j]; };
  for (size_t i = 0; i <= n; ++i) at(i, 0) = static_cast<int64_t>(i);
  for (size_t j = 0; j <= m; ++j) at(0, j) = static_cast<int64_t>(j);
  for (size_t i = 1; i <= n; ++i)
    for (size_t j = 1; j <= m; ++j) {
      int64_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      int64_t up = at(i - 1, j) + 1;    // deletion
      int64_t left = at(i, j - 1) + 1;  // insertion
      at(i, j) = std::min({diag, up, left});
    }

  EditCounts c;
  size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++c.sub;
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++c.del;
      --i;
    } else {
      ++c.ins;
      --j;
    }
  }
  return c;
}

bool is_space(char32_t cp) {
  return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == 0x3000;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::vector<char32_t> cur;
  for (char32_t cp : utf8_decode(text)) {
    if (is_space(cp)) {
      if (!cur.empty()) {
        out.push_back(utf8_encode(cur));
        cur.clear();
      }
    } else {
      cur.push_back(cp);
    }
  }
  if (!cur.empty()) out.push_back(utf8_encode(cur));
  return out;
}

std::vector<std::string> split_chars(const std::string& text) {
  std::vector<std::string> out;
  for (char32_t cp : utf8_decode(text))
    if (!is_space(cp)) out.push_back(utf8_encode(cp));
  return out;
}

std::vector<std::string> segment(const std::string& text, ErrorUnit unit, JamoLineup lineup) {
  switch (unit) {
    case ErrorUnit::Word: return split_words(text);
    case ErrorUnit::Char: return split_chars(text);
    case ErrorUnit::Jamo: {
      JamoLineup lu = lineup == JamoLineup::None ? JamoLineup::Compatibility : lineup;
      return split_chars(to_jamo_sequence(text, lu));
    }
  }
  return {};
}

}  // namespace

EditCounts edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  return levenshtein(ref, hyp);
}

EditCounts edit_distance_ids(const std::vector<int>& ref, const std::vector<int>& hyp) {
  return levenshtein(ref, hyp);
}

ErrorUnit unit_from_string(const std::string& s) {
  if (s == "wer" || s == "word") return ErrorUnit::Word;
  if (s == "cer" || s == "char") return ErrorUnit::Char;
  if (s == "jer" || s == "jamo") return ErrorUnit::Jamo;
  throw std::invalid_argument("unknown error unit: " + s);
}

std::string unit_to_string(ErrorUnit u) {
  switch (u) {
    case ErrorUnit::Word: return "wer";
    case ErrorUnit::Char: return "cer";
    case ErrorUnit::Jamo: return "jer";
  }
  return "?";
}

RateRow rate(const std::string& ref, const std::string& hyp, ErrorUnit unit, JamoLineup lineup) {
  std::string nref = normalize_jamo(ref, lineup);
  std::string nhyp = normalize_jamo(hyp, lineup);
  std::vector<std::string> r = segment(nref, unit, lineup);
  std::vector<std::string> h = segment(nhyp, unit, lineup);
  if (r.empty())
    throw std::invalid_argument("rate: empty reference after " + unit_to_string(unit) +
                                " segmentation");
  RateRow row;
  row.unit = unit;
  row.counts = edit_distance(r, h);
  row.ref_len = static_cast<int64_t>(r.size());
  row.rate = static_cast<double>(row.counts.total()) / static_cast<double>(row.ref_len);
  return row;
}

std::vector<RateRow> aggregate(const std::vector<std::vector<RateRow>>& rows) {
  if (rows.empty()) throw std::invalid_argument("aggregate: no rows");
  size_t n_units = rows.front().size();
  std::vector<RateRow> agg(n_units);
  for (size_t u = 0; u < n_units; ++u) agg[u].unit = rows.front()[u].unit;
  for (const auto& utt : rows) {
    if (utt.size() != n_units) throw std::invalid_argument("aggregate: ragged rows");
    for (size_t u = 0; u < n_units; ++u) {
      agg[u].counts.sub += utt[u].counts.sub;
      agg[u].counts.del += utt[u].counts.del;
      agg[u].counts.ins += utt[u].counts.ins;
      agg[u].ref_len += utt[u].ref_len;
    }
  }
  for (auto& a : agg)
    a.rate = static_cast<double>(a.counts.total()) / static_cast<double>(a.ref_len);
  return agg;
}

ErrorRateReport evaluate_pairs(const std::vector<std::pair<std::string, std::string>>& pairs,
                               const std::vector<ErrorUnit>& units, JamoLineup lineup) {
  if (pairs.empty()) throw std::invalid_argument("evaluate_pairs: no input pairs");
  ErrorRateReport report;
  report.units = units;
  report.lineup = lineup;
  for (const auto& [ref, hyp] : pairs) {
    std::vector<RateRow> rows;
    for (ErrorUnit u : units) rows.push_back(rate(ref, hyp, u, lineup));
    report.per_utterance.push_back(std::move(rows));
  }
  report.aggregate = aggregate(report.per_utterance);
  return report;
}

std::vector<std::pair<std::string, std::string>> read_pair_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open pair file: " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected ref<TAB>hyp");
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

}  // namespace glora
