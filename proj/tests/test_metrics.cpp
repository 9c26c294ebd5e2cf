#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "glora/metrics.hpp"
#include "glora/rng.hpp"

using namespace glora;

namespace {

// exhaustive recursion, exponential and obviously correct
int64_t edit_oracle(const std::vector<std::string>& ref, const std::vector<std::string>& hyp,
                    size_t i, size_t j) {
  if (i == ref.size()) return static_cast<int64_t>(hyp.size() - j);
  if (j == hyp.size()) return static_cast<int64_t>(ref.size() - i);
  int64_t best = edit_oracle(ref, hyp, i + 1, j + 1) + (ref[i] == hyp[j] ? 0 : 1);
  best = std::min(best, edit_oracle(ref, hyp, i + 1, j) + 1);
  best = std::min(best, edit_oracle(ref, hyp, i, j + 1) + 1);
  return best;
}

std::vector<std::string> random_seq(Prng& rng, int max_len) {
  std::vector<std::string> out;
  int len = static_cast<int>(rng.below(static_cast<uint64_t>(max_len + 1)));
  for (int i = 0; i < len; ++i) out.push_back(std::string(1, static_cast<char>('a' + rng.below(3))));
  return out;
}

}  // namespace

TEST_CASE("edit distance basics") {
  EditCounts same = edit_distance({"a", "b"}, {"a", "b"});
  CHECK(same.total() == 0);

  EditCounts sub = edit_distance({"a", "b", "c"}, {"a", "x", "c"});
  CHECK(sub.sub == 1);
  CHECK(sub.del == 0);
  CHECK(sub.ins == 0);

  CHECK(edit_distance({}, {}).total() == 0);
  CHECK(edit_distance({"a"}, {}).del == 1);
  CHECK(edit_distance({}, {"a"}).ins == 1);
}

TEST_CASE("edit distance totals match the exhaustive oracle") {
  Prng rng(42);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> ref = random_seq(rng, 6);
    std::vector<std::string> hyp = random_seq(rng, 6);
    EditCounts c = edit_distance(ref, hyp);
    CHECK(c.total() == edit_oracle(ref, hyp, 0, 0));
    // symmetry: total equal, deletions and insertions swap roles
    EditCounts r = edit_distance(hyp, ref);
    CHECK(r.total() == c.total());
    CHECK(r.del == c.ins);
    CHECK(r.ins == c.del);
    CHECK(r.sub == c.sub);
  }
}

TEST_CASE("rates on the multilingual sentence") {
  std::string ref = "I go to 경복궁";
  RateRow wer_same = rate(ref, ref, ErrorUnit::Word, JamoLineup::Compatibility);
  CHECK(wer_same.rate == 0.0);
  CHECK(rate(ref, ref, ErrorUnit::Char, JamoLineup::Compatibility).rate == 0.0);
  CHECK(rate(ref, ref, ErrorUnit::Jamo, JamoLineup::Compatibility).rate == 0.0);

  RateRow wer = rate(ref, "I go to Gyeongboggung", ErrorUnit::Word, JamoLineup::Compatibility);
  CHECK(wer.ref_len == 4);
  CHECK(wer.counts.sub == 1);
  CHECK(wer.rate == doctest::Approx(0.25));
}

TEST_CASE("character and jamo granularity for single syllables") {
  RateRow cer = rate("경", "감", ErrorUnit::Char, JamoLineup::Compatibility);
  CHECK(cer.ref_len == 1);
  CHECK(cer.rate == doctest::Approx(1.0));

  // ㄱㅕㅇ vs ㄱㅏㅁ: two substitutions over three jamo
  RateRow jer = rate("경", "감", ErrorUnit::Jamo, JamoLineup::Compatibility);
  CHECK(jer.ref_len == 3);
  CHECK(jer.counts.sub == 2);
  CHECK(jer.rate == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("empty reference is rejected") {
  CHECK_THROWS_WITH_AS(rate("", "x", ErrorUnit::Word, JamoLineup::None),
                       doctest::Contains("empty reference"), std::invalid_argument);
  CHECK_THROWS_AS(rate("   ", "x", ErrorUnit::Char, JamoLineup::None), std::invalid_argument);
}

TEST_CASE("whitespace is excluded from char and jamo units") {
  RateRow cer = rate("a b", "ab", ErrorUnit::Char, JamoLineup::None);
  CHECK(cer.ref_len == 2);
  CHECK(cer.counts.total() == 0);
}

TEST_CASE("aggregate pools counts, not rates") {
  std::vector<std::vector<RateRow>> rows;
  rows.push_back({rate("a b", "a x", ErrorUnit::Word, JamoLineup::None)});   // 1 error / 2
  rows.push_back({rate("c d", "c d", ErrorUnit::Word, JamoLineup::None)});   // 0 / 2
  std::vector<RateRow> agg = aggregate(rows);
  CHECK(agg[0].rate == doctest::Approx(0.25));
  CHECK(agg[0].ref_len == 4);

  // permutation invariance
  std::swap(rows[0], rows[1]);
  std::vector<RateRow> agg2 = aggregate(rows);
  CHECK(agg2[0].rate == agg[0].rate);
  CHECK(agg2[0].counts.total() == agg[0].counts.total());

  // single row aggregates to itself
  std::vector<std::vector<RateRow>> one = {
      {rate("x y z", "x q z", ErrorUnit::Word, JamoLineup::None)}};
  CHECK(aggregate(one)[0].rate == one[0][0].rate);

  CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
}

TEST_CASE("jamo rate is insensitive to the input lineup after normalize") {
  // same pair written with isolated jamo from the two lineups
  std::string ref_compat = utf8_encode(static_cast<char32_t>(0x3131)) + "경";
  std::string ref_conj = utf8_encode(static_cast<char32_t>(0x1100)) + "경";
  std::string hyp = "감";
  for (JamoLineup lu : {JamoLineup::Compatibility, JamoLineup::Conjoining}) {
    RateRow a = rate(ref_compat, hyp, ErrorUnit::Jamo, lu);
    RateRow b = rate(ref_conj, hyp, ErrorUnit::Jamo, lu);
    CHECK(a.rate == b.rate);
    CHECK(a.counts.total() == b.counts.total());
  }
}

TEST_CASE("evaluate_pairs produces a full report") {
  std::vector<std::pair<std::string, std::string>> pairs = {
      {"I go to 경복궁", "I go to 경복궁"},
      {"I go to 경복궁", "I go to Gyeongboggung"},
  };
  ErrorRateReport report = evaluate_pairs(
      pairs, {ErrorUnit::Word, ErrorUnit::Char, ErrorUnit::Jamo}, JamoLineup::Compatibility);
  CHECK(report.per_utterance.size() == 2);
  CHECK(report.aggregate.size() == 3);
  CHECK(report.per_utterance[0][0].rate == 0.0);
  CHECK(report.aggregate[0].rate == doctest::Approx(1.0 / 8.0));  // 1 word error / 8 words
}
