#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glora/tensor.hpp"

namespace glora {

// Two disjoint token "languages" over a shared vocabulary; each token id
// owns a fixed prototype frame vector and utterances emit noisy repeats of
// the per-token prototypes (many-to-one monotone frame->token alignment).
struct SynthConfig {
  int lang_a_lo = 4, lang_a_hi = 20;  // [lo, hi)
  int lang_b_lo = 20, lang_b_hi = 36;
  int min_tokens = 3, max_tokens = 10;
  int min_frames_per_token = 2, max_frames_per_token = 4;
  int feature_dim = 16;
  double noise_sigma = 0.3;
  double switch_prob = 0.35;  // per-token language flip (code-switched only)
  uint64_t seed = 0;          // prototype (acoustic-identity) seed

  void validate() const;
};

enum class CorpusKind { MonoA, CodeSwitched };

CorpusKind corpus_kind_from_string(const std::string& s);
std::string corpus_kind_to_string(CorpusKind k);

struct Utterance {
  Tensor features;             // [frames x feature_dim]
  std::vector<int> targets;    // token ids, no specials
  std::vector<int> lang_tags;  // 0 = A, 1 = B, per token
};

// Deterministic in (config, kind, seed); `seed` drives utterance sampling
// only, and utterance i depends only on its own counter stream, so any
// index range regenerates identically and different splits share the
// prototype table.
std::vector<Utterance> gen_corpus(const SynthConfig& cfg, CorpusKind kind, int n, uint64_t seed);

// fraction of language-B tokens over the whole corpus
double lang_b_fraction(const std::vector<Utterance>& corpus);

// Container file (kind code 254): frames stored f32, targets/tags i32,
// generation parameters echoed in header entries.
void save_corpus(const std::vector<Utterance>& corpus, const SynthConfig& cfg,
                 const std::string& path);
std::pair<std::vector<Utterance>, SynthConfig> load_corpus(const std::string& path);

}  // namespace glora
