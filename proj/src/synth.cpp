#include "glora/synth.hpp"

#include <algorithm>
#include <stdexcept>

#include "glora/container.hpp"
#include "glora/rng.hpp"

namespace glora {

void SynthConfig::validate() const {
  if (lang_a_lo < 4) throw std::invalid_argument("language ranges must not include specials");
  if (lang_a_lo >= lang_a_hi || lang_b_lo >= lang_b_hi)
    throw std::invalid_argument("empty language id range");
  if (lang_a_hi > lang_b_lo && lang_b_hi > lang_a_lo)
    throw std::invalid_argument("language id ranges overlap");
  if (min_tokens < 1 || min_tokens > max_tokens)
    throw std::invalid_argument("bad utterance length range");
  if (min_frames_per_token < 1 || min_frames_per_token > max_frames_per_token)
    throw std::invalid_argument("bad frames-per-token range");
  if (feature_dim < 1) throw std::invalid_argument("feature_dim must be positive");
  if (noise_sigma < 0) throw std::invalid_argument("noise sigma must be >= 0");
  if (switch_prob < 0 || switch_prob > 1) throw std::invalid_argument("switch_prob outside [0,1]");
}

CorpusKind corpus_kind_from_string(const std::string& s) {
  if (s == "mono-a") return CorpusKind::MonoA;
  if (s == "code-switched" || s == "cs") return CorpusKind::CodeSwitched;
  throw std::invalid_argument("unknown corpus kind: " + s);
}

std::string corpus_kind_to_string(CorpusKind k) {
  return k == CorpusKind::MonoA ? "mono-a" : "code-switched";
}

namespace {

constexpr uint64_t kProtoStream = 0x70726f746fULL;  // "proto"

// The prototype table is the corpus's acoustic identity: it depends only
// on cfg.seed, so corpora generated with different sampling seeds (train,
// fine-tune, test splits) still share one feature space.
std::vector<double> token_prototype(const SynthConfig& cfg, int token_id) {
  Prng rng(cfg.seed, Prng::mix3(kProtoStream, static_cast<uint64_t>(token_id), 0));
  std::vector<double> v(static_cast<size_t>(cfg.feature_dim));
  for (double& x : v) x = rng.normal();
  return v;
}

}  // namespace

std::vector<Utterance> gen_corpus(const SynthConfig& cfg, CorpusKind kind, int n, uint64_t seed) {
  cfg.validate();
  if (n <= 0) throw std::invalid_argument("gen_corpus: n must be positive");

  int id_hi = std::max(cfg.lang_a_hi, cfg.lang_b_hi);
  std::vector<std::vector<double>> protos(static_cast<size_t>(id_hi));
  for (int id = cfg.lang_a_lo; id < cfg.lang_a_hi; ++id)
    protos[static_cast<size_t>(id)] = token_prototype(cfg, id);
  for (int id = cfg.lang_b_lo; id < cfg.lang_b_hi; ++id)
    protos[static_cast<size_t>(id)] = token_prototype(cfg, id);

  std::vector<Utterance> corpus;
  corpus.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Prng rng(seed, Prng::mix3(0x757474ULL /* "utt" */, static_cast<uint64_t>(i), 1));
    int len = rng.range(cfg.min_tokens, cfg.max_tokens);
    Utterance u;
    std::vector<double> frames;
    int lang = 0;
    for (int t = 0; t < len; ++t) {
      if (kind == CorpusKind::CodeSwitched && rng.next_double() < cfg.switch_prob) lang ^= 1;
      int lo = lang == 0 ? cfg.lang_a_lo : cfg.lang_b_lo;
      int hi = lang == 0 ? cfg.lang_a_hi : cfg.lang_b_hi;
      int id = lo + static_cast<int>(rng.below(static_cast<uint64_t>(hi - lo)));
      u.targets.push_back(id);
      u.lang_tags.push_back(lang);
      int reps = rng.range(cfg.min_frames_per_token, cfg.max_frames_per_token);
      const std::vector<double>& proto = protos[static_cast<size_t>(id)];
      for (int rframe = 0; rframe < reps; ++rframe)
        for (int j = 0; j < cfg.feature_dim; ++j)
          frames.push_back(proto[static_cast<size_t>(j)] + cfg.noise_sigma * rng.normal());
    }
    int t_frames = static_cast<int>(frames.size()) / cfg.feature_dim;
    u.features = Tensor::from_values({t_frames, cfg.feature_dim}, std::move(frames));
    corpus.push_back(std::move(u));
  }
  return corpus;
}

double lang_b_fraction(const std::vector<Utterance>& corpus) {
  int64_t b = 0, total = 0;
  for (const Utterance& u : corpus) {
    for (int tag : u.lang_tags) b += tag;
    total += static_cast<int64_t>(u.lang_tags.size());
  }
  return total == 0 ? 0.0 : static_cast<double>(b) / static_cast<double>(total);
}

void save_corpus(const std::vector<Utterance>& corpus, const SynthConfig& cfg,
                 const std::string& path) {
  Container c;
  c.kind = kKindCorpus;
  c.rank = 0;
  c.fingerprint = 0;
  {
    ContainerEntry e;
    e.name = "config.i32";
    e.dtype = EntryDtype::I32;
    e.ints = {cfg.lang_a_lo, cfg.lang_a_hi, cfg.lang_b_lo, cfg.lang_b_hi,
              cfg.min_tokens, cfg.max_tokens, cfg.min_frames_per_token,
              cfg.max_frames_per_token, cfg.feature_dim,
              static_cast<int32_t>(cfg.seed & 0xFFFFFFFFu),
              static_cast<int32_t>(cfg.seed >> 32),
              static_cast<int32_t>(corpus.size())};
    e.dims = {static_cast<uint32_t>(e.ints.size())};
    c.entries.push_back(std::move(e));
  }
  {
    ContainerEntry e;
    e.name = "config.f64";
    e.dtype = EntryDtype::F64;
    e.floats = {cfg.noise_sigma, cfg.switch_prob};
    e.dims = {2};
    c.entries.push_back(std::move(e));
  }
  for (size_t i = 0; i < corpus.size(); ++i) {
    const Utterance& u = corpus[i];
    std::string prefix = "u" + std::to_string(i);
    ContainerEntry frames;
    frames.name = prefix + ".frames";
    frames.dtype = EntryDtype::F32;
    frames.dims = {static_cast<uint32_t>(u.features.dim(0)),
                   static_cast<uint32_t>(u.features.dim(1))};
    frames.floats = u.features.values();
    c.entries.push_back(std::move(frames));

    ContainerEntry targets;
    targets.name = prefix + ".targets";
    targets.dtype = EntryDtype::I32;
    targets.dims = {static_cast<uint32_t>(u.targets.size())};
    targets.ints.assign(u.targets.begin(), u.targets.end());
    c.entries.push_back(std::move(targets));

    ContainerEntry tags;
    tags.name = prefix + ".lang";
    tags.dtype = EntryDtype::I32;
    tags.dims = {static_cast<uint32_t>(u.lang_tags.size())};
    tags.ints.assign(u.lang_tags.begin(), u.lang_tags.end());
    c.entries.push_back(std::move(tags));
  }
  write_file_atomic(path, write_container(c));
}

std::pair<std::vector<Utterance>, SynthConfig> load_corpus(const std::string& path) {
  std::vector<uint8_t> bytes = read_file(path);
  Container c = read_container(bytes);
  if (c.kind != kKindCorpus)
    throw ContainerError(ContainerErrc::kind_mismatch,
                         "container kind " + std::to_string(c.kind) + " is not a corpus");
  const ContainerEntry* ci = c.find("config.i32");
  const ContainerEntry* cf = c.find("config.f64");
  if (!ci || ci->ints.size() != 12 || !cf || cf->floats.size() != 2)
    throw ContainerError(ContainerErrc::bad_entry, "corpus missing config entries");
  SynthConfig cfg;
  cfg.lang_a_lo = ci->ints[0];
  cfg.lang_a_hi = ci->ints[1];
  cfg.lang_b_lo = ci->ints[2];
  cfg.lang_b_hi = ci->ints[3];
  cfg.min_tokens = ci->ints[4];
  cfg.max_tokens = ci->ints[5];
  cfg.min_frames_per_token = ci->ints[6];
  cfg.max_frames_per_token = ci->ints[7];
  cfg.feature_dim = ci->ints[8];
  cfg.seed = (static_cast<uint64_t>(static_cast<uint32_t>(ci->ints[10])) << 32) |
             static_cast<uint32_t>(ci->ints[9]);
  cfg.noise_sigma = cf->floats[0];
  cfg.switch_prob = cf->floats[1];
  int n = ci->ints[11];

  std::vector<Utterance> corpus;
  corpus.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::string prefix = "u" + std::to_string(i);
    const ContainerEntry* fe = c.find(prefix + ".frames");
    const ContainerEntry* te = c.find(prefix + ".targets");
    const ContainerEntry* le = c.find(prefix + ".lang");
    if (!fe || !te || !le || fe->dims.size() != 2)
      throw ContainerError(ContainerErrc::bad_entry, "corpus missing utterance " + std::to_string(i));
    Utterance u;
    u.features = Tensor::from_values(
        {static_cast<int>(fe->dims[0]), static_cast<int>(fe->dims[1])}, fe->floats);
    u.targets.assign(te->ints.begin(), te->ints.end());
    u.lang_tags.assign(le->ints.begin(), le->ints.end());
    corpus.push_back(std::move(u));
  }
  return {std::move(corpus), cfg};
}

}  // namespace glora
