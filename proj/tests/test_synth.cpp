#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "glora/container.hpp"
#include "glora/synth.hpp"

using namespace glora;

TEST_CASE("noiseless utterances repeat the prototype exactly") {
  SynthConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.min_tokens = 1;
  cfg.max_tokens = 1;
  auto corpus = gen_corpus(cfg, CorpusKind::MonoA, 5, 3);
  for (const Utterance& u : corpus) {
    REQUIRE(u.targets.size() == 1);
    const Tensor& f = u.features;
    for (int t = 1; t < f.dim(0); ++t)
      for (int j = 0; j < f.dim(1); ++j) CHECK(f.at(t, j) == f.at(0, j));
  }
}

TEST_CASE("same seed gives bit-identical corpora") {
  SynthConfig cfg;
  auto a = gen_corpus(cfg, CorpusKind::CodeSwitched, 20, 9);
  auto b = gen_corpus(cfg, CorpusKind::CodeSwitched, 20, 9);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].features.same_values(b[i].features));
    CHECK(a[i].targets == b[i].targets);
    CHECK(a[i].lang_tags == b[i].lang_tags);
  }
}

TEST_CASE("utterances depend only on their own index") {
  SynthConfig cfg;
  auto small = gen_corpus(cfg, CorpusKind::CodeSwitched, 5, 13);
  auto large = gen_corpus(cfg, CorpusKind::CodeSwitched, 50, 13);
  for (size_t i = 0; i < small.size(); ++i) {
    CHECK(small[i].features.same_values(large[i].features));
    CHECK(small[i].targets == large[i].targets);
  }
}

TEST_CASE("monolingual corpora never emit language-B tokens") {
  SynthConfig cfg;
  auto corpus = gen_corpus(cfg, CorpusKind::MonoA, 200, 17);
  for (const Utterance& u : corpus)
    for (size_t i = 0; i < u.targets.size(); ++i) {
      CHECK(u.targets[i] >= cfg.lang_a_lo);
      CHECK(u.targets[i] < cfg.lang_a_hi);
      CHECK(u.lang_tags[i] == 0);
    }
}

TEST_CASE("code-switched token mix lands in the expected band") {
  SynthConfig cfg;
  auto corpus = gen_corpus(cfg, CorpusKind::CodeSwitched, 1000, 23);
  double frac = lang_b_fraction(corpus);
  CHECK(frac >= 0.2);
  CHECK(frac <= 0.6);
}

TEST_CASE("frame counts follow the per-token ranges") {
  SynthConfig cfg;
  auto corpus = gen_corpus(cfg, CorpusKind::CodeSwitched, 50, 29);
  for (const Utterance& u : corpus) {
    int n = static_cast<int>(u.targets.size());
    CHECK(n >= cfg.min_tokens);
    CHECK(n <= cfg.max_tokens);
    CHECK(u.features.dim(0) >= n * cfg.min_frames_per_token);
    CHECK(u.features.dim(0) <= n * cfg.max_frames_per_token);
    CHECK(u.features.dim(1) == cfg.feature_dim);
  }
}

TEST_CASE("corpus file round trip") {
  std::string path = "/tmp/glora_test_corpus.bin";
  SynthConfig cfg;
  cfg.seed = 31;

  SUBCASE("empty corpus") {
    save_corpus({}, cfg, path);
    auto [loaded, lcfg] = load_corpus(path);
    CHECK(loaded.empty());
    CHECK(lcfg.seed == cfg.seed);
  }

  SUBCASE("100 utterances survive the f32 round trip") {
    auto corpus = gen_corpus(cfg, CorpusKind::CodeSwitched, 100, 31);
    save_corpus(corpus, cfg, path);
    auto [loaded, lcfg] = load_corpus(path);
    REQUIRE(loaded.size() == corpus.size());
    CHECK(lcfg.noise_sigma == cfg.noise_sigma);
    CHECK(lcfg.switch_prob == cfg.switch_prob);
    for (size_t i = 0; i < corpus.size(); ++i) {
      CHECK(loaded[i].targets == corpus[i].targets);
      CHECK(loaded[i].lang_tags == corpus[i].lang_tags);
      REQUIRE(loaded[i].features.shape() == corpus[i].features.shape());
      const auto& got = loaded[i].features.values();
      const auto& want = corpus[i].features.values();
      for (size_t j = 0; j < got.size(); ++j)
        CHECK(got[j] == static_cast<double>(static_cast<float>(want[j])));
    }
    // loading again is byte-stable
    save_corpus(loaded, lcfg, path);
    auto [again, acfg] = load_corpus(path);
    for (size_t i = 0; i < again.size(); ++i)
      CHECK(again[i].features.same_values(loaded[i].features));
  }

  SUBCASE("corrupted magic is rejected") {
    auto corpus = gen_corpus(cfg, CorpusKind::MonoA, 2, 31);
    save_corpus(corpus, cfg, path);
    auto bytes = read_file(path);
    bytes[0] = 'X';
    write_file(path, bytes);
    try {
      load_corpus(path);
      FAIL("expected bad magic");
    } catch (const ContainerError& e) {
      CHECK(e.code() == ContainerErrc::bad_magic);
    }
  }

  std::remove(path.c_str());
}

TEST_CASE("configuration validation") {
  SynthConfig bad;
  bad.lang_a_lo = 2;  // collides with specials
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  SynthConfig overlap;
  overlap.lang_b_lo = 10;
  CHECK_THROWS_AS(overlap.validate(), std::invalid_argument);
  SynthConfig ok;
  CHECK_NOTHROW(ok.validate());
  CHECK_THROWS_AS(gen_corpus(ok, CorpusKind::MonoA, 0, 1), std::invalid_argument);
}
