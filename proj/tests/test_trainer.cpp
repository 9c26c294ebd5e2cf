#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "glora/trainer.hpp"
#include "test_util.hpp"

using namespace glora;
using testutil::random_tensor;

namespace {

SynthConfig desk_synth() { return {}; }

ModelConfig desk_ctc(uint64_t seed) {
  ModelConfig cfg;
  cfg.regime = Regime::EncCTC;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("adam closed-form oracle on a scalar") {
  TrainConfig cfg;
  cfg.lr = 0.1;
  cfg.clip_norm = 0.0;
  std::map<std::string, Tensor> params{{"p", Tensor::scalar(1.0)}};
  AdamState state;

  // independent scalar recurrence
  double m = 0.0, v = 0.0, p_ref = 1.0;
  for (int t = 1; t <= 5; ++t) {
    GradTable g;
    g.set("p", Tensor::scalar(1.0));
    adam_step(params, g, state, cfg);

    m = cfg.beta1 * m + (1 - cfg.beta1) * 1.0;
    v = cfg.beta2 * v + (1 - cfg.beta2) * 1.0;
    double mhat = m / (1 - std::pow(cfg.beta1, t));
    double vhat = v / (1 - std::pow(cfg.beta2, t));
    p_ref -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    CHECK(std::fabs(params.at("p").value() - p_ref) < 1e-12);
  }
  // first step is the bias-corrected -lr
  CHECK(std::fabs((1.0 - 0.1 / (1.0 + 1e-8)) -
                  [&] {
                    std::map<std::string, Tensor> q{{"p", Tensor::scalar(1.0)}};
                    AdamState s;
                    GradTable g;
                    g.set("p", Tensor::scalar(1.0));
                    adam_step(q, g, s, cfg);
                    return q.at("p").value();
                  }()) < 1e-12);
}

TEST_CASE("adam leaves parameters without gradients alone") {
  TrainConfig cfg;
  std::map<std::string, Tensor> params{{"a", Tensor::scalar(2.0)}, {"b", Tensor::scalar(3.0)}};
  AdamState state;
  GradTable g;
  g.set("a", Tensor::scalar(0.0));
  adam_step(params, g, state, cfg);
  CHECK(params.at("a").value() == 2.0);  // zero gradient: no movement
  CHECK(params.at("b").value() == 3.0);  // no gradient at all
  CHECK(state.t == 1);

  GradTable bad;
  bad.set("a", Tensor::from_values({2}, {1, 1}));
  CHECK_THROWS_AS(adam_step(params, bad, state, cfg), std::invalid_argument);
  GradTable unknown;
  unknown.set("zzz", Tensor::scalar(1.0));
  CHECK_THROWS_AS(adam_step(params, unknown, state, cfg), std::invalid_argument);
}

TEST_CASE("global-norm clipping scales the whole gradient set") {
  TrainConfig cfg;
  cfg.clip_norm = 1.0;
  std::map<std::string, Tensor> params{{"p", Tensor::from_values({2}, {0.0, 0.0})}};
  AdamState state;
  GradTable g;
  g.set("p", Tensor::from_values({2}, {6.0, 8.0}));  // norm 10 -> factor 0.1
  adam_step(params, g, state, cfg);

  std::map<std::string, Tensor> ref{{"p", Tensor::from_values({2}, {0.0, 0.0})}};
  AdamState ref_state;
  TrainConfig unclipped = cfg;
  unclipped.clip_norm = 0.0;
  GradTable scaled;
  scaled.set("p", Tensor::from_values({2}, {0.6, 0.8}));
  adam_step(ref, scaled, ref_state, unclipped);
  CHECK(params.at("p").same_values(ref.at("p")));
}

TEST_CASE("zero-step adapter training returns the bundle untouched") {
  SeqModel model = SeqModel::init(desk_ctc(4));
  model.freeze_all();
  AdapterSpec spec;
  spec.rank = 2;
  spec.seed = 7;
  Adapter adapter = attach(model, spec);
  std::map<std::string, Tensor> before = adapter.params();

  TrainConfig cfg = TrainConfig::adapter_defaults();
  cfg.steps = 0;
  auto corpus = gen_corpus(desk_synth(), CorpusKind::CodeSwitched, 4, 11);
  train_adapter(model, adapter, corpus, cfg);
  for (const auto& [name, t] : adapter.params()) CHECK(t.same_values(before.at(name)));
}

TEST_CASE("adapter training moves adapters, never the base") {
  SeqModel model = SeqModel::init(desk_ctc(5));
  model.freeze_all();
  uint64_t base_hash = model.params_hash();
  std::map<std::string, Tensor> base_before = model.params();

  AdapterSpec spec;
  spec.rank = 2;
  spec.seed = 1;
  Adapter adapter = attach(model, spec);
  std::map<std::string, Tensor> adapter_before = adapter.params();

  auto corpus = gen_corpus(desk_synth(), CorpusKind::CodeSwitched, 32, 12);
  TrainConfig cfg = TrainConfig::adapter_defaults();
  cfg.steps = 60;
  cfg.seed = 3;
  TrainReport report = train_adapter(model, adapter, corpus, cfg);

  CHECK(model.params_hash() == base_hash);
  for (const auto& [name, t] : model.params()) CHECK(t.same_values(base_before.at(name)));

  bool any_changed = false;
  for (const auto& [name, t] : adapter.params())
    if (!t.same_values(adapter_before.at(name))) any_changed = true;
  CHECK(any_changed);

  CHECK(report.log.front().loss > report.final_loss);  // loss went down
  CHECK(report.trainable_params == adapter.count_params());
}

TEST_CASE("training is deterministic in config and seed") {
  auto corpus = gen_corpus(desk_synth(), CorpusKind::MonoA, 16, 21);
  TrainConfig cfg = TrainConfig::full_defaults();
  cfg.steps = 12;
  cfg.seed = 5;
  cfg.log_every = 1;

  SeqModel m1 = SeqModel::init(desk_ctc(6));
  SeqModel m2 = SeqModel::init(desk_ctc(6));
  TrainReport r1 = train_full(m1, corpus, cfg);
  TrainReport r2 = train_full(m2, corpus, cfg);

  REQUIRE(r1.log.size() == r2.log.size());
  for (size_t i = 0; i < r1.log.size(); ++i) CHECK(r1.log[i].loss == r2.log[i].loss);
  for (const auto& [name, t] : m1.params()) CHECK(t.same_values(m2.params().at(name)));
}

TEST_CASE("full fine-tune overfits four examples monotonically") {
  // enc-dec cross entropy on a fixed 4-utterance corpus
  ModelConfig mc;
  mc.regime = Regime::EncDecCE;
  mc.seed = 7;
  SeqModel model = SeqModel::init(mc);
  auto corpus = gen_corpus(desk_synth(), CorpusKind::MonoA, 4, 31);

  TrainConfig cfg = TrainConfig::full_defaults();
  cfg.steps = 50;
  cfg.log_every = 1;
  cfg.seed = 1;
  TrainReport report = train_full(model, corpus, cfg);

  REQUIRE(report.log.size() == 50);
  for (size_t i = 1; i < report.log.size(); ++i)
    CHECK_MESSAGE(report.log[i].loss < report.log[i - 1].loss, "step ", i, ": ",
                  report.log[i - 1].loss, " -> ", report.log[i].loss);
}

TEST_CASE("non-finite loss aborts with the step index") {
  SeqModel model = SeqModel::init(desk_ctc(8));
  std::vector<Utterance> corpus = gen_corpus(desk_synth(), CorpusKind::MonoA, 2, 41);
  std::vector<double> poisoned(corpus[0].features.values());
  poisoned[0] = std::numeric_limits<double>::infinity();
  corpus[0].features = Tensor::from_values(corpus[0].features.shape(), std::move(poisoned));

  TrainConfig cfg = TrainConfig::full_defaults();
  cfg.steps = 3;
  CHECK_THROWS_WITH_AS(train_full(model, corpus, cfg), doctest::Contains("step 0"),
                       std::runtime_error);

  CHECK_THROWS_AS(train_full(model, {}, cfg), std::invalid_argument);
}

TEST_CASE("lora at rank 2 stays under 15 percent of full parameters") {
  for (Regime regime : {Regime::EncCTC, Regime::EncDecCE}) {
    ModelConfig mc;
    mc.regime = regime;
    SeqModel model = SeqModel::init(mc);
    model.freeze_all();
    AdapterSpec spec;
    spec.rank = 2;
    Adapter adapter = attach(model, spec);  // default: every attention projection
    double ratio = static_cast<double>(adapter.count_params()) /
                   static_cast<double>(model.count_params(false));
    CHECK(ratio < 0.15);
    CHECK(count_params(model, adapter, true) == adapter.count_params());
  }
}

TEST_CASE("report text is line-delimited records") {
  TrainReport r;
  r.log = {{0, 1.5, 2.0}, {10, 0.5, 20.0}};
  r.final_loss = 0.5;
  r.trainable_params = 42;
  r.seed = 9;
  std::string text = r.to_text();
  CHECK(text.find("step 0\tloss 1.5") != std::string::npos);
  CHECK(text.find("final\tloss 0.5\ttrainable 42\tseed 9") != std::string::npos);
}
