#include "glora/experiments.hpp"

#include <sstream>
#include <stdexcept>

#include "glora/rng.hpp"

namespace glora {

namespace {

constexpr uint64_t kMonoTag = 11, kCsTag = 12, kTestTag = 13, kScratchTag = 14;

}  // namespace

std::vector<CompareRow> compare_matrix(const CompareConfig& cfg) {
  std::vector<CompareRow> rows;

  for (uint64_t seed : cfg.seeds) {
    // one acoustic identity per run seed, shared by all three splits
    SynthConfig synth = cfg.synth;
    synth.seed = seed;
    auto mono = gen_corpus(synth, CorpusKind::MonoA, cfg.pretrain_utterances,
                           Prng::mix3(seed, kMonoTag, 0));
    auto cs = gen_corpus(synth, CorpusKind::CodeSwitched, cfg.finetune_utterances,
                         Prng::mix3(seed, kCsTag, 0));
    auto test = gen_corpus(synth, CorpusKind::CodeSwitched, cfg.test_utterances,
                           Prng::mix3(seed, kTestTag, 0));

    TrainConfig full_cfg = TrainConfig::full_defaults();
    full_cfg.lr = cfg.lr_full;
    full_cfg.batch_size = cfg.batch_size;
    full_cfg.seed = seed;

    // pretrained, frozen base
    ModelConfig mc = cfg.model;
    mc.seed = seed;
    SeqModel pretrained = SeqModel::init(mc);
    {
      TrainConfig c = full_cfg;
      c.steps = cfg.pretrain_steps;
      train_full(pretrained, mono, c);
    }
    int64_t full_params = pretrained.count_params(false);

    auto push = [&](const std::string& variant, double ter, int64_t trainable) {
      rows.push_back({variant, seed, ter, trainable,
                      static_cast<double>(trainable) / static_cast<double>(full_params)});
    };

    if (!cfg.adapters_only) {
      // scratch: random init, the fine-tuning budget only, code-switched data
      ModelConfig sc = cfg.model;
      sc.seed = Prng::mix3(seed, kScratchTag, 0);
      SeqModel scratch = SeqModel::init(sc);
      TrainConfig c = full_cfg;
      c.steps = cfg.finetune_steps;
      train_full(scratch, cs, c);
      push("scratch", token_error_rate(scratch, test), full_params);

      push("frozen", token_error_rate(pretrained, test), 0);

      SeqModel full = pretrained;
      c = full_cfg;
      c.steps = cfg.finetune_steps;
      train_full(full, cs, c);
      push("full", token_error_rate(full, test), full_params);
    }

    std::vector<AdapterKind> kinds = {AdapterKind::Lora};
    if (cfg.include_glora) {
      kinds.push_back(AdapterKind::Glora1);
      kinds.push_back(AdapterKind::Glora2);
      kinds.push_back(AdapterKind::Glora3);
    }
    for (AdapterKind kind : kinds) {
      AdapterSpec spec;
      spec.kind = kind;
      spec.rank = cfg.rank;
      spec.seed = seed;
      Adapter adapter = attach(pretrained, spec);
      TrainConfig c = TrainConfig::adapter_defaults();
      c.lr = cfg.lr_adapter;
      c.batch_size = cfg.batch_size;
      c.seed = seed;
      c.steps = cfg.finetune_steps;
      train_adapter(pretrained, adapter, cs, c);
      push(adapter_kind_to_string(kind), token_error_rate(pretrained, test, &adapter),
           adapter.count_params());
    }
  }
  return rows;
}

double mean_ter(const std::vector<CompareRow>& rows, const std::string& variant) {
  double sum = 0.0;
  int n = 0;
  for (const CompareRow& r : rows) {
    if (r.variant != variant) continue;
    sum += r.token_error_rate;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("no rows for variant " + variant);
  return sum / n;
}

std::string rows_to_tsv(const std::vector<CompareRow>& rows) {
  std::ostringstream os;
  os.precision(6);
  os << "variant\tseed\ttoken_error_rate\ttrainable_params\ttrainable_ratio\n";
  for (const CompareRow& r : rows)
    os << r.variant << "\t" << r.seed << "\t" << r.token_error_rate << "\t" << r.trainable_params
       << "\t" << r.trainable_ratio << "\n";
  return os.str();
}

}  // namespace glora
