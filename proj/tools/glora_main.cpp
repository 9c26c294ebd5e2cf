// glora: personalized code-switching ASR at desk scale. One binary: corpus
// synthesis, pretraining, adapter fine-tuning, evaluation, bundle tools,
// and the adapter-weight serving protocol.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "glora/bundle.hpp"
#include "glora/client.hpp"
#include "glora/experiments.hpp"
#include "glora/korean.hpp"
#include "glora/metrics.hpp"
#include "glora/server.hpp"
#include "glora/trainer.hpp"

using namespace glora;

namespace {

std::atomic<bool> g_stop{false};

struct CommonModelFlags {
  int d_model = 32, n_layers = 2, n_heads = 2, feature_dim = 16, ffn_dim = 64;
  int vocab_size = 36, max_frames = 64;
  std::string regime = "enc-ctc";

  ModelConfig to_config(uint64_t seed) const {
    ModelConfig cfg;
    cfg.d_model = d_model;
    cfg.n_layers = n_layers;
    cfg.n_heads = n_heads;
    cfg.feature_dim = feature_dim;
    cfg.ffn_dim = ffn_dim;
    cfg.vocab_size = vocab_size;
    cfg.max_frames = max_frames;
    cfg.regime = regime_from_string(regime);
    cfg.seed = seed;
    cfg.validate();
    return cfg;
  }

  void add_to(CLI::App* cmd) {
    cmd->add_option("--d-model", d_model);
    cmd->add_option("--n-layers", n_layers);
    cmd->add_option("--n-heads", n_heads);
    cmd->add_option("--feature-dim", feature_dim);
    cmd->add_option("--ffn-dim", ffn_dim);
    cmd->add_option("--vocab-size", vocab_size);
    cmd->add_option("--max-frames", max_frames);
    cmd->add_option("--regime", regime)->check(CLI::IsMember({"enc-ctc", "enc-dec-ce"}));
  }
};

std::pair<std::string, uint16_t> parse_endpoint(const std::string& s) {
  size_t colon = s.rfind(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("endpoint must be host:port, got " + s);
  return {s.substr(0, colon), static_cast<uint16_t>(std::stoi(s.substr(colon + 1)))};
}

int run(int argc, char** argv) {
  CLI::App app{"personalized code-switching speech recognition, desk scale"};
  app.require_subcommand(1);
  app.set_config("--config", "", "structured-text config file; explicit flags win");

  uint64_t seed = 0;
  app.add_option("--seed", seed, "global seed; every run logs the resolved value")
      ->capture_default_str();

  // --- synth ---
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus file");
  std::string synth_kind = "code-switched";
  int synth_n = 1000;
  std::string synth_out;
  SynthConfig synth_cfg;
  synth_cmd->add_option("--kind", synth_kind)->check(CLI::IsMember({"mono-a", "code-switched"}));
  synth_cmd->add_option("--n", synth_n)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--out", synth_out)->required();
  synth_cmd->add_option("--sigma", synth_cfg.noise_sigma);
  synth_cmd->add_option("--switch-prob", synth_cfg.switch_prob);
  synth_cmd->add_option("--min-tokens", synth_cfg.min_tokens);
  synth_cmd->add_option("--max-tokens", synth_cfg.max_tokens);
  synth_cmd->add_option("--feature-dim", synth_cfg.feature_dim);
  synth_cmd->add_option("--proto-seed", synth_cfg.seed,
                        "acoustic-identity seed; keep it fixed across related splits");

  // --- pretrain ---
  auto* pretrain_cmd = app.add_subcommand("pretrain", "train a base model from scratch");
  CommonModelFlags pretrain_model;
  pretrain_model.add_to(pretrain_cmd);
  std::string pretrain_corpus, pretrain_out;
  int pretrain_steps = 500;
  double pretrain_lr = 1e-3;
  int pretrain_batch = 8;
  pretrain_cmd->add_option("--corpus", pretrain_corpus)->required();
  pretrain_cmd->add_option("--out", pretrain_out)->required();
  pretrain_cmd->add_option("--steps", pretrain_steps);
  pretrain_cmd->add_option("--lr", pretrain_lr);
  pretrain_cmd->add_option("--batch-size", pretrain_batch);

  // --- finetune ---
  auto* finetune_cmd = app.add_subcommand("finetune", "fine-tune fully or through an adapter");
  std::string ft_model, ft_corpus, ft_out, ft_adapter = "lora";
  int ft_rank = 2, ft_steps = 250, ft_batch = 8;
  double ft_lr = 0.0, ft_scale = 1.0;
  std::vector<std::string> ft_points;
  finetune_cmd->add_option("--model", ft_model)->required();
  finetune_cmd->add_option("--corpus", ft_corpus)->required();
  finetune_cmd->add_option("--out", ft_out)->required();
  finetune_cmd->add_option("--adapter", ft_adapter)
      ->check(CLI::IsMember({"lora", "glora1", "glora2", "glora3", "full"}));
  finetune_cmd->add_option("--rank", ft_rank);
  finetune_cmd->add_option("--steps", ft_steps);
  finetune_cmd->add_option("--batch-size", ft_batch);
  finetune_cmd->add_option("--lr", ft_lr, "default: 3e-3 adapters, 1e-3 full");
  finetune_cmd->add_option("--scale", ft_scale);
  finetune_cmd->add_option("--attach", ft_points, "attach points; default: attention projections");

  // --- eval ---
  auto* eval_cmd = app.add_subcommand("eval", "score ref/hyp pairs or decode a corpus");
  std::string eval_pairs, eval_model, eval_corpus, eval_bundle;
  std::string eval_units = "wer,cer,jer", eval_normalize = "compatibility";
  eval_cmd->add_option("--pairs", eval_pairs, "ref<TAB>hyp lines");
  eval_cmd->add_option("--model", eval_model);
  eval_cmd->add_option("--corpus", eval_corpus);
  eval_cmd->add_option("--bundle", eval_bundle);
  eval_cmd->add_option("--units", eval_units);
  eval_cmd->add_option("--normalize", eval_normalize)
      ->check(CLI::IsMember({"compatibility", "conjoining", "none"}));

  // --- merge ---
  auto* merge_cmd = app.add_subcommand("merge", "fold a lora bundle into the base weights");
  std::string merge_model, merge_bundle, merge_out;
  merge_cmd->add_option("--model", merge_model)->required();
  merge_cmd->add_option("--bundle", merge_bundle)->required();
  merge_cmd->add_option("--out", merge_out)->required();

  // --- bundle-inspect ---
  auto* inspect_cmd = app.add_subcommand("bundle-inspect", "print container metadata and entries");
  std::string inspect_path;
  inspect_cmd->add_option("--bundle", inspect_path)->required();

  // --- serve ---
  auto* serve_cmd = app.add_subcommand("serve", "run the adapter-plugging inference server");
  std::string serve_model, serve_host = "127.0.0.1", serve_table;
  uint16_t serve_port = 0;
  ServerLimits limits;
  serve_cmd->add_option("--model", serve_model)->required();
  serve_cmd->add_option("--host", serve_host);
  serve_cmd->add_option("--port", serve_port);
  serve_cmd->add_option("--token-table", serve_table);
  serve_cmd->add_option("--max-frame-bytes", limits.max_frame_bytes);
  serve_cmd->add_option("--max-sessions", limits.max_sessions);
  serve_cmd->add_option("--max-train-steps", limits.max_train_steps);
  serve_cmd->add_option("--max-rank", limits.max_rank);

  // --- client-infer ---
  auto* cinfer_cmd = app.add_subcommand("client-infer", "send features plus bundle, get tokens");
  std::string ci_server, ci_bundle, ci_corpus;
  int ci_index = 0;
  double ci_timeout = 30.0;
  cinfer_cmd->add_option("--server", ci_server)->required();
  cinfer_cmd->add_option("--bundle", ci_bundle)->required();
  cinfer_cmd->add_option("--corpus", ci_corpus)->required();
  cinfer_cmd->add_option("--index", ci_index);
  cinfer_cmd->add_option("--timeout", ci_timeout);

  // --- client-train ---
  auto* ctrain_cmd = app.add_subcommand("client-train", "fine-tune the bundle on the server");
  std::string ct_server, ct_bundle, ct_corpus;
  int ct_take = 0;
  ClientTrainRequest ct_req;
  double ct_timeout = 30.0;
  ctrain_cmd->add_option("--server", ct_server)->required();
  ctrain_cmd->add_option("--bundle", ct_bundle)->required();
  ctrain_cmd->add_option("--corpus", ct_corpus)->required();
  ctrain_cmd->add_option("--take", ct_take, "use only the first n utterances");
  ctrain_cmd->add_option("--steps", ct_req.steps);
  ctrain_cmd->add_option("--lr", ct_req.lr);
  ctrain_cmd->add_option("--batch-size", ct_req.batch_size);
  ctrain_cmd->add_option("--timeout", ct_timeout);

  // --- compare ---
  auto* compare_cmd = app.add_subcommand("compare", "scratch/frozen/full/adapters result table");
  CompareConfig cmp;
  int cmp_n_seeds = 3;
  std::string cmp_out;
  bool cmp_glora = false;
  compare_cmd->add_option("--n-seeds", cmp_n_seeds);
  compare_cmd->add_option("--pretrain-utts", cmp.pretrain_utterances);
  compare_cmd->add_option("--finetune-utts", cmp.finetune_utterances);
  compare_cmd->add_option("--test-utts", cmp.test_utterances);
  compare_cmd->add_option("--pretrain-steps", cmp.pretrain_steps);
  compare_cmd->add_option("--finetune-steps", cmp.finetune_steps);
  compare_cmd->add_option("--rank", cmp.rank);
  compare_cmd->add_flag("--include-glora", cmp_glora);
  compare_cmd->add_option("--out", cmp_out, "also write the TSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);  // prints the message and usage
    return code == 0 ? 0 : 1;
  }
  std::cerr << "seed: " << seed << "\n";

  if (*synth_cmd) {
    auto corpus = gen_corpus(synth_cfg, corpus_kind_from_string(synth_kind), synth_n, seed);
    save_corpus(corpus, synth_cfg, synth_out);
    std::cout << "utterances\t" << corpus.size() << "\n";
    std::cout << "lang_b_fraction\t" << lang_b_fraction(corpus) << "\n";
    std::cerr << "wrote " << synth_out << "\n";
    return 0;
  }

  if (*pretrain_cmd) {
    auto [corpus, ccfg] = load_corpus(pretrain_corpus);
    ModelConfig mc = pretrain_model.to_config(seed);
    mc.feature_dim = ccfg.feature_dim;
    SeqModel model = SeqModel::init(mc);
    TrainConfig tc = TrainConfig::full_defaults();
    tc.lr = pretrain_lr;
    tc.steps = pretrain_steps;
    tc.batch_size = pretrain_batch;
    tc.seed = seed;
    TrainReport report = train_full(model, corpus, tc);
    std::cerr << report.to_text();
    save_checkpoint(model, pretrain_out);
    std::cout << "final_loss\t" << report.final_loss << "\n";
    std::cout << "params\t" << model.count_params(false) << "\n";
    std::cerr << "wrote " << pretrain_out << "\n";
    return 0;
  }

  if (*finetune_cmd) {
    SeqModel model = load_checkpoint(ft_model);
    auto [corpus, ccfg] = load_corpus(ft_corpus);
    if (ft_adapter == "full") {
      TrainConfig tc = TrainConfig::full_defaults();
      if (ft_lr > 0) tc.lr = ft_lr;
      tc.steps = ft_steps;
      tc.batch_size = ft_batch;
      tc.seed = seed;
      TrainReport report = train_full(model, corpus, tc);
      std::cerr << report.to_text();
      save_checkpoint(model, ft_out);
      std::cout << "final_loss\t" << report.final_loss << "\n";
      std::cout << "trainable_params\t" << report.trainable_params << "\n";
    } else {
      AdapterSpec spec;
      spec.kind = adapter_kind_from_string(ft_adapter);
      spec.rank = ft_rank;
      spec.scale = ft_scale;
      spec.attach_points = ft_points;
      spec.seed = seed;
      Adapter adapter = attach(model, spec);
      TrainConfig tc = TrainConfig::adapter_defaults();
      if (ft_lr > 0) tc.lr = ft_lr;
      tc.steps = ft_steps;
      tc.batch_size = ft_batch;
      tc.seed = seed;
      TrainReport report = train_adapter(model, adapter, corpus, tc);
      std::cerr << report.to_text();
      save_bundle(bundle_from_adapter(adapter, model.fingerprint()), ft_out);
      std::cout << "final_loss\t" << report.final_loss << "\n";
      std::cout << "trainable_params\t" << report.trainable_params << "\n";
      std::cout << "trainable_ratio\t"
                << static_cast<double>(adapter.count_params()) /
                       static_cast<double>(model.count_params(false))
                << "\n";
    }
    std::cerr << "wrote " << ft_out << "\n";
    return 0;
  }

  if (*eval_cmd) {
    if (!eval_pairs.empty()) {
      std::vector<ErrorUnit> units;
      std::stringstream ss(eval_units);
      std::string item;
      while (std::getline(ss, item, ',')) units.push_back(unit_from_string(item));
      ErrorRateReport report =
          evaluate_pairs(read_pair_file(eval_pairs), units, lineup_from_string(eval_normalize));
      std::cout << "utterance";
      for (ErrorUnit u : units) std::cout << "\t" << unit_to_string(u);
      std::cout << "\n";
      for (size_t i = 0; i < report.per_utterance.size(); ++i) {
        std::cout << i;
        for (const RateRow& row : report.per_utterance[i]) std::cout << "\t" << row.rate;
        std::cout << "\n";
      }
      std::cout << "aggregate";
      for (const RateRow& row : report.aggregate) std::cout << "\t" << row.rate;
      std::cout << "\n";
      std::cerr << "normalize: " << eval_normalize << "; cer/jer exclude whitespace\n";
      return 0;
    }
    if (eval_model.empty() || eval_corpus.empty())
      throw CLI::ValidationError("eval", "need --pairs, or --model with --corpus");
    SeqModel model = load_checkpoint(eval_model);
    auto [corpus, ccfg] = load_corpus(eval_corpus);
    double ter;
    if (!eval_bundle.empty()) {
      Adapter adapter = attach(model, load_bundle(eval_bundle));
      ter = token_error_rate(model, corpus, &adapter);
    } else {
      ter = token_error_rate(model, corpus);
    }
    std::cout << "token_error_rate\t" << ter << "\n";
    return 0;
  }

  if (*merge_cmd) {
    SeqModel model = load_checkpoint(merge_model);
    Adapter adapter = attach(model, load_bundle(merge_bundle));
    SeqModel merged = merge_adapter(model, adapter);
    save_checkpoint(merged, merge_out);
    std::cout << "merged_params\t" << merged.count_params(false) << "\n";
    std::cerr << "wrote " << merge_out << "\n";
    return 0;
  }

  if (*inspect_cmd) {
    auto bytes = read_file(inspect_path);
    Container c = read_container(bytes);
    std::string kind = c.kind <= 3 ? adapter_kind_to_string(static_cast<AdapterKind>(c.kind))
                       : c.kind == kKindBaseModel ? "base-model"
                       : c.kind == kKindCorpus    ? "corpus"
                                                  : "unknown";
    std::cout << "kind\t" << kind << "\n";
    std::cout << "rank\t" << c.rank << "\n";
    std::cout << "fingerprint\t" << c.fingerprint << "\n";
    std::cout << "entries\t" << c.entries.size() << "\n";
    for (const auto& e : c.entries) {
      std::cout << "entry\t" << e.name << "\t"
                << (e.dtype == EntryDtype::F32   ? "f32"
                    : e.dtype == EntryDtype::F64 ? "f64"
                                                 : "i32")
                << "\t";
      for (size_t i = 0; i < e.dims.size(); ++i) std::cout << (i ? "x" : "") << e.dims[i];
      std::cout << "\n";
    }
    std::cout << "crc\tOK\n";  // read_container already verified it
    return 0;
  }

  if (*serve_cmd) {
    auto model = std::make_shared<SeqModel>(load_checkpoint(serve_model));
    std::shared_ptr<TokenTable> table;
    if (!serve_table.empty()) table = std::make_shared<TokenTable>(TokenTable::load(serve_table));
    Server server(model, limits, table);
    server.start(serve_host, serve_port);
    std::cout << "listening\t" << serve_host << ":" << server.port() << "\n" << std::flush;
    std::cerr << "model fingerprint " << model->fingerprint() << "; SIGINT/SIGTERM to stop\n";
    std::signal(SIGINT, [](int) { g_stop = true; });
    std::signal(SIGTERM, [](int) { g_stop = true; });
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    return 0;
  }

  if (*cinfer_cmd) {
    auto [host, port] = parse_endpoint(ci_server);
    auto [corpus, ccfg] = load_corpus(ci_corpus);
    if (ci_index < 0 || ci_index >= static_cast<int>(corpus.size()))
      throw std::out_of_range("utterance index out of range");
    ClientOptions opts;
    opts.timeout_s = ci_timeout;
    InferOutcome out =
        client_infer(host, port, ci_bundle, corpus[static_cast<size_t>(ci_index)].features, opts);
    std::cout << "tokens";
    for (int t : out.tokens) std::cout << "\t" << t;
    std::cout << "\n";
    if (!out.text.empty()) std::cout << "text\t" << out.text << "\n";
    std::cout << "reference";
    for (int t : corpus[static_cast<size_t>(ci_index)].targets) std::cout << "\t" << t;
    std::cout << "\n";
    return 0;
  }

  if (*ctrain_cmd) {
    auto [host, port] = parse_endpoint(ct_server);
    auto [corpus, ccfg] = load_corpus(ct_corpus);
    if (ct_take > 0 && ct_take < static_cast<int>(corpus.size()))
      corpus.resize(static_cast<size_t>(ct_take));
    ct_req.seed = seed;
    ClientOptions opts;
    opts.timeout_s = ct_timeout;
    double loss = client_train(host, port, ct_bundle, corpus, ct_req, opts);
    std::cout << "final_loss\t" << loss << "\n";
    std::cerr << "updated " << ct_bundle << "\n";
    return 0;
  }

  if (*compare_cmd) {
    cmp.include_glora = cmp_glora;
    cmp.seeds.clear();
    for (int i = 0; i < cmp_n_seeds; ++i) cmp.seeds.push_back(seed + static_cast<uint64_t>(i) + 1);
    auto rows = compare_matrix(cmp);
    std::string tsv = rows_to_tsv(rows);
    std::cout << tsv;
    if (!cmp_out.empty()) {
      std::ofstream f(cmp_out);
      f << tsv;
      std::cerr << "wrote " << cmp_out << "\n";
    }
    std::vector<std::string> variants = {"scratch", "frozen", "full", "lora"};
    if (cmp.include_glora) {
      variants.push_back("glora1");
      variants.push_back("glora2");
      variants.push_back("glora3");
    }
    for (const std::string& v : variants)
      std::cerr << "mean " << v << ": " << mean_ter(rows, v) << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
