#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glora/adapters.hpp"
#include "glora/model.hpp"
#include "glora/synth.hpp"
#include "glora/trainer.hpp"

namespace glora {

// Pretrain on monolingual data, fine-tune on code-switched data, score
// token error rate on held-out code-switched data.
struct CompareConfig {
  ModelConfig model;  // seed is overridden per run
  SynthConfig synth;
  int pretrain_utterances = 2000;
  int finetune_utterances = 2000;
  int test_utterances = 500;
  int pretrain_steps = 500;
  int finetune_steps = 250;
  int rank = 2;
  double lr_full = 1e-3;
  double lr_adapter = 3e-3;
  int batch_size = 8;
  std::vector<uint64_t> seeds = {1, 2, 3};
  bool include_glora = false;   // add glora1-3 next to lora
  bool adapters_only = false;   // skip the scratch and full baselines
};

struct CompareRow {
  std::string variant;  // scratch | frozen | full | lora | glora1..3
  uint64_t seed = 0;
  double token_error_rate = 0.0;
  int64_t trainable_params = 0;
  double trainable_ratio = 0.0;  // trainable / full-model parameters
};

std::vector<CompareRow> compare_matrix(const CompareConfig& cfg);

// mean token error rate of one variant across seeds
double mean_ter(const std::vector<CompareRow>& rows, const std::string& variant);

// TSV with a header row
std::string rows_to_tsv(const std::vector<CompareRow>& rows);

}  // namespace glora
