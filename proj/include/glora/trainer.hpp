#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "glora/adapters.hpp"
#include "glora/model.hpp"
#include "glora/synth.hpp"
#include "glora/tensor.hpp"

namespace glora {

enum class TrainMode { Full, AdapterOnly };

struct TrainConfig {
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 8;
  int steps = 0;
  double clip_norm = 1.0;  // global norm; <= 0 disables
  uint64_t seed = 0;
  int log_every = 10;

  static TrainConfig adapter_defaults() { return {}; }  // lr 3e-3
  static TrainConfig full_defaults() {
    TrainConfig c;
    c.lr = 1e-3;
    return c;
  }
  void validate() const;
};

struct TrainLogRow {
  int step = 0;
  double loss = 0.0;
  double elapsed_ms = 0.0;
};

struct TrainReport {
  std::vector<TrainLogRow> log;
  double wall_seconds = 0.0;
  int64_t trainable_params = 0;
  uint64_t seed = 0;
  double final_loss = 0.0;

  // one record per logged step: "step <n>\tloss <v>\telapsed_ms <t>"
  std::string to_text() const;
};

struct AdamState {
  struct Slot {
    std::vector<double> m, v;
  };
  std::map<std::string, Slot> slots;
  int64_t t = 0;
};

// Standard Adam with bias correction, after scaling the whole gradient set
// by min(1, clip_norm / global_norm). Parameters without gradients are
// untouched; the timestep always advances.
void adam_step(std::map<std::string, Tensor>& params, const GradTable& grads, AdamState& state,
               const TrainConfig& cfg);

// Trains every base parameter (scratch/pretrain/full fine-tune); freezes
// the model afterwards.
TrainReport train_full(SeqModel& model, const std::vector<Utterance>& corpus,
                       const TrainConfig& cfg);

// Trains only the adapter parameters over a const (frozen) base.
TrainReport train_adapter(const SeqModel& base, Adapter& adapter,
                          const std::vector<Utterance>& corpus, const TrainConfig& cfg);

// Pooled greedy-decode token error rate: sum of edit distances over sum of
// reference lengths.
double token_error_rate(const SeqModel& model, const std::vector<Utterance>& corpus,
                        const Adapter* adapter = nullptr);

}  // namespace glora
