#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "glora/tensor.hpp"

namespace glora {

class Adapter;

// enc-dec-ce: encoder-decoder trained with teacher-forced cross-entropy.
// enc-ctc:    encoder plus output projection trained with CTC.
enum class Regime { EncDecCE, EncCTC };

Regime regime_from_string(const std::string& s);
std::string regime_to_string(Regime r);

struct ModelConfig {
  int d_model = 32;
  int n_layers = 2;
  int n_heads = 2;
  int feature_dim = 16;
  int ffn_dim = 64;
  int vocab_size = 36;
  int max_frames = 64;
  Regime regime = Regime::EncCTC;
  uint64_t seed = 0;

  static constexpr int pad_id = 0;
  static constexpr int bos_id = 1;
  static constexpr int eos_id = 2;
  static constexpr int blank_id = 3;

  void validate() const;
  std::string canonical() const;  // canonical text encoding
  uint64_t fingerprint() const;   // 64-bit hash of canonical()
};

// A frozen linear layer eligible for adaptation: y[d] = W[d x k] x[k].
struct AttachPoint {
  std::string name;
  int d = 0;
  int k = 0;
};

// Frozen base sequence model. Parameters are keyed by hierarchical name
// (enc.0.attn.q, dec.1.cross.v, out.proj, ...). After pretraining every
// parameter is frozen; adapters never touch these tensors.
class SeqModel {
 public:
  static SeqModel init(const ModelConfig& cfg);  // deterministic in cfg.seed

  const ModelConfig& config() const { return cfg_; }
  const std::map<std::string, Tensor>& params() const { return params_; }
  const Tensor& param(const std::string& name) const;
  void set_param(const std::string& name, Tensor value);  // shape-checked

  bool frozen(const std::string& name) const;
  void freeze_all();
  void unfreeze_all();

  const std::vector<AttachPoint>& attach_points() const { return attach_points_; }
  const AttachPoint& attach_point(const std::string& name) const;  // throws if unknown
  bool has_attach_point(const std::string& name) const;

  int64_t count_params(bool trainable_only) const;
  uint64_t fingerprint() const { return cfg_.fingerprint(); }
  uint64_t params_hash() const;  // over raw parameter bytes, for freeze audits

 private:
  ModelConfig cfg_;
  std::map<std::string, Tensor> params_;
  std::map<std::string, bool> frozen_;
  std::vector<AttachPoint> attach_points_;
};

// All attention projections (q, k, v, out) of every layer; the default
// adapter placement.
std::vector<std::string> default_attach_points(const ModelConfig& cfg);

// Teacher-forced mean cross-entropy; targets must be framed [bos ... eos].
// `adapter` routes attached linear layers; `env` substitutes parameters by
// name with graph-attached tensors during training.
Tensor forward_ce(const SeqModel& model, const Tensor& features, const std::vector<int>& targets,
                  const Adapter* adapter = nullptr, const ParamMap* env = nullptr);

// Encoder output projected to vocabulary logits [frames x vocab].
Tensor encoder_logits(const SeqModel& model, const Tensor& features,
                      const Adapter* adapter = nullptr, const ParamMap* env = nullptr);

// CTC negative log-likelihood over blank-interleaved alignments.
Tensor ctc_loss(const Tensor& logits, const std::vector<int>& targets,
                int blank = ModelConfig::blank_id);

// Regime-appropriate loss for one utterance (frames CE targets with
// bos/eos itself).
Tensor forward_loss(const SeqModel& model, const Tensor& features, const std::vector<int>& targets,
                    const Adapter* adapter = nullptr, const ParamMap* env = nullptr);

// Best-path collapse: adjacent repeats first, then blanks.
std::vector<int> ctc_collapse(const std::vector<int>& frame_ids, int blank = ModelConfig::blank_id);

// Autoregressive argmax for enc-dec-ce (stops at eos, bos/eos stripped);
// best-path collapse for enc-ctc (repeats removed, then blanks).
std::vector<int> greedy_decode(const SeqModel& model, const Tensor& features,
                               const Adapter* adapter = nullptr);

int64_t count_params(const SeqModel& model, bool trainable_only);

}  // namespace glora
