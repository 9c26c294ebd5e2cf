#include "glora/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "glora/adapters.hpp"
#include "glora/rng.hpp"

namespace glora {

Regime regime_from_string(const std::string& s) {
  if (s == "enc-dec-ce") return Regime::EncDecCE;
  if (s == "enc-ctc") return Regime::EncCTC;
  throw std::invalid_argument("unknown regime: " + s);
}

std::string regime_to_string(Regime r) {
  return r == Regime::EncDecCE ? "enc-dec-ce" : "enc-ctc";
}

void ModelConfig::validate() const {
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || feature_dim <= 0 || ffn_dim <= 0)
    throw std::invalid_argument("model dimensions must be positive");
  if (d_model % n_heads != 0)
    throw std::invalid_argument("d_model " + std::to_string(d_model) +
                                " not divisible by n_heads " + std::to_string(n_heads));
  if (vocab_size <= blank_id)
    throw std::invalid_argument("vocab must include the four specials");
  if (max_frames <= 0) throw std::invalid_argument("max_frames must be positive");
}

std::string ModelConfig::canonical() const {
  return "d_model=" + std::to_string(d_model) + ";n_layers=" + std::to_string(n_layers) +
         ";n_heads=" + std::to_string(n_heads) + ";feature_dim=" + std::to_string(feature_dim) +
         ";ffn_dim=" + std::to_string(ffn_dim) + ";vocab_size=" + std::to_string(vocab_size) +
         ";max_frames=" + std::to_string(max_frames) + ";regime=" + regime_to_string(regime) +
         ";seed=" + std::to_string(seed);
}

uint64_t ModelConfig::fingerprint() const { return fnv1a(canonical()); }

// ---------------------------------------------------------------------------
// construction

namespace {

Tensor init_matrix(int rows, int cols, uint64_t seed, const std::string& name, double scale = 1.0) {
  Prng rng(seed, fnv1a(name));
  double bound = scale * std::sqrt(6.0 / (rows + cols));
  std::vector<double> v(static_cast<size_t>(rows) * cols);
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from_values({rows, cols}, std::move(v));
}

}  // namespace

SeqModel SeqModel::init(const ModelConfig& cfg) {
  cfg.validate();
  SeqModel m;
  m.cfg_ = cfg;
  const int d = cfg.d_model, f = cfg.feature_dim, ff = cfg.ffn_dim, v = cfg.vocab_size;

  auto add_linear = [&](const std::string& name, int out, int in, double scale = 1.0) {
    m.params_[name] = init_matrix(out, in, cfg.seed, name, scale);
    m.frozen_[name] = false;
    m.attach_points_.push_back({name, out, in});
  };
  auto add_norm = [&](const std::string& prefix) {
    m.params_[prefix + ".g"] = Tensor::full({d}, 1.0);
    m.params_[prefix + ".b"] = Tensor::zeros({d});
    m.frozen_[prefix + ".g"] = false;
    m.frozen_[prefix + ".b"] = false;
  };
  auto add_block = [&](const std::string& prefix) {
    add_linear(prefix + ".q", d, d);
    add_linear(prefix + ".k", d, d);
    add_linear(prefix + ".v", d, d);
    add_linear(prefix + ".out", d, d);
  };

  add_linear("enc.in.proj", d, f);
  for (int i = 0; i < cfg.n_layers; ++i) {
    std::string p = "enc." + std::to_string(i);
    add_norm(p + ".ln1");
    add_block(p + ".attn");
    add_norm(p + ".ln2");
    add_linear(p + ".ffn.w1", ff, d);
    add_linear(p + ".ffn.w2", d, ff);
  }
  add_norm("enc.ln_f");

  if (cfg.regime == Regime::EncDecCE) {
    m.params_["dec.embed"] = init_matrix(v, d, cfg.seed, "dec.embed");
    m.frozen_["dec.embed"] = false;
    for (int i = 0; i < cfg.n_layers; ++i) {
      std::string p = "dec." + std::to_string(i);
      add_norm(p + ".ln1");
      add_block(p + ".self");
      add_norm(p + ".ln2");
      add_block(p + ".cross");
      add_norm(p + ".ln3");
      add_linear(p + ".ffn.w1", ff, d);
      add_linear(p + ".ffn.w2", d, ff);
    }
    add_norm("dec.ln_f");
  }
  // small output scale keeps untrained logits near uniform
  add_linear("out.proj", v, d, 0.25);
  return m;
}

const Tensor& SeqModel::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no model parameter named " + name);
  return it->second;
}

void SeqModel::set_param(const std::string& name, Tensor value) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no model parameter named " + name);
  if (it->second.shape() != value.shape())
    throw std::invalid_argument("set_param " + name + ": shape " + shape_str(value.shape()) +
                                " != " + shape_str(it->second.shape()));
  it->second = std::move(value);
}

bool SeqModel::frozen(const std::string& name) const {
  auto it = frozen_.find(name);
  if (it == frozen_.end()) throw std::out_of_range("no model parameter named " + name);
  return it->second;
}

void SeqModel::freeze_all() {
  for (auto& [k, v] : frozen_) v = true;
}

void SeqModel::unfreeze_all() {
  for (auto& [k, v] : frozen_) v = false;
}

const AttachPoint& SeqModel::attach_point(const std::string& name) const {
  for (const auto& pt : attach_points_)
    if (pt.name == name) return pt;
  throw std::invalid_argument("unknown attach point: " + name);
}

bool SeqModel::has_attach_point(const std::string& name) const {
  for (const auto& pt : attach_points_)
    if (pt.name == name) return true;
  return false;
}

int64_t SeqModel::count_params(bool trainable_only) const {
  int64_t n = 0;
  for (const auto& [name, t] : params_) {
    if (trainable_only && frozen_.at(name)) continue;
    n += t.size();
  }
  return n;
}

uint64_t SeqModel::params_hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, t] : params_) {
    h = fnv1a(name.data(), name.size(), h);
    h = fnv1a(t.values().data(), t.values().size() * sizeof(double), h);
  }
  return h;
}

std::vector<std::string> default_attach_points(const ModelConfig& cfg) {
  std::vector<std::string> out;
  for (int i = 0; i < cfg.n_layers; ++i)
    for (const char* r : {".q", ".k", ".v", ".out"})
      out.push_back("enc." + std::to_string(i) + ".attn" + r);
  if (cfg.regime == Regime::EncDecCE) {
    for (int i = 0; i < cfg.n_layers; ++i) {
      for (const char* r : {".q", ".k", ".v", ".out"})
        out.push_back("dec." + std::to_string(i) + ".self" + r);
      for (const char* r : {".q", ".k", ".v", ".out"})
        out.push_back("dec." + std::to_string(i) + ".cross" + r);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// forward

namespace {

struct Ctx {
  const SeqModel& m;
  const Adapter* ad;
  const ParamMap* env;

  Tensor p(const std::string& name) const {
    if (env) {
      auto it = env->find(name);
      if (it != env->end()) return it->second;
    }
    return m.param(name);
  }

  Tensor linear(const std::string& name, const Tensor& x) const {
    Tensor w = p(name);
    if (ad && ad->has_point(name))
      return adapted_linear(ad->spec().kind, x, w, ad->point(name, env), ad->spec().scale);
    return ops::matmul(x, ops::transpose(w));
  }
};

Tensor sinusoidal_pe(int t, int d) {
  std::vector<double> v(static_cast<size_t>(t) * d, 0.0);
  for (int pos = 0; pos < t; ++pos)
    for (int i = 0; i < d; i += 2) {
      double w = std::pow(10000.0, -static_cast<double>(i) / d);
      v[static_cast<size_t>(pos) * d + i] = std::sin(pos * w);
      if (i + 1 < d) v[static_cast<size_t>(pos) * d + i + 1] = std::cos(pos * w);
    }
  return Tensor::from_values({t, d}, std::move(v));
}

Tensor causal_mask(int t) {
  std::vector<double> v(static_cast<size_t>(t) * t, 0.0);
  for (int i = 0; i < t; ++i)
    for (int j = i + 1; j < t; ++j) v[static_cast<size_t>(i) * t + j] = -1e9;
  return Tensor::from_values({t, t}, std::move(v));
}

Tensor attention(const Ctx& c, const std::string& prefix, const Tensor& xq, const Tensor& xkv,
                 bool causal) {
  const int d = c.m.config().d_model;
  const int heads = c.m.config().n_heads;
  const int hd = d / heads;
  Tensor q = c.linear(prefix + ".q", xq);
  Tensor k = c.linear(prefix + ".k", xkv);
  Tensor v = c.linear(prefix + ".v", xkv);
  Tensor mask;
  if (causal) mask = causal_mask(xq.dim(0));
  std::vector<Tensor> ctx_heads;
  for (int h = 0; h < heads; ++h) {
    Tensor qh = ops::slice(q, 1, h * hd, hd);
    Tensor kh = ops::slice(k, 1, h * hd, hd);
    Tensor vh = ops::slice(v, 1, h * hd, hd);
    Tensor scores = ops::scale(ops::matmul(qh, ops::transpose(kh)), 1.0 / std::sqrt(hd));
    if (causal) scores = ops::add(scores, mask);
    Tensor w = ops::softmax(scores, 1);
    ctx_heads.push_back(ops::matmul(w, vh));
  }
  return c.linear(prefix + ".out", ops::concat(ctx_heads, 1));
}

Tensor encode(const Ctx& c, const Tensor& features) {
  const ModelConfig& cfg = c.m.config();
  if (!features.defined() || features.ndim() != 2 || features.dim(1) != cfg.feature_dim)
    throw std::invalid_argument("features must be [frames x " + std::to_string(cfg.feature_dim) + "]");
  if (features.dim(0) > cfg.max_frames)
    throw std::invalid_argument("input of " + std::to_string(features.dim(0)) +
                                " frames exceeds max_frames " + std::to_string(cfg.max_frames));
  Tensor x = c.linear("enc.in.proj", features);
  x = ops::add(x, sinusoidal_pe(x.dim(0), cfg.d_model));
  for (int i = 0; i < cfg.n_layers; ++i) {
    std::string p = "enc." + std::to_string(i);
    Tensor pre = ops::layer_norm(x, c.p(p + ".ln1.g"), c.p(p + ".ln1.b"));
    x = ops::add(x, attention(c, p + ".attn", pre, pre, false));
    Tensor pre2 = ops::layer_norm(x, c.p(p + ".ln2.g"), c.p(p + ".ln2.b"));
    x = ops::add(x, c.linear(p + ".ffn.w2", ops::tanh(c.linear(p + ".ffn.w1", pre2))));
  }
  return ops::layer_norm(x, c.p("enc.ln_f.g"), c.p("enc.ln_f.b"));
}

Tensor decoder_logits(const Ctx& c, const Tensor& memory, const std::vector<int>& ids) {
  const ModelConfig& cfg = c.m.config();
  Tensor x = ops::embedding_lookup(c.p("dec.embed"), ids);
  x = ops::add(x, sinusoidal_pe(x.dim(0), cfg.d_model));
  for (int i = 0; i < cfg.n_layers; ++i) {
    std::string p = "dec." + std::to_string(i);
    Tensor pre = ops::layer_norm(x, c.p(p + ".ln1.g"), c.p(p + ".ln1.b"));
    x = ops::add(x, attention(c, p + ".self", pre, pre, true));
    Tensor pre2 = ops::layer_norm(x, c.p(p + ".ln2.g"), c.p(p + ".ln2.b"));
    x = ops::add(x, attention(c, p + ".cross", pre2, memory, false));
    Tensor pre3 = ops::layer_norm(x, c.p(p + ".ln3.g"), c.p(p + ".ln3.b"));
    x = ops::add(x, c.linear(p + ".ffn.w2", ops::tanh(c.linear(p + ".ffn.w1", pre3))));
  }
  x = ops::layer_norm(x, c.p("dec.ln_f.g"), c.p("dec.ln_f.b"));
  return c.linear("out.proj", x);
}

int argmax_row(const Tensor& t, int row) {
  int best = 0;
  double best_v = t.at(row, 0);
  for (int j = 1; j < t.dim(1); ++j) {
    if (t.at(row, j) > best_v) {
      best_v = t.at(row, j);
      best = j;
    }
  }
  return best;
}

}  // namespace

Tensor forward_ce(const SeqModel& model, const Tensor& features, const std::vector<int>& targets,
                  const Adapter* adapter, const ParamMap* env) {
  const ModelConfig& cfg = model.config();
  if (cfg.regime != Regime::EncDecCE)
    throw std::invalid_argument("forward_ce requires the enc-dec-ce regime");
  if (targets.size() < 2 || targets.front() != ModelConfig::bos_id ||
      targets.back() != ModelConfig::eos_id)
    throw std::invalid_argument("targets must be framed [bos ... eos]");
  if (static_cast<int>(targets.size()) > cfg.max_frames)
    throw std::invalid_argument("target sequence exceeds max_frames");
  Ctx c{model, adapter, env};
  Tensor memory = encode(c, features);
  std::vector<int> dec_in(targets.begin(), targets.end() - 1);
  std::vector<int> labels(targets.begin() + 1, targets.end());
  return ops::cross_entropy(decoder_logits(c, memory, dec_in), labels);
}

Tensor encoder_logits(const SeqModel& model, const Tensor& features, const Adapter* adapter,
                      const ParamMap* env) {
  if (model.config().regime != Regime::EncCTC)
    throw std::invalid_argument("encoder_logits requires the enc-ctc regime");
  Ctx c{model, adapter, env};
  return c.linear("out.proj", encode(c, features));
}

Tensor ctc_loss(const Tensor& logits, const std::vector<int>& targets, int blank) {
  return ops::ctc_nll(logits, targets, blank);
}

Tensor forward_loss(const SeqModel& model, const Tensor& features, const std::vector<int>& targets,
                    const Adapter* adapter, const ParamMap* env) {
  if (model.config().regime == Regime::EncCTC)
    return ctc_loss(encoder_logits(model, features, adapter, env), targets);
  std::vector<int> framed;
  framed.reserve(targets.size() + 2);
  framed.push_back(ModelConfig::bos_id);
  framed.insert(framed.end(), targets.begin(), targets.end());
  framed.push_back(ModelConfig::eos_id);
  return forward_ce(model, features, framed, adapter, env);
}

std::vector<int> ctc_collapse(const std::vector<int>& frame_ids, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (int id : frame_ids) {
    if (id != prev && id != blank) out.push_back(id);
    prev = id;
  }
  return out;
}

std::vector<int> greedy_decode(const SeqModel& model, const Tensor& features,
                               const Adapter* adapter) {
  const ModelConfig& cfg = model.config();
  Ctx c{model, adapter, nullptr};
  if (cfg.regime == Regime::EncCTC) {
    Tensor logits = c.linear("out.proj", encode(c, features));
    std::vector<int> frame_ids;
    for (int t = 0; t < logits.dim(0); ++t) frame_ids.push_back(argmax_row(logits, t));
    return ctc_collapse(frame_ids, ModelConfig::blank_id);
  }
  Tensor memory = encode(c, features);
  std::vector<int> ids = {ModelConfig::bos_id};
  while (static_cast<int>(ids.size()) < cfg.max_frames) {
    Tensor logits = decoder_logits(c, memory, ids);
    int next = argmax_row(logits, logits.dim(0) - 1);
    if (next == ModelConfig::eos_id) break;
    ids.push_back(next);
  }
  return {ids.begin() + 1, ids.end()};
}

int64_t count_params(const SeqModel& model, bool trainable_only) {
  return model.count_params(trainable_only);
}

}  // namespace glora
