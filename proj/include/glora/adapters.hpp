#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glora/model.hpp"
#include "glora/tensor.hpp"

namespace glora {

enum class AdapterKind : uint8_t { Lora = 0, Glora1 = 1, Glora2 = 2, Glora3 = 3 };

AdapterKind adapter_kind_from_string(const std::string& s);
std::string adapter_kind_to_string(AdapterKind k);

struct AdapterSpec {
  AdapterKind kind = AdapterKind::Lora;
  int rank = 2;
  double scale = 1.0;
  std::vector<std::string> attach_points;
  uint64_t seed = 0;
};

// glu(z) = (value_w z + value_b) (x) sigmoid(gate_w z + gate_b)
struct GluParams {
  Tensor value_w, value_b, gate_w, gate_b;
};

Tensor glu(const Tensor& z, const GluParams& p);  // z: [n] or [t x n] rows

// Per-attach-point adapter parameters. a is [r x k] except for glora1
// where the input widens to [r x (k+d)]; b is [d x r] and starts at zero
// so every kind is the identity at initialization.
struct PointParams {
  Tensor a, b;
  std::optional<GluParams> glu_x, glu_h;   // glora1: k->k and d->d
  std::optional<GluParams> glu_in, glu_out;  // glora2: k->k and d->d
  std::optional<GluParams> glu_mid;        // glora3: r->r
};

// h = w0 x + s * b (a x); the factored form, never materializing b*a.
Tensor lora_forward(const Tensor& x, const Tensor& w0, const PointParams& p, double s = 1.0);

// glora1: h0 = w0 x;  h = h0 + s * b a concat(glu_x(x), glu_h(h0))
// glora2: h = w0 x + s * glu_out(b a glu_in(x))
// glora3: h = w0 x + s * b glu_mid(a x)
Tensor glora_forward(AdapterKind kind, const Tensor& x, const Tensor& w0, const PointParams& p,
                     double s = 1.0);

// Rows of x are positions; same math as the vector forms, batched.
Tensor adapted_linear(AdapterKind kind, const Tensor& x, const Tensor& w0, const PointParams& p,
                      double s);

// w0 + s * b a. Only plain LoRA merges; the gated kinds are nonlinear in x.
Tensor merge_lora(const Tensor& w0, const Tensor& a, const Tensor& b, double s = 1.0);

struct AdapterBundle;  // bundle.hpp

// The personalized state: one PointParams set per attach point, stored as
// a flat name->tensor map ("enc.0.attn.q.A", "enc.0.attn.q.glu_mid.wv",
// ...). These names are also the bundle entry names and the gradient keys.
class Adapter {
 public:
  Adapter() = default;

  const AdapterSpec& spec() const { return spec_; }
  const std::map<std::string, Tensor>& params() const { return params_; }
  void set_param(const std::string& name, Tensor value);  // shape-checked
  bool has_point(const std::string& point) const;

  // Parameters for one attach point, with `env` overriding by name
  // (training substitutes graph-attached tensors).
  PointParams point(const std::string& name, const ParamMap* env = nullptr) const;

  int64_t count_params() const;

 private:
  AdapterSpec spec_;
  std::map<std::string, Tensor> params_;
  friend Adapter attach(const SeqModel&, const AdapterSpec&);
  friend Adapter attach(const SeqModel&, const AdapterBundle&, double scale);
};

// Expected parameter names (role-suffixed) and shapes for one point.
std::vector<std::pair<std::string, Shape>> adapter_param_shapes(AdapterKind kind, int rank,
                                                                const AttachPoint& pt);

// Closed-form trainable-parameter count for one (d, k) point.
int64_t adapter_point_param_count(AdapterKind kind, int rank, int d, int k);

// Fresh identity-at-init adapter: b = 0, value/gate biases 0, uniform
// fan-in init elsewhere, deterministic in spec.seed. Empty
// spec.attach_points selects every attention projection.
Adapter attach(const SeqModel& model, const AdapterSpec& spec);

// Plugs serialized weights into the placeholder structure; validates kind,
// rank, fingerprint is checked by callers (protocol), and every entry
// shape, naming the offending attach point. Detaching is simply dropping
// the Adapter (base tensors are never touched).
Adapter attach(const SeqModel& model, const AdapterBundle& bundle, double scale = 1.0);

// New model with w0 + s*ba folded in at every attach point. Throws
// "non-mergeable adapter" for the gated kinds.
SeqModel merge_adapter(const SeqModel& model, const Adapter& adapter);

int64_t count_params(const SeqModel& model, const Adapter& adapter, bool trainable_only);

}  // namespace glora
