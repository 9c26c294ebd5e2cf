#include "glora/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "glora/bundle.hpp"
#include "glora/rng.hpp"

namespace glora {

AdapterKind adapter_kind_from_string(const std::string& s) {
  if (s == "lora") return AdapterKind::Lora;
  if (s == "glora1") return AdapterKind::Glora1;
  if (s == "glora2") return AdapterKind::Glora2;
  if (s == "glora3") return AdapterKind::Glora3;
  throw std::invalid_argument("unknown adapter kind: " + s);
}

std::string adapter_kind_to_string(AdapterKind k) {
  switch (k) {
    case AdapterKind::Lora: return "lora";
    case AdapterKind::Glora1: return "glora1";
    case AdapterKind::Glora2: return "glora2";
    case AdapterKind::Glora3: return "glora3";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// forward math

Tensor glu(const Tensor& z, const GluParams& p) {
  if (z.ndim() == 1) {
    Tensor value = ops::add(ops::matmul(p.value_w, z), p.value_b);
    Tensor gate = ops::sigmoid(ops::add(ops::matmul(p.gate_w, z), p.gate_b));
    return ops::hadamard(value, gate);
  }
  Tensor value = ops::add_rowvec(ops::matmul(z, ops::transpose(p.value_w)), p.value_b);
  Tensor gate = ops::sigmoid(ops::add_rowvec(ops::matmul(z, ops::transpose(p.gate_w)), p.gate_b));
  return ops::hadamard(value, gate);
}

namespace {

Tensor maybe_scale(const Tensor& t, double s) { return s == 1.0 ? t : ops::scale(t, s); }

const GluParams& need_glu(const std::optional<GluParams>& g, const char* role) {
  if (!g) throw std::invalid_argument(std::string("adapter params missing ") + role);
  return *g;
}

}  // namespace

Tensor adapted_linear(AdapterKind kind, const Tensor& x, const Tensor& w0, const PointParams& p,
                      double s) {
  bool vec = x.ndim() == 1;
  // row-major position batches: y = x w0^T; vectors use w0 x directly
  auto lin = [vec](const Tensor& m, const Tensor& in) {
    return vec ? ops::matmul(m, in) : ops::matmul(in, ops::transpose(m));
  };
  Tensor base = lin(w0, x);
  Tensor delta;
  switch (kind) {
    case AdapterKind::Lora:
      delta = lin(p.b, lin(p.a, x));
      break;
    case AdapterKind::Glora1: {
      Tensor u = ops::concat({glu(x, need_glu(p.glu_x, "glu_x")), glu(base, need_glu(p.glu_h, "glu_h"))},
                             vec ? 0 : 1);
      delta = lin(p.b, lin(p.a, u));
      break;
    }
    case AdapterKind::Glora2:
      delta = glu(lin(p.b, lin(p.a, glu(x, need_glu(p.glu_in, "glu_in")))),
                  need_glu(p.glu_out, "glu_out"));
      break;
    case AdapterKind::Glora3:
      delta = lin(p.b, glu(lin(p.a, x), need_glu(p.glu_mid, "glu_mid")));
      break;
  }
  return ops::add(base, maybe_scale(delta, s));
}

Tensor lora_forward(const Tensor& x, const Tensor& w0, const PointParams& p, double s) {
  return adapted_linear(AdapterKind::Lora, x, w0, p, s);
}

Tensor glora_forward(AdapterKind kind, const Tensor& x, const Tensor& w0, const PointParams& p,
                     double s) {
  return adapted_linear(kind, x, w0, p, s);
}

Tensor merge_lora(const Tensor& w0, const Tensor& a, const Tensor& b, double s) {
  if (w0.ndim() != 2 || a.ndim() != 2 || b.ndim() != 2)
    throw std::invalid_argument("merge_lora: expects 2-d tensors");
  if (b.dim(0) != w0.dim(0) || a.dim(1) != w0.dim(1) || b.dim(1) != a.dim(0))
    throw std::invalid_argument("merge_lora: shapes do not conform, w0 " + shape_str(w0.shape()) +
                                ", a " + shape_str(a.shape()) + ", b " + shape_str(b.shape()));
  return ops::add(w0, maybe_scale(ops::matmul(b, a), s)).detached();
}

// ---------------------------------------------------------------------------
// parameter layout

std::vector<std::pair<std::string, Shape>> adapter_param_shapes(AdapterKind kind, int rank,
                                                                const AttachPoint& pt) {
  const int d = pt.d, k = pt.k, r = rank;
  int k_a = kind == AdapterKind::Glora1 ? k + d : k;
  std::vector<std::pair<std::string, Shape>> out = {
      {pt.name + ".A", {r, k_a}},
      {pt.name + ".B", {d, r}},
  };
  auto add_glu = [&](const std::string& role, int n) {
    out.push_back({pt.name + "." + role + ".wv", {n, n}});
    out.push_back({pt.name + "." + role + ".bv", {n}});
    out.push_back({pt.name + "." + role + ".wg", {n, n}});
    out.push_back({pt.name + "." + role + ".bg", {n}});
  };
  switch (kind) {
    case AdapterKind::Lora: break;
    case AdapterKind::Glora1:
      add_glu("glu_x", k);
      add_glu("glu_h", d);
      break;
    case AdapterKind::Glora2:
      add_glu("glu_in", k);
      add_glu("glu_out", d);
      break;
    case AdapterKind::Glora3:
      add_glu("glu_mid", r);
      break;
  }
  return out;
}

int64_t adapter_point_param_count(AdapterKind kind, int rank, int d, int k) {
  const int64_t r = rank;
  auto glu_count = [](int64_t n) { return 2 * (n * n + n); };
  switch (kind) {
    case AdapterKind::Lora: return r * (d + k);
    case AdapterKind::Glora1: return static_cast<int64_t>(d) * r + r * (k + d) + glu_count(k) + glu_count(d);
    case AdapterKind::Glora2: return r * (d + k) + glu_count(k) + glu_count(d);
    case AdapterKind::Glora3: return r * (d + k) + glu_count(r);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Adapter

void Adapter::set_param(const std::string& name, Tensor value) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no adapter parameter named " + name);
  if (it->second.shape() != value.shape())
    throw std::invalid_argument("adapter set_param " + name + ": shape " +
                                shape_str(value.shape()) + " != " + shape_str(it->second.shape()));
  it->second = std::move(value);
}

bool Adapter::has_point(const std::string& point) const {
  return params_.count(point + ".A") > 0;
}

PointParams Adapter::point(const std::string& name, const ParamMap* env) const {
  auto fetch = [&](const std::string& role) -> Tensor {
    std::string key = name + "." + role;
    if (env) {
      auto it = env->find(key);
      if (it != env->end()) return it->second;
    }
    auto it = params_.find(key);
    if (it == params_.end()) throw std::out_of_range("no adapter parameter named " + key);
    return it->second;
  };
  auto fetch_glu = [&](const std::string& role) -> GluParams {
    return {fetch(role + ".wv"), fetch(role + ".bv"), fetch(role + ".wg"), fetch(role + ".bg")};
  };
  PointParams pp;
  pp.a = fetch("A");
  pp.b = fetch("B");
  switch (spec_.kind) {
    case AdapterKind::Lora: break;
    case AdapterKind::Glora1:
      pp.glu_x = fetch_glu("glu_x");
      pp.glu_h = fetch_glu("glu_h");
      break;
    case AdapterKind::Glora2:
      pp.glu_in = fetch_glu("glu_in");
      pp.glu_out = fetch_glu("glu_out");
      break;
    case AdapterKind::Glora3:
      pp.glu_mid = fetch_glu("glu_mid");
      break;
  }
  return pp;
}

int64_t Adapter::count_params() const {
  int64_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

namespace {

void validate_spec(const SeqModel& model, const AdapterSpec& spec) {
  if (spec.rank < 1) throw std::invalid_argument("adapter rank must be >= 1");
  if (spec.attach_points.empty()) throw std::invalid_argument("adapter has no attach points");
  for (const std::string& name : spec.attach_points) {
    const AttachPoint& pt = model.attach_point(name);  // throws for unknown names
    if (spec.rank >= std::min(pt.d, pt.k))
      throw std::invalid_argument("rank " + std::to_string(spec.rank) + " must be < min(d,k) = " +
                                  std::to_string(std::min(pt.d, pt.k)) + " at " + name);
  }
}

// b = 0 and zero biases give identity at init; everything else uniform
// with a fan-in bound.
Tensor init_adapter_tensor(const std::string& name, const Shape& shape, uint64_t seed) {
  bool zero = false;
  if (name.size() >= 2 && name.substr(name.size() - 2) == ".B") zero = true;
  if (name.size() >= 3) {
    std::string tail = name.substr(name.size() - 3);
    if (tail == ".bv" || tail == ".bg") zero = true;
  }
  if (zero) return Tensor::zeros(shape);
  int fan_in = shape.back();
  double bound = std::sqrt(6.0 / fan_in);
  Prng rng(seed, fnv1a(name));
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from_values(shape, std::move(v));
}

}  // namespace

Adapter attach(const SeqModel& model, const AdapterSpec& spec) {
  AdapterSpec resolved = spec;
  if (resolved.attach_points.empty()) resolved.attach_points = default_attach_points(model.config());
  validate_spec(model, resolved);
  Adapter ad;
  ad.spec_ = resolved;
  for (const std::string& point : resolved.attach_points) {
    const AttachPoint& pt = model.attach_point(point);
    for (const auto& [name, shape] : adapter_param_shapes(resolved.kind, resolved.rank, pt))
      ad.params_[name] = init_adapter_tensor(name, shape, resolved.seed);
  }
  return ad;
}

Adapter attach(const SeqModel& model, const AdapterBundle& bundle, double scale) {
  AdapterSpec spec;
  spec.kind = bundle.kind;
  spec.rank = bundle.rank;
  spec.scale = scale;
  spec.attach_points = bundle.attach_points();
  validate_spec(model, spec);
  Adapter ad;
  ad.spec_ = spec;
  size_t expected = 0;
  for (const std::string& point : spec.attach_points) {
    const AttachPoint& pt = model.attach_point(point);
    for (const auto& [name, shape] : adapter_param_shapes(spec.kind, spec.rank, pt)) {
      auto it = bundle.entries.find(name);
      if (it == bundle.entries.end())
        throw std::invalid_argument("bundle missing entry " + name + " for attach point " + point);
      if (it->second.shape() != shape)
        throw std::invalid_argument("bundle entry " + name + " at attach point " + point +
                                    ": expected " + shape_str(shape) + ", got " +
                                    shape_str(it->second.shape()));
      ad.params_[name] = it->second;
      ++expected;
    }
  }
  if (expected != bundle.entries.size())
    throw std::invalid_argument("bundle has entries not used by any attach point");
  return ad;
}

SeqModel merge_adapter(const SeqModel& model, const Adapter& adapter) {
  if (adapter.spec().kind != AdapterKind::Lora)
    throw std::invalid_argument("non-mergeable adapter: " +
                                adapter_kind_to_string(adapter.spec().kind) +
                                " applies a nonlinear path");
  SeqModel merged = model;
  for (const std::string& point : adapter.spec().attach_points) {
    PointParams pp = adapter.point(point);
    merged.set_param(point, merge_lora(model.param(point), pp.a, pp.b, adapter.spec().scale));
  }
  return merged;
}

int64_t count_params(const SeqModel& model, const Adapter& adapter, bool trainable_only) {
  int64_t base = model.count_params(trainable_only);
  return base + adapter.count_params();
}

}  // namespace glora
