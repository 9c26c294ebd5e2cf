#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace glora {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct GraphImpl;

// Dense row-major tensor of 64-bit floats. Values are immutable once
// created; every operation returns a new Tensor. A tensor may carry a
// handle into a differentiation graph (see Graph); tensors without a
// handle act as constants and record nothing.
//
// 32-bit floats exist only in the serialized bundle/corpus formats; all
// in-memory arithmetic is double precision.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor from_values(Shape shape, std::vector<double> values);
  static Tensor scalar(double v);
  static Tensor eye(int n);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t size() const;
  int dim(int axis) const { return shape_[static_cast<size_t>(axis)]; }

  const std::vector<double>& values() const { return *data_; }
  double value() const;                 // scalar tensors only
  double at(int i) const;               // 1-d
  double at(int i, int j) const;        // 2-d
  bool all_finite() const;

  bool attached() const { return node_ >= 0; }
  int node() const { return node_; }
  Tensor detached() const;

  bool same_values(const Tensor& other) const;  // bitwise equality

 private:
  std::shared_ptr<const std::vector<double>> data_;
  Shape shape_;
  std::shared_ptr<GraphImpl> graph_;
  int node_ = -1;

  friend class Graph;
  friend struct OpRecorder;
};

// Gradients keyed by trainable-parameter name. Shapes always match the
// parameter; parameters the loss does not reach are absent.
class GradTable {
 public:
  bool has(const std::string& name) const { return grads_.count(name) > 0; }
  const Tensor& at(const std::string& name) const;
  void set(const std::string& name, Tensor g);
  size_t size() const { return grads_.size(); }
  const std::map<std::string, Tensor>& entries() const { return grads_; }

 private:
  std::map<std::string, Tensor> grads_;
};

// Reverse-mode tape, rebuilt per forward pass (define-by-run). A graph is
// confined to one session/thread at a time; tensors themselves are
// immutable and freely shareable.
class Graph {
 public:
  Graph();

  // Registers a trainable leaf. Gradients for it appear in the GradTable
  // under `name`. Registering the same name twice is an error.
  Tensor param(const std::string& name, const Tensor& value);

  // d(loss)/d(leaf) for every trainable leaf reachable from `loss`.
  // `loss` must be a scalar attached to this graph.
  GradTable backward(const Tensor& loss) const;

  size_t node_count() const;

 private:
  std::shared_ptr<GraphImpl> impl_;
  friend struct OpRecorder;
};

namespace ops {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);       // exact shape or scalar broadcast
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);  // exact shape or scalar broadcast
Tensor scale(const Tensor& a, double c);
Tensor add_rowvec(const Tensor& x, const Tensor& b);  // [t x k] + [k] per row
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, int start, int len);
Tensor softmax(const Tensor& a, int axis);
Tensor logsumexp(const Tensor& a, int axis);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);

// Mean negative log-likelihood of `targets` under row-softmaxed logits.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets);

// -log p(targets | logits) summed over all blank-interleaved alignments,
// computed in log space (forward recursion; gradient via the backward
// recursion). `targets` must not contain `blank`.
Tensor ctc_nll(const Tensor& logits, const std::vector<int>& targets, int blank);

// |targets| plus one frame per adjacent equal pair.
int ctc_min_frames(const std::vector<int>& targets);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

}  // namespace ops

using ParamMap = std::map<std::string, Tensor>;

// Central-difference gradient oracle: (f(p+eps) - f(p-eps)) / (2 eps)
// per coordinate. Independent of the tape; used to check backward().
GradTable finite_diff_grad(const std::function<double(const ParamMap&)>& f,
                           const ParamMap& params, double eps = 1e-5);

// relative error |a-n| / max(|a|, |n|, 1e-8)
double rel_err(double a, double n);

}  // namespace glora
