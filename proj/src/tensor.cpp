#include "glora/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace glora {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logadd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}
}  // namespace

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int e : s) {
    if (e <= 0) throw std::invalid_argument("tensor extents must be positive");
    n *= e;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape) {
  return from_values(shape, std::vector<double>(shape_numel(shape), 0.0));
}

Tensor Tensor::full(Shape shape, double v) {
  return from_values(shape, std::vector<double>(shape_numel(shape), v));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != static_cast<int64_t>(values.size()))
    throw std::invalid_argument("from_values: " + shape_str(shape) + " wants " +
                                std::to_string(shape_numel(shape)) + " values, got " +
                                std::to_string(values.size()));
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::make_shared<const std::vector<double>>(std::move(values));
  return t;
}

Tensor Tensor::scalar(double v) { return from_values({1}, {v}); }

Tensor Tensor::eye(int n) {
  std::vector<double> v(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[static_cast<size_t>(i) * n + i] = 1.0;
  return from_values({n, n}, std::move(v));
}

int64_t Tensor::size() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }

double Tensor::value() const {
  if (size() != 1) throw std::invalid_argument("value(): tensor is not scalar, shape " + shape_str(shape_));
  return (*data_)[0];
}

double Tensor::at(int i) const { return (*data_)[static_cast<size_t>(i)]; }

double Tensor::at(int i, int j) const {
  return (*data_)[static_cast<size_t>(i) * shape_[1] + j];
}

bool Tensor::all_finite() const {
  for (double v : *data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor Tensor::detached() const {
  Tensor t;
  t.data_ = data_;
  t.shape_ = shape_;
  return t;
}

bool Tensor::same_values(const Tensor& other) const {
  if (shape_ != other.shape_) return false;
  const auto& a = *data_;
  const auto& b = *other.data_;
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

// ---------------------------------------------------------------------------
// Graph / tape

using BackFn = std::function<void(const double* gout, const std::vector<double*>& gin)>;

struct NodeRec {
  Shape shape;
  int64_t size = 0;
  std::string param_name;     // nonempty => trainable leaf
  std::vector<int> in_nodes;  // -1 where the input is detached
  BackFn back;
};

struct GraphImpl {
  std::vector<NodeRec> nodes;
};

Graph::Graph() : impl_(std::make_shared<GraphImpl>()) {}

size_t Graph::node_count() const { return impl_->nodes.size(); }

Tensor Graph::param(const std::string& name, const Tensor& value) {
  if (!value.defined()) throw std::invalid_argument("param: undefined tensor for " + name);
  for (const auto& n : impl_->nodes)
    if (n.param_name == name)
      throw std::invalid_argument("param: duplicate registration of " + name);
  NodeRec rec;
  rec.shape = value.shape();
  rec.size = value.size();
  rec.param_name = name;
  impl_->nodes.push_back(std::move(rec));
  Tensor t = value.detached();
  t.graph_ = impl_;
  t.node_ = static_cast<int>(impl_->nodes.size()) - 1;
  return t;
}

GradTable Graph::backward(const Tensor& loss) const {
  if (!loss.attached() || loss.graph_ != impl_)
    throw std::invalid_argument("backward: loss is not attached to this graph");
  if (loss.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, shape " + shape_str(loss.shape()));

  const auto& nodes = impl_->nodes;
  std::vector<std::vector<double>> grads(nodes.size());
  grads[static_cast<size_t>(loss.node_)] = {1.0};

  for (int id = loss.node_; id >= 0; --id) {
    auto& g = grads[static_cast<size_t>(id)];
    if (g.empty()) continue;
    const NodeRec& rec = nodes[static_cast<size_t>(id)];
    if (!rec.back) continue;
    std::vector<double*> gin(rec.in_nodes.size(), nullptr);
    for (size_t i = 0; i < rec.in_nodes.size(); ++i) {
      int in = rec.in_nodes[i];
      if (in < 0) continue;
      auto& buf = grads[static_cast<size_t>(in)];
      if (buf.empty()) buf.assign(static_cast<size_t>(nodes[static_cast<size_t>(in)].size), 0.0);
      gin[i] = buf.data();
    }
    rec.back(g.data(), gin);
  }

  GradTable table;
  for (size_t id = 0; id < nodes.size(); ++id) {
    if (nodes[id].param_name.empty() || grads[id].empty()) continue;
    table.set(nodes[id].param_name, Tensor::from_values(nodes[id].shape, std::move(grads[id])));
  }
  return table;
}

const Tensor& GradTable::at(const std::string& name) const {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw std::out_of_range("GradTable: no gradient for " + name);
  return it->second;
}

void GradTable::set(const std::string& name, Tensor g) { grads_[name] = std::move(g); }

// Records one op node when any input is attached. `gin` in the backward
// callback is parallel to `ins` with nullptr where the input is detached.
struct OpRecorder {
  static Tensor result(std::vector<const Tensor*> ins, Shape shape,
                       std::vector<double> vals, BackFn back) {
    std::shared_ptr<GraphImpl> graph;
    for (const Tensor* t : ins) {
      if (!t->attached()) continue;
      if (!graph) {
        graph = t->graph_;
      } else if (graph != t->graph_) {
        throw std::invalid_argument("op inputs belong to different graphs");
      }
    }
    Tensor out = Tensor::from_values(std::move(shape), std::move(vals));
    if (!graph) return out;

    NodeRec rec;
    rec.shape = out.shape();
    rec.size = out.size();
    rec.back = std::move(back);
    rec.in_nodes.reserve(ins.size());
    for (const Tensor* t : ins) rec.in_nodes.push_back(t->attached() ? t->node_ : -1);
    graph->nodes.push_back(std::move(rec));
    out.graph_ = graph;
    out.node_ = static_cast<int>(graph->nodes.size()) - 1;
    return out;
  }
};

namespace ops {

namespace {

const std::vector<double>& vals(const Tensor& t) { return t.values(); }

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
}

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.ndim() == 2 && b.ndim() == 2) {
    int m = a.dim(0), n = a.dim(1), n2 = b.dim(0), p = b.dim(1);
    if (n != n2)
      throw std::invalid_argument("matmul: inner extents differ, " + shape_str(a.shape()) +
                                  " vs " + shape_str(b.shape()));
    std::vector<double> c(static_cast<size_t>(m) * p, 0.0);
    const auto& av = vals(a);
    const auto& bv = vals(b);
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < n; ++k) {
        double aik = av[static_cast<size_t>(i) * n + k];
        if (aik == 0.0) continue;
        const double* brow = &bv[static_cast<size_t>(k) * p];
        double* crow = &c[static_cast<size_t>(i) * p];
        for (int j = 0; j < p; ++j) crow[j] += aik * brow[j];
      }
    auto back = [av = a.values(), bv = b.values(), m, n, p](const double* g,
                                                            const std::vector<double*>& gin) {
      if (gin[0]) {
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < p; ++j) {
            double gij = g[static_cast<size_t>(i) * p + j];
            if (gij == 0.0) continue;
            for (int k = 0; k < n; ++k)
              gin[0][static_cast<size_t>(i) * n + k] += gij * bv[static_cast<size_t>(k) * p + j];
          }
      }
      if (gin[1]) {
        for (int k = 0; k < n; ++k)
          for (int i = 0; i < m; ++i) {
            double aik = av[static_cast<size_t>(i) * n + k];
            if (aik == 0.0) continue;
            const double* grow = &g[static_cast<size_t>(i) * p];
            double* brow = &gin[1][static_cast<size_t>(k) * p];
            for (int j = 0; j < p; ++j) brow[j] += aik * grow[j];
          }
      }
    };
    return OpRecorder::result({&a, &b}, {m, p}, std::move(c), std::move(back));
  }
  if (a.ndim() == 2 && b.ndim() == 1) {
    int m = a.dim(0), n = a.dim(1);
    if (n != b.dim(0))
      throw std::invalid_argument("matmul: inner extents differ, " + shape_str(a.shape()) +
                                  " vs " + shape_str(b.shape()));
    std::vector<double> y(static_cast<size_t>(m), 0.0);
    const auto& av = vals(a);
    const auto& xv = vals(b);
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += av[static_cast<size_t>(i) * n + k] * xv[static_cast<size_t>(k)];
      y[static_cast<size_t>(i)] = s;
    }
    auto back = [av = a.values(), xv = b.values(), m, n](const double* g,
                                                         const std::vector<double*>& gin) {
      for (int i = 0; i < m; ++i) {
        double gi = g[i];
        if (gi == 0.0) continue;
        if (gin[0])
          for (int k = 0; k < n; ++k) gin[0][static_cast<size_t>(i) * n + k] += gi * xv[static_cast<size_t>(k)];
        if (gin[1])
          for (int k = 0; k < n; ++k) gin[1][k] += gi * av[static_cast<size_t>(i) * n + k];
      }
    };
    return OpRecorder::result({&a, &b}, {m}, std::move(y), std::move(back));
  }
  if (a.ndim() == 1 && b.ndim() == 2) {
    int m = a.dim(0), m2 = b.dim(0), p = b.dim(1);
    if (m != m2)
      throw std::invalid_argument("matmul: inner extents differ, " + shape_str(a.shape()) +
                                  " vs " + shape_str(b.shape()));
    std::vector<double> y(static_cast<size_t>(p), 0.0);
    const auto& xv = vals(a);
    const auto& bv = vals(b);
    for (int k = 0; k < m; ++k) {
      double xk = xv[static_cast<size_t>(k)];
      if (xk == 0.0) continue;
      for (int j = 0; j < p; ++j) y[static_cast<size_t>(j)] += xk * bv[static_cast<size_t>(k) * p + j];
    }
    auto back = [xv = a.values(), bv = b.values(), m, p](const double* g,
                                                         const std::vector<double*>& gin) {
      if (gin[0])
        for (int k = 0; k < m; ++k) {
          double s = 0.0;
          for (int j = 0; j < p; ++j) s += g[j] * bv[static_cast<size_t>(k) * p + j];
          gin[0][k] += s;
        }
      if (gin[1])
        for (int k = 0; k < m; ++k) {
          double xk = xv[static_cast<size_t>(k)];
          if (xk == 0.0) continue;
          for (int j = 0; j < p; ++j) gin[1][static_cast<size_t>(k) * p + j] += xk * g[j];
        }
    };
    return OpRecorder::result({&a, &b}, {p}, std::move(y), std::move(back));
  }
  throw std::invalid_argument("matmul: unsupported ranks " + shape_str(a.shape()) + " and " +
                              shape_str(b.shape()));
}

Tensor transpose(const Tensor& a) {
  require_defined(a, "transpose");
  if (a.ndim() != 2) throw std::invalid_argument("transpose: expects 2-d, got " + shape_str(a.shape()));
  int m = a.dim(0), n = a.dim(1);
  std::vector<double> t(static_cast<size_t>(m) * n);
  const auto& av = vals(a);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) t[static_cast<size_t>(j) * m + i] = av[static_cast<size_t>(i) * n + j];
  auto back = [m, n](const double* g, const std::vector<double*>& gin) {
    if (!gin[0]) return;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < m; ++i) gin[0][static_cast<size_t>(i) * n + j] += g[static_cast<size_t>(j) * m + i];
  };
  return OpRecorder::result({&a}, {n, m}, std::move(t), std::move(back));
}

namespace {

enum class EwKind { Add, Sub, Mul };

Tensor elementwise_binary(const Tensor& a, const Tensor& b, EwKind kind, const char* name) {
  require_defined(a, name);
  require_defined(b, name);
  bool a_scalar = a.size() == 1 && b.size() != 1;
  bool b_scalar = b.size() == 1 && a.size() != 1;
  if (!(a.shape() == b.shape() || a_scalar || b_scalar))
    throw std::invalid_argument(std::string(name) + ": incompatible shapes " +
                                shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const Tensor& big = a_scalar ? b : a;
  size_t n = static_cast<size_t>(big.size());
  const auto& av = vals(a);
  const auto& bv = vals(b);
  std::vector<double> y(n);
  for (size_t i = 0; i < n; ++i) {
    double x0 = a_scalar ? av[0] : av[i];
    double x1 = b_scalar ? bv[0] : bv[i];
    y[i] = kind == EwKind::Add ? x0 + x1 : kind == EwKind::Sub ? x0 - x1 : x0 * x1;
  }
  auto back = [av = a.values(), bv = b.values(), a_scalar, b_scalar, n, kind](
                  const double* g, const std::vector<double*>& gin) {
    for (size_t i = 0; i < n; ++i) {
      double gi = g[i];
      if (gi == 0.0) continue;
      double x0 = a_scalar ? av[0] : av[i];
      double x1 = b_scalar ? bv[0] : bv[i];
      if (gin[0]) {
        double d = kind == EwKind::Mul ? gi * x1 : gi;
        gin[0][a_scalar ? 0 : i] += d;
      }
      if (gin[1]) {
        double d = kind == EwKind::Mul ? gi * x0 : kind == EwKind::Sub ? -gi : gi;
        gin[1][b_scalar ? 0 : i] += d;
      }
    }
  };
  return OpRecorder::result({&a, &b}, big.shape(), std::move(y), std::move(back));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise_binary(a, b, EwKind::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise_binary(a, b, EwKind::Sub, "sub"); }
Tensor hadamard(const Tensor& a, const Tensor& b) { return elementwise_binary(a, b, EwKind::Mul, "hadamard"); }

Tensor scale(const Tensor& a, double c) {
  require_defined(a, "scale");
  size_t n = static_cast<size_t>(a.size());
  std::vector<double> y(n);
  const auto& av = vals(a);
  for (size_t i = 0; i < n; ++i) y[i] = c * av[i];
  auto back = [c, n](const double* g, const std::vector<double*>& gin) {
    if (!gin[0]) return;
    for (size_t i = 0; i < n; ++i) gin[0][i] += c * g[i];
  };
  return OpRecorder::result({&a}, a.shape(), std::move(y), std::move(back));
}

Tensor add_rowvec(const Tensor& x, const Tensor& b) {
  require_defined(x, "add_rowvec");
  require_defined(b, "add_rowvec");
  if (x.ndim() != 2 || b.ndim() != 1 || x.dim(1) != b.dim(0))
    throw std::invalid_argument("add_rowvec: want [t x k] and [k], got " + shape_str(x.shape()) +
                                " and " + shape_str(b.shape()));
  int t = x.dim(0), k = x.dim(1);
  const auto& xv = vals(x);
  const auto& bv = vals(b);
  std::vector<double> y(static_cast<size_t>(t) * k);
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < k; ++j)
      y[static_cast<size_t>(i) * k + j] = xv[static_cast<size_t>(i) * k + j] + bv[static_cast<size_t>(j)];
  auto back = [t, k](const double* g, const std::vector<double*>& gin) {
    if (gin[0])
      for (size_t i = 0; i < static_cast<size_t>(t) * k; ++i) gin[0][i] += g[i];
    if (gin[1])
      for (int i = 0; i < t; ++i)
        for (int j = 0; j < k; ++j) gin[1][j] += g[static_cast<size_t>(i) * k + j];
  };
  return OpRecorder::result({&x, &b}, x.shape(), std::move(y), std::move(back));
}

Tensor sigmoid(const Tensor& a) {
  require_defined(a, "sigmoid");
  size_t n = static_cast<size_t>(a.size());
  std::vector<double> y(n);
  const auto& av = vals(a);
  for (size_t i = 0; i < n; ++i) y[i] = stable_sigmoid(av[i]);
  auto back = [yv = y, n](const double* g, const std::vector<double*>& gin) {
    if (!gin[0]) return;
    for (size_t i = 0; i < n; ++i) gin[0][i] += g[i] * yv[i] * (1.0 - yv[i]);
  };
  return OpRecorder::result({&a}, a.shape(), std::move(y), std::move(back));
}

Tensor tanh(const Tensor& a) {
  require_defined(a, "tanh");
  size_t n = static_cast<size_t>(a.size());
  std::vector<double> y(n);
  const auto& av = vals(a);
  for (size_t i = 0; i < n; ++i) y[i] = std::tanh(av[i]);
  auto back = [yv = y, n](const double* g, const std::vector<double*>& gin) {
    if (!gin[0]) return;
    for (size_t i = 0; i < n; ++i) gin[0][i] += g[i] * (1.0 - yv[i] * yv[i]);
  };
  return OpRecorder::result({&a}, a.shape(), std::move(y), std::move(back));
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  for (const Tensor& p : parts) require_defined(p, "concat");
  int nd = parts[0].ndim();
  if (axis < 0 || axis >= nd) throw std::invalid_argument("concat: bad axis " + std::to_string(axis));
  for (const Tensor& p : parts) {
    if (p.ndim() != nd) throw std::invalid_argument("concat: rank mismatch");
    for (int d = 0; d < nd; ++d)
      if (d != axis && p.dim(d) != parts[0].dim(d))
        throw std::invalid_argument("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
                                    shape_str(parts[0].shape()));
  }
  if (nd == 1) {
    int total = 0;
    for (const Tensor& p : parts) total += p.dim(0);
    std::vector<double> y;
    y.reserve(static_cast<size_t>(total));
    std::vector<int> lens;
    for (const Tensor& p : parts) {
      y.insert(y.end(), vals(p).begin(), vals(p).end());
      lens.push_back(p.dim(0));
    }
    auto back = [lens](const double* g, const std::vector<double*>& gin) {
      size_t off = 0;
      for (size_t i = 0; i < lens.size(); ++i) {
        if (gin[i])
          for (int j = 0; j < lens[i]; ++j) gin[i][j] += g[off + static_cast<size_t>(j)];
        off += static_cast<size_t>(lens[i]);
      }
    };
    std::vector<const Tensor*> ins;
    for (const Tensor& p : parts) ins.push_back(&p);
    return OpRecorder::result(std::move(ins), {total}, std::move(y), std::move(back));
  }
  // 2-d
  int rows = parts[0].dim(0), cols = parts[0].dim(1);
  if (axis == 0) {
    int total = 0;
    for (const Tensor& p : parts) total += p.dim(0);
    std::vector<double> y;
    y.reserve(static_cast<size_t>(total) * cols);
    std::vector<int> lens;
    for (const Tensor& p : parts) {
      y.insert(y.end(), vals(p).begin(), vals(p).end());
      lens.push_back(p.dim(0));
    }
    auto back = [lens, cols](const double* g, const std::vector<double*>& gin) {
      size_t off = 0;
      for (size_t i = 0; i < lens.size(); ++i) {
        size_t n = static_cast<size_t>(lens[i]) * cols;
        if (gin[i])
          for (size_t j = 0; j < n; ++j) gin[i][j] += g[off + j];
        off += n;
      }
    };
    std::vector<const Tensor*> ins;
    for (const Tensor& p : parts) ins.push_back(&p);
    return OpRecorder::result(std::move(ins), {total, cols}, std::move(y), std::move(back));
  }
  int total = 0;
  std::vector<int> widths;
  for (const Tensor& p : parts) {
    total += p.dim(1);
    widths.push_back(p.dim(1));
  }
  std::vector<double> y(static_cast<size_t>(rows) * total);
  {
    int off = 0;
    for (const Tensor& p : parts) {
      int w = p.dim(1);
      const auto& pv = vals(p);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < w; ++j)
          y[static_cast<size_t>(i) * total + off + j] = pv[static_cast<size_t>(i) * w + j];
      off += w;
    }
  }
  auto back = [widths, rows, total](const double* g, const std::vector<double*>& gin) {
    int off = 0;
    for (size_t p = 0; p < widths.size(); ++p) {
      int w = widths[p];
      if (gin[p])
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < w; ++j)
            gin[p][static_cast<size_t>(i) * w + j] += g[static_cast<size_t>(i) * total + off + j];
      off += w;
    }
  };
  std::vector<const Tensor*> ins;
  for (const Tensor& p : parts) ins.push_back(&p);
  return OpRecorder::result(std::move(ins), {rows, total}, std::move(y), std::move(back));
}

Tensor slice(const Tensor& a, int axis, int start, int len) {
  require_defined(a, "slice");
  if (axis < 0 || axis >= a.ndim()) throw std::invalid_argument("slice: bad axis " + std::to_string(axis));
  if (start < 0 || len <= 0 || start + len > a.dim(axis))
    throw std::invalid_argument("slice: range [" + std::to_string(start) + ", " +
                                std::to_string(start + len) + ") out of bounds for " +
                                shape_str(a.shape()));
  const auto& av = vals(a);
  if (a.ndim() == 1) {
    std::vector<double> y(av.begin() + start, av.begin() + start + len);
    auto back = [start, len](const double* g, const std::vector<double*>& gin) {
      if (!gin[0]) return;
      for (int i = 0; i < len; ++i) gin[0][static_cast<size_t>(start + i)] += g[i];
    };
    return OpRecorder::result({&a}, {len}, std::move(y), std::move(back));
  }
  int rows = a.dim(0), cols = a.dim(1);
  if (axis == 0) {
    std::vector<double> y(av.begin() + static_cast<size_t>(start) * cols,
                          av.begin() + static_cast<size_t>(start + len) * cols);
    auto back = [start, len, cols](const double* g, const std::vector<double*>& gin) {
      if (!gin[0]) return;
      size_t n = static_cast<size_t>(len) * cols;
      for (size_t i = 0; i < n; ++i) gin[0][static_cast<size_t>(start) * cols + i] += g[i];
    };
    return OpRecorder::result({&a}, {len, cols}, std::move(y), std::move(back));
  }
  std::vector<double> y(static_cast<size_t>(rows) * len);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < len; ++j)
      y[static_cast<size_t>(i) * len + j] = av[static_cast<size_t>(i) * cols + start + j];
  auto back = [rows, cols, start, len](const double* g, const std::vector<double*>& gin) {
    if (!gin[0]) return;
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < len; ++j)
        gin[0][static_cast<size_t>(i) * cols + start + j] += g[static_cast<size_t>(i) * len + j];
  };
  return OpRecorder::result({&a}, {rows, len}, std::move(y), std::move(back));
}

namespace {

// Iterates the lines of a 1-d or 2-d tensor along `axis`: a line is the
// vector being reduced/normalized. For 2-d axis=1 the lines are rows.
struct LineIter {
  int n_lines;
  int line_len;
  int stride;      // step between consecutive elements of a line
  int line_step;   // step between line starts

  static LineIter make(const Shape& s, int axis) {
    if (s.size() == 1) {
      if (axis != 0) throw std::invalid_argument("bad axis for 1-d tensor");
      return {1, s[0], 1, 0};
    }
    if (s.size() != 2) throw std::invalid_argument("softmax/logsumexp support 1-d and 2-d only");
    if (axis == 1) return {s[0], s[1], 1, s[1]};
    if (axis == 0) return {s[1], s[0], s[1], 1};
    throw std::invalid_argument("bad axis " + std::to_string(axis));
  }
};

}  // namespace

Tensor softmax(const Tensor& a, int axis) {
  require_defined(a, "softmax");
  LineIter it = LineIter::make(a.shape(), axis);
  const auto& av = vals(a);
  std::vector<double> y(av.size());
  for (int l = 0; l < it.n_lines; ++l) {
    size_t base = static_cast<size_t>(l) * it.line_step;
    double mx = kNegInf;
    for (int i = 0; i < it.line_len; ++i) mx = std::max(mx, av[base + static_cast<size_t>(i) * it.stride]);
    double z = 0.0;
    for (int i = 0; i < it.line_len; ++i) z += std::exp(av[base + static_cast<size_t>(i) * it.stride] - mx);
    for (int i = 0; i < it.line_len; ++i) {
      size_t idx = base + static_cast<size_t>(i) * it.stride;
      y[idx] = std::exp(av[idx] - mx) / z;
    }
  }
  auto back = [yv = y, it](const double* g, const std::vector<double*>& gin) {
    if (!gin[0]) return;
    for (int l = 0; l < it.n_lines; ++l) {
      size_t base = static_cast<size_t>(l) * it.line_step;
      double dot = 0.0;
      for (int i = 0; i < it.line_len; ++i) {
        size_t idx = base + static_cast<size_t>(i) * it.stride;
        dot += g[idx] * yv[idx];
      }
      for (int i = 0; i < it.line_len; ++i) {
        size_t idx = base + static_cast<size_t>(i) * it.stride;
        gin[0][idx] += yv[idx] * (g[idx] - dot);
      }
    }
  };
  return OpRecorder::result({&a}, a.shape(), std::move(y), std::move(back));
}

Tensor logsumexp(const Tensor& a, int axis) {
  require_defined(a, "logsumexp");
  LineIter it = LineIter::make(a.shape(), axis);
  const auto& av = vals(a);
  std::vector<double> y(static_cast<size_t>(it.n_lines));
  for (int l = 0; l < it.n_lines; ++l) {
    size_t base = static_cast<size_t>(l) * it.line_step;
    double mx = kNegInf;
    for (int i = 0; i < it.line_len; ++i) mx = std::max(mx, av[base + static_cast<size_t>(i) * it.stride]);
    double z = 0.0;
    for (int i = 0; i < it.line_len; ++i) z += std::exp(av[base + static_cast<size_t>(i) * it.stride] - mx);
    y[static_cast<size_t>(l)] = mx + std::log(z);
  }
  Shape out_shape = a.ndim() == 1 ? Shape{1} : Shape{it.n_lines};
  auto back = [av = a.values(), yv = y, it](const double* g, const std::vector<double*>& gin) {
    if (!gin[0]) return;
    for (int l = 0; l < it.n_lines; ++l) {
      size_t base = static_cast<size_t>(l) * it.line_step;
      for (int i = 0; i < it.line_len; ++i) {
        size_t idx = base + static_cast<size_t>(i) * it.stride;
        gin[0][idx] += g[l] * std::exp(av[idx] - yv[static_cast<size_t>(l)]);
      }
    }
  };
  return OpRecorder::result({&a}, std::move(out_shape), std::move(y), std::move(back));
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_defined(x, "layer_norm");
  require_defined(gain, "layer_norm");
  require_defined(bias, "layer_norm");
  int d = x.ndim() == 1 ? x.dim(0) : x.dim(1);
  int rows = x.ndim() == 1 ? 1 : x.dim(0);
  if (x.ndim() > 2) throw std::invalid_argument("layer_norm: supports 1-d and 2-d only");
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d})
    throw std::invalid_argument("layer_norm: gain/bias must be [" + std::to_string(d) + "]");
  const auto& xv = vals(x);
  const auto& gv = vals(gain);
  const auto& bv = vals(bias);
  std::vector<double> y(xv.size());
  std::vector<double> xhat(xv.size());
  std::vector<double> inv_sd(static_cast<size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    size_t base = static_cast<size_t>(r) * d;
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += xv[base + j];
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      double c = xv[base + j] - mu;
      var += c * c;
    }
    var /= d;
    double isd = 1.0 / std::sqrt(var + eps);
    inv_sd[static_cast<size_t>(r)] = isd;
    for (int j = 0; j < d; ++j) {
      double h = (xv[base + j] - mu) * isd;
      xhat[base + j] = h;
      y[base + j] = h * gv[static_cast<size_t>(j)] + bv[static_cast<size_t>(j)];
    }
  }
  auto back = [xhat, inv_sd, gv = gain.values(), rows, d](const double* g,
                                                          const std::vector<double*>& gin) {
    for (int r = 0; r < rows; ++r) {
      size_t base = static_cast<size_t>(r) * d;
      double sum_gh = 0.0, sum_gh_xhat = 0.0;
      for (int j = 0; j < d; ++j) {
        double gh = g[base + j] * gv[static_cast<size_t>(j)];
        sum_gh += gh;
        sum_gh_xhat += gh * xhat[base + j];
      }
      if (gin[0]) {
        double isd = inv_sd[static_cast<size_t>(r)];
        for (int j = 0; j < d; ++j) {
          double gh = g[base + j] * gv[static_cast<size_t>(j)];
          gin[0][base + j] += isd * (gh - sum_gh / d - xhat[base + j] * sum_gh_xhat / d);
        }
      }
      if (gin[1])
        for (int j = 0; j < d; ++j) gin[1][j] += g[base + j] * xhat[base + j];
      if (gin[2])
        for (int j = 0; j < d; ++j) gin[2][j] += g[base + j];
    }
  };
  return OpRecorder::result({&x, &gain, &bias}, x.shape(), std::move(y), std::move(back));
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  require_defined(table, "embedding_lookup");
  if (table.ndim() != 2) throw std::invalid_argument("embedding_lookup: table must be 2-d");
  int v = table.dim(0), d = table.dim(1);
  if (ids.empty()) throw std::invalid_argument("embedding_lookup: empty id list");
  for (int id : ids)
    if (id < 0 || id >= v)
      throw std::invalid_argument("embedding_lookup: id " + std::to_string(id) +
                                  " out of range for table " + shape_str(table.shape()));
  int t = static_cast<int>(ids.size());
  std::vector<double> y(static_cast<size_t>(t) * d);
  const auto& tv = vals(table);
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < d; ++j)
      y[static_cast<size_t>(i) * d + j] = tv[static_cast<size_t>(ids[static_cast<size_t>(i)]) * d + j];
  auto back = [ids, d, t](const double* g, const std::vector<double*>& gin) {
    if (!gin[0]) return;
    for (int i = 0; i < t; ++i)
      for (int j = 0; j < d; ++j)
        gin[0][static_cast<size_t>(ids[static_cast<size_t>(i)]) * d + j] += g[static_cast<size_t>(i) * d + j];
  };
  return OpRecorder::result({&table}, {t, d}, std::move(y), std::move(back));
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
  require_defined(logits, "cross_entropy");
  if (logits.ndim() != 2) throw std::invalid_argument("cross_entropy: logits must be [t x v]");
  if (targets.empty()) throw std::invalid_argument("cross_entropy: empty target");
  int t = logits.dim(0), v = logits.dim(1);
  if (static_cast<int>(targets.size()) != t)
    throw std::invalid_argument("cross_entropy: " + std::to_string(t) + " rows vs " +
                                std::to_string(targets.size()) + " targets");
  for (int id : targets)
    if (id < 0 || id >= v)
      throw std::invalid_argument("cross_entropy: target id " + std::to_string(id) +
                                  " outside vocab of " + std::to_string(v));
  const auto& lv = vals(logits);
  std::vector<double> probs(lv.size());
  double total = 0.0;
  for (int i = 0; i < t; ++i) {
    size_t base = static_cast<size_t>(i) * v;
    double mx = kNegInf;
    for (int j = 0; j < v; ++j) mx = std::max(mx, lv[base + j]);
    double z = 0.0;
    for (int j = 0; j < v; ++j) z += std::exp(lv[base + j] - mx);
    double logz = mx + std::log(z);
    for (int j = 0; j < v; ++j) probs[base + j] = std::exp(lv[base + j] - logz);
    total += logz - lv[base + static_cast<size_t>(targets[static_cast<size_t>(i)])];
  }
  auto back = [probs, targets, t, v](const double* g, const std::vector<double*>& gin) {
    if (!gin[0]) return;
    double s = g[0] / t;
    for (int i = 0; i < t; ++i) {
      size_t base = static_cast<size_t>(i) * v;
      for (int j = 0; j < v; ++j) gin[0][base + j] += s * probs[base + j];
      gin[0][base + static_cast<size_t>(targets[static_cast<size_t>(i)])] -= s;
    }
  };
  return OpRecorder::result({&logits}, {1}, {total / t}, std::move(back));
}

// Minimum frames a CTC target needs: one per label plus one separating
// blank between each adjacent equal pair.
int ctc_min_frames(const std::vector<int>& targets) {
  int need = static_cast<int>(targets.size());
  for (size_t i = 1; i < targets.size(); ++i)
    if (targets[i] == targets[i - 1]) ++need;
  return need;
}

Tensor ctc_nll(const Tensor& logits, const std::vector<int>& targets, int blank) {
  require_defined(logits, "ctc_nll");
  if (logits.ndim() != 2) throw std::invalid_argument("ctc_nll: logits must be [t x v]");
  int t_max = logits.dim(0), v = logits.dim(1);
  if (blank < 0 || blank >= v) throw std::invalid_argument("ctc_nll: blank id outside vocab");
  for (int id : targets) {
    if (id == blank) throw std::invalid_argument("ctc_nll: targets must not contain the blank id");
    if (id < 0 || id >= v)
      throw std::invalid_argument("ctc_nll: target id " + std::to_string(id) + " outside vocab of " +
                                  std::to_string(v));
  }
  if (t_max < ctc_min_frames(targets))
    throw std::invalid_argument("ctc_nll: target longer than input admits (" +
                                std::to_string(targets.size()) + " labels need at least " +
                                std::to_string(ctc_min_frames(targets)) + " frames, have " +
                                std::to_string(t_max) + ")");

  int l = static_cast<int>(targets.size());
  int s_max = 2 * l + 1;
  auto lab = [&](int s) { return s % 2 == 0 ? blank : targets[static_cast<size_t>(s / 2)]; };

  // row-wise log-softmax
  const auto& lv = vals(logits);
  std::vector<double> lp(lv.size());
  std::vector<double> probs(lv.size());
  for (int t = 0; t < t_max; ++t) {
    size_t base = static_cast<size_t>(t) * v;
    double mx = kNegInf;
    for (int j = 0; j < v; ++j) mx = std::max(mx, lv[base + j]);
    double z = 0.0;
    for (int j = 0; j < v; ++j) z += std::exp(lv[base + j] - mx);
    double logz = mx + std::log(z);
    for (int j = 0; j < v; ++j) {
      lp[base + j] = lv[base + j] - logz;
      probs[base + j] = std::exp(lp[base + j]);
    }
  }

  auto skip_ok = [&](int s) {
    return s >= 2 && lab(s) != blank && lab(s) != lab(s - 2);
  };

  std::vector<double> alpha(static_cast<size_t>(t_max) * s_max, kNegInf);
  alpha[0] = lp[static_cast<size_t>(blank)];
  if (s_max > 1) alpha[1] = lp[static_cast<size_t>(lab(1))];
  for (int t = 1; t < t_max; ++t) {
    size_t row = static_cast<size_t>(t) * s_max;
    size_t prev = row - static_cast<size_t>(s_max);
    for (int s = 0; s < s_max; ++s) {
      double acc = alpha[prev + static_cast<size_t>(s)];
      if (s >= 1) acc = logadd(acc, alpha[prev + static_cast<size_t>(s) - 1]);
      if (skip_ok(s)) acc = logadd(acc, alpha[prev + static_cast<size_t>(s) - 2]);
      alpha[row + static_cast<size_t>(s)] =
          acc == kNegInf ? kNegInf : acc + lp[static_cast<size_t>(t) * v + lab(s)];
    }
  }
  double total = alpha[static_cast<size_t>(t_max - 1) * s_max + s_max - 1];
  if (s_max > 1) total = logadd(total, alpha[static_cast<size_t>(t_max - 1) * s_max + s_max - 2]);

  // beta[t][s]: completion probability given the emission at t is already
  // accounted for; combined with alpha it yields state occupancies.
  std::vector<double> beta(static_cast<size_t>(t_max) * s_max, kNegInf);
  beta[static_cast<size_t>(t_max - 1) * s_max + s_max - 1] = 0.0;
  if (s_max > 1) beta[static_cast<size_t>(t_max - 1) * s_max + s_max - 2] = 0.0;
  for (int t = t_max - 2; t >= 0; --t) {
    size_t row = static_cast<size_t>(t) * s_max;
    size_t next = row + static_cast<size_t>(s_max);
    for (int s = 0; s < s_max; ++s) {
      double acc = beta[next + static_cast<size_t>(s)] + lp[static_cast<size_t>(t + 1) * v + lab(s)];
      if (s + 1 < s_max)
        acc = logadd(acc, beta[next + static_cast<size_t>(s) + 1] +
                              lp[static_cast<size_t>(t + 1) * v + lab(s + 1)]);
      if (s + 2 < s_max && skip_ok(s + 2))
        acc = logadd(acc, beta[next + static_cast<size_t>(s) + 2] +
                              lp[static_cast<size_t>(t + 1) * v + lab(s + 2)]);
      beta[row + static_cast<size_t>(s)] = acc;
    }
  }

  // d(-log p)/d(logits[t,k]) = softmax[t,k] - occupancy[t,k]
  std::vector<double> dlogits(lv.size());
  for (int t = 0; t < t_max; ++t) {
    std::vector<double> occ(static_cast<size_t>(v), 0.0);
    for (int s = 0; s < s_max; ++s) {
      double ab = alpha[static_cast<size_t>(t) * s_max + s] + beta[static_cast<size_t>(t) * s_max + s];
      if (ab == kNegInf) continue;
      occ[static_cast<size_t>(lab(s))] += std::exp(ab - total);
    }
    size_t base = static_cast<size_t>(t) * v;
    for (int j = 0; j < v; ++j) dlogits[base + j] = probs[base + j] - occ[static_cast<size_t>(j)];
  }

  auto back = [dlogits](const double* g, const std::vector<double*>& gin) {
    if (!gin[0]) return;
    for (size_t i = 0; i < dlogits.size(); ++i) gin[0][i] += g[0] * dlogits[i];
  };
  return OpRecorder::result({&logits}, {1}, {-total}, std::move(back));
}

Tensor sum_all(const Tensor& a) {
  require_defined(a, "sum_all");
  double s = 0.0;
  for (double x : vals(a)) s += x;
  size_t n = static_cast<size_t>(a.size());
  auto back = [n](const double* g, const std::vector<double*>& gin) {
    if (!gin[0]) return;
    for (size_t i = 0; i < n; ++i) gin[0][i] += g[0];
  };
  return OpRecorder::result({&a}, {1}, {s}, std::move(back));
}

Tensor mean_all(const Tensor& a) {
  require_defined(a, "mean_all");
  double s = 0.0;
  for (double x : vals(a)) s += x;
  size_t n = static_cast<size_t>(a.size());
  auto back = [n](const double* g, const std::vector<double*>& gin) {
    if (!gin[0]) return;
    for (size_t i = 0; i < n; ++i) gin[0][i] += g[0] / static_cast<double>(n);
  };
  return OpRecorder::result({&a}, {1}, {s / static_cast<double>(n)}, std::move(back));
}

}  // namespace ops

GradTable finite_diff_grad(const std::function<double(const ParamMap&)>& f,
                           const ParamMap& params, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("finite_diff_grad: eps must be positive");
  GradTable table;
  for (const auto& [name, p] : params) {
    std::vector<double> g(static_cast<size_t>(p.size()));
    for (size_t i = 0; i < g.size(); ++i) {
      std::vector<double> hi = p.values(), lo = p.values();
      hi[i] += eps;
      lo[i] -= eps;
      ParamMap shifted = params;
      shifted[name] = Tensor::from_values(p.shape(), std::move(hi));
      double fhi = f(shifted);
      shifted[name] = Tensor::from_values(p.shape(), std::move(lo));
      double flo = f(shifted);
      g[i] = (fhi - flo) / (2.0 * eps);
    }
    table.set(name, Tensor::from_values(p.shape(), std::move(g)));
  }
  return table;
}

double rel_err(double a, double n) {
  double denom = std::max({std::fabs(a), std::fabs(n), 1e-8});
  return std::fabs(a - n) / denom;
}

}  // namespace glora
