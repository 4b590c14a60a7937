#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "procap/error.hpp"

namespace procap::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// A named trainable buffer. Gradients accumulate into `grad` across backward
// passes until zero_grad(). Frozen parameters enter graphs as constants.
template <class T>
struct Parameter {
  std::string name;
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool frozen = false;

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

// Insertion-ordered collection of parameters with stable addresses.
template <class T>
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;

  Parameter<T>& add(const std::string& name, Shape shape) {
    if (index_.count(name) != 0) throw Error("duplicate parameter name '" + name + "'");
    auto p = std::make_unique<Parameter<T>>();
    p->name = name;
    p->value.assign(numel(shape), T(0));
    p->grad.assign(p->value.size(), T(0));
    p->shape = std::move(shape);
    index_.emplace(name, params_.size());
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Parameter<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Parameter<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  Parameter<T>& get(const std::string& name) {
    if (auto* p = find(name)) return *p;
    throw Error("unknown parameter '" + name + "'");
  }

  std::size_t size() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Op : std::uint8_t {
  kConstant,
  kParam,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kSigmoid,
  kTanh,
  kSoftmax,
  kLogSoftmax,
  kConcat,
  kSlice,
  kEmbedding,
  kStackRows,
  kMaxOverTime,
  kSum,
  kPick,
};

template <class T>
class Graph;

// Handle to a value recorded on a Graph.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(Graph<T>* g, int id) : graph_(g), id_(id) {}

  Graph<T>* graph() const { return graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr && id_ >= 0; }

  const Shape& shape() const { return graph_->node(id_).shape; }
  std::size_t size() const { return graph_->value_of(id_).size(); }
  const std::vector<T>& value() const { return graph_->value_of(id_); }
  const std::vector<T>& grad() const { return graph_->node(id_).grad; }
  T item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return value()[0];
  }
  bool requires_grad() const { return graph_->node(id_).requires_grad; }

 private:
  Graph<T>* graph_ = nullptr;
  int id_ = -1;
};

// Append-only tape. Every node's inputs precede it, so backward() is a single
// reverse sweep.
template <class T>
class Graph {
 public:
  using Acc = double;

  struct Node {
    Op op = Op::kConstant;
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    std::vector<int> inputs;
    std::vector<std::size_t> aux;
    T scalar = T(0);
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Tensor<T> constant(Shape shape, std::vector<T> value) {
    if (numel(shape) != value.size()) {
      throw ShapeError("constant: shape " + shape_str(shape) + " does not match " +
                       std::to_string(value.size()) + " values");
    }
    Node n;
    n.op = Op::kConstant;
    n.shape = std::move(shape);
    n.value = std::move(value);
    return push(std::move(n));
  }

  Tensor<T> zeros(Shape shape) {
    std::vector<T> v(numel(shape), T(0));
    return constant(std::move(shape), std::move(v));
  }

  // Leaf bound to a parameter; one leaf per parameter per graph.
  Tensor<T> param(Parameter<T>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Tensor<T>(this, it->second);
    Node n;
    n.op = Op::kParam;
    n.shape = p.shape;
    n.requires_grad = !p.frozen;
    n.param = &p;
    Tensor<T> t = push(std::move(n));
    param_nodes_.emplace(&p, t.id());
    return t;
  }

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  // Parameter leaves read the parameter's storage instead of a copy.
  const std::vector<T>& value_of(int id) const {
    const Node& n = node(id);
    return n.param != nullptr ? n.param->value : n.value;
  }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }

  Tensor<T> push(Node n) {
    nodes_.push_back(std::move(n));
    return Tensor<T>(this, static_cast<int>(nodes_.size() - 1));
  }

  // Populates gradients of every reachable node and accumulates them into the
  // bound parameters. Intermediate gradients are reset on each call.
  void backward(const Tensor<T>& loss) {
    if (loss.graph() != this) throw Error("backward: loss belongs to another graph");
    if (loss.size() != 1) {
      throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    }
    for (auto& n : nodes_) n.grad.clear();
    Node& root = node(loss.id());
    if (!root.requires_grad) return;
    root.grad.assign(1, T(1));
    for (int i = loss.id(); i >= 0; --i) {
      Node& n = node(i);
      if (!n.requires_grad || n.grad.empty()) continue;
      propagate(n);
    }
  }

 private:
  std::vector<T>& grad_of(int id) {
    Node& n = node(id);
    if (n.grad.empty()) n.grad.assign(value_of(id).size(), T(0));
    return n.grad;
  }

  bool wants(int id) const { return node(id).requires_grad; }

  void propagate(Node& n);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, int> param_nodes_;
};

template <class T>
void Graph<T>::propagate(Node& n) {
  const std::vector<T>& g = n.grad;
  switch (n.op) {
    case Op::kConstant:
      return;
    case Op::kParam: {
      auto& pg = n.param->grad;
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
      return;
    }
    case Op::kMatMul: {
      const int a = n.inputs[0], b = n.inputs[1];
      const std::size_t m = node(a).shape[0], k = node(a).shape[1];
      const std::size_t cols = node(b).shape.size() == 1 ? 1 : node(b).shape[1];
      if (wants(a)) {
        auto& ga = grad_of(a);
        const auto& bv = value_of(b);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            Acc s = 0;
            for (std::size_t c = 0; c < cols; ++c) s += Acc(g[i * cols + c]) * bv[j * cols + c];
            ga[i * k + j] += static_cast<T>(s);
          }
        }
      }
      if (wants(b)) {
        auto& gb = grad_of(b);
        const auto& av = value_of(a);
        for (std::size_t j = 0; j < k; ++j) {
          for (std::size_t c = 0; c < cols; ++c) {
            Acc s = 0;
            for (std::size_t i = 0; i < m; ++i) s += Acc(av[i * k + j]) * g[i * cols + c];
            gb[j * cols + c] += static_cast<T>(s);
          }
        }
      }
      return;
    }
    case Op::kAdd:
    case Op::kSub: {
      const T sign = n.op == Op::kAdd ? T(1) : T(-1);
      if (wants(n.inputs[0])) {
        auto& ga = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(n.inputs[1])) {
        auto& gb = grad_of(n.inputs[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
      }
      return;
    }
    case Op::kMul: {
      const int a = n.inputs[0], b = n.inputs[1];
      if (wants(a)) {
        auto& ga = grad_of(a);
        const auto& bv = value_of(b);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
      }
      if (wants(b)) {
        auto& gb = grad_of(b);
        const auto& av = value_of(a);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
      }
      return;
    }
    case Op::kScale: {
      auto& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.scalar * g[i];
      return;
    }
    case Op::kSigmoid: {
      auto& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T y = n.value[i];
        ga[i] += g[i] * y * (T(1) - y);
      }
      return;
    }
    case Op::kTanh: {
      auto& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T y = n.value[i];
        ga[i] += g[i] * (T(1) - y * y);
      }
      return;
    }
    case Op::kSoftmax: {
      auto& ga = grad_of(n.inputs[0]);
      Acc dot = 0;
      for (std::size_t i = 0; i < g.size(); ++i) dot += Acc(g[i]) * n.value[i];
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += static_cast<T>(n.value[i] * (g[i] - dot));
      }
      return;
    }
    case Op::kLogSoftmax: {
      auto& ga = grad_of(n.inputs[0]);
      Acc total = 0;
      for (T v : g) total += v;
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += static_cast<T>(g[i] - std::exp(Acc(n.value[i])) * total);
      }
      return;
    }
    case Op::kConcat: {
      std::size_t offset = 0;
      for (int in : n.inputs) {
        const std::size_t len = value_of(in).size();
        if (wants(in)) {
          auto& gi = grad_of(in);
          for (std::size_t i = 0; i < len; ++i) gi[i] += g[offset + i];
        }
        offset += len;
      }
      return;
    }
    case Op::kSlice: {
      auto& ga = grad_of(n.inputs[0]);
      const std::size_t offset = n.aux[0];
      for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i];
      return;
    }
    case Op::kEmbedding: {
      auto& ga = grad_of(n.inputs[0]);
      const std::size_t row = n.aux[0], dim = g.size();
      for (std::size_t i = 0; i < dim; ++i) ga[row * dim + i] += g[i];
      return;
    }
    case Op::kStackRows: {
      const std::size_t dim = n.shape[1];
      for (std::size_t r = 0; r < n.inputs.size(); ++r) {
        if (!wants(n.inputs[r])) continue;
        auto& gi = grad_of(n.inputs[r]);
        for (std::size_t i = 0; i < dim; ++i) gi[i] += g[r * dim + i];
      }
      return;
    }
    case Op::kMaxOverTime: {
      auto& ga = grad_of(n.inputs[0]);
      const std::size_t dim = g.size();
      for (std::size_t c = 0; c < dim; ++c) ga[n.aux[c] * dim + c] += g[c];
      return;
    }
    case Op::kSum: {
      auto& ga = grad_of(n.inputs[0]);
      for (auto& v : ga) v += g[0];
      return;
    }
    case Op::kPick: {
      auto& ga = grad_of(n.inputs[0]);
      ga[n.aux[0]] += g[0];
      return;
    }
  }
}

namespace detail {

template <class T>
Graph<T>& same_graph(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.valid() || !b.valid() || a.graph() != b.graph()) {
    throw Error(std::string(op) + ": operands must be valid tensors of the same graph");
  }
  return *a.graph();
}

template <class T>
typename Graph<T>::Node make_node(Op op, Shape shape, std::initializer_list<Tensor<T>> inputs) {
  typename Graph<T>::Node n;
  n.op = op;
  n.shape = std::move(shape);
  for (const auto& t : inputs) {
    n.inputs.push_back(t.id());
    n.requires_grad = n.requires_grad || t.requires_grad();
  }
  return n;
}

template <class T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

template <class T>
void require_vector(const char* op, const Tensor<T>& a) {
  if (a.shape().size() != 1) {
    throw ShapeError(std::string(op) + ": expected a vector, got " + shape_str(a.shape()));
  }
}

}  // namespace detail

// Matrix product. A is [m x k]; B is [k x n] or a vector [k] (result [m]).
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  Graph<T>& g = detail::same_graph("matmul", a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.empty() || sb.size() > 2 || sb[0] != sa[1]) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
  }
  const std::size_t m = sa[0], k = sa[1];
  const std::size_t cols = sb.size() == 1 ? 1 : sb[1];
  Shape out_shape = sb.size() == 1 ? Shape{m} : Shape{m, cols};
  auto n = detail::make_node<T>(Op::kMatMul, out_shape, {a, b});
  n.value.assign(m * cols, T(0));
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < cols; ++c) {
      typename Graph<T>::Acc s = 0;
      const T* arow = av.data() + i * k;
      for (std::size_t j = 0; j < k; ++j) s += typename Graph<T>::Acc(arow[j]) * bv[j * cols + c];
      n.value[i * cols + c] = static_cast<T>(s);
    }
  }
  return g.push(std::move(n));
}

namespace detail {

template <class T, class F>
Tensor<T> binary(Op op, const char* name, const Tensor<T>& a, const Tensor<T>& b, F f) {
  Graph<T>& g = same_graph(name, a, b);
  require_same_shape(name, a, b);
  auto n = make_node<T>(op, a.shape(), {a, b});
  const auto& av = a.value();
  const auto& bv = b.value();
  n.value.resize(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = f(av[i], bv[i]);
  return g.push(std::move(n));
}

template <class T, class F>
Tensor<T> unary(Op op, const Tensor<T>& a, F f) {
  auto n = make_node<T>(op, a.shape(), {a});
  const auto& av = a.value();
  n.value.resize(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = f(av[i]);
  return a.graph()->push(std::move(n));
}

}  // namespace detail

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(Op::kAdd, "add", a, b, [](T x, T y) { return x + y; });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(Op::kSub, "sub", a, b, [](T x, T y) { return x - y; });
}

// Elementwise product.
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(Op::kMul, "mul", a, b, [](T x, T y) { return x * y; });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  auto t = detail::unary(Op::kScale, a, [factor](T x) { return factor * x; });
  t.graph()->node(t.id()).scalar = factor;
  return t;
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return detail::unary(Op::kSigmoid, a, [](T x) {
    // Split by sign so neither branch overflows.
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
  });
}

template <class T>
Tensor<T> tanh(const Tensor<T>& a) {
  return detail::unary(Op::kTanh, a, [](T x) { return std::tanh(x); });
}

template <class T>
Tensor<T> softmax(const Tensor<T>& a) {
  detail::require_vector("softmax", a);
  auto n = detail::make_node<T>(Op::kSoftmax, a.shape(), {a});
  const auto& av = a.value();
  T mx = *std::max_element(av.begin(), av.end());
  double z = 0;
  for (T v : av) z += std::exp(double(v) - mx);
  n.value.resize(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    n.value[i] = static_cast<T>(std::exp(double(av[i]) - mx) / z);
  }
  return a.graph()->push(std::move(n));
}

template <class T>
Tensor<T> log_softmax(const Tensor<T>& a) {
  detail::require_vector("log_softmax", a);
  auto n = detail::make_node<T>(Op::kLogSoftmax, a.shape(), {a});
  const auto& av = a.value();
  T mx = *std::max_element(av.begin(), av.end());
  double z = 0;
  for (T v : av) z += std::exp(double(v) - mx);
  const double lse = double(mx) + std::log(z);
  n.value.resize(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = static_cast<T>(double(av[i]) - lse);
  return a.graph()->push(std::move(n));
}

// Concatenation of vectors (scalars count as length-1 vectors).
template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Graph<T>& g = *parts.front().graph();
  typename Graph<T>::Node n;
  n.op = Op::kConcat;
  for (const auto& p : parts) {
    if (p.graph() != &g) throw Error("concat: operands from different graphs");
    if (p.shape().size() > 1) {
      throw ShapeError("concat: expected vectors or scalars, got " + shape_str(p.shape()));
    }
    n.inputs.push_back(p.id());
    n.requires_grad = n.requires_grad || p.requires_grad();
    const auto& v = p.value();
    n.value.insert(n.value.end(), v.begin(), v.end());
  }
  n.shape = {n.value.size()};
  return g.push(std::move(n));
}

template <class T>
Tensor<T> slice(const Tensor<T>& a, std::size_t offset, std::size_t length) {
  detail::require_vector("slice", a);
  if (offset + length > a.size()) {
    throw ShapeError("slice: range [" + std::to_string(offset) + ", " +
                     std::to_string(offset + length) + ") outside " + shape_str(a.shape()));
  }
  auto n = detail::make_node<T>(Op::kSlice, {length}, {a});
  n.aux = {offset};
  const auto& av = a.value();
  n.value.assign(av.begin() + static_cast<std::ptrdiff_t>(offset),
                 av.begin() + static_cast<std::ptrdiff_t>(offset + length));
  return a.graph()->push(std::move(n));
}

// Row `index` of a [rows x dim] table.
template <class T>
Tensor<T> embedding_lookup(const Tensor<T>& table, std::size_t index) {
  const Shape& s = table.shape();
  if (s.size() != 2) throw ShapeError("embedding_lookup: table must be a matrix");
  if (index >= s[0]) {
    throw ShapeError("embedding_lookup: index " + std::to_string(index) + " outside table " +
                     shape_str(s));
  }
  auto n = detail::make_node<T>(Op::kEmbedding, {s[1]}, {table});
  n.aux = {index};
  const auto& tv = table.value();
  n.value.assign(tv.begin() + static_cast<std::ptrdiff_t>(index * s[1]),
                 tv.begin() + static_cast<std::ptrdiff_t>((index + 1) * s[1]));
  return table.graph()->push(std::move(n));
}

// Stacks equal-length vectors into a time-major [T x D] matrix.
template <class T>
Tensor<T> stack_rows(const std::vector<Tensor<T>>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no inputs");
  Graph<T>& g = *rows.front().graph();
  const std::size_t dim = rows.front().size();
  typename Graph<T>::Node n;
  n.op = Op::kStackRows;
  n.shape = {rows.size(), dim};
  for (const auto& r : rows) {
    if (r.graph() != &g) throw Error("stack_rows: operands from different graphs");
    detail::require_vector("stack_rows", r);
    if (r.size() != dim) {
      throw ShapeError("stack_rows: row of shape " + shape_str(r.shape()) + " vs dim " +
                       std::to_string(dim));
    }
    n.inputs.push_back(r.id());
    n.requires_grad = n.requires_grad || r.requires_grad();
    n.value.insert(n.value.end(), r.value().begin(), r.value().end());
  }
  return g.push(std::move(n));
}

// Column-wise max of a time-major [T x D] matrix. The gradient goes to the
// first row attaining each column's maximum.
template <class T>
Tensor<T> max_over_time(const Tensor<T>& m) {
  const Shape& s = m.shape();
  if (s.size() != 2 || s[0] == 0) {
    throw ShapeError("max_over_time: expected a non-empty [T x D] matrix, got " + shape_str(s));
  }
  const std::size_t steps = s[0], dim = s[1];
  auto n = detail::make_node<T>(Op::kMaxOverTime, {dim}, {m});
  const auto& mv = m.value();
  n.value.assign(mv.begin(), mv.begin() + static_cast<std::ptrdiff_t>(dim));
  n.aux.assign(dim, 0);
  for (std::size_t t = 1; t < steps; ++t) {
    for (std::size_t c = 0; c < dim; ++c) {
      if (mv[t * dim + c] > n.value[c]) {
        n.value[c] = mv[t * dim + c];
        n.aux[c] = t;
      }
    }
  }
  return m.graph()->push(std::move(n));
}

template <class T>
Tensor<T> sum(const Tensor<T>& a) {
  auto n = detail::make_node<T>(Op::kSum, {}, {a});
  double s = 0;
  for (T v : a.value()) s += v;
  n.value = {static_cast<T>(s)};
  return a.graph()->push(std::move(n));
}

// Scalar element `index` of a vector.
template <class T>
Tensor<T> pick(const Tensor<T>& a, std::size_t index) {
  detail::require_vector("pick", a);
  if (index >= a.size()) {
    throw ShapeError("pick: index " + std::to_string(index) + " outside " + shape_str(a.shape()));
  }
  auto n = detail::make_node<T>(Op::kPick, {}, {a});
  n.aux = {index};
  n.value = {a.value()[index]};
  return a.graph()->push(std::move(n));
}

// Sum of squared differences.
template <class T>
Tensor<T> squared_distance(const Tensor<T>& a, const Tensor<T>& b) {
  auto d = sub(a, b);
  return sum(mul(d, d));
}

}  // namespace procap::ad
