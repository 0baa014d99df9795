#pragma once

#include <cstdint>
#include <deque>
#include <initializer_list>
#include <limits>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "ocda/numerics/tensor.hpp"

namespace ocda::numerics {

// The closed primitive set. Everything else is composed from these.
enum class Op : std::uint8_t {
  leaf,
  add,
  sub,
  mul,
  matmul,
  conv2d,
  max_pool2d,
  relu,
  tanh,
  softmax,
  log,
  mean,
  sum,
  l2_norm,
  l2_normalize,
  concat,
  reshape,
  cross_entropy,
};

std::string_view op_name(Op op);

inline constexpr int kAllAxes = std::numeric_limits<int>::min();

// Vectors whose norm falls below this are normalized to zero.
inline constexpr float kNormalizeEpsilon = 1e-8f;

struct OpAttrs {
  bool transpose_b = false;  // matmul
  int stride = 1;            // conv2d
  int pad = 0;               // conv2d
  int window = 2;            // max_pool2d
  int axis = kAllAxes;       // mean, sum, concat
  Shape shape;               // reshape
};

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  Graph* graph() const { return graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr && id_ >= 0; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Graph;
  Var(Graph* graph, int id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  int id_ = -1;
};

// Eagerly evaluated expression record. Every primitive application appends
// one node holding its output; inputs always precede their consumers, so
// node order is a topological order. The record can be replayed from its
// leaves (evaluate) and differentiated in reverse (gradients).
class Graph {
 public:
  struct Node {
    Op op = Op::leaf;
    std::vector<int> inputs;
    OpAttrs attrs;
    Tensor value;
    bool requires_grad = false;
    std::vector<std::uint32_t> saved;  // max_pool2d argmax positions
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf tracked for gradients iff value.requires_grad().
  Var leaf(Tensor value);
  Var param(Tensor value) { return leaf(std::move(value.set_requires_grad(true))); }
  Var constant(Tensor value) { return leaf(std::move(value.set_requires_grad(false))); }

  Var apply(Op op, std::span<const Var> inputs, OpAttrs attrs = {});
  Var apply(Op op, std::initializer_list<Var> inputs, OpAttrs attrs = {}) {
    return apply(op, std::span<const Var>(inputs.begin(), inputs.size()),
                 std::move(attrs));
  }

  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return nodes_.size(); }

  // True when at least one leaf requires gradients.
  bool recording() const { return recording_; }

  // Number of l2_normalize rows that were below kNormalizeEpsilon.
  std::size_t degenerate_normalizations() const { return degenerate_; }

  bool owns(Var v) const { return v.graph() == this && v.id() >= 0 &&
                                  static_cast<std::size_t>(v.id()) < nodes_.size(); }

 private:
  std::deque<Node> nodes_;
  bool recording_ = false;
  std::size_t degenerate_ = 0;
};

using Bindings = std::vector<std::pair<Var, Tensor>>;

// Replays the record from its leaves, substituting the bound leaf values;
// unbound leaves keep their recorded values. Replaying without bindings
// reproduces the recorded output bit-exactly.
Tensor evaluate(const Graph& graph, Var output, const Bindings& bindings = {});

// Double-precision replay used by the finite-difference oracle.
std::vector<double> evaluate_double(
    const Graph& graph, Var output,
    const std::vector<std::pair<Var, std::vector<double>>>& bindings);

// Reverse-mode gradients of a scalar output with respect to leaves.
// Leaves that do not influence the output get zero tensors.
std::vector<Tensor> gradients(const Graph& graph, Var output,
                              std::span<const Var> wrt);
inline std::vector<Tensor> gradients(const Graph& graph, Var output,
                                     std::initializer_list<Var> wrt) {
  return gradients(graph, output, std::span<const Var>(wrt.begin(), wrt.size()));
}

// Primitives. Elementwise binary ops broadcast numpy-style, but only across
// singleton (or missing leading) dimensions.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var matmul(Var a, Var b, bool transpose_b = false);
// x: (N, H, W, C), w: (k, k, C, O) with odd k; stride 1 or 2; zero padding.
Var conv2d(Var x, Var w, int stride = 1, int pad = 0);
// x: (N, H, W, C); non-overlapping window.
Var max_pool2d(Var x, int window = 2);
Var relu(Var x);
Var tanh(Var x);
Var softmax(Var x);  // last axis
Var log(Var x);
Var mean(Var x, int axis = kAllAxes);
Var sum(Var x, int axis = kAllAxes);
Var l2_norm(Var x);       // last axis, removes it
Var l2_normalize(Var x);  // last axis
Var concat(std::span<const Var> parts, int axis);
inline Var concat(std::initializer_list<Var> parts, int axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}
Var reshape(Var x, Shape shape);
// Per-row cross-entropy -sum_c t_c log softmax(z)_c; targets share the
// logits' shape. Output drops the last axis.
Var cross_entropy_with_logits(Var logits, Var targets);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace ocda::numerics
