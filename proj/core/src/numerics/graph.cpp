#include "ocda/numerics/graph.hpp"

#include <cmath>
#include <string>

#include "kernels.hpp"
#include "ocda/error.hpp"

namespace ocda::numerics {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::matmul: return "matmul";
    case Op::conv2d: return "conv2d";
    case Op::max_pool2d: return "max_pool2d";
    case Op::relu: return "relu";
    case Op::tanh: return "tanh";
    case Op::softmax: return "softmax";
    case Op::log: return "log";
    case Op::mean: return "mean";
    case Op::sum: return "sum";
    case Op::l2_norm: return "l2_norm";
    case Op::l2_normalize: return "l2_normalize";
    case Op::concat: return "concat";
    case Op::reshape: return "reshape";
    case Op::cross_entropy: return "cross_entropy_with_logits";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (!valid()) throw Error("var: use of an empty handle");
  return graph_->node(id_).value;
}

bool Var::requires_grad() const {
  return valid() && graph_->node(id_).requires_grad;
}

Var Graph::leaf(Tensor value) {
  if (!value.all_finite()) throw NumericError("leaf: non-finite input value");
  Node node;
  node.op = Op::leaf;
  node.requires_grad = value.requires_grad();
  recording_ = recording_ || node.requires_grad;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::apply(Op op, std::span<const Var> inputs, OpAttrs attrs) {
  std::vector<const Shape*> shapes;
  std::vector<detail::View<float>> views;
  Node node;
  node.op = op;
  for (const Var& v : inputs) {
    if (!owns(v)) {
      throw Error(std::string(op_name(op)) + ": input belongs to a different record");
    }
    const Node& in = nodes_[static_cast<std::size_t>(v.id())];
    shapes.push_back(&in.value.shape());
    views.push_back({&in.value.shape(), in.value.data().data()});
    node.inputs.push_back(v.id());
    node.requires_grad = node.requires_grad || in.requires_grad;
  }
  Shape out_shape = detail::infer_shape(op, attrs, shapes);
  node.value = Tensor(std::move(out_shape));
  detail::forward<float>(op, attrs, views, node.value.shape(),
                         node.value.data().data(), &node.saved, &degenerate_);
  if (!node.value.all_finite()) {
    throw NumericError(std::string(op_name(op)) +
                       ": non-finite output (numeric overflow)");
  }
  node.attrs = std::move(attrs);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

namespace {

void check_output(const Graph& graph, Var output, const char* who) {
  if (!graph.owns(output)) {
    throw Error(std::string(who) + ": output does not belong to this record");
  }
}

std::vector<char> ancestors(const Graph& graph, int output) {
  std::vector<char> needed(static_cast<std::size_t>(output) + 1, 0);
  needed[static_cast<std::size_t>(output)] = 1;
  for (int id = output; id >= 0; --id) {
    if (!needed[static_cast<std::size_t>(id)]) continue;
    for (int in : graph.node(id).inputs) needed[static_cast<std::size_t>(in)] = 1;
  }
  return needed;
}

template <class T>
std::vector<T> replay(const Graph& graph, int output,
                      const std::vector<std::pair<int, const std::vector<T>*>>& bound) {
  const std::vector<char> needed = ancestors(graph, output);
  std::vector<std::vector<T>> values(needed.size());
  std::vector<const T*> bound_data(needed.size(), nullptr);
  for (const auto& [id, data] : bound) {
    if (id < 0 || static_cast<std::size_t>(id) >= needed.size()) continue;
    bound_data[static_cast<std::size_t>(id)] = data->data();
  }
  std::vector<detail::View<T>> views;
  for (std::size_t id = 0; id < needed.size(); ++id) {
    if (!needed[id]) continue;
    const Graph::Node& node = graph.node(static_cast<int>(id));
    const std::size_t n = node.value.numel();
    if (node.op == Op::leaf) {
      if (bound_data[id]) {
        values[id].assign(bound_data[id], bound_data[id] + n);
      } else {
        values[id].assign(node.value.data().begin(), node.value.data().end());
      }
      continue;
    }
    views.clear();
    for (int in : node.inputs) {
      views.push_back({&graph.node(in).value.shape(), values[static_cast<std::size_t>(in)].data()});
    }
    values[id].resize(n);
    detail::forward<T>(node.op, node.attrs, views, node.value.shape(),
                       values[id].data(), nullptr, nullptr);
    for (T v : values[id]) {
      if (!std::isfinite(v)) {
        throw NumericError(std::string(op_name(node.op)) +
                           ": non-finite output (numeric overflow)");
      }
    }
  }
  return std::move(values[static_cast<std::size_t>(output)]);
}

int checked_leaf(const Graph& graph, Var v, const char* who) {
  if (!graph.owns(v) || graph.node(v.id()).op != Op::leaf) {
    throw Error(std::string(who) + ": variable is not a leaf of this record");
  }
  return v.id();
}

}  // namespace

Tensor evaluate(const Graph& graph, Var output, const Bindings& bindings) {
  check_output(graph, output, "evaluate");
  std::vector<std::pair<int, const std::vector<float>*>> bound;
  for (const auto& [var, value] : bindings) {
    const int id = checked_leaf(graph, var, "evaluate");
    if (value.shape() != graph.node(id).value.shape()) {
      throw ShapeError("evaluate: binding shape " + to_string(value.shape()) +
                       " does not match leaf shape " +
                       to_string(graph.node(id).value.shape()));
    }
    bound.emplace_back(id, &value.vec());
  }
  std::vector<float> out = replay<float>(graph, output.id(), bound);
  return Tensor(graph.node(output.id()).value.shape(), std::move(out));
}

std::vector<double> evaluate_double(
    const Graph& graph, Var output,
    const std::vector<std::pair<Var, std::vector<double>>>& bindings) {
  check_output(graph, output, "evaluate_double");
  std::vector<std::pair<int, const std::vector<double>*>> bound;
  for (const auto& [var, value] : bindings) {
    const int id = checked_leaf(graph, var, "evaluate_double");
    if (value.size() != graph.node(id).value.numel()) {
      throw ShapeError("evaluate_double: binding size mismatch");
    }
    bound.emplace_back(id, &value);
  }
  return replay<double>(graph, output.id(), bound);
}

std::vector<Tensor> gradients(const Graph& graph, Var output,
                              std::span<const Var> wrt) {
  check_output(graph, output, "gradients");
  const Tensor& out_value = graph.node(output.id()).value;
  if (out_value.numel() != 1) {
    throw ShapeError("gradients: output must be scalar, got shape " +
                     to_string(out_value.shape()));
  }
  for (const Var& v : wrt) checked_leaf(graph, v, "gradients");

  const auto count = static_cast<std::size_t>(output.id()) + 1;
  std::vector<std::vector<float>> grads(count);
  grads[count - 1].assign(1, 1.0f);

  std::vector<detail::View<float>> views;
  std::vector<float*> gin;
  for (int id = output.id(); id >= 0; --id) {
    const Graph::Node& node = graph.node(id);
    auto& g = grads[static_cast<std::size_t>(id)];
    if (node.op == Op::leaf || g.empty() || !node.requires_grad) continue;
    views.clear();
    gin.clear();
    for (int in : node.inputs) {
      const Graph::Node& src = graph.node(in);
      views.push_back({&src.value.shape(), src.value.data().data()});
      auto& target = grads[static_cast<std::size_t>(in)];
      if (src.requires_grad) {
        if (target.empty()) target.assign(src.value.numel(), 0.0f);
        gin.push_back(target.data());
      } else {
        gin.push_back(nullptr);
      }
    }
    detail::backward(node.op, node.attrs, views, node.value, g.data(), gin, node.saved);
    std::vector<float>().swap(g);  // interior gradients are no longer needed
  }

  std::vector<Tensor> result;
  result.reserve(wrt.size());
  for (const Var& v : wrt) {
    const auto id = static_cast<std::size_t>(v.id());
    const Tensor& leaf = graph.node(v.id()).value;
    if (id < count && !grads[id].empty()) {
      result.emplace_back(leaf.shape(), grads[id]);
    } else {
      result.emplace_back(Tensor::zeros(leaf.shape()));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

namespace {

Graph& graph_of(std::initializer_list<Var> vars, const char* who) {
  Graph* g = nullptr;
  for (const Var& v : vars) {
    if (!v.valid()) throw Error(std::string(who) + ": empty variable");
    if (g && v.graph() != g) throw Error(std::string(who) + ": inputs from different records");
    g = v.graph();
  }
  return *g;
}

}  // namespace

Var add(Var a, Var b) { return graph_of({a, b}, "add").apply(Op::add, {a, b}); }
Var sub(Var a, Var b) { return graph_of({a, b}, "sub").apply(Op::sub, {a, b}); }
Var mul(Var a, Var b) { return graph_of({a, b}, "mul").apply(Op::mul, {a, b}); }

Var matmul(Var a, Var b, bool transpose_b) {
  OpAttrs attrs;
  attrs.transpose_b = transpose_b;
  return graph_of({a, b}, "matmul").apply(Op::matmul, {a, b}, attrs);
}

Var conv2d(Var x, Var w, int stride, int pad) {
  OpAttrs attrs;
  attrs.stride = stride;
  attrs.pad = pad;
  return graph_of({x, w}, "conv2d").apply(Op::conv2d, {x, w}, attrs);
}

Var max_pool2d(Var x, int window) {
  OpAttrs attrs;
  attrs.window = window;
  return graph_of({x}, "max_pool2d").apply(Op::max_pool2d, {x}, attrs);
}

Var relu(Var x) { return graph_of({x}, "relu").apply(Op::relu, {x}); }
Var tanh(Var x) { return graph_of({x}, "tanh").apply(Op::tanh, {x}); }
Var softmax(Var x) { return graph_of({x}, "softmax").apply(Op::softmax, {x}); }
Var log(Var x) { return graph_of({x}, "log").apply(Op::log, {x}); }

Var mean(Var x, int axis) {
  OpAttrs attrs;
  attrs.axis = axis;
  return graph_of({x}, "mean").apply(Op::mean, {x}, attrs);
}

Var sum(Var x, int axis) {
  OpAttrs attrs;
  attrs.axis = axis;
  return graph_of({x}, "sum").apply(Op::sum, {x}, attrs);
}

Var l2_norm(Var x) { return graph_of({x}, "l2_norm").apply(Op::l2_norm, {x}); }
Var l2_normalize(Var x) { return graph_of({x}, "l2_normalize").apply(Op::l2_normalize, {x}); }

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: needs at least one input");
  Graph* g = parts.front().graph();
  if (!g) throw Error("concat: empty variable");
  OpAttrs attrs;
  attrs.axis = axis;
  return g->apply(Op::concat, parts, attrs);
}

Var reshape(Var x, Shape shape) {
  OpAttrs attrs;
  attrs.shape = std::move(shape);
  return graph_of({x}, "reshape").apply(Op::reshape, {x}, attrs);
}

Var cross_entropy_with_logits(Var logits, Var targets) {
  return graph_of({logits, targets}, "cross_entropy_with_logits")
      .apply(Op::cross_entropy, {logits, targets});
}

}  // namespace ocda::numerics
