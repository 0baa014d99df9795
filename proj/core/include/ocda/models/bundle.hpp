#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ocda/models/architecture.hpp"
#include "ocda/numerics/adam.hpp"
#include "ocda/numerics/graph.hpp"

namespace ocda::models {

using numerics::Graph;
using numerics::Tensor;
using numerics::Var;

struct NetParams {
  std::vector<std::string> names;
  std::vector<Tensor> tensors;

  std::size_t size() const { return tensors.size(); }
  std::size_t index(std::string_view name) const;
  Tensor& operator[](std::string_view name) { return tensors[index(name)]; }
  const Tensor& operator[](std::string_view name) const { return tensors[index(name)]; }
  std::size_t count() const;  // scalar parameters
  bool identical(const NetParams& other) const;
};

struct ModelBundle {
  ArchitectureDescriptor arch;
  std::array<NetParams, kNetCount> nets;

  NetParams& net(NetId id) { return nets[index_of(id)]; }
  const NetParams& net(NetId id) const { return nets[index_of(id)]; }
  bool identical(const ModelBundle& other) const;
};

// Kaiming-uniform weights (bound sqrt(6 / fan_in)) and zero biases. Each
// network draws from its own stream, so re-initializing one network alone
// reproduces its slice of a full init.
ModelBundle init_bundle(const ArchitectureDescriptor& arch, std::uint64_t seed);
NetParams init_net(const ArchitectureDescriptor& arch, NetId id, std::uint64_t seed);

// Parameters of one network recorded into a graph, either as trainable
// leaves or as constants.
struct BoundNet {
  const NetParams* params = nullptr;
  std::vector<Var> vars;

  Var operator[](std::string_view name) const { return vars[params->index(name)]; }
};

BoundNet bind(Graph& graph, const NetParams& params, bool trainable);

// Graph-level forward passes. Shape mismatches raise ShapeError naming the
// operation.
Var encode(const ArchitectureDescriptor& arch, const BoundNet& encoder, Var images,
           const char* who = "encode");
Var classify(const ArchitectureDescriptor& arch, const BoundNet& classifier, Var v);
Var discriminate(const ArchitectureDescriptor& arch, const BoundNet& discriminator, Var v_domain);
Var indicate(const ArchitectureDescriptor& arch, const BoundNet& indicator, Var v_domain);
Var decode(const ArchitectureDescriptor& arch, const BoundNet& decoder, Var v_class,
           Var v_domain);
Var cosine_classify(const ArchitectureDescriptor& arch, const BoundNet& head, Var v, float scale);
Var criticize(const ArchitectureDescriptor& arch, const BoundNet& critic, Var v_class);

// Tensor-level inference wrappers; pure functions of (bundle, input).
Tensor class_encode(const ModelBundle& bundle, const Tensor& images);
Tensor domain_encode(const ModelBundle& bundle, const Tensor& images);
Tensor classify(const ModelBundle& bundle, const Tensor& v);
Tensor discriminate(const ModelBundle& bundle, const Tensor& v_domain);
Tensor indicate(const ModelBundle& bundle, const Tensor& v_domain);
Tensor decode(const ModelBundle& bundle, const Tensor& v_class, const Tensor& v_domain);
Tensor cosine_classify(const ModelBundle& bundle, const Tensor& v, float scale = 16.0f);

// Applies fn to consecutive row chunks of a (B, ...) tensor and stacks the
// (rows, ...) results.
template <class Fn>
Tensor map_rows(const Tensor& input, std::size_t chunk, Fn&& fn);

// Adam over one network's parameters.
class NetOptimizer {
 public:
  NetOptimizer() = default;
  explicit NetOptimizer(numerics::AdamHyper hyper) { state_.hyper = hyper; }

  void step(NetParams& params, std::span<const Tensor> grads);
  const numerics::AdamState& state() const { return state_; }

 private:
  numerics::AdamState state_;
};

// ---------------------------------------------------------------------------

Tensor stack_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& input, std::size_t begin, std::size_t end);

template <class Fn>
Tensor map_rows(const Tensor& input, std::size_t chunk, Fn&& fn) {
  const std::size_t rows = input.rank() == 0 ? 0 : input.dim(0);
  std::vector<Tensor> parts;
  for (std::size_t start = 0; start < rows; start += chunk) {
    parts.push_back(fn(slice_rows(input, start, std::min(rows, start + chunk))));
  }
  if (parts.empty()) parts.push_back(fn(input));
  return stack_rows(parts);
}

}  // namespace ocda::models
