#include "ocda/models/bundle.hpp"

#include <cmath>

#include "ocda/error.hpp"
#include "ocda/numerics/nn.hpp"
#include "ocda/numerics/random.hpp"

namespace ocda::models {

using numerics::Shape;

std::size_t NetParams::index(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw Error("network has no parameter '" + std::string(name) + "'");
}

std::size_t NetParams::count() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors) n += t.numel();
  return n;
}

bool NetParams::identical(const NetParams& other) const {
  if (names != other.names) return false;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (!tensors[i].identical(other.tensors[i])) return false;
  }
  return true;
}

bool ModelBundle::identical(const ModelBundle& other) const {
  if (!(arch == other.arch)) return false;
  for (std::size_t i = 0; i < kNetCount; ++i) {
    if (!nets[i].identical(other.nets[i])) return false;
  }
  return true;
}

NetParams init_net(const ArchitectureDescriptor& arch, NetId id, std::uint64_t seed) {
  validate(arch);
  Rng rng(mix_seed(seed, index_of(id)));
  NetParams net;
  for (const ParamSpec& spec : param_specs(arch, id)) {
    Tensor t(spec.shape);
    if (spec.fan_in > 0) {
      const float bound = std::sqrt(6.0f / static_cast<float>(spec.fan_in));
      for (float& v : t.data()) v = uniform(rng, -bound, bound);
    }
    net.names.push_back(spec.name);
    net.tensors.push_back(std::move(t));
  }
  return net;
}

ModelBundle init_bundle(const ArchitectureDescriptor& arch, std::uint64_t seed) {
  ModelBundle bundle;
  bundle.arch = arch;
  for (std::size_t i = 0; i < kNetCount; ++i) {
    bundle.nets[i] = init_net(arch, static_cast<NetId>(i), seed);
  }
  return bundle;
}

BoundNet bind(Graph& graph, const NetParams& params, bool trainable) {
  BoundNet bound;
  bound.params = &params;
  for (const Tensor& t : params.tensors) {
    bound.vars.push_back(trainable ? graph.param(t) : graph.constant(t));
  }
  return bound;
}

namespace {

void expect_features(const char* who, Var v, std::size_t dim) {
  const Shape& s = v.shape();
  if (s.size() != 2 || s[1] != dim) {
    throw ShapeError(std::string(who) + ": expected features (B, " + std::to_string(dim) +
                     "), got " + numerics::to_string(s));
  }
}

constexpr float kGateBound = 0.99999994f;

Var dense(const BoundNet& net, const std::string& prefix, Var x) {
  return numerics::linear(x, net[prefix + ".w"], net[prefix + ".b"]);
}

Var mlp2(const BoundNet& net, Var x) {
  return dense(net, "fc2", numerics::relu(dense(net, "fc1", x)));
}

}  // namespace

Var encode(const ArchitectureDescriptor& arch, const BoundNet& net, Var images, const char* who) {
  const Shape& s = images.shape();
  const data::ImageShape& in = arch.input;
  if (s.size() != 4 || s[1] != in.height || s[2] != in.width || s[3] != in.channels) {
    throw ShapeError(std::string(who) + ": expected images (B, " + std::to_string(in.height) +
                     ", " + std::to_string(in.width) + ", " + std::to_string(in.channels) +
                     "), got " + numerics::to_string(s));
  }
  const std::size_t batch = s[0];
  if (arch.preset == "lenet5-small") {
    using numerics::add;
    Var h = numerics::relu(add(numerics::conv2d(images, net["conv1.w"], 1, 2), net["conv1.b"]));
    h = numerics::max_pool2d(h, 2);
    h = numerics::relu(add(numerics::conv2d(h, net["conv2.w"], 1, 2), net["conv2.b"]));
    h = numerics::max_pool2d(h, 2);
    h = numerics::reshape(h, {batch, (in.height / 4) * (in.width / 4) * arch.conv_channels[1]});
    h = numerics::relu(dense(net, "fc1", h));
    return dense(net, "fc2", h);
  }
  Var flat = numerics::reshape(images, {batch, in.numel()});
  return mlp2(net, flat);
}

Var classify(const ArchitectureDescriptor& arch, const BoundNet& net, Var v) {
  expect_features("classify", v, arch.d_c);
  return dense(net, "fc", v);
}

Var discriminate(const ArchitectureDescriptor& arch, const BoundNet& net, Var v_domain) {
  expect_features("discriminate", v_domain, arch.d_d);
  return mlp2(net, v_domain);
}

Var indicate(const ArchitectureDescriptor& arch, const BoundNet& net, Var v_domain) {
  expect_features("indicate", v_domain, arch.d_d);
  // float32 tanh rounds to exactly +-1 past |x| ~ 9; shrink by one ulp of 1.
  return numerics::scale(numerics::tanh(mlp2(net, v_domain)), kGateBound);
}

Var decode(const ArchitectureDescriptor& arch, const BoundNet& net, Var v_class, Var v_domain) {
  expect_features("decode", v_class, arch.d_c);
  expect_features("decode", v_domain, arch.d_d);
  if (v_class.shape()[0] != v_domain.shape()[0]) {
    throw ShapeError("decode: batch sizes differ: " + numerics::to_string(v_class.shape()) +
                     " vs " + numerics::to_string(v_domain.shape()));
  }
  Var joint = numerics::concat({v_class, v_domain}, 1);
  Var pixels = numerics::sigmoid_like(mlp2(net, joint));
  const data::ImageShape& in = arch.input;
  return numerics::reshape(pixels, {v_class.shape()[0], in.height, in.width, in.channels});
}

Var cosine_classify(const ArchitectureDescriptor& arch, const BoundNet& net, Var v, float scale) {
  expect_features("cosine_classify", v, arch.d_c);
  Var weights = numerics::l2_normalize(net["w"]);
  return numerics::scale(numerics::matmul(numerics::l2_normalize(v), weights, true), scale);
}

Var criticize(const ArchitectureDescriptor& arch, const BoundNet& net, Var v_class) {
  expect_features("domain_critic", v_class, arch.d_c);
  return dense(net, "fc3", numerics::relu(mlp2(net, v_class)));
}

// ---------------------------------------------------------------------------

Tensor slice_rows(const Tensor& input, std::size_t begin, std::size_t end) {
  Shape shape = input.shape();
  const std::size_t row = shape.empty() || shape[0] == 0 ? 0 : input.numel() / shape[0];
  shape[0] = end - begin;
  std::vector<float> data(input.data().begin() + static_cast<long>(begin * row),
                          input.data().begin() + static_cast<long>(end * row));
  return Tensor(std::move(shape), std::move(data));
}

Tensor stack_rows(const std::vector<Tensor>& parts) {
  if (parts.size() == 1) return parts.front();
  Shape shape = parts.front().shape();
  std::vector<float> data;
  shape[0] = 0;
  for (const Tensor& p : parts) {
    shape[0] += p.dim(0);
    data.insert(data.end(), p.data().begin(), p.data().end());
  }
  return Tensor(std::move(shape), std::move(data));
}

namespace {

constexpr std::size_t kInferenceChunk = 128;

template <class Fn>
Tensor infer(const Tensor& input, Fn&& fn) {
  return map_rows(input, kInferenceChunk, [&](const Tensor& chunk) {
    Graph g;
    Var x = g.constant(chunk);
    return fn(g, x).value();
  });
}

}  // namespace

Tensor class_encode(const ModelBundle& b, const Tensor& images) {
  return infer(images, [&](Graph& g, Var x) {
    return encode(b.arch, bind(g, b.net(NetId::class_encoder), false), x, "class_encode");
  });
}

Tensor domain_encode(const ModelBundle& b, const Tensor& images) {
  return infer(images, [&](Graph& g, Var x) {
    return encode(b.arch, bind(g, b.net(NetId::domain_encoder), false), x, "domain_encode");
  });
}

Tensor classify(const ModelBundle& b, const Tensor& v) {
  return infer(v, [&](Graph& g, Var x) {
    return classify(b.arch, bind(g, b.net(NetId::classifier), false), x);
  });
}

Tensor discriminate(const ModelBundle& b, const Tensor& v_domain) {
  return infer(v_domain, [&](Graph& g, Var x) {
    return discriminate(b.arch, bind(g, b.net(NetId::discriminator), false), x);
  });
}

Tensor indicate(const ModelBundle& b, const Tensor& v_domain) {
  return infer(v_domain, [&](Graph& g, Var x) {
    return indicate(b.arch, bind(g, b.net(NetId::indicator), false), x);
  });
}

Tensor decode(const ModelBundle& b, const Tensor& v_class, const Tensor& v_domain) {
  Graph g;
  return decode(b.arch, bind(g, b.net(NetId::decoder), false), g.constant(v_class),
                g.constant(v_domain))
      .value();
}

Tensor cosine_classify(const ModelBundle& b, const Tensor& v, float scale) {
  return infer(v, [&](Graph& g, Var x) {
    return cosine_classify(b.arch, bind(g, b.net(NetId::cosine_head), false), x, scale);
  });
}

void NetOptimizer::step(NetParams& params, std::span<const Tensor> grads) {
  std::vector<Tensor*> targets;
  for (Tensor& t : params.tensors) targets.push_back(&t);
  numerics::adam_step(targets, grads, state_);
}

}  // namespace ocda::models
