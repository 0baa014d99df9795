#include "ocda/memory/memory.hpp"

#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "ocda/error.hpp"
#include "ocda/io.hpp"
#include "ocda/numerics/nn.hpp"

namespace ocda::memory {

using models::NetId;
using numerics::Shape;

namespace {

constexpr std::size_t kChunk = 128;

void require_rows(const char* op, const Shape& s, std::size_t cols) {
  if (s.size() != 2 || s[1] != cols) {
    throw ShapeError(std::string(op) + ": expected (B, " + std::to_string(cols) + "), got " +
                     numerics::to_string(s));
  }
}

}  // namespace

Memory build_memory(const ModelBundle& bundle, const data::LabeledSplit& source, float temperature) {
  const std::size_t k = bundle.arch.num_classes, d = bundle.arch.d_c;
  if (!(temperature > 0.0f)) throw ConfigError("build_memory: temperature must be positive");
  std::vector<std::size_t> counts(k, 0);
  for (int y : source.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw DataError("build_memory: label " + std::to_string(y) + " outside the class range");
    }
    ++counts[static_cast<std::size_t>(y)];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      throw DataError("build_memory: class " + std::to_string(c) + " has no source examples");
    }
  }
  const std::size_t dd = bundle.arch.d_d;
  std::vector<double> sums(k * d, 0.0), domain_sum(dd, 0.0);
  std::vector<std::size_t> chunk;
  for (std::size_t begin = 0; begin < source.size(); begin += kChunk) {
    const std::size_t end = std::min(source.size(), begin + kChunk);
    chunk.clear();
    for (std::size_t i = begin; i < end; ++i) chunk.push_back(i);
    const Tensor images = source.images.batch(chunk);
    const Tensor v = models::class_encode(bundle, images);
    const Tensor vd = models::domain_encode(bundle, images);
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t y = static_cast<std::size_t>(source.labels[i]);
      for (std::size_t j = 0; j < d; ++j) sums[y * d + j] += v[(i - begin) * d + j];
      for (std::size_t j = 0; j < dd; ++j) domain_sum[j] += vd[(i - begin) * dd + j];
    }
  }
  Memory m;
  m.temperature = temperature;
  m.centroids = Tensor(Shape{k, d});
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < d; ++j) {
      m.centroids[c * d + j] = static_cast<float>(sums[c * d + j] / static_cast<double>(counts[c]));
    }
  }
  m.domain_center = Tensor(Shape{dd});
  for (std::size_t j = 0; j < dd; ++j) {
    m.domain_center[j] = static_cast<float>(domain_sum[j] / static_cast<double>(source.size()));
  }
  return m;
}

std::string gate_name(GateMode mode) {
  switch (mode) {
    case GateMode::none: return "none";
    case GateMode::unit: return "unit";
    case GateMode::learned: return "learned";
  }
  return "?";
}

GateMode gate_from_name(const std::string& name) {
  if (name == "none") return GateMode::none;
  if (name == "unit") return GateMode::unit;
  if (name == "learned") return GateMode::learned;
  throw ConfigError("head: gate must be none, unit or learned, got '" + name + "'");
}

void to_json(nlohmann::json& j, const HeadConfig& c) {
  j = {{"gate", gate_name(c.gate)}, {"temperature", c.temperature}, {"scale", c.scale}};
}

void from_json(const nlohmann::json& j, HeadConfig& c) {
  static const std::set<std::string> keys{"gate", "temperature", "scale"};
  if (!j.is_object()) throw ConfigError("head: expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw ConfigError("head: unknown key '" + key + "'");
  }
  try {
    c = HeadConfig{};
    c.gate = gate_from_name(j.value("gate", gate_name(c.gate)));
    c.temperature = j.value("temperature", c.temperature);
    c.scale = j.value("scale", c.scale);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("head: ") + e.what());
  }
  if (!(c.temperature > 0.0f)) throw ConfigError("head: temperature must be positive");
  if (!(c.scale > 0.0f)) throw ConfigError("head: scale must be positive");
}

Var attention(const Memory& memory, Var v_direct) {
  require_rows("attention", v_direct.shape(), memory.centroids.dim(1));
  Graph& g = *v_direct.graph();
  Var c = numerics::l2_normalize(g.constant(memory.centroids));
  Var cos = numerics::matmul(numerics::l2_normalize(v_direct), c, true);
  return numerics::softmax(numerics::scale(cos, memory.temperature));
}

Var enhance(const Memory& memory, Var v_direct) {
  Graph& g = *v_direct.graph();
  return numerics::matmul(attention(memory, v_direct), g.constant(memory.centroids));
}

Var indicator_gate(const ModelBundle& bundle, const models::BoundNet& indicator,
                   const Memory& memory, Var v_domain) {
  if (memory.domain_center.numel() == 0) return models::indicate(bundle.arch, indicator, v_domain);
  const Shape& s = v_domain.shape();
  if (s.size() != 2 || s[1] != memory.domain_center.numel()) {
    throw ShapeError("indicator_gate: v_domain " + numerics::to_string(s) + " does not match the " +
                     std::to_string(memory.domain_center.numel()) + "-dim domain center");
  }
  Tensor center(s);
  for (std::size_t i = 0; i < s[0]; ++i) {
    std::copy(memory.domain_center.data().begin(), memory.domain_center.data().end(),
              center.data().begin() + static_cast<long>(i * s[1]));
  }
  Graph& g = *v_domain.graph();
  return models::indicate(bundle.arch, indicator, numerics::sub(v_domain, g.constant(center)));
}

Var transfer(Var v_direct, Var v_enhance, Var e_domain) {
  if (v_direct.shape() != v_enhance.shape() || v_direct.shape() != e_domain.shape() ||
      v_direct.shape().size() != 2) {
    throw ShapeError("transfer: v_direct " + numerics::to_string(v_direct.shape()) + ", v_enhance " +
                     numerics::to_string(v_enhance.shape()) + " and e_domain " +
                     numerics::to_string(e_domain.shape()) + " must share one (B, d_c) shape");
  }
  return numerics::l2_normalize(numerics::add(v_direct, numerics::mul(e_domain, v_enhance)));
}

Tensor attention(const Memory& memory, const Tensor& v_direct) {
  Graph g;
  return attention(memory, g.constant(v_direct)).value();
}

Tensor enhance(const Memory& memory, const Tensor& v_direct) {
  Graph g;
  return enhance(memory, g.constant(v_direct)).value();
}

Tensor transfer(const Tensor& v_direct, const Tensor& v_enhance, const Tensor& e_domain) {
  Graph g;
  return transfer(g.constant(v_direct), g.constant(v_enhance), g.constant(e_domain)).value();
}

Var transfer_features(const ModelBundle& bundle, const models::BoundNet* indicator,
                      const Memory& memory, const HeadConfig& head, Var v_direct, Var v_domain) {
  Graph& g = *v_direct.graph();
  switch (head.gate) {
    case GateMode::none:
      return numerics::l2_normalize(v_direct);
    case GateMode::unit:
      return transfer(v_direct, enhance(memory, v_direct),
                      g.constant(Tensor::ones(v_direct.shape())));
    case GateMode::learned: {
      if (!indicator) throw Error("transfer_features: learned gate needs the indicator network");
      Var e = indicator_gate(bundle, *indicator, memory, v_domain);
      return transfer(v_direct, enhance(memory, v_direct), e);
    }
  }
  throw Error("transfer_features: unknown gate mode");
}

Prediction predict(const ModelBundle& bundle, const Memory& memory, const Tensor& images,
                   const HeadConfig& head) {
  const auto& arch = bundle.arch;
  if (memory.centroids.rank() != 2 || memory.classes() != arch.num_classes ||
      memory.centroids.dim(1) != arch.d_c) {
    throw ShapeError("predict: memory centroids " + numerics::to_string(memory.centroids.shape()) +
                     " do not match the architecture");
  }
  const std::size_t n = images.rank() == 4 ? images.dim(0) : 0;
  Memory m = memory;
  m.temperature = head.temperature;
  std::vector<Tensor> logits, direct, enhanced, gates, transferred;
  for (std::size_t begin = 0; begin < std::max<std::size_t>(n, 1); begin += kChunk) {
    const std::size_t end = std::min(n, begin + kChunk);
    Graph g;
    Var x = g.constant(n == 0 ? images : models::slice_rows(images, begin, end));
    Var v = models::encode(arch, models::bind(g, bundle.net(NetId::class_encoder), false), x,
                           "class_encode");
    Var enh = enhance(m, v);
    Var e;
    switch (head.gate) {
      case GateMode::none: e = g.constant(Tensor::zeros(v.shape())); break;
      case GateMode::unit: e = g.constant(Tensor::ones(v.shape())); break;
      case GateMode::learned: {
        Var vd = models::encode(arch, models::bind(g, bundle.net(NetId::domain_encoder), false), x,
                                "domain_encode");
        e = indicator_gate(bundle, models::bind(g, bundle.net(NetId::indicator), false), m, vd);
        break;
      }
    }
    Var vt = transfer(v, enh, e);
    Var out = models::cosine_classify(arch, models::bind(g, bundle.net(NetId::cosine_head), false),
                                      vt, head.scale);
    logits.push_back(out.value());
    direct.push_back(v.value());
    enhanced.push_back(enh.value());
    gates.push_back(e.value());
    transferred.push_back(vt.value());
    if (n == 0) break;
  }
  return {models::stack_rows(logits), models::stack_rows(direct), models::stack_rows(enhanced),
          models::stack_rows(gates), models::stack_rows(transferred)};
}

std::vector<DiagnosticRow> diagnostics(const Prediction& p, const data::TargetSplit& split,
                                       const std::vector<double>& gaps) {
  const std::size_t n = split.size();
  if (p.logits.rank() != 2 || p.logits.dim(0) != n || gaps.size() != n) {
    throw ShapeError("diagnostics: prediction, split and gaps disagree on the example count");
  }
  const std::size_t k = p.logits.dim(1), d = p.e_domain.dim(1);
  std::vector<DiagnosticRow> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    DiagnosticRow& r = rows[i];
    r.id = i;
    r.hidden_domain_tag = split.domain_tags.empty() ? -1 : split.domain_tags[i];
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += std::fabs(p.e_domain[i * d + j]);
    r.gate_mean_abs = s / static_cast<double>(d);
    r.domain_gap = gaps[i];
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (p.logits[i * k + c] > p.logits[i * k + best]) best = c;
    }
    r.predicted = static_cast<int>(best);
    r.label = split.labels.empty() ? -1 : split.labels[i];
  }
  return rows;
}

std::string diagnostics_csv(const std::vector<DiagnosticRow>& rows) {
  std::string out = "id,hidden_domain_tag,gate_mean_abs,domain_gap,predicted,label\n";
  for (const DiagnosticRow& r : rows) {
    out += std::to_string(r.id) + "," + std::to_string(r.hidden_domain_tag) + "," +
           io::format_float(r.gate_mean_abs) + "," + io::format_float(r.domain_gap) + "," +
           std::to_string(r.predicted) + "," + std::to_string(r.label) + "\n";
  }
  return out;
}

void write_diagnostics(const std::filesystem::path& path, const std::vector<DiagnosticRow>& rows) {
  io::write_atomic(path, diagnostics_csv(rows));
}

}  // namespace ocda::memory
