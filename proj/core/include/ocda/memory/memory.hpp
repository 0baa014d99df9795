#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ocda/data/split.hpp"
#include "ocda/models/bundle.hpp"

namespace ocda::memory {

using models::ModelBundle;
using numerics::Graph;
using numerics::Tensor;
using numerics::Var;

// K class centroids of v_direct, frozen once built, and the mean source
// E_domain feature the indicator measures its input from.
struct Memory {
  Tensor centroids;  // (K, d_c)
  Tensor domain_center;  // (d_d); empty means the origin
  float temperature = 8.0f;

  std::size_t classes() const { return centroids.rank() == 2 ? centroids.dim(0) : 0; }
};

// Mean class-encoder feature per source class and mean domain-encoder
// feature over the whole source split.
Memory build_memory(const ModelBundle& bundle, const data::LabeledSplit& source,
                    float temperature = 8.0f);

// How e_domain is produced. `none` disables the memory term entirely,
// `unit` applies the enhancer with a gate of ones, `learned` uses the
// indicator network.
enum class GateMode { none, unit, learned };

std::string gate_name(GateMode mode);
GateMode gate_from_name(const std::string& name);

struct HeadConfig {
  GateMode gate = GateMode::learned;
  float temperature = 8.0f;
  float scale = 16.0f;  // cosine classifier s
};

void to_json(nlohmann::json& j, const HeadConfig& config);
void from_json(const nlohmann::json& j, HeadConfig& config);

// psi = softmax over classes of temperature * cos(v_direct, c_k). A zero
// v_direct has zero cosine to every centroid, hence uniform psi.
Var attention(const Memory& memory, Var v_direct);
// v_enhance = psi^T M. Centroids enter as constants.
Var enhance(const Memory& memory, Var v_direct);
// e_domain = T(v_domain - domain_center): the gate sees where an input sits
// relative to the source domain.
Var indicator_gate(const ModelBundle& bundle, const models::BoundNet& indicator,
                   const Memory& memory, Var v_domain);
// normalize(v_direct + e_domain * v_enhance).
Var transfer(Var v_direct, Var v_enhance, Var e_domain);

Tensor attention(const Memory& memory, const Tensor& v_direct);
Tensor enhance(const Memory& memory, const Tensor& v_direct);
Tensor transfer(const Tensor& v_direct, const Tensor& v_enhance, const Tensor& e_domain);

// Graph-level source-enhanced representation used by training. v_direct and
// v_domain are supplied by the caller so either encoder can feed it.
Var transfer_features(const ModelBundle& bundle, const models::BoundNet* indicator,
                      const Memory& memory, const HeadConfig& head, Var v_direct, Var v_domain);

struct Prediction {
  Tensor logits;
  Tensor v_direct;
  Tensor v_enhance;
  Tensor e_domain;
  Tensor v_transfer;
};

// Full inference path: class encoder, memory enhancer, indicator gate and
// cosine classifier.
Prediction predict(const ModelBundle& bundle, const Memory& memory, const Tensor& images,
                   const HeadConfig& head = {});

struct DiagnosticRow {
  std::size_t id = 0;
  int hidden_domain_tag = -1;
  double gate_mean_abs = 0.0;
  double domain_gap = 0.0;
  int predicted = 0;
  int label = 0;
};

// Per-example diagnostics for a target split. `gaps` holds one domain gap per
// example.
std::vector<DiagnosticRow> diagnostics(const Prediction& prediction,
                                       const data::TargetSplit& split,
                                       const std::vector<double>& gaps);

// Columns: id, hidden_domain_tag, gate_mean_abs, domain_gap, predicted, label.
std::string diagnostics_csv(const std::vector<DiagnosticRow>& rows);
void write_diagnostics(const std::filesystem::path& path, const std::vector<DiagnosticRow>& rows);

}  // namespace ocda::memory
