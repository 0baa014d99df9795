#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ocda/curriculum/curriculum.hpp"
#include "ocda/data/split.hpp"
#include "ocda/disentangle/disentangle.hpp"
#include "ocda/harness/config.hpp"
#include "ocda/memory/memory.hpp"
#include "ocda/models/checkpoint.hpp"

namespace ocda::harness {

using models::Checkpoint;
using models::ModelBundle;
using numerics::Tensor;

data::CompoundDataset load_dataset(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Stage 1: E_class + classifier on labeled source.

struct EpochRow {
  std::size_t epoch = 0;
  double ce = 0.0;
  double center = 0.0;
  double accuracy = 0.0;  // running train accuracy over the epoch
};

struct Stage1Result {
  ModelBundle bundle;
  std::vector<EpochRow> curve;
};

// Seeded initialization that stage 1 starts from.
ModelBundle initial_bundle(const ExperimentConfig& config);

// Cross-entropy plus w_ctr * mean ||v_direct - c_y||^2 against running class
// centroids. Pure: writes nothing.
Stage1Result train_source(const ExperimentConfig& config, const data::LabeledSplit& source);
// train_source, then stage1.ckpt and stage1_loss.csv in out_dir.
Stage1Result run_stage1(const ExperimentConfig& config, const data::CompoundDataset& dataset,
                        const std::filesystem::path& out_dir);

std::string epoch_curve_csv(const std::vector<EpochRow>& rows);

// ---------------------------------------------------------------------------
// Stage 2.

// Which parts of stage 2 are active. The full pipeline is the default.
struct AdaptVariant {
  std::string name = "full";
  bool adapted = true;  // false: the stage-1 classifier alone
  bool curriculum = true;
  memory::GateMode gate = memory::GateMode::learned;
};

struct DisentangleResult {
  ModelBundle bundle;
  std::vector<disentangle::LossRow> curve;
};

DisentangleResult run_disentangle(const ExperimentConfig& config, const ModelBundle& bundle,
                                  const data::CompoundDataset& dataset);

struct Stage2Result {
  ModelBundle bundle;  // class_encoder holds the adapted target encoder
  ModelBundle disentangled;  // the bundle stage 2 started from
  memory::Memory memory;
  memory::HeadConfig head;
  curriculum::Schedule schedule;
  std::vector<curriculum::StageReport> stages;
  std::vector<disentangle::LossRow> disentangle_curve;
};

// Adapts from a stage-1 or disentangled checkpoint: disentangle if not done
// yet, build memory, reinitialize the cosine head, rank the compound target
// by domain gap and run curriculum training. A variant without curriculum
// runs one stage with as many epochs as all stages together.
Stage2Result adapt(const ExperimentConfig& config, const Checkpoint& from,
                   const data::CompoundDataset& dataset, const AdaptVariant& variant = {});
// adapt, then the stage-2 artifacts in out_dir.
Stage2Result run_stage2(const ExperimentConfig& config, const Checkpoint& from,
                        const data::CompoundDataset& dataset, const std::filesystem::path& out_dir,
                        const AdaptVariant& variant = {});

Checkpoint stage1_checkpoint(const ExperimentConfig& config, const ModelBundle& bundle);
Checkpoint disentangled_checkpoint(const ExperimentConfig& config, const ModelBundle& bundle);
Checkpoint adapted_checkpoint(const ExperimentConfig& config, const Stage2Result& result,
                              const AdaptVariant& variant);
// Memory and head of an adapted checkpoint.
memory::Memory memory_from(const Checkpoint& ckpt);
memory::HeadConfig head_from(const Checkpoint& ckpt);

// ---------------------------------------------------------------------------
// Evaluation.

struct SplitMetric {
  std::string name;
  std::string kind;  // source, compound or open
  std::size_t examples = 0;
  double accuracy = 0.0;
};

struct MetricsReport {
  std::vector<SplitMetric> splits;
  double avg_compound = 0.0;       // mean over compound domains
  double avg_compound_open = 0.0;  // mean over compound and open domains

  const SplitMetric* find(const std::string& name) const;
};

using Predictor = std::function<std::vector<int>(const Tensor& images)>;

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels);
// Top-1 accuracy on source test, each hidden compound domain and each open
// domain.
MetricsReport evaluate(const Predictor& predictor, const data::CompoundDataset& dataset);
MetricsReport evaluate(const ModelBundle& bundle, const memory::Memory& memory,
                       const data::CompoundDataset& dataset, const memory::HeadConfig& head);
// argmax of classifier(class_encoder(x)), the stage-1 head.
MetricsReport evaluate_plain(const ModelBundle& bundle, const data::CompoundDataset& dataset);

// Columns: split, kind, examples, accuracy; then the two averages as rows.
std::string metrics_csv(const MetricsReport& report);
nlohmann::json metrics_json(const MetricsReport& report);
// <stem>.csv and <stem>.json in dir.
void write_metrics(const std::filesystem::path& dir, const std::string& stem,
                   const MetricsReport& report);

// ---------------------------------------------------------------------------
// Probes.

struct KnnProbe {
  std::size_t k = 10;
  double class_rate = 0.0;   // on E_class features
  double domain_rate = 0.0;  // on E_domain features
};

// Domain identification rate over the compound split, tags hidden from
// training and used only here.
KnnProbe knn_probe(const ModelBundle& bundle, const data::CompoundDataset& dataset, std::size_t k);

// Gap of every compound example to a seeded source sample of E_domain
// features.
std::vector<double> compound_gaps(const ExperimentConfig& config, const ModelBundle& bundle,
                                  const data::CompoundDataset& dataset);

std::vector<memory::DiagnosticRow> compound_diagnostics(const ExperimentConfig& config,
                                                        const ModelBundle& bundle,
                                                        const memory::Memory& memory,
                                                        const memory::HeadConfig& head,
                                                        const data::CompoundDataset& dataset);

// Spearman correlation of mean |e_domain| against domain gap.
double indicator_gap_probe(const std::vector<memory::DiagnosticRow>& rows);

// ---------------------------------------------------------------------------
// Ablation.

struct AblationRow {
  std::string variant;
  MetricsReport metrics;
  double indicator_gap = 0.0;  // learned-gate variant only
};

// The five variants in order: source-only, +adversarial, +curriculum,
// +enhancer, +indicator (full).
std::vector<AdaptVariant> ablation_variants();

// Stage 1 and disentanglement are shared; each adapted variant starts from
// the same disentangled checkpoint with the same seeds. Source-only is the
// stage-1 classifier. The full variant also leaves its stage-2 artifacts,
// metrics, diagnostics and probes in out_dir.
std::vector<AblationRow> ablation_suite(const ExperimentConfig& config,
                                        const data::CompoundDataset& dataset,
                                        const std::filesystem::path& out_dir);

// Columns: variant, avg_compound, avg_compound_open, indicator_gap, then one
// per split.
std::string ablation_csv(const std::vector<AblationRow>& rows);

// ---------------------------------------------------------------------------
// Embedding export.

enum class EmbeddingKind { class_features, domain_features };

// Writes <path> with columns id, split, hidden_tag, label, e0..e{d-1} over
// every split, and <path stem>.pca2.csv with pc1, pc2 in place of the
// embedding. Returns the row count.
std::size_t export_embeddings(const ModelBundle& bundle, const data::CompoundDataset& dataset,
                              EmbeddingKind kind, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// End to end.

struct RunResult {
  Stage1Result stage1;
  Stage2Result stage2;
  MetricsReport source_only;
  MetricsReport adapted;
  KnnProbe knn;          // stage-1 E_class against E_domain
  KnnProbe knn_adapted;  // adapted E_class against the same E_domain
  double indicator_gap = 0.0;
};

// Stage 1, stage 2, evaluation and probes with every artifact written to the
// resolved output dir.
RunResult run_experiment(const ExperimentConfig& config, const data::CompoundDataset& dataset);

}  // namespace ocda::harness
