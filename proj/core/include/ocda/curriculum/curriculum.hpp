#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ocda/data/split.hpp"
#include "ocda/memory/memory.hpp"
#include "ocda/models/bundle.hpp"

namespace ocda::curriculum {

using models::ModelBundle;
using numerics::Tensor;
using numerics::Var;

// Mean Euclidean distance from one target embedding to every row of the
// source embedding sample. Accumulated in double.
double domain_gap(std::span<const float> target, const Tensor& source_embeddings);
std::vector<double> domain_gaps(const Tensor& target_embeddings, const Tensor& source_embeddings);
// Same, on E_domain features of raw images.
std::vector<double> domain_gaps(const ModelBundle& bundle, const data::ImageSet& targets,
                                const data::ImageSet& source_sample);

// Sorted indices of a seeded source sample of at most `limit` examples.
std::vector<std::size_t> gap_sample(std::size_t source_count, std::size_t limit,
                                    std::uint64_t seed);

struct Schedule {
  std::vector<std::size_t> order;     // target indices by ascending gap
  std::vector<double> gaps;           // indexed by target index
  std::vector<double> boundaries;     // cumulative fractions, last 1.0
  std::vector<std::size_t> stage_sizes;  // cumulative admitted counts
  std::size_t epochs_per_stage = 5;

  std::size_t stages() const { return boundaries.size(); }
  std::span<const std::size_t> admitted(std::size_t stage) const;
  // First stage that admits each target index.
  std::vector<std::size_t> stage_of() const;
};

// Non-empty, each in (0, 1], strictly increasing, last exactly 1.
void validate_boundaries(const std::vector<double>& boundaries);

// Stable ascending sort of gaps; exact ties keep the original index order.
// Stage sizes are llround(boundary * n), kept non-decreasing.
Schedule build_schedule(const std::vector<double>& gaps, const std::vector<double>& boundaries,
                        std::size_t epochs_per_stage = 5);

// Rows in rank order. Columns: target_index, gap, stage.
std::string schedule_csv(const Schedule& schedule);
void write_schedule(const std::filesystem::path& path, const Schedule& schedule);

struct DomainLosses {
  Var d_loss;  // critic: source = 1, target = 0
  Var g_loss;  // encoder: target against the inverted label 1
};

// Critic logits are soft-capped at +-logit_cap before the binary
// cross-entropy, so a saturated critic gives a finite g_loss near the cap.
// d_loss weighs the source and target means equally.
DomainLosses domain_confusion_from_logits(Var source_logits, Var target_logits, float logit_cap);
DomainLosses domain_confusion_losses(const models::ArchitectureDescriptor& arch,
                                     const models::BoundNet& critic, Var source_features,
                                     Var target_features, float logit_cap);

struct CurriculumConfig {
  std::vector<double> boundaries{1.0 / 3.0, 2.0 / 3.0, 1.0};
  std::size_t epochs_per_stage = 5;
  float lr = 1e-5f;
  float lambda_adv = 1.0f;
  std::size_t critic_steps = 3;  // critic updates per encoder update
  float beta1 = 0.5f;            // Adam first-moment decay for every stage-2 optimizer
  // Reset the cosine head to the class centroids rather than random weights.
  bool imprint_head = true;
  std::size_t batch_size = 64;
  float logit_cap = 15.0f;
  std::size_t gap_sample = 1000;
  std::uint64_t seed = 0;
  memory::HeadConfig head;
};

void validate(const CurriculumConfig& config);
void to_json(nlohmann::json& j, const CurriculumConfig& config);
void from_json(const nlohmann::json& j, CurriculumConfig& config);

// Stage-2 training state. bundle.class_encoder is the target encoder being
// adapted; source_encoder is its frozen twin, which supplies the source side
// of the domain critic.
struct AdaptState {
  ModelBundle bundle;
  models::NetParams source_encoder;
  memory::Memory memory;
  models::NetOptimizer target_encoder_opt;
  models::NetOptimizer indicator_opt;
  models::NetOptimizer head_opt;
  models::NetOptimizer critic_opt;
  std::size_t stage = 0;
  std::size_t admitted = 0;

  AdaptState(ModelBundle bundle, memory::Memory memory, float lr, float beta1 = 0.5f);
};

struct StageReport {
  std::size_t stage = 0;
  std::size_t admitted = 0;
  std::size_t steps = 0;
  double source_ce = 0.0;  // means over the stage's steps
  double d_loss = 0.0;
  double g_loss = 0.0;
};

// For each stage: admit the schedule prefix, then per batch take one critic
// step on d_loss and one step of the target encoder, indicator and cosine
// head on source CE + lambda_adv * g_loss. Only images of the target are
// taken, so no target label can reach training.
std::vector<StageReport> curriculum_train(AdaptState& state, const data::LabeledSplit& source,
                                          const data::ImageSet& compound, const Schedule& schedule,
                                          const CurriculumConfig& config);

// Columns: stage, admitted, steps, source_ce, d_loss, g_loss.
std::string stage_report_csv(const std::vector<StageReport>& reports);

}  // namespace ocda::curriculum
