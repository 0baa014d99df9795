#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ocda/data/split.hpp"
#include "ocda/models/bundle.hpp"
#include "ocda/numerics/random.hpp"

namespace ocda::disentangle {

using models::ModelBundle;
using numerics::Tensor;
using numerics::Var;

enum class ReconNorm { l2, l1 };

struct DisentangleConfig {
  std::size_t iterations = 1000;  // 0 leaves the bundle untouched
  std::size_t batch_size = 32;  // per domain; the union batch is twice this
  float gamma = 1.0f;
  ReconNorm norm = ReconNorm::l2;
  std::size_t disc_steps = 1;  // discriminator updates per encoder update
  float lr = 1e-4f;
  std::uint64_t seed = 0;
};

void validate(const DisentangleConfig& config);
void to_json(nlohmann::json& j, const DisentangleConfig& config);
void from_json(const nlohmann::json& j, DisentangleConfig& config);

// Row-wise argmax; ties go to the lowest index.
std::vector<int> argmax_rows(const Tensor& logits);
// argmax of classifier(class_encoder(x)).
std::vector<int> pseudo_label(const ModelBundle& bundle, const Tensor& images);

// Mean cross-entropy of (B, C) logits against random labels z.
Var confusion_loss(Var disc_logits, std::span<const int> z_random);
// Mean cross-entropy against true or pseudo labels; the same function with a
// different label source.
Var discriminator_loss(Var disc_logits, std::span<const int> labels);
// l2: batch mean of per-example Euclidean distance. l1: batch mean of the
// per-example sum of absolute differences.
Var reconstruction_loss(Var decoded, Var original, ReconNorm norm);

struct StepReport {
  double disc_loss = 0.0;
  double confusion_loss = 0.0;
  double rec_loss = 0.0;
};

// Adam moments of the networks updated while disentangling.
struct DisentangleState {
  models::NetOptimizer discriminator;
  models::NetOptimizer domain_encoder;
  models::NetOptimizer decoder;

  explicit DisentangleState(float lr);
};

// Optional instrumentation of one step.
struct StepTrace {
  std::vector<std::string> events;
  Tensor disc_input;  // domain features the discriminator update consumed
  std::vector<Tensor> decoder_grads;
};

// One alternation. (a) disc_steps updates of D on the union batch (source
// with true labels, target with pseudo-labels) using the current E_domain
// features; (b) one update of E_domain and the decoder on
// confusion + gamma * reconstruction, with z resampled per example from rng.
// E_class and the classifier are read but never written.
StepReport disentangle_step(ModelBundle& bundle, DisentangleState& state,
                            const Tensor& source_images, std::span<const int> source_labels,
                            const Tensor& target_images, const DisentangleConfig& config, Rng& rng,
                            StepTrace* trace = nullptr);

struct LossRow {
  std::size_t iteration = 0;
  StepReport report;
};

// Loops disentangle_step over seeded minibatches of the labeled source and
// the unlabeled target images.
std::vector<LossRow> train_disentangler(ModelBundle& bundle, const data::LabeledSplit& source,
                                        const data::ImageSet& target,
                                        const DisentangleConfig& config);

// CSV columns: iteration, disc_loss, confusion_loss, rec_loss.
std::string loss_curve_csv(const std::vector<LossRow>& rows);
void write_loss_curve(const std::filesystem::path& path, const std::vector<LossRow>& rows);

}  // namespace ocda::disentangle
