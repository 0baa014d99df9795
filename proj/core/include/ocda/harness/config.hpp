#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "ocda/curriculum/curriculum.hpp"
#include "ocda/disentangle/disentangle.hpp"
#include "ocda/models/architecture.hpp"

namespace ocda::harness {

struct Stage1Config {
  float lr = 1e-4f;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  float centroid_loss_weight = 0.01f;
  float centroid_rate = 0.5f;  // running-centroid update rate per batch
};

struct ProbeConfig {
  std::size_t knn_k = 10;
};

// Declarative description of a two-stage run. Sub-config seeds are offsets
// mixed with the top-level seed, so one knob reseeds the whole run.
struct ExperimentConfig {
  std::string name = "experiment";
  std::filesystem::path dataset;  // manifest path, relative to the config file
  models::ArchitectureDescriptor architecture;
  Stage1Config stage1;
  disentangle::DisentangleConfig disentangle;
  curriculum::CurriculumConfig stage2 = default_stage2();
  ProbeConfig probe;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/experiment";

  static curriculum::CurriculumConfig default_stage2();
};

// Validates every field; nothing is computed before this passes.
void validate(const ExperimentConfig& config);

// Strict schema: unknown keys anywhere are ConfigError. Relative dataset
// paths resolve against base_dir.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_json(const ExperimentConfig& config);

// Name of the environment variable that relocates relative output dirs.
inline constexpr const char* kOutputRootEnv = "OCDA_OUTPUT_ROOT";
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);

}  // namespace ocda::harness
