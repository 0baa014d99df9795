#include "ocda/harness/config.hpp"

#include <cstdlib>
#include <set>

#include <nlohmann/json.hpp>

#include "ocda/error.hpp"
#include "ocda/io.hpp"

namespace ocda::harness {

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

}  // namespace

curriculum::CurriculumConfig ExperimentConfig::default_stage2() {
  curriculum::CurriculumConfig c;
  c.lr = 1e-5f;
  c.epochs_per_stage = 67;  // three stages, about 200 epochs in total
  return c;
}

void validate(const ExperimentConfig& c) {
  if (c.dataset.empty()) throw ConfigError("config: dataset manifest path is required");
  models::validate(c.architecture);
  if (!(c.stage1.lr > 0.0f)) throw ConfigError("config: stage1.lr must be positive");
  if (c.stage1.batch_size < 1) throw ConfigError("config: stage1.batch_size must be at least 1");
  if (!(c.stage1.centroid_loss_weight >= 0.0f)) {
    throw ConfigError("config: stage1.centroid_loss_weight must be non-negative");
  }
  if (!(c.stage1.centroid_rate > 0.0f && c.stage1.centroid_rate <= 1.0f)) {
    throw ConfigError("config: stage1.centroid_rate must lie in (0, 1]");
  }
  disentangle::validate(c.disentangle);
  curriculum::validate(c.stage2);
  if (c.probe.knn_k < 1) throw ConfigError("config: probe.knn_k must be at least 1");
  if (c.output_dir.empty()) throw ConfigError("config: output_dir must not be empty");
}

ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  check_keys(j, {"name", "dataset", "architecture", "stage1", "disentangle", "stage2", "probe",
                 "seed", "output_dir"},
             "config");
  ExperimentConfig c;
  try {
    c.name = j.value("name", c.name);
    if (!j.contains("dataset")) throw ConfigError("config: dataset manifest path is required");
    c.dataset = j.at("dataset").get<std::string>();
    if (c.dataset.is_relative() && !base_dir.empty()) c.dataset = base_dir / c.dataset;
    if (j.contains("architecture")) c.architecture = j.at("architecture").get<models::ArchitectureDescriptor>();
    if (j.contains("stage1")) {
      const auto& s = j.at("stage1");
      check_keys(s, {"lr", "epochs", "batch_size", "centroid_loss_weight", "centroid_rate"}, "config.stage1");
      c.stage1.lr = s.value("lr", c.stage1.lr);
      c.stage1.epochs = s.value("epochs", c.stage1.epochs);
      c.stage1.batch_size = s.value("batch_size", c.stage1.batch_size);
      c.stage1.centroid_loss_weight = s.value("centroid_loss_weight", c.stage1.centroid_loss_weight);
      c.stage1.centroid_rate = s.value("centroid_rate", c.stage1.centroid_rate);
    }
    if (j.contains("disentangle")) c.disentangle = j.at("disentangle").get<disentangle::DisentangleConfig>();
    if (j.contains("stage2")) {
      // Stage-2 defaults differ from the bare curriculum defaults.
      if (!j.at("stage2").is_object()) throw ConfigError("config.stage2: expected an object");
      nlohmann::json merged = ExperimentConfig::default_stage2();
      for (const auto& [key, value] : j.at("stage2").items()) merged[key] = value;
      c.stage2 = merged.get<curriculum::CurriculumConfig>();
    }
    if (j.contains("probe")) {
      check_keys(j.at("probe"), {"knn_k"}, "config.probe");
      c.probe.knn_k = j.at("probe").value("knn_k", c.probe.knn_k);
    }
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir.string());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j, path.parent_path());
}

nlohmann::json config_json(const ExperimentConfig& c) {
  return {{"name", c.name},
          {"dataset", c.dataset.string()},
          {"architecture", c.architecture},
          {"stage1",
           {{"lr", c.stage1.lr},
            {"epochs", c.stage1.epochs},
            {"batch_size", c.stage1.batch_size},
            {"centroid_loss_weight", c.stage1.centroid_loss_weight},
            {"centroid_rate", c.stage1.centroid_rate}}},
          {"disentangle", c.disentangle},
          {"stage2", c.stage2},
          {"probe", {{"knn_k", c.probe.knn_k}}},
          {"seed", c.seed},
          {"output_dir", c.output_dir.string()}};
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& c) {
  if (c.output_dir.is_absolute()) return c.output_dir;
  if (const char* root = std::getenv(kOutputRootEnv); root && *root) {
    return std::filesystem::path(root) / c.output_dir;
  }
  return c.output_dir;
}

}  // namespace ocda::harness
