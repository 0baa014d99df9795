#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ocda/data/split.hpp"
#include "ocda/data/transforms.hpp"

namespace ocda::data {

struct SplitSizes {
  std::size_t source_train = 0;
  std::size_t source_test = 0;
  std::size_t compound = 0;
  std::size_t open = 0;

  std::size_t total() const { return source_train + source_test + compound + open; }
};

// Either an IDX pair on disk or the procedural digit renderer.
struct SourceSpec {
  std::filesystem::path images;
  std::filesystem::path labels;
  std::size_t synthetic_count = 0;
  std::uint64_t synthetic_seed = 0;
  std::size_t synthetic_size = 28;

  bool synthetic() const { return images.empty(); }
};

struct Manifest {
  std::string name;
  SourceSpec source;
  std::vector<DomainTransformSpec> specs;
  std::vector<DomainTransformSpec> open_specs;
  std::vector<double> mixing;
  std::uint64_t seed = 0;
  ImageShape resolution{32, 32, 3};
  std::optional<SplitSizes> splits;  // default: 50/10/30/10 percent
  bool balance_source = true;
};

// Relative IDX paths resolve against base_dir. Unknown keys are errors.
Manifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
Manifest load_manifest(const std::filesystem::path& path);
nlohmann::json manifest_json(const Manifest& manifest);

// Loads or renders the base split, letterboxes it to the manifest
// resolution, carves disjoint pools with a seeded permutation and
// synthesizes the target domains.
CompoundDataset build_dataset(const Manifest& manifest);

}  // namespace ocda::data
