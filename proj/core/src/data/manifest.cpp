#include "ocda/data/manifest.hpp"

#include <fstream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "ocda/data/glyphs.hpp"
#include "ocda/data/idx.hpp"
#include "ocda/data/synthesize.hpp"
#include "ocda/error.hpp"
#include "ocda/numerics/random.hpp"

namespace ocda::data {

using nlohmann::json;

namespace {

constexpr std::uint64_t kPartitionStream = 0x9a27;
constexpr std::uint64_t kBalanceStream = 0xba1;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(what + ": unknown key '" + key + "'");
  }
}

}  // namespace

Manifest parse_manifest(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, {"name", "source", "specs", "open_specs", "mixing", "seed", "resolution", "splits",
                 "balance_source"},
             "manifest");
  Manifest m;
  try {
    m.name = j.at("name").get<std::string>();
    const json& src = j.at("source");
    check_keys(src, {"images", "labels", "synthetic"}, "manifest source");
    if (src.contains("synthetic")) {
      if (src.contains("images") || src.contains("labels")) {
        throw ConfigError("manifest source: give either synthetic or images/labels, not both");
      }
      const json& syn = src.at("synthetic");
      check_keys(syn, {"count", "seed", "size"}, "manifest source.synthetic");
      m.source.synthetic_count = syn.at("count").get<std::size_t>();
      m.source.synthetic_seed = syn.value("seed", std::uint64_t{0});
      m.source.synthetic_size = syn.value("size", std::size_t{28});
      if (m.source.synthetic_count == 0) throw ConfigError("manifest source.synthetic: count must be positive");
    } else {
      auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
      };
      m.source.images = resolve(src.at("images").get<std::string>());
      m.source.labels = resolve(src.at("labels").get<std::string>());
    }
    for (const auto& s : j.at("specs")) m.specs.push_back(s.get<DomainTransformSpec>());
    if (j.contains("open_specs")) {
      for (const auto& s : j.at("open_specs")) m.open_specs.push_back(s.get<DomainTransformSpec>());
    }
    if (j.contains("mixing")) m.mixing = j.at("mixing").get<std::vector<double>>();
    m.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("resolution")) {
      const auto r = j.at("resolution").get<std::vector<std::size_t>>();
      if (r.size() != 3 || r[0] == 0 || r[1] == 0 || (r[2] != 1 && r[2] != 3)) {
        throw ConfigError("manifest resolution: expected [height, width, 1|3]");
      }
      m.resolution = {r[0], r[1], r[2]};
    }
    if (j.contains("splits")) {
      const json& s = j.at("splits");
      check_keys(s, {"source_train", "source_test", "compound", "open"}, "manifest splits");
      SplitSizes sizes;
      sizes.source_train = s.at("source_train").get<std::size_t>();
      sizes.source_test = s.value("source_test", std::size_t{0});
      sizes.compound = s.at("compound").get<std::size_t>();
      sizes.open = s.value("open", std::size_t{0});
      m.splits = sizes;
    }
    m.balance_source = j.value("balance_source", true);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  if (m.specs.empty()) throw ConfigError("manifest: specs must list at least one domain");
  if (!m.mixing.empty() && m.mixing.size() != m.specs.size()) {
    throw ConfigError("manifest: mixing needs one weight per spec");
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("manifest " + path.string() + ": " + e.what());
  }
  return parse_manifest(j, path.parent_path());
}

json manifest_json(const Manifest& m) {
  json src;
  if (m.source.synthetic()) {
    src["synthetic"] = {{"count", m.source.synthetic_count},
                        {"seed", m.source.synthetic_seed},
                        {"size", m.source.synthetic_size}};
  } else {
    src = {{"images", m.source.images.string()}, {"labels", m.source.labels.string()}};
  }
  json j = {{"name", m.name},
            {"source", src},
            {"specs", m.specs},
            {"open_specs", m.open_specs},
            {"seed", m.seed},
            {"resolution", {m.resolution.height, m.resolution.width, m.resolution.channels}},
            {"balance_source", m.balance_source}};
  if (!m.mixing.empty()) j["mixing"] = m.mixing;
  if (m.splits) {
    j["splits"] = {{"source_train", m.splits->source_train},
                   {"source_test", m.splits->source_test},
                   {"compound", m.splits->compound},
                   {"open", m.splits->open}};
  }
  return j;
}

CompoundDataset build_dataset(const Manifest& m) {
  LabeledSplit base = m.source.synthetic()
                          ? render_digits(m.source.synthetic_count, m.source.synthetic_seed,
                                          m.source.synthetic_size)
                          : load_idx(m.source.images, m.source.labels);
  base.images = letterbox(base.images, m.resolution);

  const std::size_t n = base.size();
  SplitSizes sizes;
  if (m.splits) {
    sizes = *m.splits;
  } else {
    sizes.source_train = n / 2;
    sizes.source_test = n / 10;
    sizes.compound = 3 * n / 10;
    sizes.open = n / 10;
  }
  if (sizes.total() > n) {
    throw DataError("manifest '" + m.name + "': splits need " + std::to_string(sizes.total()) +
                    " examples, base has " + std::to_string(n));
  }
  if (sizes.source_train == 0 || sizes.compound == 0) {
    throw DataError("manifest '" + m.name + "': source_train and compound splits must be non-empty");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(m.seed, kPartitionStream));
  shuffle(std::span<std::size_t>(order), rng);
  std::size_t cursor = 0;
  auto take = [&](std::size_t count) {
    std::vector<std::size_t> idx(order.begin() + static_cast<long>(cursor),
                                 order.begin() + static_cast<long>(cursor + count));
    cursor += count;
    return base.subset(idx);
  };
  BasePools pools;
  pools.source_train = take(sizes.source_train);
  pools.source_test = take(sizes.source_test);
  pools.compound = take(sizes.compound);
  pools.open = take(sizes.open);
  if (m.balance_source) {
    pools.source_train = class_balance(pools.source_train, mix_seed(m.seed, kBalanceStream));
  }

  CompoundDataset ds = synthesize_compound(pools, m.specs, m.open_specs, m.seed, m.mixing);
  ds.name = m.name;
  ds.validate();
  return ds;
}

}  // namespace ocda::data
