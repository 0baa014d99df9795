#include "ocda/data/synthesize.hpp"

#include "ocda/error.hpp"
#include "ocda/numerics/random.hpp"

namespace ocda::data {

namespace {

constexpr std::uint64_t kAssignStream = 0xa551;
constexpr std::uint64_t kCompoundStream = 0xc0;
constexpr std::uint64_t kOpenStream = 0x0e;

std::size_t draw_spec(Rng& rng, std::size_t specs, const std::vector<double>& cumulative) {
  if (cumulative.empty()) return uniform_index(rng, specs);
  const double u = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0) * cumulative.back();
  for (std::size_t k = 0; k < cumulative.size(); ++k) {
    if (u < cumulative[k]) return k;
  }
  return cumulative.size() - 1;
}

TargetSplit transform_all(const LabeledSplit& pool, const DomainTransformSpec& spec, int tag,
                          std::uint64_t seed) {
  TargetSplit out;
  out.name = spec.name;
  out.images = ImageSet(pool.images.shape());
  std::vector<float> buf(pool.images.shape().numel());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    apply_transform(spec, pool.images.image(i), pool.images.shape(), mix_seed(seed, i), buf);
    out.images.push_back(buf);
    out.labels.push_back(pool.labels[i]);
    out.domain_tags.push_back(tag);
  }
  return out;
}

}  // namespace

CompoundDataset synthesize_compound(const BasePools& pools,
                                    const std::vector<DomainTransformSpec>& specs,
                                    const std::vector<DomainTransformSpec>& open_specs,
                                    std::uint64_t seed, const std::vector<double>& mixing) {
  if (specs.empty()) throw DataError("synthesize_compound: at least one transform spec is required");
  if (pools.compound.size() == 0) throw DataError("synthesize_compound: base split is empty");
  if (!mixing.empty() && mixing.size() != specs.size()) {
    throw DataError("synthesize_compound: " + std::to_string(mixing.size()) +
                    " mixing weights for " + std::to_string(specs.size()) + " specs");
  }
  std::vector<double> cumulative;
  for (double w : mixing) {
    if (!(w >= 0.0)) throw DataError("synthesize_compound: mixing weights must be non-negative");
    cumulative.push_back((cumulative.empty() ? 0.0 : cumulative.back()) + w);
  }
  if (!cumulative.empty() && !(cumulative.back() > 0.0)) {
    throw DataError("synthesize_compound: mixing weights sum to zero");
  }

  CompoundDataset ds;
  ds.num_classes = pools.source_train.num_classes;
  ds.source_train = pools.source_train;
  ds.source_test = pools.source_test;
  for (const auto& s : specs) ds.compound_domain_names.push_back(s.name);

  const LabeledSplit& base = pools.compound;
  const ImageShape& shape = base.images.shape();
  ds.compound.name = "compound";
  ds.compound.images = ImageSet(shape);
  const std::uint64_t assign_seed = mix_seed(seed, kAssignStream);
  const std::uint64_t image_seed = mix_seed(seed, kCompoundStream);
  std::vector<float> buf(shape.numel());
  for (std::size_t i = 0; i < base.size(); ++i) {
    Rng rng(mix_seed(assign_seed, i));
    const std::size_t k = draw_spec(rng, specs.size(), cumulative);
    apply_transform(specs[k], base.images.image(i), shape, mix_seed(image_seed, i), buf);
    ds.compound.images.push_back(buf);
    ds.compound.labels.push_back(base.labels[i]);
    ds.compound.domain_tags.push_back(static_cast<int>(k));
  }

  if (!open_specs.empty() && pools.open.size() == 0) {
    throw DataError("synthesize_compound: open specs given but the open pool is empty");
  }
  for (std::size_t j = 0; j < open_specs.size(); ++j) {
    ds.open_domains.push_back(transform_all(pools.open, open_specs[j],
                                            static_cast<int>(specs.size() + j),
                                            mix_seed(seed, kOpenStream + j)));
  }
  return ds;
}

CompoundDataset synthesize_compound(const LabeledSplit& base,
                                    const std::vector<DomainTransformSpec>& specs,
                                    const std::vector<DomainTransformSpec>& open_specs,
                                    std::uint64_t seed) {
  return synthesize_compound(BasePools{base, base, base, base}, specs, open_specs, seed);
}

}  // namespace ocda::data
