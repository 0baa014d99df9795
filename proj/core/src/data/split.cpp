#include "ocda/data/split.hpp"

#include <algorithm>
#include <numeric>

#include "ocda/error.hpp"
#include "ocda/numerics/random.hpp"

namespace ocda::data {

using numerics::Shape;
using numerics::Tensor;

std::string to_string(const ImageShape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" +
         std::to_string(s.channels);
}

ImageSet::ImageSet(ImageShape shape, std::vector<float> pixels)
    : shape_(shape), pixels_(std::move(pixels)) {
  if (shape_.numel() == 0 || pixels_.size() % shape_.numel() != 0) {
    throw DataError("image set: " + std::to_string(pixels_.size()) +
                    " pixels do not tile images of shape " + data::to_string(shape_));
  }
}

std::span<const float> ImageSet::image(std::size_t i) const {
  if (i >= size()) throw DataError("image set: index out of range");
  return {pixels_.data() + i * shape_.numel(), shape_.numel()};
}

std::span<float> ImageSet::image(std::size_t i) {
  if (i >= size()) throw DataError("image set: index out of range");
  return {pixels_.data() + i * shape_.numel(), shape_.numel()};
}

void ImageSet::push_back(std::span<const float> image) {
  if (image.size() != shape_.numel()) {
    throw DataError("image set: image has " + std::to_string(image.size()) +
                    " values, expected " + data::to_string(shape_));
  }
  pixels_.insert(pixels_.end(), image.begin(), image.end());
}

ImageSet ImageSet::subset(std::span<const std::size_t> indices) const {
  ImageSet out(shape_);
  out.pixels_.reserve(indices.size() * shape_.numel());
  for (std::size_t i : indices) out.push_back(image(i));
  return out;
}

Tensor ImageSet::batch(std::span<const std::size_t> indices) const {
  std::vector<float> data;
  data.reserve(indices.size() * shape_.numel());
  for (std::size_t i : indices) {
    auto img = image(i);
    data.insert(data.end(), img.begin(), img.end());
  }
  return Tensor(Shape{indices.size(), shape_.height, shape_.width, shape_.channels},
                std::move(data));
}

Tensor ImageSet::range(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw DataError("image set: range out of bounds");
  const std::size_t n = shape_.numel();
  std::vector<float> data(pixels_.begin() + static_cast<long>(begin * n),
                          pixels_.begin() + static_cast<long>(end * n));
  return Tensor(Shape{end - begin, shape_.height, shape_.width, shape_.channels},
                std::move(data));
}

namespace {

Tensor image_tensor(const ImageSet& images, std::size_t i) {
  auto img = images.image(i);
  const ImageShape& s = images.shape();
  return Tensor(Shape{s.height, s.width, s.channels}, std::vector<float>(img.begin(), img.end()));
}

}  // namespace

LabeledExample LabeledSplit::example(std::size_t i) const {
  return {image_tensor(images, i), labels.at(i), std::nullopt};
}

LabeledSplit LabeledSplit::subset(std::span<const std::size_t> indices) const {
  LabeledSplit out;
  out.images = images.subset(indices);
  out.num_classes = num_classes;
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels.at(i));
  return out;
}

std::vector<std::size_t> LabeledSplit::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int y : labels) {
    if (y >= 0 && static_cast<std::size_t>(y) < num_classes) ++counts[static_cast<std::size_t>(y)];
  }
  return counts;
}

void LabeledSplit::validate(const std::string& what) const {
  if (images.size() != labels.size()) {
    throw DataError(what + ": " + std::to_string(images.size()) + " images but " +
                    std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw DataError(what + ": label " + std::to_string(y) + " outside [0, " +
                      std::to_string(num_classes) + ")");
    }
  }
  for (float p : images.pixels()) {
    if (!(p >= 0.0f && p <= 1.0f)) throw DataError(what + ": pixel outside [0, 1]");
  }
}

LabeledExample TargetSplit::example(std::size_t i) const {
  LabeledExample ex{image_tensor(images, i), labels.at(i), std::nullopt};
  if (i < domain_tags.size()) ex.hidden_domain_tag = domain_tags[i];
  return ex;
}

TargetSplit TargetSplit::subset(std::span<const std::size_t> indices) const {
  TargetSplit out;
  out.name = name;
  out.images = images.subset(indices);
  for (std::size_t i : indices) {
    out.labels.push_back(labels.at(i));
    out.domain_tags.push_back(domain_tags.at(i));
  }
  return out;
}

void CompoundDataset::validate() const {
  if (source_train.size() == 0) throw DataError("dataset: source_train split is empty");
  if (compound.size() == 0) throw DataError("dataset: compound target split is empty");
  source_train.validate("source_train");
  if (source_test.size() > 0) source_test.validate("source_test");
  auto check_target = [&](const TargetSplit& t) {
    if (t.labels.size() != t.size() || t.domain_tags.size() != t.size()) {
      throw DataError("dataset: target split '" + t.name + "' is missing labels or tags");
    }
    if (!(t.images.shape() == source_train.images.shape())) {
      throw DataError("dataset: target split '" + t.name + "' has image shape " +
                      to_string(t.images.shape()) + ", source has " +
                      to_string(source_train.images.shape()));
    }
  };
  check_target(compound);
  for (const TargetSplit& t : open_domains) check_target(t);
}

std::vector<TargetSplit> CompoundDataset::compound_by_domain() const {
  int max_tag = -1;
  for (int t : compound.domain_tags) max_tag = std::max(max_tag, t);
  const std::size_t domains = std::max<std::size_t>(compound_domain_names.size(),
                                                    static_cast<std::size_t>(max_tag + 1));
  std::vector<std::vector<std::size_t>> members(domains);
  for (std::size_t i = 0; i < compound.size(); ++i) {
    members[static_cast<std::size_t>(compound.domain_tags[i])].push_back(i);
  }
  std::vector<TargetSplit> out;
  for (std::size_t d = 0; d < domains; ++d) {
    TargetSplit part = compound.subset(members[d]);
    part.name = d < compound_domain_names.size() ? compound_domain_names[d]
                                                 : "domain" + std::to_string(d);
    out.push_back(std::move(part));
  }
  return out;
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t count, std::size_t batch_size,
                                                  std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size == 0) throw Error("minibatches: batch size must be at least 1");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed ^ epoch);
  shuffle(std::span<std::size_t>(order), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<long>(start),
                         order.begin() + static_cast<long>(end));
  }
  return batches;
}

BatchCycler::BatchCycler(std::size_t count, std::size_t batch_size, std::uint64_t seed)
    : count_(count), batch_size_(batch_size), seed_(seed) {
  if (count == 0) throw DataError("batch cycler: empty set");
  batches_ = minibatches(count_, batch_size_, seed_, epoch_);
}

const std::vector<std::size_t>& BatchCycler::next() {
  if (cursor_ == batches_.size()) {
    ++epoch_;
    batches_ = minibatches(count_, batch_size_, seed_, epoch_);
    cursor_ = 0;
  }
  return batches_[cursor_++];
}

LabeledSplit class_balance(const LabeledSplit& split, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> members(split.num_classes);
  for (std::size_t i = 0; i < split.size(); ++i) {
    const int y = split.labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= split.num_classes) {
      throw DataError("class_balance: label " + std::to_string(y) + " out of range");
    }
    members[static_cast<std::size_t>(y)].push_back(i);
  }
  std::string empty;
  std::size_t smallest = split.size();
  for (std::size_t k = 0; k < members.size(); ++k) {
    if (members[k].empty()) empty += (empty.empty() ? "" : ", ") + std::to_string(k);
    smallest = std::min(smallest, members[k].size());
  }
  if (!empty.empty()) throw DataError("class_balance: no examples for class(es) " + empty);

  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < members.size(); ++k) {
    Rng rng(mix_seed(seed, k));
    shuffle(std::span<std::size_t>(members[k]), rng);
    keep.insert(keep.end(), members[k].begin(), members[k].begin() + static_cast<long>(smallest));
  }
  std::sort(keep.begin(), keep.end());
  return split.subset(keep);
}

}  // namespace ocda::data
