#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ocda/numerics/tensor.hpp"

namespace ocda::data {

struct ImageShape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t numel() const { return height * width * channels; }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

std::string to_string(const ImageShape& shape);

// Contiguous H x W x C float images with pixels in [0, 1].
class ImageSet {
 public:
  ImageSet() = default;
  explicit ImageSet(ImageShape shape) : shape_(shape) {}
  ImageSet(ImageShape shape, std::vector<float> pixels);

  const ImageShape& shape() const { return shape_; }
  std::size_t size() const { return shape_.numel() == 0 ? 0 : pixels_.size() / shape_.numel(); }
  bool empty() const { return size() == 0; }

  std::span<const float> image(std::size_t i) const;
  std::span<float> image(std::size_t i);
  const std::vector<float>& pixels() const { return pixels_; }

  void push_back(std::span<const float> image);
  ImageSet subset(std::span<const std::size_t> indices) const;

  // (B, H, W, C) batch tensors.
  numerics::Tensor batch(std::span<const std::size_t> indices) const;
  numerics::Tensor range(std::size_t begin, std::size_t end) const;

 private:
  ImageShape shape_;
  std::vector<float> pixels_;
};

struct LabeledExample {
  numerics::Tensor image;  // (H, W, C)
  int class_label = 0;
  std::optional<int> hidden_domain_tag;
};

struct LabeledSplit {
  ImageSet images;
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  LabeledExample example(std::size_t i) const;
  LabeledSplit subset(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> class_counts() const;
  // Throws DataError on size mismatch, out-of-range labels or pixels.
  void validate(const std::string& what) const;
};

// Unlabeled target data. Labels and domain tags are retained for
// evaluation only; training entry points accept just `images`.
struct TargetSplit {
  std::string name;
  ImageSet images;
  std::vector<int> labels;
  std::vector<int> domain_tags;

  std::size_t size() const { return images.size(); }
  LabeledExample example(std::size_t i) const;
  TargetSplit subset(std::span<const std::size_t> indices) const;
};

struct CompoundDataset {
  std::string name;
  LabeledSplit source_train;
  LabeledSplit source_test;
  TargetSplit compound;
  std::vector<std::string> compound_domain_names;  // indexed by domain tag
  std::vector<TargetSplit> open_domains;
  std::size_t num_classes = 0;

  void validate() const;
  // Per-domain views of the compound split, in tag order.
  std::vector<TargetSplit> compound_by_domain() const;
};

// Indices of each minibatch of an epoch. The permutation is seeded with
// seed XOR epoch; the last batch may be short.
std::vector<std::vector<std::size_t>> minibatches(std::size_t count, std::size_t batch_size,
                                                  std::uint64_t seed, std::uint64_t epoch);

// Endless stream of minibatches, advancing the epoch whenever one pass is
// exhausted. Used to draw fixed-size batches from sets of different sizes.
class BatchCycler {
 public:
  BatchCycler(std::size_t count, std::size_t batch_size, std::uint64_t seed);

  const std::vector<std::size_t>& next();
  std::uint64_t epoch() const { return epoch_; }

 private:
  std::size_t count_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::size_t cursor_ = 0;
  std::vector<std::vector<std::size_t>> batches_;
};

// Subsamples every class down to the smallest class count.
LabeledSplit class_balance(const LabeledSplit& split, std::uint64_t seed);

}  // namespace ocda::data
