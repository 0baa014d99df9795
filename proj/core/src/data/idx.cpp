#include "ocda/data/idx.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "ocda/error.hpp"

namespace ocda::data {

namespace {

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset,
                        const char* what) {
  if (offset + 4 > bytes.size()) {
    throw DataError(std::string(what) + ": truncated header");
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void check_magic(std::uint32_t found, std::uint32_t expected, const char* what) {
  if (found != expected) {
    throw DataError(std::string(what) + ": bad IDX magic, expected " + hex32(expected) +
                    ", found " + hex32(found));
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

}  // namespace

LabeledSplit parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                       std::size_t num_classes) {
  check_magic(read_be32(images, 0, "idx images"), kIdxImagesMagic, "idx images");
  check_magic(read_be32(labels, 0, "idx labels"), kIdxLabelsMagic, "idx labels");
  const std::size_t count = read_be32(images, 4, "idx images");
  const std::size_t rows = read_be32(images, 8, "idx images");
  const std::size_t cols = read_be32(images, 12, "idx images");
  const std::size_t label_count = read_be32(labels, 4, "idx labels");
  if (count != label_count) {
    throw DataError("idx: image count " + std::to_string(count) + " does not match label count " +
                    std::to_string(label_count));
  }
  if (rows == 0 || cols == 0) throw DataError("idx images: zero-sized images");
  const std::size_t pixels = count * rows * cols;
  if (images.size() < 16 + pixels) {
    throw DataError("idx images: truncated payload, expected " + std::to_string(pixels) +
                    " bytes, found " + std::to_string(images.size() - 16));
  }
  if (labels.size() < 8 + count) {
    throw DataError("idx labels: truncated payload, expected " + std::to_string(count) +
                    " bytes, found " + std::to_string(labels.size() - 8));
  }

  std::vector<float> data(pixels);
  for (std::size_t i = 0; i < pixels; ++i) data[i] = static_cast<float>(images[16 + i]) / 255.0f;
  LabeledSplit split;
  split.images = ImageSet({rows, cols, 1}, std::move(data));
  split.labels.resize(count);
  int max_label = -1;
  for (std::size_t i = 0; i < count; ++i) {
    split.labels[i] = labels[8 + i];
    max_label = std::max(max_label, split.labels[i]);
  }
  split.num_classes = num_classes ? num_classes : static_cast<std::size_t>(max_label + 1);
  split.validate("idx");
  return split;
}

LabeledSplit load_idx(const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path, std::size_t num_classes) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  return parse_idx(images, labels, num_classes);
}

std::vector<std::uint8_t> encode_idx_images(const ImageSet& images) {
  const ImageShape& s = images.shape();
  if (s.channels != 1) throw DataError("idx: only single-channel images can be written");
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.pixels().size());
  put_be32(out, kIdxImagesMagic);
  put_be32(out, static_cast<std::uint32_t>(images.size()));
  put_be32(out, static_cast<std::uint32_t>(s.height));
  put_be32(out, static_cast<std::uint32_t>(s.width));
  for (float p : images.pixels()) {
    out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(p, 0.0f, 1.0f) * 255.0f)));
  }
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const int> labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  put_be32(out, kIdxLabelsMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int y : labels) {
    if (y < 0 || y > 255) throw DataError("idx: label " + std::to_string(y) + " does not fit a byte");
    out.push_back(static_cast<std::uint8_t>(y));
  }
  return out;
}

void write_idx(const LabeledSplit& split, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  write_file(images_path, encode_idx_images(split.images));
  write_file(labels_path, encode_idx_labels(split.labels));
}

}  // namespace ocda::data
