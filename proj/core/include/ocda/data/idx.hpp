#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ocda/data/split.hpp"

namespace ocda::data {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

// Big-endian IDX ubyte files. Pixels are scaled by 1/255 into [0, 1] and the
// class count is max label + 1 unless num_classes is given.
LabeledSplit load_idx(const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path, std::size_t num_classes = 0);

LabeledSplit parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                       std::size_t num_classes = 0);

// Writes single-channel splits; pixels are rounded to the nearest byte.
void write_idx(const LabeledSplit& split, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

std::vector<std::uint8_t> encode_idx_images(const ImageSet& images);
std::vector<std::uint8_t> encode_idx_labels(std::span<const int> labels);

}  // namespace ocda::data
