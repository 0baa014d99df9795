#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ocda/data/split.hpp"

namespace ocda::data {

// Hue rotation (degrees about the gray axis), then per-channel affine
// x * scale + shift. jitter perturbs scale and shift per example.
struct ColorShift {
  float hue = 0.0f;
  std::array<float, 3> scale{1.0f, 1.0f, 1.0f};
  std::array<float, 3> shift{0.0f, 0.0f, 0.0f};
  float jitter = 0.0f;
};

// Pattern ids: 0 stripes, 1 checker, 2 plasma, 3 blobs. Blended as
// (1 - alpha) x + alpha |x - texture|.
struct BackgroundTexture {
  int pattern = 0;
  float alpha = 0.5f;
};

struct AdditiveNoise {
  float sigma = 0.0f;
};

struct Invert {};

// 0.5 + gamma (x - 0.5)
struct Contrast {
  float gamma = 1.0f;
};

using TransformOp = std::variant<ColorShift, BackgroundTexture, AdditiveNoise, Invert, Contrast>;

struct DomainTransformSpec {
  std::string name;
  std::vector<TransformOp> ops;
  std::uint64_t seed = 0;
};

// Applies the ops in order, clamping to [0, 1] after each. Randomness is
// drawn from a stream derived from (spec.seed, stream) only.
void apply_transform(const DomainTransformSpec& spec, std::span<const float> image,
                     const ImageShape& shape, std::uint64_t stream, std::span<float> out);
std::vector<float> apply_transform(const DomainTransformSpec& spec, std::span<const float> image,
                                   const ImageShape& shape, std::uint64_t stream);

// Bilinear resize preserving aspect ratio, centered on a black canvas.
// Channel counts convert 1 -> 3 by replication and 3 -> 1 by averaging.
ImageSet letterbox(const ImageSet& images, const ImageShape& target);

void to_json(nlohmann::json& j, const DomainTransformSpec& spec);
void from_json(const nlohmann::json& j, DomainTransformSpec& spec);

}  // namespace ocda::data
