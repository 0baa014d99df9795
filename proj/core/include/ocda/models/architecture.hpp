#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ocda/data/split.hpp"
#include "ocda/numerics/tensor.hpp"

namespace ocda::models {

enum class NetId : std::size_t {
  class_encoder,   // E_class
  classifier,      // Phi
  domain_encoder,  // E_domain
  decoder,
  discriminator,   // D, class logits from domain features
  indicator,       // T, tanh gate
  cosine_head,
  domain_critic,   // binary source/target discriminator for adaptation
};
inline constexpr std::size_t kNetCount = 8;

const char* net_name(NetId id);
NetId net_from_name(const std::string& name);
inline std::size_t index_of(NetId id) { return static_cast<std::size_t>(id); }

struct ParamSpec {
  std::string name;
  numerics::Shape shape;
  std::size_t fan_in = 0;  // 0 for biases, which start at zero
};

// Presets: "lenet5-small" (two 5x5 conv + pool blocks, then two linear
// layers) and "mlp" (flatten, one hidden layer). Encoders of both kinds output
// d_c (class) or d_d (domain) features with no final activation.
struct ArchitectureDescriptor {
  std::string preset = "lenet5-small";
  data::ImageShape input{32, 32, 3};
  std::size_t num_classes = 10;
  std::size_t d_c = 64;
  std::size_t d_d = 64;
  std::array<std::size_t, 2> conv_channels{6, 16};
  std::size_t fc_hidden = 128;
  std::size_t mlp_hidden = 256;
  std::size_t head_hidden = 64;
  std::size_t decoder_hidden = 256;
  std::size_t critic_hidden = 256;  // two hidden layers in the stage-2 critic

  friend bool operator==(const ArchitectureDescriptor&, const ArchitectureDescriptor&) = default;
};

// Throws ConfigError for unknown presets or inconsistent sizes.
void validate(const ArchitectureDescriptor& arch);

// Parameter layout of one network; fully determined by the descriptor.
std::vector<ParamSpec> param_specs(const ArchitectureDescriptor& arch, NetId id);

void to_json(nlohmann::json& j, const ArchitectureDescriptor& arch);
void from_json(const nlohmann::json& j, ArchitectureDescriptor& arch);

}  // namespace ocda::models
