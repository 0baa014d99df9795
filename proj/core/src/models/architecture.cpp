#include "ocda/models/architecture.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "ocda/error.hpp"

namespace ocda::models {

namespace {

constexpr std::array<const char*, kNetCount> kNames{
    "class_encoder", "classifier", "domain_encoder", "decoder",
    "discriminator", "indicator",  "cosine_head",    "domain_critic"};

void dense(std::vector<ParamSpec>& out, const std::string& prefix, std::size_t in, std::size_t outs) {
  out.push_back({prefix + ".w", {in, outs}, in});
  out.push_back({prefix + ".b", {outs}, 0});
}

std::vector<ParamSpec> encoder_specs(const ArchitectureDescriptor& a, std::size_t out_dim) {
  std::vector<ParamSpec> p;
  const std::size_t c = a.input.channels;
  if (a.preset == "lenet5-small") {
    const auto [c1, c2] = a.conv_channels;
    p.push_back({"conv1.w", {5, 5, c, c1}, 25 * c});
    p.push_back({"conv1.b", {c1}, 0});
    p.push_back({"conv2.w", {5, 5, c1, c2}, 25 * c1});
    p.push_back({"conv2.b", {c2}, 0});
    dense(p, "fc1", (a.input.height / 4) * (a.input.width / 4) * c2, a.fc_hidden);
    dense(p, "fc2", a.fc_hidden, out_dim);
  } else {
    dense(p, "fc1", a.input.numel(), a.mlp_hidden);
    dense(p, "fc2", a.mlp_hidden, out_dim);
  }
  return p;
}

}  // namespace

const char* net_name(NetId id) { return kNames.at(index_of(id)); }

NetId net_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kNetCount; ++i) {
    if (name == kNames[i]) return static_cast<NetId>(i);
  }
  throw DataError("unknown network '" + name + "'");
}

void validate(const ArchitectureDescriptor& a) {
  if (a.preset != "lenet5-small" && a.preset != "mlp") {
    throw ConfigError("architecture: unknown preset '" + a.preset +
                      "' (expected lenet5-small or mlp)");
  }
  if (a.input.numel() == 0) throw ConfigError("architecture: input shape must be non-empty");
  if (a.num_classes < 2) throw ConfigError("architecture: num_classes must be at least 2");
  if (a.d_c == 0 || a.d_d == 0) throw ConfigError("architecture: d_c and d_d must be positive");
  if (a.head_hidden == 0 || a.decoder_hidden == 0 || a.critic_hidden == 0) {
    throw ConfigError("architecture: hidden widths must be positive");
  }
  if (a.preset == "lenet5-small") {
    if (a.input.height % 4 != 0 || a.input.width % 4 != 0 || a.input.height < 8 || a.input.width < 8) {
      throw ConfigError("architecture: lenet5-small needs input height and width divisible by 4");
    }
    if (a.conv_channels[0] == 0 || a.conv_channels[1] == 0 || a.fc_hidden == 0) {
      throw ConfigError("architecture: conv and fc widths must be positive");
    }
  } else if (a.mlp_hidden == 0) {
    throw ConfigError("architecture: mlp_hidden must be positive");
  }
}

std::vector<ParamSpec> param_specs(const ArchitectureDescriptor& a, NetId id) {
  std::vector<ParamSpec> p;
  switch (id) {
    case NetId::class_encoder: return encoder_specs(a, a.d_c);
    case NetId::domain_encoder: return encoder_specs(a, a.d_d);
    case NetId::classifier: dense(p, "fc", a.d_c, a.num_classes); break;
    case NetId::discriminator:
      dense(p, "fc1", a.d_d, a.head_hidden);
      dense(p, "fc2", a.head_hidden, a.num_classes);
      break;
    case NetId::indicator:
      dense(p, "fc1", a.d_d, a.head_hidden);
      dense(p, "fc2", a.head_hidden, a.d_c);
      break;
    case NetId::decoder:
      dense(p, "fc1", a.d_c + a.d_d, a.decoder_hidden);
      dense(p, "fc2", a.decoder_hidden, a.input.numel());
      break;
    case NetId::cosine_head: p.push_back({"w", {a.num_classes, a.d_c}, a.d_c}); break;
    case NetId::domain_critic:
      dense(p, "fc1", a.d_c, a.critic_hidden);
      dense(p, "fc2", a.critic_hidden, a.critic_hidden);
      dense(p, "fc3", a.critic_hidden, 1);
      break;
  }
  return p;
}

void to_json(nlohmann::json& j, const ArchitectureDescriptor& a) {
  j = {{"preset", a.preset},
       {"input", {a.input.height, a.input.width, a.input.channels}},
       {"num_classes", a.num_classes},
       {"d_c", a.d_c},
       {"d_d", a.d_d},
       {"conv_channels", a.conv_channels},
       {"fc_hidden", a.fc_hidden},
       {"mlp_hidden", a.mlp_hidden},
       {"head_hidden", a.head_hidden},
       {"decoder_hidden", a.decoder_hidden},
       {"critic_hidden", a.critic_hidden}};
}

void from_json(const nlohmann::json& j, ArchitectureDescriptor& a) {
  static const std::set<std::string> keys{"preset",    "input",      "num_classes", "d_c",
                                          "d_d",       "conv_channels", "fc_hidden", "mlp_hidden",
                                          "head_hidden", "decoder_hidden", "critic_hidden"};
  if (!j.is_object()) throw ConfigError("architecture: expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw ConfigError("architecture: unknown key '" + key + "'");
  }
  try {
    a = ArchitectureDescriptor{};
    a.preset = j.value("preset", a.preset);
    if (j.contains("input")) {
      const auto in = j.at("input").get<std::vector<std::size_t>>();
      if (in.size() != 3) throw ConfigError("architecture: input must be [height, width, channels]");
      a.input = {in[0], in[1], in[2]};
    }
    a.num_classes = j.value("num_classes", a.num_classes);
    a.d_c = j.value("d_c", a.d_c);
    a.d_d = j.value("d_d", a.d_d);
    a.conv_channels = j.value("conv_channels", a.conv_channels);
    a.fc_hidden = j.value("fc_hidden", a.fc_hidden);
    a.mlp_hidden = j.value("mlp_hidden", a.mlp_hidden);
    a.head_hidden = j.value("head_hidden", a.head_hidden);
    a.decoder_hidden = j.value("decoder_hidden", a.decoder_hidden);
    a.critic_hidden = j.value("critic_hidden", a.critic_hidden);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("architecture: ") + e.what());
  }
  validate(a);
}

}  // namespace ocda::models
