#include "ocda/models/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "ocda/error.hpp"
#include "ocda/io.hpp"

namespace ocda::models {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written in native little-endian order");

namespace {

template <class T>
void put(std::vector<char>& out, T v) {
  const char* p = reinterpret_cast<const char*>(&v);
  out.insert(out.end(), p, p + sizeof v);
}

template <class T>
T get(const std::vector<char>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw DataError("checkpoint: truncated file");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof v);
  pos += sizeof v;
  return v;
}

}  // namespace

const Tensor* Checkpoint::extra(const std::string& name) const {
  for (const auto& [key, t] : extras) {
    if (key == name) return &t;
  }
  return nullptr;
}

std::vector<char> encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json dir = nlohmann::json::array();
  std::vector<const Tensor*> payloads;
  std::size_t offset = 0;
  auto add = [&](const std::string& name, const Tensor& t) {
    dir.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    payloads.push_back(&t);
    offset += t.numel() * sizeof(float);
  };
  for (std::size_t n = 0; n < kNetCount; ++n) {
    const NetParams& net = ckpt.bundle.nets[n];
    for (std::size_t i = 0; i < net.size(); ++i) {
      add(std::string(net_name(static_cast<NetId>(n))) + "/" + net.names[i], net.tensors[i]);
    }
  }
  for (const auto& [name, t] : ckpt.extras) add("extra/" + name, t);

  const nlohmann::json header = {{"descriptor", ckpt.bundle.arch},
                                 {"meta", ckpt.meta},
                                 {"tensors", dir},
                                 {"payload_bytes", offset}};
  const std::string text = header.dump();
  std::vector<char> out(kCheckpointMagic, kCheckpointMagic + 8);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const Tensor* t : payloads) {
    const char* p = reinterpret_cast<const char*>(t->data().data());
    out.insert(out.end(), p, p + t->numel() * sizeof(float));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<char>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw DataError("checkpoint: bad magic (not an OCDACKPT file)");
  }
  std::size_t pos = 8;
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = get<std::uint64_t>(bytes, pos);
  if (pos + header_len > bytes.size()) throw DataError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + static_cast<long>(pos),
                                   bytes.begin() + static_cast<long>(pos + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed header: ") + e.what());
  }
  pos += header_len;
  const std::size_t payload_start = pos;

  Checkpoint ckpt;
  try {
    ckpt.bundle.arch = header.at("descriptor").get<ArchitectureDescriptor>();
    ckpt.meta = header.at("meta");
    for (const auto& entry : header.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<numerics::Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const std::size_t bytes_needed = numerics::numel(shape) * sizeof(float);
      if (payload_start + offset + bytes_needed > bytes.size()) {
        throw DataError("checkpoint: payload of '" + name + "' is truncated");
      }
      std::vector<float> values(numerics::numel(shape));
      std::memcpy(values.data(), bytes.data() + payload_start + offset, bytes_needed);
      Tensor t(shape, std::move(values));
      const auto slash = name.find('/');
      if (slash == std::string::npos) throw DataError("checkpoint: bad tensor name '" + name + "'");
      const std::string group = name.substr(0, slash), leaf = name.substr(slash + 1);
      if (group == "extra") {
        ckpt.extras.emplace_back(leaf, std::move(t));
      } else {
        NetParams& net = ckpt.bundle.net(net_from_name(group));
        net.names.push_back(leaf);
        net.tensors.push_back(std::move(t));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed header: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  for (std::size_t n = 0; n < kNetCount; ++n) {
    const auto specs = param_specs(ckpt.bundle.arch, static_cast<NetId>(n));
    const NetParams& net = ckpt.bundle.nets[n];
    bool ok = specs.size() == net.size();
    for (std::size_t i = 0; ok && i < specs.size(); ++i) {
      ok = specs[i].name == net.names[i] && specs[i].shape == net.tensors[i].shape();
    }
    if (!ok) {
      throw DataError(std::string("checkpoint: parameters of ") + net_name(static_cast<NetId>(n)) +
                      " do not match the descriptor");
    }
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  io::write_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  return decode_checkpoint(std::vector<char>(text.begin(), text.end()));
}

}  // namespace ocda::models
