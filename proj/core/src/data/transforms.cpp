#include "ocda/data/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "ocda/error.hpp"
#include "ocda/numerics/random.hpp"

namespace ocda::data {

namespace {

constexpr float kTwoPi = 6.2831853f;

void clamp01(std::span<float> px) {
  for (float& v : px) v = std::clamp(v, 0.0f, 1.0f);
}

void color_shift(const ColorShift& op, const ImageShape& s, Rng& rng, std::span<float> px) {
  const std::size_t c = s.channels;
  std::array<float, 3> scale = op.scale, shift = op.shift;
  for (std::size_t k = 0; k < 3; ++k) {
    scale[k] += op.jitter * uniform(rng, -1.0f, 1.0f);
    shift[k] += 0.5f * op.jitter * uniform(rng, -1.0f, 1.0f);
  }
  float m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  if (c == 3 && op.hue != 0.0f) {
    const float th = op.hue * kTwoPi / 360.0f;
    const float a = std::cos(th), b = (1.0f - a) / 3.0f, d = std::sin(th) / std::sqrt(3.0f);
    const float rot[3][3] = {{a + b, b - d, b + d}, {b + d, a + b, b - d}, {b - d, b + d, a + b}};
    std::copy(&rot[0][0], &rot[0][0] + 9, &m[0][0]);
  }
  for (std::size_t p = 0; p < px.size(); p += c) {
    float in[3] = {px[p], c == 3 ? px[p + 1] : 0.0f, c == 3 ? px[p + 2] : 0.0f};
    for (std::size_t k = 0; k < c && k < 3; ++k) {
      float v = c == 3 ? m[k][0] * in[0] + m[k][1] * in[1] + m[k][2] * in[2] : in[0];
      px[p + k] = v * scale[k] + shift[k];
    }
  }
}

void background_texture(const BackgroundTexture& op, const ImageShape& s, Rng& rng,
                        std::span<float> px) {
  const std::size_t h = s.height, w = s.width, c = s.channels;
  std::array<float, 3> tint{};
  for (float& t : tint) t = uniform(rng, 0.2f, 1.0f);
  std::vector<float> tex(h * w, 0.0f);
  switch (op.pattern) {
    case 0: {  // stripes
      const float theta = uniform(rng, 0.0f, kTwoPi);
      const float period = uniform(rng, 3.0f, 8.0f);
      const float phase = uniform(rng, 0.0f, kTwoPi);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const float u = static_cast<float>(x) * std::cos(theta) + static_cast<float>(y) * std::sin(theta);
          tex[y * w + x] = 0.5f + 0.5f * std::sin(kTwoPi * u / period + phase);
        }
      break;
    }
    case 1: {  // checker
      const std::size_t cell = 2 + uniform_index(rng, 5);
      const std::size_t ox = uniform_index(rng, cell), oy = uniform_index(rng, cell);
      const float lo = uniform(rng, 0.0f, 0.4f), hi = uniform(rng, 0.6f, 1.0f);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          tex[y * w + x] = (((x + ox) / cell + (y + oy) / cell) & 1) ? hi : lo;
      break;
    }
    case 2: {  // plasma: sum of random plane waves
      float fx[3], fy[3], ph[3];
      for (int k = 0; k < 3; ++k) {
        fx[k] = uniform(rng, -0.5f, 0.5f);
        fy[k] = uniform(rng, -0.5f, 0.5f);
        ph[k] = uniform(rng, 0.0f, kTwoPi);
      }
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          float v = 0.0f;
          for (int k = 0; k < 3; ++k)
            v += std::sin(fx[k] * static_cast<float>(x) + fy[k] * static_cast<float>(y) + ph[k]);
          tex[y * w + x] = 0.5f + v / 6.0f;
        }
      break;
    }
    case 3: {  // gaussian blobs
      const std::size_t blobs = 3 + uniform_index(rng, 4);
      for (std::size_t b = 0; b < blobs; ++b) {
        const float cx = uniform(rng, 0.0f, static_cast<float>(w));
        const float cy = uniform(rng, 0.0f, static_cast<float>(h));
        const float r = uniform(rng, 2.0f, 0.3f * static_cast<float>(std::max(h, w)));
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) {
            const float dx = static_cast<float>(x) - cx, dy = static_cast<float>(y) - cy;
            tex[y * w + x] += std::exp(-(dx * dx + dy * dy) / (2.0f * r * r));
          }
      }
      for (float& v : tex) v = std::min(v, 1.0f);
      break;
    }
    default:
      throw DataError("background-texture: unknown pattern id " + std::to_string(op.pattern));
  }
  for (std::size_t p = 0; p < h * w; ++p)
    for (std::size_t k = 0; k < c; ++k) {
      const float t = tex[p] * tint[k % 3];
      float& v = px[p * c + k];
      v = (1.0f - op.alpha) * v + op.alpha * std::fabs(v - t);
    }
}

struct Applier {
  const ImageShape& shape;
  Rng& rng;
  std::span<float> px;

  void operator()(const ColorShift& op) const { color_shift(op, shape, rng, px); }
  void operator()(const BackgroundTexture& op) const { background_texture(op, shape, rng, px); }
  void operator()(const AdditiveNoise& op) const {
    for (float& v : px) v += op.sigma * normal(rng);
  }
  void operator()(const Invert&) const {
    for (float& v : px) v = 1.0f - v;
  }
  void operator()(const Contrast& op) const {
    for (float& v : px) v = 0.5f + op.gamma * (v - 0.5f);
  }
};

}  // namespace

void apply_transform(const DomainTransformSpec& spec, std::span<const float> image,
                     const ImageShape& shape, std::uint64_t stream, std::span<float> out) {
  if (image.size() != shape.numel() || out.size() != shape.numel()) {
    throw DataError("apply_transform: image does not match shape " + to_string(shape));
  }
  std::copy(image.begin(), image.end(), out.begin());
  Rng rng(mix_seed(spec.seed, stream));
  for (const TransformOp& op : spec.ops) {
    std::visit(Applier{shape, rng, out}, op);
    clamp01(out);
  }
  clamp01(out);
}

std::vector<float> apply_transform(const DomainTransformSpec& spec, std::span<const float> image,
                                   const ImageShape& shape, std::uint64_t stream) {
  std::vector<float> out(image.size());
  apply_transform(spec, image, shape, stream, out);
  return out;
}

ImageSet letterbox(const ImageSet& images, const ImageShape& target) {
  const ImageShape& src = images.shape();
  if (target.numel() == 0) throw DataError("letterbox: empty target shape");
  if (!(src.channels == target.channels || src.channels == 1 ||
        (src.channels == 3 && target.channels == 1))) {
    throw DataError("letterbox: cannot convert " + to_string(src) + " to " + to_string(target));
  }
  if (src == target) return images;
  const float scale = std::min(static_cast<float>(target.height) / static_cast<float>(src.height),
                               static_cast<float>(target.width) / static_cast<float>(src.width));
  const auto nh = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(src.height * scale)));
  const auto nw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(src.width * scale)));
  const std::size_t oy = (target.height - nh) / 2, ox = (target.width - nw) / 2;

  ImageSet out(target);
  std::vector<float> dst(target.numel());
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto img = images.image(i);
    std::fill(dst.begin(), dst.end(), 0.0f);
    auto sample = [&](std::size_t ch, float y, float x) {
      // Source channel ch, or the channel mean when collapsing to gray.
      auto at = [&](std::size_t r, std::size_t c) {
        if (src.channels == 3 && target.channels == 1) {
          const float* p = &img[(r * src.width + c) * 3];
          return (p[0] + p[1] + p[2]) / 3.0f;
        }
        return img[(r * src.width + c) * src.channels + (src.channels == 1 ? 0 : ch)];
      };
      const float fy = std::clamp(y, 0.0f, static_cast<float>(src.height - 1));
      const float fx = std::clamp(x, 0.0f, static_cast<float>(src.width - 1));
      const auto y0 = static_cast<std::size_t>(fy), x0 = static_cast<std::size_t>(fx);
      const std::size_t y1 = std::min(y0 + 1, src.height - 1), x1 = std::min(x0 + 1, src.width - 1);
      const float wy = fy - static_cast<float>(y0), wx = fx - static_cast<float>(x0);
      return (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x1)) +
             wy * ((1 - wx) * at(y1, x0) + wx * at(y1, x1));
    };
    for (std::size_t r = 0; r < nh; ++r) {
      const float y = (static_cast<float>(r) + 0.5f) / scale - 0.5f;
      for (std::size_t c = 0; c < nw; ++c) {
        const float x = (static_cast<float>(c) + 0.5f) / scale - 0.5f;
        for (std::size_t k = 0; k < target.channels; ++k) {
          dst[((r + oy) * target.width + c + ox) * target.channels + k] =
              std::clamp(sample(k, y, x), 0.0f, 1.0f);
        }
      }
    }
    out.push_back(dst);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(what + ": unknown key '" + key + "'");
  }
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

void to_json(nlohmann::json& j, const DomainTransformSpec& spec) {
  nlohmann::json ops = nlohmann::json::array();
  for (const TransformOp& op : spec.ops) {
    nlohmann::json o;
    if (auto* c = std::get_if<ColorShift>(&op)) {
      o = {{"op", "color-shift"}, {"hue", c->hue}, {"scale", c->scale}, {"shift", c->shift},
           {"jitter", c->jitter}};
    } else if (auto* t = std::get_if<BackgroundTexture>(&op)) {
      o = {{"op", "background-texture"}, {"pattern", t->pattern}, {"alpha", t->alpha}};
    } else if (auto* n = std::get_if<AdditiveNoise>(&op)) {
      o = {{"op", "additive-noise"}, {"sigma", n->sigma}};
    } else if (std::holds_alternative<Invert>(op)) {
      o = {{"op", "invert"}};
    } else if (auto* k = std::get_if<Contrast>(&op)) {
      o = {{"op", "contrast"}, {"gamma", k->gamma}};
    }
    ops.push_back(std::move(o));
  }
  j = {{"name", spec.name}, {"seed", spec.seed}, {"ops", std::move(ops)}};
}

void from_json(const nlohmann::json& j, DomainTransformSpec& spec) {
  check_keys(j, {"name", "seed", "ops"}, "transform spec");
  try {
    spec.name = j.at("name").get<std::string>();
    spec.seed = get_or<std::uint64_t>(j, "seed", 0);
    spec.ops.clear();
    for (const auto& o : get_or(j, "ops", nlohmann::json::array())) {
      const auto kind = o.at("op").get<std::string>();
      const std::string what = "transform '" + spec.name + "' op " + kind;
      if (kind == "color-shift") {
        check_keys(o, {"op", "hue", "scale", "shift", "jitter"}, what);
        ColorShift c;
        c.hue = get_or(o, "hue", c.hue);
        c.scale = get_or(o, "scale", c.scale);
        c.shift = get_or(o, "shift", c.shift);
        c.jitter = get_or(o, "jitter", c.jitter);
        spec.ops.emplace_back(c);
      } else if (kind == "background-texture") {
        check_keys(o, {"op", "pattern", "alpha"}, what);
        BackgroundTexture t;
        t.pattern = get_or(o, "pattern", t.pattern);
        t.alpha = get_or(o, "alpha", t.alpha);
        if (t.pattern < 0 || t.pattern > 3) throw ConfigError(what + ": pattern must be 0-3");
        if (t.alpha < 0.0f || t.alpha > 1.0f) throw ConfigError(what + ": alpha must be in [0, 1]");
        spec.ops.emplace_back(t);
      } else if (kind == "additive-noise") {
        check_keys(o, {"op", "sigma"}, what);
        AdditiveNoise n{o.at("sigma").get<float>()};
        if (n.sigma < 0.0f) throw ConfigError(what + ": sigma must be non-negative");
        spec.ops.emplace_back(n);
      } else if (kind == "invert") {
        check_keys(o, {"op"}, what);
        spec.ops.emplace_back(Invert{});
      } else if (kind == "contrast") {
        check_keys(o, {"op", "gamma"}, what);
        spec.ops.emplace_back(Contrast{o.at("gamma").get<float>()});
      } else {
        throw ConfigError("transform '" + spec.name + "': unknown op '" + kind + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("transform spec: ") + e.what());
  }
}

}  // namespace ocda::data
