#include "ocda/data/glyphs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "ocda/error.hpp"
#include "ocda/numerics/random.hpp"

namespace ocda::data {

namespace {

struct Point {
  float x, y;
};
using Stroke = std::vector<Point>;
using Glyph = std::vector<Stroke>;

Stroke ellipse(float cx, float cy, float rx, float ry, int pieces = 14) {
  Stroke s;
  for (int i = 0; i <= pieces; ++i) {
    const float t = 6.2831853f * static_cast<float>(i) / static_cast<float>(pieces);
    s.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
  }
  return s;
}

// Two hand-drawn variants per digit in a unit box, x right and y down.
const std::array<std::array<Glyph, 2>, 10>& templates() {
  static const std::array<std::array<Glyph, 2>, 10> t = [] {
    std::array<std::array<Glyph, 2>, 10> g;
    g[0] = {Glyph{ellipse(0.5f, 0.5f, 0.25f, 0.38f)},
            Glyph{ellipse(0.5f, 0.5f, 0.3f, 0.36f),
                  Stroke{{0.68f, 0.2f}, {0.32f, 0.8f}}}};
    g[1] = {Glyph{Stroke{{0.35f, 0.25f}, {0.52f, 0.1f}, {0.52f, 0.9f}}},
            Glyph{Stroke{{0.5f, 0.1f}, {0.47f, 0.9f}},
                  Stroke{{0.32f, 0.9f}, {0.66f, 0.9f}}}};
    g[2] = {Glyph{Stroke{{0.22f, 0.3f}, {0.32f, 0.13f}, {0.5f, 0.08f}, {0.7f, 0.13f},
                         {0.77f, 0.3f}, {0.68f, 0.47f}, {0.22f, 0.9f}, {0.8f, 0.9f}}},
            Glyph{Stroke{{0.2f, 0.22f}, {0.45f, 0.1f}, {0.72f, 0.18f}, {0.72f, 0.38f},
                         {0.45f, 0.62f}, {0.25f, 0.86f}, {0.45f, 0.8f}, {0.8f, 0.86f}}}};
    g[3] = {Glyph{Stroke{{0.22f, 0.16f}, {0.5f, 0.08f}, {0.74f, 0.2f}, {0.7f, 0.4f},
                         {0.45f, 0.5f}, {0.7f, 0.6f}, {0.78f, 0.78f}, {0.52f, 0.92f},
                         {0.2f, 0.84f}}},
            Glyph{Stroke{{0.22f, 0.1f}, {0.76f, 0.1f}, {0.45f, 0.45f}, {0.72f, 0.55f},
                         {0.76f, 0.76f}, {0.52f, 0.92f}, {0.22f, 0.85f}}}};
    g[4] = {Glyph{Stroke{{0.66f, 0.9f}, {0.66f, 0.1f}, {0.15f, 0.64f}, {0.85f, 0.64f}}},
            Glyph{Stroke{{0.28f, 0.1f}, {0.22f, 0.55f}, {0.82f, 0.55f}},
                  Stroke{{0.66f, 0.2f}, {0.64f, 0.92f}}}};
    g[5] = {Glyph{Stroke{{0.75f, 0.1f}, {0.3f, 0.1f}, {0.26f, 0.45f}, {0.5f, 0.4f},
                         {0.72f, 0.5f}, {0.76f, 0.72f}, {0.55f, 0.9f}, {0.22f, 0.85f}}},
            Glyph{Stroke{{0.3f, 0.1f}, {0.28f, 0.48f}, {0.55f, 0.44f}, {0.74f, 0.6f},
                         {0.66f, 0.86f}, {0.4f, 0.92f}, {0.22f, 0.8f}},
                  Stroke{{0.3f, 0.1f}, {0.76f, 0.12f}}}};
    g[6] = {Glyph{Stroke{{0.7f, 0.12f}, {0.45f, 0.16f}, {0.29f, 0.4f}, {0.25f, 0.7f},
                         {0.4f, 0.9f}, {0.62f, 0.88f}, {0.74f, 0.7f}, {0.62f, 0.53f},
                         {0.4f, 0.53f}, {0.27f, 0.65f}}},
            Glyph{Stroke{{0.62f, 0.08f}, {0.3f, 0.55f}},
                  ellipse(0.5f, 0.7f, 0.22f, 0.2f)}};
    g[7] = {Glyph{Stroke{{0.2f, 0.1f}, {0.8f, 0.1f}, {0.4f, 0.9f}}},
            Glyph{Stroke{{0.22f, 0.18f}, {0.25f, 0.1f}, {0.78f, 0.1f}, {0.5f, 0.9f}},
                  Stroke{{0.38f, 0.5f}, {0.76f, 0.5f}}}};
    g[8] = {Glyph{ellipse(0.5f, 0.29f, 0.18f, 0.19f), ellipse(0.5f, 0.7f, 0.23f, 0.21f)},
            Glyph{Stroke{{0.68f, 0.2f}, {0.5f, 0.08f}, {0.3f, 0.2f}, {0.36f, 0.4f},
                         {0.66f, 0.6f}, {0.72f, 0.8f}, {0.5f, 0.92f}, {0.28f, 0.8f},
                         {0.34f, 0.6f}, {0.64f, 0.4f}, {0.68f, 0.2f}}}};
    g[9] = {Glyph{ellipse(0.48f, 0.32f, 0.21f, 0.2f),
                  Stroke{{0.69f, 0.34f}, {0.6f, 0.9f}}},
            Glyph{ellipse(0.5f, 0.3f, 0.2f, 0.18f),
                  Stroke{{0.7f, 0.3f}, {0.7f, 0.7f}, {0.55f, 0.9f}, {0.32f, 0.84f}}}};
    return g;
  }();
  return t;
}

float segment_distance(float px, float py, Point a, Point b) {
  const float dx = b.x - a.x, dy = b.y - a.y;
  const float len2 = dx * dx + dy * dy;
  float t = len2 > 0.0f ? ((px - a.x) * dx + (py - a.y) * dy) / len2 : 0.0f;
  t = std::clamp(t, 0.0f, 1.0f);
  const float ex = a.x + t * dx - px, ey = a.y + t * dy - py;
  return std::sqrt(ex * ex + ey * ey);
}

void render_one(const Glyph& glyph, Rng& rng, std::size_t size, std::span<float> out) {
  const float n = static_cast<float>(size);
  const float angle = uniform(rng, -0.26f, 0.26f);
  const float shear = uniform(rng, -0.25f, 0.25f);
  const float sx = uniform(rng, 0.55f, 0.75f) * n;
  const float sy = uniform(rng, 0.62f, 0.78f) * n;
  const float tx = 0.5f * n + uniform(rng, -0.06f, 0.06f) * n;
  const float ty = 0.5f * n + uniform(rng, -0.05f, 0.05f) * n;
  const float width = uniform(rng, 0.045f, 0.085f) * n;
  const float ca = std::cos(angle), sa = std::sin(angle);

  std::vector<std::pair<Point, Point>> segments;
  for (const Stroke& stroke : glyph) {
    Stroke warped;
    for (Point p : stroke) {
      const float u = p.x - 0.5f + uniform(rng, -0.03f, 0.03f);
      const float v = p.y - 0.5f + uniform(rng, -0.03f, 0.03f);
      const float x = (u + shear * v) * sx, y = v * sy;
      warped.push_back({tx + ca * x - sa * y, ty + sa * x + ca * y});
    }
    for (std::size_t i = 1; i < warped.size(); ++i) segments.emplace_back(warped[i - 1], warped[i]);
  }
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const float px = static_cast<float>(c) + 0.5f, py = static_cast<float>(r) + 0.5f;
      float d = 1e9f;
      for (const auto& [a, b] : segments) d = std::min(d, segment_distance(px, py, a, b));
      out[r * size + c] = std::clamp(0.5f * width + 0.5f - d, 0.0f, 1.0f);
    }
  }
}

}  // namespace

LabeledSplit render_digits(std::size_t count, std::uint64_t seed, std::size_t size) {
  if (size < 8) throw DataError("render_digits: image size must be at least 8");
  LabeledSplit split;
  split.num_classes = 10;
  split.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) split.labels[i] = static_cast<int>(i % 10);
  Rng order(seed);
  shuffle(std::span<int>(split.labels), order);

  std::vector<float> pixels(count * size * size, 0.0f);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, i));
    const auto& variants = templates()[static_cast<std::size_t>(split.labels[i])];
    const Glyph& glyph = variants[uniform_index(rng, variants.size())];
    render_one(glyph, rng, size, std::span<float>(pixels).subspan(i * size * size, size * size));
  }
  split.images = ImageSet({size, size, 1}, std::move(pixels));
  return split;
}

}  // namespace ocda::data
