#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "ocda/data/glyphs.hpp"
#include "ocda/data/idx.hpp"
#include "ocda/data/manifest.hpp"
#include "ocda/data/split.hpp"
#include "ocda/data/synthesize.hpp"
#include "ocda/data/transforms.hpp"
#include "ocda/error.hpp"
#include "ocda/numerics/random.hpp"

using namespace ocda;
using namespace ocda::data;

namespace {

std::vector<std::uint8_t> be32(std::uint32_t v) {
  return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
          static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
}

// Hand-assembled IDX files, independent of the encoder under test.
std::vector<std::uint8_t> image_fixture(std::uint32_t magic, std::uint32_t count,
                                        std::uint32_t rows, std::uint32_t cols,
                                        std::size_t payload) {
  std::vector<std::uint8_t> out;
  for (std::uint32_t v : {magic, count, rows, cols}) {
    auto b = be32(v);
    out.insert(out.end(), b.begin(), b.end());
  }
  for (std::size_t i = 0; i < payload; ++i) out.push_back(static_cast<std::uint8_t>((i * 37) % 256));
  return out;
}

std::vector<std::uint8_t> label_fixture(std::uint32_t count) {
  std::vector<std::uint8_t> out = be32(0x00000801);
  auto b = be32(count);
  out.insert(out.end(), b.begin(), b.end());
  for (std::uint32_t i = 0; i < count; ++i) out.push_back(static_cast<std::uint8_t>(i % 10));
  return out;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ocda_test_data_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

LabeledSplit with_counts(const std::vector<std::size_t>& counts) {
  LabeledSplit s;
  s.num_classes = counts.size();
  s.images = ImageSet({2, 2, 1});
  float tag = 0.0f;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    for (std::size_t i = 0; i < counts[k]; ++i) {
      tag += 0.001f;
      std::vector<float> img(4, tag);
      s.images.push_back(img);
      s.labels.push_back(static_cast<int>(k));
    }
  }
  return s;
}

DomainTransformSpec spec_of(std::string name, std::vector<TransformOp> ops, std::uint64_t seed = 1) {
  return {std::move(name), std::move(ops), seed};
}

std::vector<DomainTransformSpec> three_specs() {
  return {spec_of("tint", {ColorShift{40.0f, {0.9f, 0.7f, 0.5f}, {0.05f, 0.1f, 0.2f}, 0.1f}}, 11),
          spec_of("texture", {BackgroundTexture{0, 0.5f}}, 12),
          spec_of("severe", {BackgroundTexture{2, 0.7f}, AdditiveNoise{0.1f}, Contrast{0.6f}}, 13)};
}

LabeledSplit rgb_digits(std::size_t count, std::uint64_t seed) {
  LabeledSplit s = render_digits(count, seed, 28);
  s.images = letterbox(s.images, {32, 32, 3});
  return s;
}

}  // namespace

TEST_CASE("idx fixture of four 28x28 images parses") {
  const auto images = image_fixture(0x00000803, 4, 28, 28, 3136);
  const auto labels = label_fixture(4);
  LabeledSplit split = parse_idx(images, labels);
  CHECK(split.size() == 4);
  CHECK(split.images.shape() == ImageShape{28, 28, 1});
  CHECK(split.labels == std::vector<int>{0, 1, 2, 3});
  for (std::size_t i = 0; i < 3136; ++i) {
    CHECK(split.images.pixels()[i] == static_cast<float>(images[16 + i]) / 255.0f);
  }
}

TEST_CASE("idx pixel bytes scale to the unit interval endpoints") {
  auto images = image_fixture(0x00000803, 1, 1, 2, 0);
  images.push_back(0);
  images.push_back(255);
  LabeledSplit split = parse_idx(images, label_fixture(1));
  CHECK(split.images.pixels()[0] == 0.0f);
  CHECK(split.images.pixels()[1] == 1.0f);
}

TEST_CASE("idx format errors") {
  const auto labels = label_fixture(4);
  SUBCASE("labels magic passed as images") {
    const auto wrong = image_fixture(0x00000801, 4, 28, 28, 3136);
    CHECK_THROWS_WITH_AS(parse_idx(wrong, labels),
                         doctest::Contains("expected 0x00000803, found 0x00000801"), DataError);
  }
  SUBCASE("truncated payload") {
    const auto shortfile = image_fixture(0x00000803, 4, 28, 28, 3000);
    CHECK_THROWS_WITH_AS(parse_idx(shortfile, labels), doctest::Contains("truncated"), DataError);
  }
  SUBCASE("count mismatch") {
    const auto images = image_fixture(0x00000803, 4, 28, 28, 3136);
    CHECK_THROWS_WITH_AS(parse_idx(images, label_fixture(3)), doctest::Contains("does not match"),
                         DataError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_idx("/nonexistent/images", "/nonexistent/labels"), DataError);
  }
}

TEST_CASE("idx write and load round-trip pixel-exactly") {
  const auto dir = scratch_dir("roundtrip");
  LabeledSplit split = parse_idx(image_fixture(0x00000803, 4, 28, 28, 3136), label_fixture(4));
  write_idx(split, dir / "img.idx", dir / "lbl.idx");
  LabeledSplit back = load_idx(dir / "img.idx", dir / "lbl.idx");
  CHECK(back.images.pixels() == split.images.pixels());
  CHECK(back.labels == split.labels);
  CHECK(back.images.shape() == split.images.shape());
  std::filesystem::remove_all(dir);
}

TEST_CASE("rendered digits are balanced, in range and deterministic") {
  LabeledSplit a = render_digits(200, 5);
  LabeledSplit b = render_digits(200, 5);
  CHECK(a.images.pixels() == b.images.pixels());
  CHECK(a.labels == b.labels);
  for (std::size_t c : a.class_counts()) CHECK(c == 20);
  a.validate("digits");
  // Each digit has visible ink and a dark border region.
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto img = a.images.image(i);
    const float ink = std::accumulate(img.begin(), img.end(), 0.0f);
    CHECK(ink > 20.0f);
    CHECK(img[0] == 0.0f);
  }
  CHECK(render_digits(50, 6).images.pixels() != render_digits(50, 5).images.pixels());
}

TEST_CASE("transform outputs stay in [0, 1] on 1000 random spec/image pairs") {
  const LabeledSplit base = rgb_digits(50, 9);
  Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    DomainTransformSpec spec;
    spec.seed = rng();
    const std::size_t nops = 1 + uniform_index(rng, 4);
    for (std::size_t k = 0; k < nops; ++k) {
      switch (uniform_index(rng, 5)) {
        case 0:
          spec.ops.emplace_back(ColorShift{uniform(rng, -180.0f, 180.0f),
                                           {uniform(rng, 0.0f, 3.0f), uniform(rng, 0.0f, 3.0f),
                                            uniform(rng, 0.0f, 3.0f)},
                                           {uniform(rng, -1.0f, 1.0f), uniform(rng, -1.0f, 1.0f),
                                            uniform(rng, -1.0f, 1.0f)},
                                           uniform(rng, 0.0f, 1.0f)});
          break;
        case 1:
          spec.ops.emplace_back(BackgroundTexture{static_cast<int>(uniform_index(rng, 4)),
                                                  uniform01(rng)});
          break;
        case 2: spec.ops.emplace_back(AdditiveNoise{uniform(rng, 0.0f, 2.0f)}); break;
        case 3: spec.ops.emplace_back(Invert{}); break;
        default: spec.ops.emplace_back(Contrast{uniform(rng, -3.0f, 5.0f)}); break;
      }
    }
    const std::size_t i = uniform_index(rng, base.size());
    const auto out = apply_transform(spec, base.images.image(i), base.images.shape(), trial);
    const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
    REQUIRE(*lo >= 0.0f);
    REQUIRE(*hi <= 1.0f);
    if (trial % 100 == 0) {
      CHECK(apply_transform(spec, base.images.image(i), base.images.shape(), trial) == out);
    }
  }
}

TEST_CASE("transform ops match their closed forms") {
  const ImageShape shape{1, 2, 3};
  const std::vector<float> img{0.1f, 0.4f, 0.9f, 0.0f, 0.5f, 1.0f};
  auto run = [&](TransformOp op) { return apply_transform(spec_of("t", {op}), img, shape, 0); };
  auto inverted = run(Invert{});
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(inverted[i] == doctest::Approx(1.0f - img[i]));
  auto contrast = run(Contrast{2.0f});
  CHECK(contrast[0] == 0.0f);  // 0.5 + 2 (0.1 - 0.5) clamps
  CHECK(contrast[1] == doctest::Approx(0.3f));
  CHECK(contrast[2] == 1.0f);
  auto shifted = run(ColorShift{0.0f, {0.5f, 1.0f, 2.0f}, {0.1f, 0.0f, -0.5f}, 0.0f});
  CHECK(shifted[0] == doctest::Approx(0.15f));
  CHECK(shifted[1] == doctest::Approx(0.4f));
  CHECK(shifted[2] == doctest::Approx(1.0f));
  // A full turn of hue is the identity.
  auto turned = run(ColorShift{360.0f, {1, 1, 1}, {0, 0, 0}, 0.0f});
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(turned[i] == doctest::Approx(img[i]).epsilon(1e-5));
  auto silent = run(AdditiveNoise{0.0f});
  CHECK(silent == img);
}

TEST_CASE("letterbox resizes and converts channels") {
  const LabeledSplit gray = render_digits(3, 1);
  ImageSet rgb = letterbox(gray.images, {32, 32, 3});
  CHECK(rgb.shape() == ImageShape{32, 32, 3});
  CHECK(rgb.size() == 3);
  for (std::size_t p = 0; p < 32 * 32; ++p) {
    CHECK(rgb.image(0)[p * 3] == rgb.image(0)[p * 3 + 1]);
    CHECK(rgb.image(0)[p * 3] == rgb.image(0)[p * 3 + 2]);
  }
  // Wide images are centered with black bands above and below.
  ImageSet wide({2, 4, 1}, std::vector<float>(8, 1.0f));
  ImageSet boxed = letterbox(wide, {4, 4, 1});
  const std::vector<float> expect{0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0};
  CHECK(std::vector<float>(boxed.image(0).begin(), boxed.image(0).end()) == expect);
  ImageSet back = letterbox(rgb, {32, 32, 1});
  CHECK(back.shape().channels == 1);
}

TEST_CASE("single identity spec reproduces the base split") {
  const LabeledSplit base = rgb_digits(40, 2);
  CompoundDataset ds = synthesize_compound(base, {spec_of("identity", {})}, {}, 3);
  CHECK(ds.compound.images.pixels() == base.images.pixels());
  CHECK(ds.compound.labels == base.labels);
  CHECK(std::all_of(ds.compound.domain_tags.begin(), ds.compound.domain_tags.end(),
                    [](int t) { return t == 0; }));
  CHECK(ds.source_train.images.pixels() == base.images.pixels());
}

TEST_CASE("three specs over 300 examples use every tag and are deterministic") {
  const LabeledSplit base = rgb_digits(300, 4);
  const auto specs = three_specs();
  const std::vector<DomainTransformSpec> open{spec_of("open", {Invert{}}, 21)};
  CompoundDataset a = synthesize_compound(base, specs, open, 8);
  CompoundDataset b = synthesize_compound(base, specs, open, 8);
  std::set<int> tags(a.compound.domain_tags.begin(), a.compound.domain_tags.end());
  CHECK(tags == std::set<int>{0, 1, 2});
  CHECK(a.compound.images.pixels() == b.compound.images.pixels());
  CHECK(a.compound.domain_tags == b.compound.domain_tags);
  CHECK(a.open_domains.at(0).images.pixels() == b.open_domains.at(0).images.pixels());
  CHECK(a.open_domains.at(0).domain_tags.front() == 3);
  // The source stays untransformed.
  CHECK(a.source_train.images.pixels() == base.images.pixels());
  CHECK(a.compound_by_domain().size() == 3);
  CHECK(a.compound_by_domain()[1].name == "texture");

  CompoundDataset c = synthesize_compound(base, specs, open, 9);
  CHECK(c.compound.domain_tags != a.compound.domain_tags);
}

TEST_CASE("mixing weights skew the domain assignment") {
  const LabeledSplit base = rgb_digits(300, 4);
  BasePools pools{base, base, base, base};
  CompoundDataset ds = synthesize_compound(pools, three_specs(), {}, 8, {1.0, 0.0, 3.0});
  std::map<int, int> counts;
  for (int t : ds.compound.domain_tags) ++counts[t];
  CHECK(counts[1] == 0);
  CHECK(counts[2] > 2 * counts[0]);
  CHECK_THROWS_AS(synthesize_compound(pools, three_specs(), {}, 8, {1.0}), DataError);
}

TEST_CASE("synthesize_compound rejects empty inputs") {
  const LabeledSplit base = rgb_digits(10, 4);
  CHECK_THROWS_AS(synthesize_compound(base, {}, {}, 1), DataError);
  CHECK_THROWS_AS(synthesize_compound(LabeledSplit{}, three_specs(), {}, 1), DataError);
}

TEST_CASE("target examples expose hidden tags only through the evaluation view") {
  const LabeledSplit base = rgb_digits(30, 4);
  CompoundDataset ds = synthesize_compound(base, three_specs(), {}, 8);
  LabeledExample ex = ds.compound.example(5);
  REQUIRE(ex.hidden_domain_tag.has_value());
  CHECK(*ex.hidden_domain_tag == ds.compound.domain_tags[5]);
  CHECK_FALSE(ds.source_train.example(5).hidden_domain_tag.has_value());
  CHECK(ex.image.shape() == numerics::Shape{32, 32, 3});
}

TEST_CASE("class_balance subsamples to the smallest class") {
  LabeledSplit s = with_counts({10, 5});
  LabeledSplit b = class_balance(s, 3);
  CHECK(b.class_counts() == std::vector<std::size_t>{5, 5});
  LabeledSplit again = class_balance(s, 3);
  CHECK(again.images.pixels() == b.images.pixels());

  LabeledSplit even = with_counts({4, 4, 4});
  LabeledSplit same = class_balance(even, 99);
  CHECK(same.images.pixels() == even.images.pixels());
  CHECK(same.labels == even.labels);

  CHECK_THROWS_WITH_AS(class_balance(with_counts({3, 0, 2}), 1), doctest::Contains("class(es) 1"),
                       DataError);
}

TEST_CASE("minibatches cover a permutation each epoch") {
  auto batches = minibatches(10, 4, 42, 0);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 4);
  CHECK(batches[1].size() == 4);
  CHECK(batches[2].size() == 2);
  std::vector<std::size_t> seen;
  for (const auto& batch : batches) seen.insert(seen.end(), batch.begin(), batch.end());
  std::vector<std::size_t> sorted = seen;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(minibatches(10, 4, 42, 0) == batches);
  CHECK(minibatches(10, 4, 42, 1) != batches);
  CHECK_THROWS(minibatches(10, 0, 42, 0));
  CHECK(minibatches(0, 4, 1, 0).empty());
}

TEST_CASE("manifest builds disjoint pools at the configured resolution") {
  const auto dir = scratch_dir("manifest");
  nlohmann::json j = {
      {"name", "tiny"},
      {"source", {{"synthetic", {{"count", 400}, {"seed", 3}}}}},
      {"splits", {{"source_train", 200}, {"source_test", 50}, {"compound", 100}, {"open", 30}}},
      {"specs", three_specs()},
      {"open_specs", {spec_of("open", {Invert{}}, 5)}},
      {"seed", 17},
      {"resolution", {32, 32, 3}}};
  {
    std::ofstream(dir / "m.json") << j.dump(2);
  }
  Manifest m = load_manifest(dir / "m.json");
  CHECK(m.name == "tiny");
  CHECK(m.specs.size() == 3);
  CompoundDataset ds = build_dataset(m);
  const auto counts = ds.source_train.class_counts();
  CHECK(std::all_of(counts.begin(), counts.end(), [&](std::size_t c) { return c == counts[0]; }));
  CHECK(ds.source_train.size() <= 200);
  CHECK(ds.source_train.size() >= 100);
  CHECK(ds.source_test.size() == 50);
  CHECK(ds.compound.size() == 100);
  CHECK(ds.open_domains.at(0).size() == 30);
  CHECK(ds.compound.images.shape() == ImageShape{32, 32, 3});
  CHECK(ds.num_classes == 10);

  CompoundDataset again = build_dataset(parse_manifest(manifest_json(m)));
  CHECK(again.compound.images.pixels() == ds.compound.images.pixels());

  SUBCASE("idx source paths resolve against the manifest directory") {
    write_idx(render_digits(60, 1), dir / "img.idx", dir / "lbl.idx");
    nlohmann::json k = j;
    k["source"] = {{"images", "img.idx"}, {"labels", "lbl.idx"}};
    k["splits"] = {{"source_train", 30}, {"compound", 30}};
    k.erase("open_specs");
    std::ofstream(dir / "k.json") << k.dump();
    CompoundDataset from_idx = build_dataset(load_manifest(dir / "k.json"));
    CHECK(from_idx.compound.size() == 30);
  }
  SUBCASE("schema errors") {
    nlohmann::json bad = j;
    bad["sead"] = 1;
    CHECK_THROWS_WITH_AS(parse_manifest(bad), doctest::Contains("unknown key 'sead'"), ConfigError);
    bad = j;
    bad["specs"] = nlohmann::json::array();
    CHECK_THROWS_AS(parse_manifest(bad), ConfigError);
    bad = j;
    bad["specs"][0]["ops"][0]["op"] = "blur";
    CHECK_THROWS_WITH_AS(parse_manifest(bad), doctest::Contains("unknown op 'blur'"), ConfigError);
    bad = j;
    bad["splits"]["compound"] = 1000;
    CHECK_THROWS_AS(build_dataset(parse_manifest(bad)), DataError);
  }
  std::filesystem::remove_all(dir);
}
