#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "ocda/error.hpp"
#include "ocda/harness/analysis.hpp"
#include "ocda/harness/config.hpp"
#include "ocda/harness/pipeline.hpp"
#include "ocda/io.hpp"
#include "ocda/numerics/random.hpp"

using namespace ocda;
using namespace ocda::harness;
using numerics::Shape;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("ocda_test_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) { return io::read_file(p); }

// Spearman by definition: ranks from pairwise counts, then Pearson.
double brute_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
      double less = 0, equal = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (v[j] < v[i]) ++less;
        if (j != i && v[j] == v[i]) ++equal;
      }
      r[i] = 1.0 + less + 0.5 * equal;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i] / n;
    my += ry[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Full sort of every distance, ties by index.
double brute_knn(const Tensor& f, const std::vector<int>& tags, std::size_t k) {
  const std::size_t n = f.dim(0), d = f.dim(1);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t o = 0; o < n; ++o) {
      if (o == i) continue;
      double s = 0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = double(f[i * d + j]) - double(f[o * d + j]);
        s += diff * diff;
      }
      all.push_back({s, o});
    }
    std::sort(all.begin(), all.end());
    std::size_t same = 0;
    for (std::size_t t = 0; t < k; ++t) same += tags[all[t].second] == tags[i];
    total += double(same) / double(k);
  }
  return total / double(n);
}

// Cyclic Jacobi eigendecomposition of a symmetric matrix.
void jacobi(std::vector<double> a, std::size_t n, std::vector<double>& values,
            std::vector<double>& vectors) {
  vectors.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) vectors[i * n + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a[p * n + q]) < 1e-300) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2 * a[p * n + q]);
        const double t = (theta >= 0 ? 1 : -1) / (std::fabs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = vectors[k * n + p], vkq = vectors[k * n + q];
          vectors[k * n + p] = c * vkp - s * vkq;
          vectors[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  values.resize(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = a[i * n + i];
}

// Images of shape 1x1x2: pixel 0 encodes the label, pixel 1 flags an example
// the oracle predictor gets wrong.
struct CodedSplit {
  data::ImageSet images{data::ImageShape{1, 1, 2}};
  std::vector<int> labels;
};

CodedSplit coded(std::size_t n, std::size_t wrong, int classes = 10) {
  CodedSplit s;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % static_cast<std::size_t>(classes));
    const float px[2] = {static_cast<float>(y) / 10.0f, i < wrong ? 1.0f : 0.0f};
    s.images.push_back(px);
    s.labels.push_back(y);
  }
  return s;
}

std::vector<int> oracle_predict(const Tensor& images) {
  const std::size_t n = images.dim(0);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(std::lround(images[i * 2] * 10.0f));
    out[i] = images[i * 2 + 1] > 0.5f ? (y + 1) % 10 : y;
  }
  return out;
}

// Two compound domains (80% and 60% right) and one open domain (70%).
data::CompoundDataset coded_dataset() {
  data::CompoundDataset ds;
  ds.name = "coded";
  ds.num_classes = 10;
  auto src = coded(20, 0);
  ds.source_train.images = src.images;
  ds.source_train.labels = src.labels;
  ds.source_train.num_classes = 10;
  ds.source_test = ds.source_train;
  ds.compound.name = "compound";
  ds.compound.images = data::ImageSet({1, 1, 2});
  ds.compound_domain_names = {"a", "b"};
  for (int tag = 0; tag < 2; ++tag) {
    auto part = coded(10, tag == 0 ? 2 : 4);
    for (std::size_t i = 0; i < 10; ++i) {
      ds.compound.images.push_back(part.images.image(i));
      ds.compound.labels.push_back(part.labels[i]);
      ds.compound.domain_tags.push_back(tag);
    }
  }
  data::TargetSplit open;
  open.name = "novel";
  auto o = coded(10, 3);
  open.images = o.images;
  open.labels = o.labels;
  open.domain_tags.assign(10, 0);
  ds.open_domains.push_back(open);
  return ds;
}

// Small end-to-end fixture: 8x8 glyphs, an MLP and a few iterations.
nlohmann::json tiny_manifest() {
  return {{"name", "tiny"},
          {"source", {{"synthetic", {{"count", 420}, {"seed", 3}, {"size", 16}}}}},
          {"splits", {{"source_train", 160}, {"source_test", 40}, {"compound", 150}, {"open", 40}}},
          {"specs",
           {{{"name", "tint"}, {"seed", 11}, {"ops", {{{"op", "color-shift"}, {"hue", 40}}}}},
            {{"name", "texture"},
             {"seed", 12},
             {"ops", {{{"op", "background-texture"}, {"pattern", 0}, {"alpha", 0.5}}}}}}},
          {"open_specs", {{{"name", "inverted"}, {"seed", 21}, {"ops", {{{"op", "invert"}}}}}}},
          {"seed", 7},
          {"resolution", {8, 8, 3}}};
}

nlohmann::json tiny_config(const fs::path& out) {
  return {{"name", "tiny"},
          {"dataset", "manifest.json"},
          {"architecture",
           {{"preset", "mlp"},
            {"input", {8, 8, 3}},
            {"num_classes", 10},
            {"d_c", 8},
            {"d_d", 8},
            {"mlp_hidden", 32},
            {"head_hidden", 16},
            {"decoder_hidden", 32},
            {"critic_hidden", 16}}},
          {"stage1", {{"lr", 1e-3}, {"epochs", 2}, {"batch_size", 32}}},
          {"disentangle", {{"iterations", 6}, {"batch_size", 16}, {"lr", 1e-3}}},
          {"stage2", {{"lr", 1e-3}, {"epochs_per_stage", 1}, {"batch_size", 32}, {"gap_sample", 60}}},
          {"probe", {{"knn_k", 5}}},
          {"seed", 5},
          {"output_dir", out.string()}};
}

ExperimentConfig tiny_experiment(const fs::path& dir, const fs::path& out) {
  io::write_atomic(dir / "manifest.json", tiny_manifest().dump());
  return parse_config(tiny_config(out), dir);
}

const char* kTrainingArtifacts[] = {"stage1.ckpt", "stage1_loss.csv", "disentangle_loss.csv",
                                    "disentangled.ckpt", "schedule.csv", "stage2_stages.csv",
                                    "adapted.ckpt"};

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("spearman on monotone, reversed and tied columns") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  CHECK(spearman(x, std::vector<double>{2, 4, 8, 16, 32}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spearman(x, std::vector<double>{5, 4, 3, 2, 1}) == doctest::Approx(-1.0).epsilon(1e-12));
  const auto r = average_ranks(std::vector<double>{3, 1, 3, 2});
  CHECK(r == std::vector<double>{3.5, 1, 3.5, 2});
}

TEST_CASE("spearman matches the rank definition on random pairs") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + uniform_index(rng, 30);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse values so ties occur.
      x[i] = std::floor(uniform(rng, 0.0f, 8.0f));
      y[i] = x[i] * 0.5 + uniform(rng, -3.0f, 3.0f);
    }
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) continue;
    CHECK(spearman(x, y) == doctest::Approx(brute_spearman(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("spearman rejects degenerate input") {
  CHECK_THROWS_AS(spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), NumericError);
  CHECK_THROWS_AS(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}), DataError);
  CHECK_THROWS_AS(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2}), DataError);
  CHECK_THROWS_AS(spearman(std::vector<double>{1, NAN, 3}, std::vector<double>{1, 2, 3}), NumericError);
}

TEST_CASE("knn probe separates clusters and is chance on random tags") {
  Rng rng(4);
  const std::size_t n = 400;
  Tensor apart(Shape{n, 3}), mixed(Shape{n, 3});
  std::vector<int> tags(n);
  for (std::size_t i = 0; i < n; ++i) {
    tags[i] = static_cast<int>(i % 2);
    for (std::size_t j = 0; j < 3; ++j) {
      apart[i * 3 + j] = uniform(rng, -1.0f, 1.0f) + (tags[i] ? 20.0f : 0.0f);
      mixed[i * 3 + j] = uniform(rng, -1.0f, 1.0f);
    }
  }
  CHECK(knn_domain_probe(apart, tags, 10) == 1.0);
  CHECK(std::fabs(knn_domain_probe(mixed, tags, 10) - 0.5) < 0.05);
}

TEST_CASE("knn probe matches a brute-force full sort") {
  Rng rng(9);
  const std::size_t n = 30;
  Tensor f(Shape{n, 4});
  std::vector<int> tags(n);
  for (std::size_t i = 0; i < n; ++i) {
    tags[i] = static_cast<int>(uniform_index(rng, 3));
    // Grid values produce exact distance ties.
    for (std::size_t j = 0; j < 4; ++j) f[i * 4 + j] = std::floor(uniform(rng, 0.0f, 3.0f)) + tags[i] * 0.5f;
  }
  for (std::size_t k : {1, 3, 7}) CHECK(knn_domain_probe(f, tags, k) == doctest::Approx(brute_knn(f, tags, k)).epsilon(1e-12));
}

TEST_CASE("knn probe rejects k >= N and a single domain") {
  Tensor f(Shape{5, 2});
  CHECK_THROWS_AS(knn_domain_probe(f, std::vector<int>{0, 1, 0, 1, 0}, 5), ConfigError);
  CHECK_THROWS_AS(knn_domain_probe(f, std::vector<int>{0, 0, 0, 0, 0}, 2), DataError);
  CHECK_THROWS_AS(knn_domain_probe(f, std::vector<int>{0, 1}, 1), DataError);
}

TEST_CASE("pca reconstructs rank-2 data exactly") {
  Rng rng(21);
  const std::size_t n = 40, d = 6;
  std::vector<double> a(n * 2), b(2 * d), mu(d);
  for (double& v : a) v = uniform(rng, -2.0f, 2.0f);
  for (double& v : b) v = uniform(rng, -1.0f, 1.0f);
  for (double& v : mu) v = uniform(rng, -5.0f, 5.0f);
  Tensor x(Shape{n, d});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x[i * d + j] = float(mu[j] + a[i * 2] * b[j] + a[i * 2 + 1] * b[d + j]);
  }
  const Pca p = pca(x, 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double r = p.mean[j];
      for (std::size_t c = 0; c < 2; ++c) r += p.projection[i * 2 + c] * p.components[c * d + j];
      CHECK(r == doctest::Approx(x[i * d + j]).epsilon(1e-5));
    }
  }
}

TEST_CASE("pca matches a Jacobi eigendecomposition of the covariance") {
  Rng rng(33);
  const std::size_t n = 20, d = 5;
  Tensor x(Shape{n, d});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x[i * d + j] = uniform(rng, -1.0f, 1.0f) * float(j + 1);
  }
  std::vector<double> mean(d, 0.0), cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += double(x[i * d + j]) / n;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = 0; q < d; ++q) {
        cov[p * d + q] += (x[i * d + p] - mean[p]) * (x[i * d + q] - mean[q]) / double(n - 1);
      }
    }
  }
  std::vector<double> values, vectors;
  jacobi(cov, d, values, vectors);
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto l, auto r) { return values[l] > values[r]; });

  const Pca p = pca(x, 3);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(p.variances[c] == doctest::Approx(values[order[c]]).epsilon(1e-9));
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) dot += p.components[c * d + j] * vectors[j * d + order[c]];
    CHECK(std::fabs(dot) == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK_THROWS_AS(pca(x, 6), ConfigError);
}

// ---------------------------------------------------------------------------

TEST_CASE("evaluate reports per-domain accuracy and both averages") {
  const auto ds = coded_dataset();
  const MetricsReport r = evaluate(Predictor(oracle_predict), ds);
  REQUIRE(r.splits.size() == 4);
  CHECK(r.find("source_test")->accuracy == 1.0);
  CHECK(r.find("a")->accuracy == doctest::Approx(0.8));
  CHECK(r.find("b")->accuracy == doctest::Approx(0.6));
  CHECK(r.find("novel")->accuracy == doctest::Approx(0.7));
  CHECK(r.find("novel")->kind == "open");
  CHECK(r.avg_compound == doctest::Approx(0.7));
  CHECK(r.avg_compound_open == doctest::Approx(0.7));
  CHECK(r.find("missing") == nullptr);

  const std::string csv = metrics_csv(r);
  CHECK(csv.rfind("split,kind,examples,accuracy\n", 0) == 0);
  CHECK(csv.find("a,compound,10,0.8\n") != std::string::npos);
  CHECK(csv.find("avg_compound_open,summary,30,0.7\n") != std::string::npos);
  const auto j = metrics_json(r);
  CHECK(j.at("avg_compound").get<double>() == doctest::Approx(0.7));
}

TEST_CASE("a random predictor scores chance within three sigma") {
  auto ds = coded_dataset();
  auto big = coded(1000, 0);
  ds.source_test.images = big.images;
  ds.source_test.labels = big.labels;
  Rng rng(2);
  const MetricsReport r = evaluate(
      [&](const Tensor& images) {
        std::vector<int> out(images.dim(0));
        for (int& y : out) y = static_cast<int>(uniform_index(rng, 10));
        return out;
      },
      ds);
  CHECK(std::fabs(r.find("source_test")->accuracy - 0.1) <= 3.0 * std::sqrt(0.1 * 0.9 / 1000.0));
}

TEST_CASE("accuracy rejects mismatched or empty input") {
  CHECK(accuracy({1, 2, 3, 4}, {1, 2, 0, 4}) == 0.75);
  CHECK_THROWS_AS(accuracy({1}, {1, 2}), DataError);
  CHECK_THROWS_AS(accuracy({}, {}), DataError);
}

// ---------------------------------------------------------------------------

TEST_CASE("config parsing is strict and fills defaults") {
  const auto c = parse_config({{"dataset", "m.json"}}, "/base");
  CHECK(c.dataset == fs::path("/base/m.json"));
  CHECK(c.stage1.lr == 1e-4f);
  CHECK(c.stage1.epochs == 100);
  CHECK(c.stage2.lr == 1e-5f);
  CHECK(c.stage2.epochs_per_stage * c.stage2.boundaries.size() >= 200);

  const auto partial = parse_config({{"dataset", "m.json"}, {"stage2", {{"lr", 1e-3}}}});
  CHECK(partial.stage2.lr == 1e-3f);
  CHECK(partial.stage2.epochs_per_stage == ExperimentConfig::default_stage2().epochs_per_stage);

  CHECK_THROWS_AS(parse_config(nlohmann::json::object()), ConfigError);
  CHECK_THROWS_AS(parse_config({{"dataset", "m.json"}, {"colour", 1}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"dataset", "m.json"}, {"stage1", {{"lrr", 1}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"dataset", "m.json"}, {"stage2", {{"boundary", 1}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"dataset", "m.json"}, {"probe", {{"k", 3}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"dataset", "m.json"}, {"stage1", {{"lr", 0}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"dataset", "m.json"}, {"stage1", {{"lr", "fast"}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"dataset", "m.json"}, {"stage2", {{"boundaries", {0.5, 0.4, 1.0}}}}}),
                  ConfigError);
  CHECK_THROWS_AS(parse_config({{"dataset", "m.json"}, {"probe", {{"knn_k", 0}}}}), ConfigError);
}

TEST_CASE("config round-trips through JSON") {
  const auto dir = scratch_dir("config");
  const auto c = tiny_experiment(dir, dir / "out");
  const auto again = parse_config(config_json(c));
  CHECK(config_json(again) == config_json(c));
  io::write_atomic(dir / "c.json", nlohmann::json(tiny_config(dir / "out")).dump());
  CHECK(config_json(load_config(dir / "c.json")) == config_json(c));
  io::write_atomic(dir / "broken.json", "{\"dataset\": ");
  CHECK_THROWS_AS(load_config(dir / "broken.json"), ConfigError);
  CHECK_THROWS_AS(load_config(dir / "absent.json"), ConfigError);
}

TEST_CASE("the output root variable relocates relative output dirs") {
  ExperimentConfig c = parse_config({{"dataset", "m.json"}, {"output_dir", "runs/x"}});
  ::setenv(kOutputRootEnv, "/tmp/root", 1);
  CHECK(resolve_output_dir(c) == fs::path("/tmp/root/runs/x"));
  c.output_dir = "/abs/x";
  CHECK(resolve_output_dir(c) == fs::path("/abs/x"));
  ::unsetenv(kOutputRootEnv);
  c.output_dir = "runs/x";
  CHECK(resolve_output_dir(c) == fs::path("runs/x"));
}

// ---------------------------------------------------------------------------

TEST_CASE("stage 1 with zero epochs returns the initialization") {
  const auto dir = scratch_dir("zero");
  ExperimentConfig c = tiny_experiment(dir, dir / "out");
  c.stage1.epochs = 0;
  const auto ds = load_dataset(c);
  const Stage1Result r = train_source(c, ds.source_train);
  CHECK(r.bundle.identical(initial_bundle(c)));
  CHECK(r.curve.empty());
  CHECK(epoch_curve_csv(r.curve) == "epoch,ce,center,accuracy\n");
}

TEST_CASE("stage 1 fits a linearly separable two-class toy") {
  data::LabeledSplit s;
  s.images = data::ImageSet({4, 4, 1});
  s.num_classes = 2;
  Rng rng(6);
  for (std::size_t i = 0; i < 200; ++i) {
    const int y = static_cast<int>(i % 2);
    std::vector<float> px(16);
    for (std::size_t p = 0; p < 16; ++p) {
      const bool lit = (p % 4 < 2) == (y == 0);
      px[p] = (lit ? 0.65f : 0.35f) + uniform(rng, -0.1f, 0.1f);
    }
    s.images.push_back(px);
    s.labels.push_back(y);
  }
  ExperimentConfig c = parse_config({{"dataset", "unused.json"}});
  c.architecture.preset = "mlp";
  c.architecture.input = {4, 4, 1};
  c.architecture.num_classes = 2;
  c.architecture.d_c = 8;
  c.architecture.d_d = 8;
  c.architecture.mlp_hidden = 32;
  c.stage1.batch_size = 16;
  const Stage1Result r = train_source(c, s);
  REQUIRE(r.curve.size() == 100);
  std::vector<std::size_t> all(s.size());
  std::iota(all.begin(), all.end(), 0);
  const Tensor logits = models::classify(r.bundle, models::class_encode(r.bundle, s.images.batch(all)));
  std::size_t right = 0;
  for (std::size_t i = 0; i < s.size(); ++i) right += (logits[i * 2 + 1] > logits[i * 2]) == (s.labels[i] == 1);
  CHECK(double(right) / double(s.size()) >= 0.99);
  CHECK(r.curve.back().ce < r.curve.front().ce);
}

// ---------------------------------------------------------------------------

TEST_CASE("end-to-end runs are deterministic and checkpoints round-trip") {
  const auto dir = scratch_dir("e2e");
  const ExperimentConfig a = tiny_experiment(dir, dir / "a");
  const ExperimentConfig b = tiny_experiment(dir, dir / "b");
  const auto ds = load_dataset(a);
  const RunResult ra = run_experiment(a, ds);
  run_experiment(b, ds);

  for (const char* f : {"metrics.csv", "metrics.json", "metrics_source_only.csv", "metrics_source_only.json",
                        "probes.json", "diagnostics.csv"}) {
    CAPTURE(f);
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  for (const char* f : kTrainingArtifacts) {
    CAPTURE(f);
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }

  const auto ckpt = models::load_checkpoint(dir / "a" / "adapted.ckpt");
  CHECK(ckpt.bundle.identical(ra.stage2.bundle));
  const MetricsReport again = evaluate(ckpt.bundle, memory_from(ckpt), ds, head_from(ckpt));
  CHECK(metrics_csv(again) == metrics_csv(ra.adapted));
  CHECK(slurp(dir / "a" / "metrics.csv") == metrics_csv(ra.adapted));

  const auto s1 = models::load_checkpoint(dir / "a" / "stage1.ckpt");
  CHECK(metrics_csv(evaluate_plain(s1.bundle, ds)) == metrics_csv(ra.source_only));

  const auto probes = nlohmann::json::parse(slurp(dir / "a" / "probes.json"));
  CHECK(probes.at("knn_k").get<std::size_t>() == 5);
  CHECK(probes.contains("indicator_gap_spearman"));
}

TEST_CASE("corrupting target labels changes no training artifact") {
  const auto dir = scratch_dir("taint");
  const ExperimentConfig clean = tiny_experiment(dir, dir / "clean");
  const ExperimentConfig dirty = tiny_experiment(dir, dir / "dirty");
  const auto ds = load_dataset(clean);
  auto tainted = ds;
  for (int& y : tainted.compound.labels) y = (y + 3) % 10;
  for (auto& open : tainted.open_domains) {
    for (int& y : open.labels) y = (y + 7) % 10;
  }
  run_experiment(clean, ds);
  run_experiment(dirty, tainted);
  for (const char* f : kTrainingArtifacts) {
    CAPTURE(f);
    CHECK(slurp(dir / "clean" / f) == slurp(dir / "dirty" / f));
  }
  CHECK(slurp(dir / "clean" / "metrics.csv") != slurp(dir / "dirty" / "metrics.csv"));
}

TEST_CASE("stage 2 refuses unsuitable checkpoints") {
  const auto dir = scratch_dir("refuse");
  const ExperimentConfig c = tiny_experiment(dir, dir / "out");
  const auto ds = load_dataset(c);
  ExperimentConfig quick = c;
  quick.stage1.epochs = 0;
  quick.disentangle.iterations = 0;
  quick.stage2.epochs_per_stage = 0;
  const auto s1 = stage1_checkpoint(quick, initial_bundle(quick));
  const Stage2Result r = adapt(quick, s1, ds);
  const auto adapted = adapted_checkpoint(quick, r, AdaptVariant{});
  CHECK_THROWS_AS(adapt(quick, adapted, ds), DataError);
  CHECK_THROWS_AS(memory_from(s1), DataError);

  ExperimentConfig other = quick;
  other.architecture.d_c = 16;
  CHECK_THROWS_AS(adapt(other, s1, ds), ConfigError);
  AdaptVariant plain;
  plain.adapted = false;
  CHECK_THROWS_AS(adapt(quick, s1, ds, plain), ConfigError);
}

TEST_CASE("ablation suite emits five rows in order") {
  const auto dir = scratch_dir("ablate");
  ExperimentConfig c = tiny_experiment(dir, dir / "out");
  const auto ds = load_dataset(c);
  const auto rows = ablation_suite(c, ds, dir / "out");
  REQUIRE(rows.size() == 5);
  const std::vector<std::string> names{"source-only", "+adversarial", "+curriculum", "+enhancer", "+indicator"};
  for (std::size_t i = 0; i < 5; ++i) CHECK(rows[i].variant == names[i]);
  const auto s1 = models::load_checkpoint(dir / "out" / "stage1.ckpt");
  CHECK(metrics_csv(rows[0].metrics) == metrics_csv(evaluate_plain(s1.bundle, ds)));
  const std::string csv = slurp(dir / "out" / "ablation.csv");
  CHECK(csv == ablation_csv(rows));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
  CHECK(csv.rfind("variant,avg_compound,avg_compound_open,indicator_gap,source_test,tint,texture,inverted\n", 0) == 0);
  CHECK(fs::exists(dir / "out" / "diagnostics.csv"));
  CHECK(fs::exists(dir / "out" / "metrics.json"));
}

TEST_CASE("embedding export covers every split") {
  const auto dir = scratch_dir("export");
  ExperimentConfig c = tiny_experiment(dir, dir / "out");
  const auto ds = load_dataset(c);
  const auto bundle = initial_bundle(c);
  const std::size_t total =
      ds.source_train.size() + ds.source_test.size() + ds.compound.size() + ds.open_domains[0].size();
  CHECK(export_embeddings(bundle, ds, EmbeddingKind::domain_features, dir / "emb.csv") == total);
  const std::string csv = slurp(dir / "emb.csv");
  CHECK(std::size_t(std::count(csv.begin(), csv.end(), '\n')) == total + 1);
  CHECK(csv.rfind("id,split,hidden_tag,label,e0,", 0) == 0);
  const std::string pca2 = slurp(dir / "emb.pca2.csv");
  CHECK(std::size_t(std::count(pca2.begin(), pca2.end(), '\n')) == total + 1);
  CHECK(pca2.find("pc1,pc2") != std::string::npos);
}
