#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include <nlohmann/json.hpp>

#include "ocda/curriculum/curriculum.hpp"
#include "ocda/error.hpp"
#include "ocda/io.hpp"
#include "ocda/numerics/random.hpp"

using namespace ocda;
using namespace ocda::curriculum;
using models::NetId;
using numerics::Graph;
using numerics::Shape;

namespace {

Tensor random_rows(std::size_t n, std::size_t d, Rng& rng) {
  Tensor t(Shape{n, d});
  for (float& v : t.data()) v = uniform(rng, -2.0f, 2.0f);
  return t;
}

double bce(double logit, int label, double cap) {
  const double l = cap * std::tanh(logit / cap);
  const double p = 1.0 / (1.0 + std::exp(-l));
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

models::ArchitectureDescriptor toy_arch() {
  models::ArchitectureDescriptor a;
  a.preset = "mlp";
  a.input = {4, 4, 1};
  a.num_classes = 2;
  a.d_c = 4;
  a.d_d = 4;
  a.mlp_hidden = 16;
  a.head_hidden = 8;
  a.decoder_hidden = 16;
  return a;
}

data::LabeledSplit toy_split(std::size_t n, float offset, std::uint64_t seed) {
  Rng rng(seed);
  data::LabeledSplit s;
  s.images = data::ImageSet({4, 4, 1});
  s.num_classes = 2;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    std::vector<float> px(16);
    for (std::size_t p = 0; p < 16; ++p) {
      const bool lit = (p % 4 < 2) == (y == 0);
      px[p] = std::min(1.0f, (lit ? 0.7f : 0.1f) + offset + uniform(rng, -0.05f, 0.05f));
    }
    s.images.push_back(px);
    s.labels.push_back(y);
  }
  return s;
}

}  // namespace

TEST_CASE("domain gap") {
  Tensor same = Tensor::from({3, 2}, {1, 2, 1, 2, 1, 2});
  const std::vector<float> t{1, 2};
  CHECK(domain_gap(t, same) == 0.0);
  CHECK(domain_gap(std::vector<float>{1, 0}, Tensor::from({2, 2}, {0, 0, 2, 0})) == doctest::Approx(1.0));
  CHECK_THROWS_AS(domain_gap(t, Tensor(Shape{0, 2})), DataError);
  CHECK_THROWS_AS(domain_gap(std::vector<float>{1, 2, 3}, same), ShapeError);

  Rng rng(1);
  const Tensor src = random_rows(100, 5, rng), tgt = random_rows(20, 5, rng);
  const auto gaps = domain_gaps(tgt, src);
  for (std::size_t i = 0; i < 20; ++i) {
    double brute = 0.0;
    for (std::size_t m = 0; m < 100; ++m) {
      double sq = 0.0;
      for (std::size_t j = 0; j < 5; ++j) {
        const double d = static_cast<double>(tgt[i * 5 + j]) - src[m * 5 + j];
        sq += d * d;
      }
      brute += std::sqrt(sq);
    }
    CHECK(std::fabs(gaps[i] - brute / 100.0) < 1e-6);
  }
  // Invariant under a permutation of the source sample.
  std::vector<std::size_t> perm(100);
  std::iota(perm.begin(), perm.end(), 0);
  shuffle(std::span<std::size_t>(perm), rng);
  Tensor shuffled(Shape{100, 5});
  for (std::size_t m = 0; m < 100; ++m) {
    for (std::size_t j = 0; j < 5; ++j) shuffled[m * 5 + j] = src[perm[m] * 5 + j];
  }
  const auto again = domain_gaps(tgt, shuffled);
  for (std::size_t i = 0; i < 20; ++i) CHECK(again[i] == doctest::Approx(gaps[i]).epsilon(1e-12));

  const auto sample = gap_sample(5000, 1000, 3);
  CHECK(sample.size() == 1000);
  CHECK(std::is_sorted(sample.begin(), sample.end()));
  CHECK(std::set<std::size_t>(sample.begin(), sample.end()).size() == 1000);
  CHECK(gap_sample(10, 1000, 3).size() == 10);
}

TEST_CASE("build_schedule") {
  Schedule s = build_schedule({0.5, 0.1, 0.3}, {1.0});
  CHECK(s.order == std::vector<std::size_t>{1, 2, 0});

  std::vector<double> nine(9);
  for (std::size_t i = 0; i < 9; ++i) nine[i] = static_cast<double>((i * 7) % 9);
  s = build_schedule(nine, {1.0 / 3.0, 2.0 / 3.0, 1.0});
  CHECK(s.stage_sizes == std::vector<std::size_t>{3, 6, 9});
  CHECK(s.admitted(0).size() == 3);
  CHECK(s.stage_of()[s.order[4]] == 1);

  s = build_schedule(std::vector<double>(6, 0.25), {0.5, 1.0});
  CHECK(s.order == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});

  CHECK_THROWS_AS(build_schedule(nine, {}), ConfigError);
  CHECK_THROWS_AS(build_schedule(nine, {0.5, 0.5, 1.0}), ConfigError);
  CHECK_THROWS_AS(build_schedule(nine, {0.5, 0.9}), ConfigError);
  CHECK_THROWS_AS(build_schedule(nine, {0.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(build_schedule(nine, {0.5, 1.2}), ConfigError);

  // Random gaps: a nested permutation sorted by gap.
  Rng rng(8);
  std::vector<double> gaps(101);
  for (double& g : gaps) g = std::floor(uniform(rng, 0.0f, 10.0f));
  s = build_schedule(gaps, {0.2, 0.5, 1.0});
  CHECK(std::set<std::size_t>(s.order.begin(), s.order.end()).size() == 101);
  for (std::size_t i = 1; i < 101; ++i) {
    CHECK(gaps[s.order[i - 1]] <= gaps[s.order[i]]);
    if (gaps[s.order[i - 1]] == gaps[s.order[i]]) CHECK(s.order[i - 1] < s.order[i]);
  }
  CHECK(s.stage_sizes == std::vector<std::size_t>{20, 51, 101});

  const std::string csv = schedule_csv(s);
  CHECK(csv.rfind("target_index,gap,stage\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 102);
  const auto path = std::filesystem::temp_directory_path() / "ocda_test_curriculum" / "s.csv";
  write_schedule(path, s);
  CHECK(io::read_file(path) == csv);
  std::filesystem::remove_all(path.parent_path());
}

TEST_CASE("domain confusion losses") {
  Graph g;
  DomainLosses u = domain_confusion_from_logits(g.constant(Tensor(Shape{3, 1})),
                                                g.constant(Tensor(Shape{5, 1})), 15.0f);
  CHECK(std::fabs(u.d_loss.value().item() - std::log(2.0)) < 1e-6);
  CHECK(std::fabs(u.g_loss.value().item() - std::log(2.0)) < 1e-6);

  // A saturated critic: d_loss vanishes, g_loss stops near the cap.
  DomainLosses p = domain_confusion_from_logits(g.constant(Tensor(Shape{2, 1}, 1e4f)),
                                                g.constant(Tensor(Shape{2, 1}, -1e4f)), 15.0f);
  CHECK(p.d_loss.value().item() < 1e-6);
  CHECK(p.g_loss.value().item() == doctest::Approx(15.0f).epsilon(1e-5));

  const std::vector<double> ls{0.5, -1.0}, lt{2.0, -0.3};
  DomainLosses m = domain_confusion_from_logits(g.constant(Tensor::from({2, 1}, {0.5f, -1.0f})),
                                                g.constant(Tensor::from({2, 1}, {2.0f, -0.3f})), 15.0f);
  const double d = 0.5 * ((bce(ls[0], 1, 15) + bce(ls[1], 1, 15)) / 2 +
                          (bce(lt[0], 0, 15) + bce(lt[1], 0, 15)) / 2);
  const double gl = (bce(lt[0], 1, 15) + bce(lt[1], 1, 15)) / 2;
  CHECK(m.d_loss.value().item() == doctest::Approx(d).epsilon(1e-6));
  CHECK(m.g_loss.value().item() == doctest::Approx(gl).epsilon(1e-6));

  CHECK_THROWS_AS(domain_confusion_from_logits(g.constant(Tensor(Shape{2, 1})),
                                               g.constant(Tensor(Shape{0, 1})), 15.0f),
                  DataError);

  // Through the critic network: zero weights give probability 0.5.
  ModelBundle b = models::init_bundle(toy_arch(), 1);
  for (Tensor& t : b.net(NetId::domain_critic).tensors) std::fill(t.data().begin(), t.data().end(), 0.0f);
  Graph gc;
  auto critic = models::bind(gc, b.net(NetId::domain_critic), false);
  Rng rng(2);
  DomainLosses z = domain_confusion_losses(b.arch, critic, gc.constant(random_rows(4, 4, rng)),
                                           gc.constant(random_rows(4, 4, rng)), 15.0f);
  CHECK(std::fabs(z.d_loss.value().item() - std::log(2.0)) < 1e-6);
}

TEST_CASE("curriculum config schema") {
  nlohmann::json j = CurriculumConfig{};
  CHECK(j.get<CurriculumConfig>().boundaries.size() == 3);
  j["boundaries"] = {0.5, 0.4, 1.0};
  CHECK_THROWS_AS(validate(j.get<CurriculumConfig>()), ConfigError);
  j["boundaries"] = {1.0};
  j["lambda"] = 1;
  CHECK_THROWS_WITH_AS(j.get<CurriculumConfig>(), doctest::Contains("unknown key 'lambda'"), ConfigError);
}

TEST_CASE("curriculum_train on a toy compound target") {
  const auto arch = toy_arch();
  auto source = toy_split(64, 0.0f, 1);
  auto target = toy_split(48, 0.2f, 2);
  ModelBundle init = models::init_bundle(arch, 3);
  memory::Memory mem = memory::build_memory(init, source);

  CurriculumConfig cfg;
  cfg.lr = 1e-3f;
  cfg.batch_size = 16;
  cfg.epochs_per_stage = 2;
  cfg.seed = 4;
  std::vector<double> gaps = domain_gaps(init, target.images, source.images);
  Schedule schedule = build_schedule(gaps, cfg.boundaries, cfg.epochs_per_stage);

  SUBCASE("zero epochs leave the state unchanged") {
    AdaptState st(init, mem, cfg.lr);
    Schedule none = build_schedule(gaps, cfg.boundaries, 0);
    CHECK(curriculum_train(st, source, target.images, none, cfg).empty());
    CHECK(st.bundle.identical(init));
    CHECK(st.critic_opt.state().step == 0);
  }

  SUBCASE("staged training updates only the target path") {
    AdaptState st(init, mem, cfg.lr);
    const auto reports = curriculum_train(st, source, target.images, schedule, cfg);
    REQUIRE(reports.size() == 3);
    CHECK(reports[0].admitted == 16);
    CHECK(reports[1].admitted == 32);
    CHECK(reports[2].admitted == 48);
    CHECK(reports[0].steps == 2);
    CHECK(reports[2].steps == 6);
    CHECK(st.admitted == 48);
    CHECK(st.source_encoder.identical(init.net(NetId::class_encoder)));
    CHECK_FALSE(st.bundle.net(NetId::class_encoder).identical(init.net(NetId::class_encoder)));
    CHECK(st.bundle.net(NetId::domain_encoder).identical(init.net(NetId::domain_encoder)));
    CHECK(st.bundle.net(NetId::classifier).identical(init.net(NetId::classifier)));
    CHECK(st.bundle.net(NetId::decoder).identical(init.net(NetId::decoder)));
    CHECK(st.bundle.net(NetId::discriminator).identical(init.net(NetId::discriminator)));
    CHECK_FALSE(st.bundle.net(NetId::indicator).identical(init.net(NetId::indicator)));
    CHECK_FALSE(st.bundle.net(NetId::cosine_head).identical(init.net(NetId::cosine_head)));
    CHECK_FALSE(st.bundle.net(NetId::domain_critic).identical(init.net(NetId::domain_critic)));
    CHECK(st.memory.centroids.identical(mem.centroids));
    CHECK(stage_report_csv(reports).rfind("stage,admitted,steps,source_ce,d_loss,g_loss\n", 0) == 0);

    AdaptState again(init, mem, cfg.lr);
    curriculum_train(again, source, target.images, schedule, cfg);
    CHECK(again.bundle.identical(st.bundle));
  }

  SUBCASE("a single stage at 1.0 admits the whole target at once") {
    CurriculumConfig one = cfg;
    one.boundaries = {1.0};
    AdaptState st(init, mem, cfg.lr);
    const auto reports =
        curriculum_train(st, source, target.images, build_schedule(gaps, {1.0}, 2), one);
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].admitted == 48);
    CHECK(reports[0].steps == 6);
  }

  SUBCASE("gate none leaves the indicator untouched") {
    CurriculumConfig plain = cfg;
    plain.head.gate = memory::GateMode::none;
    AdaptState st(init, mem, cfg.lr);
    curriculum_train(st, source, target.images, schedule, plain);
    CHECK(st.bundle.net(NetId::indicator).identical(init.net(NetId::indicator)));
  }

  CHECK_THROWS_AS(
      [&] {
        AdaptState st(init, mem, cfg.lr);
        curriculum_train(st, source, target.images, build_schedule({0.1, 0.2}, {1.0}), cfg);
      }(),
      DataError);
}
