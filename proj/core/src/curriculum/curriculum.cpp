#include "ocda/curriculum/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "ocda/error.hpp"
#include "ocda/io.hpp"
#include "ocda/numerics/nn.hpp"
#include "ocda/numerics/random.hpp"

namespace ocda::curriculum {

using models::NetId;
using numerics::Graph;
using numerics::Shape;

double domain_gap(std::span<const float> target, const Tensor& source) {
  if (source.rank() != 2 || source.dim(0) == 0) {
    throw DataError("domain_gap: the source embedding sample is empty");
  }
  const std::size_t m = source.dim(0), d = source.dim(1);
  if (target.size() != d) {
    throw ShapeError("domain_gap: target has " + std::to_string(target.size()) +
                     " dims, source embeddings " + std::to_string(d));
  }
  double total = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = static_cast<double>(target[j]) - source[r * d + j];
      sq += diff * diff;
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(m);
}

std::vector<double> domain_gaps(const Tensor& targets, const Tensor& source) {
  if (targets.rank() != 2) throw ShapeError("domain_gaps: expected (N, d) target embeddings");
  const std::size_t n = targets.dim(0), d = targets.dim(1);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = domain_gap(targets.data().subspan(i * d, d), source);
  return out;
}

std::vector<double> domain_gaps(const ModelBundle& bundle, const data::ImageSet& targets,
                                const data::ImageSet& source_sample) {
  if (source_sample.empty()) throw DataError("domain_gap: the source embedding sample is empty");
  auto all = [](const data::ImageSet& s) {
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), 0);
    return s.batch(idx);
  };
  const Tensor src = models::domain_encode(bundle, all(source_sample));
  if (targets.empty()) return {};
  return domain_gaps(models::domain_encode(bundle, all(targets)), src);
}

std::vector<std::size_t> gap_sample(std::size_t source_count, std::size_t limit, std::uint64_t seed) {
  std::vector<std::size_t> idx(source_count);
  std::iota(idx.begin(), idx.end(), 0);
  if (limit >= source_count) return idx;
  Rng rng(seed);
  shuffle(std::span<std::size_t>(idx), rng);
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::span<const std::size_t> Schedule::admitted(std::size_t stage) const {
  return std::span<const std::size_t>(order).first(stage_sizes.at(stage));
}

std::vector<std::size_t> Schedule::stage_of() const {
  std::vector<std::size_t> out(order.size(), 0);
  std::size_t stage = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    while (rank >= stage_sizes[stage]) ++stage;
    out[order[rank]] = stage;
  }
  return out;
}

void validate_boundaries(const std::vector<double>& b) {
  if (b.empty()) throw ConfigError("curriculum: boundaries must not be empty");
  double prev = 0.0;
  for (double x : b) {
    if (!(x > prev) || x > 1.0) {
      throw ConfigError("curriculum: boundaries must increase strictly within (0, 1]");
    }
    prev = x;
  }
  if (b.back() != 1.0) throw ConfigError("curriculum: the last boundary must be 1.0");
}

Schedule build_schedule(const std::vector<double>& gaps, const std::vector<double>& boundaries,
                        std::size_t epochs_per_stage) {
  validate_boundaries(boundaries);
  for (double g : gaps) {
    if (!std::isfinite(g)) throw NumericError("build_schedule: non-finite gap");
  }
  Schedule s;
  s.gaps = gaps;
  s.boundaries = boundaries;
  s.epochs_per_stage = epochs_per_stage;
  s.order.resize(gaps.size());
  std::iota(s.order.begin(), s.order.end(), 0);
  std::stable_sort(s.order.begin(), s.order.end(),
                   [&](std::size_t a, std::size_t b) { return gaps[a] < gaps[b]; });
  const std::size_t n = gaps.size();
  std::size_t prev = 0;
  for (double b : boundaries) {
    std::size_t size = static_cast<std::size_t>(std::llround(b * static_cast<double>(n)));
    size = std::clamp(size, prev, n);
    s.stage_sizes.push_back(size);
    prev = size;
  }
  s.stage_sizes.back() = n;
  return s;
}

std::string schedule_csv(const Schedule& s) {
  const auto stage = s.stage_of();
  std::string out = "target_index,gap,stage\n";
  for (std::size_t i : s.order) {
    out += std::to_string(i) + "," + io::format_float(s.gaps[i]) + "," + std::to_string(stage[i]) + "\n";
  }
  return out;
}

void write_schedule(const std::filesystem::path& path, const Schedule& s) {
  io::write_atomic(path, schedule_csv(s));
}

DomainLosses domain_confusion_from_logits(Var source_logits, Var target_logits, float cap) {
  if (source_logits.shape().empty() || source_logits.shape()[0] == 0 ||
      target_logits.shape().empty() || target_logits.shape()[0] == 0) {
    throw DataError("domain_confusion_losses: source and admitted target sets must be non-empty");
  }
  Var ls = numerics::soft_cap(source_logits, cap);
  Var lt = numerics::soft_cap(target_logits, cap);
  Var source_term = numerics::mean(numerics::binary_cross_entropy(ls, 1));
  Var target_term = numerics::mean(numerics::binary_cross_entropy(lt, 0));
  DomainLosses out;
  out.d_loss = numerics::scale(numerics::add(source_term, target_term), 0.5f);
  out.g_loss = numerics::mean(numerics::binary_cross_entropy(lt, 1));
  return out;
}

DomainLosses domain_confusion_losses(const models::ArchitectureDescriptor& arch,
                                     const models::BoundNet& critic, Var source_features,
                                     Var target_features, float cap) {
  return domain_confusion_from_logits(models::criticize(arch, critic, source_features),
                                      models::criticize(arch, critic, target_features), cap);
}

void validate(const CurriculumConfig& c) {
  validate_boundaries(c.boundaries);
  if (!(c.lr > 0.0f)) throw ConfigError("curriculum: lr must be positive");
  if (!(c.lambda_adv >= 0.0f)) throw ConfigError("curriculum: lambda_adv must be non-negative");
  if (c.critic_steps < 1) throw ConfigError("curriculum: critic_steps must be at least 1");
  if (!(c.beta1 >= 0.0f && c.beta1 < 1.0f)) throw ConfigError("curriculum: beta1 must lie in [0, 1)");
  if (c.batch_size < 1) throw ConfigError("curriculum: batch_size must be at least 1");
  if (!(c.logit_cap > 0.0f)) throw ConfigError("curriculum: logit_cap must be positive");
  if (c.gap_sample < 1) throw ConfigError("curriculum: gap_sample must be at least 1");
}

void to_json(nlohmann::json& j, const CurriculumConfig& c) {
  j = {{"boundaries", c.boundaries}, {"epochs_per_stage", c.epochs_per_stage}, {"lr", c.lr},
       {"lambda_adv", c.lambda_adv}, {"critic_steps", c.critic_steps}, {"beta1", c.beta1},
       {"imprint_head", c.imprint_head},
       {"batch_size", c.batch_size},   {"logit_cap", c.logit_cap},
       {"gap_sample", c.gap_sample}, {"seed", c.seed},               {"head", c.head}};
}

void from_json(const nlohmann::json& j, CurriculumConfig& c) {
  static const std::set<std::string> keys{"boundaries", "epochs_per_stage", "lr",
                                          "lambda_adv", "critic_steps",     "beta1",           "imprint_head",
                                          "batch_size", "logit_cap",
                                          "gap_sample", "seed",             "head"};
  if (!j.is_object()) throw ConfigError("curriculum: expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw ConfigError("curriculum: unknown key '" + key + "'");
  }
  try {
    c = CurriculumConfig{};
    c.boundaries = j.value("boundaries", c.boundaries);
    c.epochs_per_stage = j.value("epochs_per_stage", c.epochs_per_stage);
    c.lr = j.value("lr", c.lr);
    c.lambda_adv = j.value("lambda_adv", c.lambda_adv);
    c.critic_steps = j.value("critic_steps", c.critic_steps);
    c.beta1 = j.value("beta1", c.beta1);
    c.imprint_head = j.value("imprint_head", c.imprint_head);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.logit_cap = j.value("logit_cap", c.logit_cap);
    c.gap_sample = j.value("gap_sample", c.gap_sample);
    c.seed = j.value("seed", c.seed);
    if (j.contains("head")) c.head = j.at("head").get<memory::HeadConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("curriculum: ") + e.what());
  }
}

AdaptState::AdaptState(ModelBundle b, memory::Memory m, float lr, float beta1)
    : bundle(std::move(b)),
      memory(std::move(m)),
      target_encoder_opt(numerics::AdamHyper{lr, beta1}),
      indicator_opt(numerics::AdamHyper{lr, beta1}),
      head_opt(numerics::AdamHyper{lr, beta1}),
      critic_opt(numerics::AdamHyper{lr, beta1}) {
  source_encoder = bundle.net(NetId::class_encoder);
}

namespace {

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> idx) {
  const std::size_t d = t.numel() / t.dim(0);
  Shape shape = t.shape();
  shape[0] = idx.size();
  Tensor out(shape);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(t.data().begin() + static_cast<long>(idx[i] * d), d,
                out.data().begin() + static_cast<long>(i * d));
  }
  return out;
}

Tensor encode_all(const ModelBundle& bundle, const models::NetParams& encoder,
                  const data::ImageSet& images, const char* who) {
  std::vector<std::size_t> idx(images.size());
  std::iota(idx.begin(), idx.end(), 0);
  return models::map_rows(images.batch(idx), 128, [&](const Tensor& chunk) {
    Graph g;
    return models::encode(bundle.arch, models::bind(g, encoder, false), g.constant(chunk), who).value();
  });
}

}  // namespace

std::vector<StageReport> curriculum_train(AdaptState& state, const data::LabeledSplit& source,
                                          const data::ImageSet& compound, const Schedule& schedule,
                                          const CurriculumConfig& config) {
  validate(config);
  if (schedule.order.size() != compound.size()) {
    throw DataError("curriculum_train: schedule covers " + std::to_string(schedule.order.size()) +
                    " targets, compound split has " + std::to_string(compound.size()));
  }
  if (source.size() == 0) throw DataError("curriculum_train: empty source split");
  ModelBundle& bundle = state.bundle;
  const auto& arch = bundle.arch;
  const memory::HeadConfig& head = config.head;
  const bool learned = head.gate == memory::GateMode::learned;
  memory::Memory mem = state.memory;
  mem.temperature = head.temperature;

  std::vector<StageReport> reports;
  if (schedule.epochs_per_stage == 0) return reports;

  // Frozen paths are computed once: the source twin and the domain encoder.
  const Tensor source_direct = encode_all(bundle, state.source_encoder, source.images, "class_encode");
  const Tensor source_domain =
      encode_all(bundle, bundle.net(NetId::domain_encoder), source.images, "domain_encode");
  const Tensor target_domain =
      encode_all(bundle, bundle.net(NetId::domain_encoder), compound, "domain_encode");

  data::BatchCycler source_batches(source.size(), config.batch_size, mix_seed(config.seed, 0x5a));
  std::vector<int> ys;
  std::vector<std::size_t> targets;
  for (std::size_t stage = 0; stage < schedule.stages(); ++stage) {
    const auto admitted = schedule.admitted(stage);
    state.stage = stage;
    state.admitted = admitted.size();
    StageReport report{stage, admitted.size(), 0, 0.0, 0.0, 0.0};
    if (admitted.empty()) {
      reports.push_back(report);
      continue;
    }
    for (std::size_t epoch = 0; epoch < schedule.epochs_per_stage; ++epoch) {
      const auto batches = data::minibatches(admitted.size(), config.batch_size,
                                             mix_seed(config.seed, 0x700 + stage), epoch);
      for (const auto& local : batches) {
        targets.clear();
        for (std::size_t i : local) targets.push_back(admitted[i]);
        const auto& si = source_batches.next();
        ys.clear();
        for (std::size_t i : si) ys.push_back(source.labels[i]);

        Graph g;
        auto enc = models::bind(g, bundle.net(NetId::class_encoder), true);
        auto cos = models::bind(g, bundle.net(NetId::cosine_head), true);
        models::BoundNet ind;
        if (learned) ind = models::bind(g, bundle.net(NetId::indicator), true);
        // The frozen twin anchors the source side of the critic; the
        // classification loss runs through the target encoder so its source
        // features keep their class structure while it aligns the target.
        const Var source_gate = g.constant(gather_rows(source_domain, si));
        Var fs = numerics::l2_normalize(g.constant(gather_rows(source_direct, si)));
        Var vs = models::encode(arch, enc, g.constant(source.images.batch(si)), "class_encode");
        Var fs_train = memory::transfer_features(bundle, learned ? &ind : nullptr, mem, head, vs, source_gate);
        Var vt = models::encode(arch, enc, g.constant(compound.batch(targets)), "class_encode");
        Var ft = numerics::l2_normalize(vt);

        // Critic steps on the current features.
        for (std::size_t k = 0; k < config.critic_steps; ++k) {
          Graph gd;
          auto critic = models::bind(gd, bundle.net(NetId::domain_critic), true);
          DomainLosses dl = domain_confusion_losses(arch, critic, gd.constant(fs.value()),
                                                    gd.constant(ft.value()), config.logit_cap);
          if (k + 1 == config.critic_steps) report.d_loss += dl.d_loss.value().item();
          auto grads = numerics::gradients(gd, dl.d_loss, critic.vars);
          state.critic_opt.step(bundle.net(NetId::domain_critic), grads);
        }

        // Target encoder, indicator and head against the updated critic.
        auto critic = models::bind(g, bundle.net(NetId::domain_critic), false);
        Var g_loss = numerics::mean(numerics::binary_cross_entropy(
            numerics::soft_cap(models::criticize(arch, critic, ft), config.logit_cap), 1));
        Var ce = numerics::mean_cross_entropy(models::cosine_classify(arch, cos, fs_train, head.scale), ys);
        Var total = numerics::add(ce, numerics::scale(g_loss, config.lambda_adv));
        report.source_ce += ce.value().item();
        report.g_loss += g_loss.value().item();

        std::vector<Var> wrt = enc.vars;
        wrt.insert(wrt.end(), cos.vars.begin(), cos.vars.end());
        wrt.insert(wrt.end(), ind.vars.begin(), ind.vars.end());
        auto grads = numerics::gradients(g, total, wrt);
        std::span<const Tensor> all(grads);
        state.target_encoder_opt.step(bundle.net(NetId::class_encoder), all.first(enc.vars.size()));
        state.head_opt.step(bundle.net(NetId::cosine_head),
                            all.subspan(enc.vars.size(), cos.vars.size()));
        if (learned) {
          state.indicator_opt.step(bundle.net(NetId::indicator),
                                   all.subspan(enc.vars.size() + cos.vars.size()));
        }
        ++report.steps;
      }
    }
    const double steps = static_cast<double>(std::max<std::size_t>(report.steps, 1));
    report.source_ce /= steps;
    report.d_loss /= steps;
    report.g_loss /= steps;
    reports.push_back(report);
  }
  return reports;
}

std::string stage_report_csv(const std::vector<StageReport>& reports) {
  std::string out = "stage,admitted,steps,source_ce,d_loss,g_loss\n";
  for (const StageReport& r : reports) {
    out += std::to_string(r.stage) + "," + std::to_string(r.admitted) + "," +
           std::to_string(r.steps) + "," + io::format_float(r.source_ce) + "," +
           io::format_float(r.d_loss) + "," + io::format_float(r.g_loss) + "\n";
  }
  return out;
}

}  // namespace ocda::curriculum
