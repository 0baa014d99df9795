#include "ocda/harness/pipeline.hpp"

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ocda/data/manifest.hpp"
#include "ocda/error.hpp"
#include "ocda/harness/analysis.hpp"
#include "ocda/io.hpp"
#include "ocda/numerics/nn.hpp"
#include "ocda/numerics/random.hpp"

namespace ocda::harness {

using models::NetId;
using numerics::Graph;
using numerics::Shape;
using numerics::Var;

namespace {

// Stream tags mixed with the experiment seed.
constexpr std::uint64_t kInitStream = 0x11;
constexpr std::uint64_t kStage1Stream = 0x51;
constexpr std::uint64_t kDisentangleStream = 0xd1;
constexpr std::uint64_t kStage2Stream = 0x52;
constexpr std::uint64_t kHeadStream = 0xc05;
constexpr std::uint64_t kGapStream = 0x6a9;

double round6(double x) { return std::stod(io::format_float(x)); }

std::vector<int> argmax(const Tensor& logits) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<int> out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 1; c < k; ++c) {
      if (logits[i * k + c] > logits[i * k + static_cast<std::size_t>(out[i])]) out[i] = static_cast<int>(c);
    }
  }
  return out;
}

Tensor all_images(const data::ImageSet& s) { return s.range(0, s.size()); }

void require_stage(const Checkpoint& ckpt, std::initializer_list<const char*> allowed, const char* who) {
  const std::string stage = ckpt.meta.value("stage", std::string());
  for (const char* a : allowed) {
    if (stage == a) return;
  }
  std::string list;
  for (const char* a : allowed) list += (list.empty() ? "" : " or ") + std::string(a);
  throw DataError(std::string(who) + ": checkpoint stage '" + stage + "' is not usable here (expected " +
                  list + ")");
}

}  // namespace

data::CompoundDataset load_dataset(const ExperimentConfig& config) {
  data::CompoundDataset ds = data::build_dataset(data::load_manifest(config.dataset));
  if (ds.num_classes != config.architecture.num_classes) {
    throw ConfigError("config: architecture has " + std::to_string(config.architecture.num_classes) +
                      " classes, dataset '" + ds.name + "' has " + std::to_string(ds.num_classes));
  }
  return ds;
}

// ---------------------------------------------------------------------------

ModelBundle initial_bundle(const ExperimentConfig& config) {
  return models::init_bundle(config.architecture, mix_seed(config.seed, kInitStream));
}

Stage1Result train_source(const ExperimentConfig& config, const data::LabeledSplit& source) {
  const auto& arch = config.architecture;
  models::validate(arch);
  if (source.size() == 0) throw DataError("stage1: empty source split");
  const Stage1Config& s1 = config.stage1;
  const std::size_t k = arch.num_classes, d = arch.d_c;

  Stage1Result out;
  out.bundle = initial_bundle(config);
  ModelBundle& bundle = out.bundle;
  models::NetOptimizer enc_opt(numerics::AdamHyper{s1.lr}), cls_opt(numerics::AdamHyper{s1.lr});
  Tensor centroids(Shape{k, d});
  std::vector<bool> seen(k, false);
  std::vector<int> ys;

  for (std::size_t epoch = 0; epoch < s1.epochs; ++epoch) {
    EpochRow row{epoch, 0.0, 0.0, 0.0};
    std::size_t correct = 0, batches = 0;
    for (const auto& batch : data::minibatches(source.size(), s1.batch_size,
                                               mix_seed(config.seed, kStage1Stream), epoch)) {
      ys.clear();
      for (std::size_t i : batch) ys.push_back(source.labels[i]);
      Graph g;
      auto enc = models::bind(g, bundle.net(NetId::class_encoder), true);
      auto cls = models::bind(g, bundle.net(NetId::classifier), true);
      Var v = models::encode(arch, enc, g.constant(source.images.batch(batch)), "class_encode");
      Var logits = models::classify(arch, cls, v);
      Var ce = numerics::mean_cross_entropy(logits, ys);

      // Pull toward the running centroid of the true class. A class seen for
      // the first time has its centroid set from this batch, so it exerts no
      // pull yet.
      const Tensor& vv = v.value();
      Tensor target(vv.shape());
      for (std::size_t r = 0; r < batch.size(); ++r) {
        const std::size_t y = static_cast<std::size_t>(ys[r]);
        for (std::size_t j = 0; j < d; ++j) {
          target[r * d + j] = seen[y] ? centroids[y * d + j] : vv[r * d + j];
        }
      }
      Var diff = numerics::sub(v, g.constant(target));
      Var center = numerics::mean(numerics::sum(numerics::mul(diff, diff), 1));
      Var total = numerics::add(ce, numerics::scale(center, s1.centroid_loss_weight));

      std::vector<Var> wrt = enc.vars;
      wrt.insert(wrt.end(), cls.vars.begin(), cls.vars.end());
      auto grads = numerics::gradients(g, total, wrt);
      std::span<const Tensor> all(grads);
      enc_opt.step(bundle.net(NetId::class_encoder), all.first(enc.vars.size()));
      cls_opt.step(bundle.net(NetId::classifier), all.subspan(enc.vars.size()));

      // Running centroids from the pre-step features.
      std::vector<double> sums(k * d, 0.0);
      std::vector<std::size_t> counts(k, 0);
      for (std::size_t r = 0; r < batch.size(); ++r) {
        const std::size_t y = static_cast<std::size_t>(ys[r]);
        ++counts[y];
        for (std::size_t j = 0; j < d; ++j) sums[y * d + j] += vv[r * d + j];
      }
      for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        const float rate = seen[c] ? s1.centroid_rate : 1.0f;
        for (std::size_t j = 0; j < d; ++j) {
          const float mean = static_cast<float>(sums[c * d + j] / static_cast<double>(counts[c]));
          centroids[c * d + j] += rate * (mean - centroids[c * d + j]);
        }
        seen[c] = true;
      }

      const auto pred = argmax(logits.value());
      for (std::size_t r = 0; r < batch.size(); ++r) correct += pred[r] == ys[r];
      row.ce += ce.value().item();
      row.center += center.value().item();
      ++batches;
    }
    row.ce /= static_cast<double>(batches);
    row.center /= static_cast<double>(batches);
    row.accuracy = static_cast<double>(correct) / static_cast<double>(source.size());
    out.curve.push_back(row);
  }
  return out;
}

std::string epoch_curve_csv(const std::vector<EpochRow>& rows) {
  std::string out = "epoch,ce,center,accuracy\n";
  for (const EpochRow& r : rows) {
    out += std::to_string(r.epoch) + "," + io::format_float(r.ce) + "," + io::format_float(r.center) +
           "," + io::format_float(r.accuracy) + "\n";
  }
  return out;
}

Checkpoint stage1_checkpoint(const ExperimentConfig& config, const ModelBundle& bundle) {
  Checkpoint c;
  c.bundle = bundle;
  c.meta = {{"stage", "source"}, {"experiment", config.name}, {"seed", config.seed}};
  return c;
}

Checkpoint disentangled_checkpoint(const ExperimentConfig& config, const ModelBundle& bundle) {
  Checkpoint c = stage1_checkpoint(config, bundle);
  c.meta["stage"] = "disentangled";
  return c;
}

Checkpoint adapted_checkpoint(const ExperimentConfig& config, const Stage2Result& r,
                              const AdaptVariant& variant) {
  Checkpoint c = stage1_checkpoint(config, r.bundle);
  c.meta["stage"] = "adapted";
  c.meta["variant"] = variant.name;
  c.meta["head"] = r.head;
  c.meta["memory_temperature"] = r.memory.temperature;
  c.extras.emplace_back("memory.centroids", r.memory.centroids);
  c.extras.emplace_back("memory.domain_center", r.memory.domain_center);
  return c;
}

memory::Memory memory_from(const Checkpoint& ckpt) {
  require_stage(ckpt, {"adapted"}, "memory_from");
  const Tensor* centroids = ckpt.extra("memory.centroids");
  const Tensor* center = ckpt.extra("memory.domain_center");
  if (!centroids || !center) {
    throw DataError("memory_from: checkpoint lacks memory.centroids or memory.domain_center");
  }
  memory::Memory m;
  m.centroids = *centroids;
  m.domain_center = *center;
  m.temperature = ckpt.meta.value("memory_temperature", m.temperature);
  return m;
}

memory::HeadConfig head_from(const Checkpoint& ckpt) {
  require_stage(ckpt, {"adapted"}, "head_from");
  try {
    return ckpt.meta.at("head").get<memory::HeadConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("head_from: ") + e.what());
  }
}

Stage1Result run_stage1(const ExperimentConfig& config, const data::CompoundDataset& dataset,
                        const std::filesystem::path& out_dir) {
  Stage1Result r = train_source(config, dataset.source_train);
  models::save_checkpoint(out_dir / "stage1.ckpt", stage1_checkpoint(config, r.bundle));
  io::write_atomic(out_dir / "stage1_loss.csv", epoch_curve_csv(r.curve));
  return r;
}

// ---------------------------------------------------------------------------

DisentangleResult run_disentangle(const ExperimentConfig& config, const ModelBundle& bundle,
                                  const data::CompoundDataset& dataset) {
  disentangle::DisentangleConfig cfg = config.disentangle;
  cfg.seed = mix_seed(config.seed, mix_seed(kDisentangleStream, cfg.seed));
  DisentangleResult r;
  r.bundle = bundle;
  r.curve = disentangle::train_disentangler(r.bundle, dataset.source_train, dataset.compound.images, cfg);
  return r;
}

std::vector<double> compound_gaps(const ExperimentConfig& config, const ModelBundle& bundle,
                                  const data::CompoundDataset& dataset) {
  const auto sample = curriculum::gap_sample(dataset.source_train.size(), config.stage2.gap_sample,
                                             mix_seed(config.seed, kGapStream));
  return curriculum::domain_gaps(bundle, dataset.compound.images,
                                 dataset.source_train.images.subset(sample));
}

Stage2Result adapt(const ExperimentConfig& config, const Checkpoint& from,
                   const data::CompoundDataset& dataset, const AdaptVariant& variant) {
  require_stage(from, {"source", "disentangled"}, "adapt");
  if (!(from.bundle.arch == config.architecture)) {
    throw ConfigError("adapt: checkpoint architecture does not match the config");
  }
  if (!variant.adapted) throw ConfigError("adapt: variant '" + variant.name + "' is not adapted");
  Stage2Result r;
  ModelBundle bundle = from.bundle;
  if (from.meta.value("stage", std::string()) == "source") {
    DisentangleResult d = run_disentangle(config, bundle, dataset);
    bundle = std::move(d.bundle);
    r.disentangle_curve = std::move(d.curve);
  }
  r.disentangled = bundle;

  curriculum::CurriculumConfig cc = config.stage2;
  cc.seed = mix_seed(config.seed, mix_seed(kStage2Stream, cc.seed));
  cc.head.gate = variant.gate;
  if (!variant.curriculum) {
    cc.epochs_per_stage *= cc.boundaries.size();
    cc.boundaries = {1.0};
  }
  r.head = cc.head;
  r.memory = memory::build_memory(bundle, dataset.source_train, cc.head.temperature);
  // The head is reset either way. Imprinting starts each class weight at its
  // centroid so the head agrees with the features the critic will move.
  bundle.net(NetId::cosine_head) =
      models::init_net(bundle.arch, NetId::cosine_head, mix_seed(config.seed, kHeadStream));
  if (cc.imprint_head) {
    models::NetParams& head_net = bundle.net(NetId::cosine_head);
    head_net.tensors[head_net.index("w")] = r.memory.centroids;
  }

  r.schedule = curriculum::build_schedule(compound_gaps(config, bundle, dataset), cc.boundaries,
                                          cc.epochs_per_stage);
  curriculum::AdaptState state(std::move(bundle), r.memory, cc.lr, cc.beta1);
  r.stages = curriculum::curriculum_train(state, dataset.source_train, dataset.compound.images,
                                          r.schedule, cc);
  r.bundle = std::move(state.bundle);
  return r;
}

Stage2Result run_stage2(const ExperimentConfig& config, const Checkpoint& from,
                        const data::CompoundDataset& dataset, const std::filesystem::path& out_dir,
                        const AdaptVariant& variant) {
  Stage2Result r = adapt(config, from, dataset, variant);
  if (!r.disentangle_curve.empty()) {
    disentangle::write_loss_curve(out_dir / "disentangle_loss.csv", r.disentangle_curve);
    models::save_checkpoint(out_dir / "disentangled.ckpt", disentangled_checkpoint(config, r.disentangled));
  }
  curriculum::write_schedule(out_dir / "schedule.csv", r.schedule);
  io::write_atomic(out_dir / "stage2_stages.csv", curriculum::stage_report_csv(r.stages));
  models::save_checkpoint(out_dir / "adapted.ckpt", adapted_checkpoint(config, r, variant));
  return r;
}

// ---------------------------------------------------------------------------

const SplitMetric* MetricsReport::find(const std::string& name) const {
  for (const SplitMetric& s : splits) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels) {
  if (predicted.size() != labels.size()) throw DataError("accuracy: prediction and label counts differ");
  if (labels.empty()) throw DataError("accuracy: empty split");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predicted[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

MetricsReport evaluate(const Predictor& predictor, const data::CompoundDataset& dataset) {
  MetricsReport rep;
  auto add = [&](const std::string& name, const std::string& kind, const data::ImageSet& images,
                 const std::vector<int>& labels) {
    if (images.empty()) throw DataError("evaluate: split '" + name + "' is empty");
    rep.splits.push_back({name, kind, images.size(), accuracy(predictor(all_images(images)), labels)});
  };
  add("source_test", "source", dataset.source_test.images, dataset.source_test.labels);
  const auto domains = dataset.compound_by_domain();
  for (std::size_t t = 0; t < domains.size(); ++t) {
    if (domains[t].size() == 0) continue;
    add(domains[t].name, "compound", domains[t].images, domains[t].labels);
  }
  for (const auto& open : dataset.open_domains) add(open.name, "open", open.images, open.labels);

  double c = 0.0, co = 0.0;
  std::size_t nc = 0, nco = 0;
  for (const SplitMetric& s : rep.splits) {
    if (s.kind == "source") continue;
    co += s.accuracy;
    ++nco;
    if (s.kind == "compound") {
      c += s.accuracy;
      ++nc;
    }
  }
  rep.avg_compound = nc ? c / static_cast<double>(nc) : 0.0;
  rep.avg_compound_open = nco ? co / static_cast<double>(nco) : 0.0;
  return rep;
}

MetricsReport evaluate(const ModelBundle& bundle, const memory::Memory& memory,
                       const data::CompoundDataset& dataset, const memory::HeadConfig& head) {
  return evaluate(
      [&](const Tensor& images) { return argmax(memory::predict(bundle, memory, images, head).logits); },
      dataset);
}

MetricsReport evaluate_plain(const ModelBundle& bundle, const data::CompoundDataset& dataset) {
  return evaluate(
      [&](const Tensor& images) {
        return argmax(models::classify(bundle, models::class_encode(bundle, images)));
      },
      dataset);
}

std::string metrics_csv(const MetricsReport& r) {
  std::string out = "split,kind,examples,accuracy\n";
  std::size_t c = 0, co = 0;
  for (const SplitMetric& s : r.splits) {
    out += s.name + "," + s.kind + "," + std::to_string(s.examples) + "," + io::format_float(s.accuracy) + "\n";
    if (s.kind != "source") co += s.examples;
    if (s.kind == "compound") c += s.examples;
  }
  out += "avg_compound,summary," + std::to_string(c) + "," + io::format_float(r.avg_compound) + "\n";
  out += "avg_compound_open,summary," + std::to_string(co) + "," + io::format_float(r.avg_compound_open) +
         "\n";
  return out;
}

nlohmann::json metrics_json(const MetricsReport& r) {
  nlohmann::json splits = nlohmann::json::array();
  for (const SplitMetric& s : r.splits) {
    splits.push_back({{"name", s.name}, {"kind", s.kind}, {"examples", s.examples},
                      {"accuracy", round6(s.accuracy)}});
  }
  return {{"splits", splits},
          {"avg_compound", round6(r.avg_compound)},
          {"avg_compound_open", round6(r.avg_compound_open)}};
}

void write_metrics(const std::filesystem::path& dir, const std::string& stem, const MetricsReport& r) {
  io::write_atomic(dir / (stem + ".csv"), metrics_csv(r));
  io::write_atomic(dir / (stem + ".json"), metrics_json(r).dump(2) + "\n");
}

// ---------------------------------------------------------------------------

KnnProbe knn_probe(const ModelBundle& bundle, const data::CompoundDataset& dataset, std::size_t k) {
  const Tensor images = all_images(dataset.compound.images);
  KnnProbe p;
  p.k = k;
  p.class_rate = knn_domain_probe(models::class_encode(bundle, images), dataset.compound.domain_tags, k);
  p.domain_rate = knn_domain_probe(models::domain_encode(bundle, images), dataset.compound.domain_tags, k);
  return p;
}

std::vector<memory::DiagnosticRow> compound_diagnostics(const ExperimentConfig& config,
                                                        const ModelBundle& bundle,
                                                        const memory::Memory& memory,
                                                        const memory::HeadConfig& head,
                                                        const data::CompoundDataset& dataset) {
  const auto prediction = memory::predict(bundle, memory, all_images(dataset.compound.images), head);
  return memory::diagnostics(prediction, dataset.compound, compound_gaps(config, bundle, dataset));
}

double indicator_gap_probe(const std::vector<memory::DiagnosticRow>& rows) {
  if (rows.size() < 3) throw DataError("indicator_gap_probe: need at least 3 rows");
  std::vector<double> gate, gap;
  for (const auto& r : rows) {
    gate.push_back(r.gate_mean_abs);
    gap.push_back(r.domain_gap);
  }
  return spearman(gate, gap);
}

// ---------------------------------------------------------------------------

std::vector<AdaptVariant> ablation_variants() {
  using memory::GateMode;
  return {{"source-only", false, false, GateMode::none},
          {"+adversarial", true, false, GateMode::none},
          {"+curriculum", true, true, GateMode::none},
          {"+enhancer", true, true, GateMode::unit},
          {"+indicator", true, true, GateMode::learned}};
}

std::vector<AblationRow> ablation_suite(const ExperimentConfig& config,
                                        const data::CompoundDataset& dataset,
                                        const std::filesystem::path& out_dir) {
  const Stage1Result s1 = run_stage1(config, dataset, out_dir);
  const DisentangleResult d = run_disentangle(config, s1.bundle, dataset);
  const Checkpoint from = disentangled_checkpoint(config, d.bundle);
  models::save_checkpoint(out_dir / "disentangled.ckpt", from);
  std::vector<AblationRow> rows;
  for (const AdaptVariant& v : ablation_variants()) {
    AblationRow row{v.name, {}};
    if (!v.adapted) {
      row.metrics = evaluate_plain(s1.bundle, dataset);
      write_metrics(out_dir, "metrics_source_only", row.metrics);
    } else if (v.gate == memory::GateMode::learned) {
      const Stage2Result r = run_stage2(config, from, dataset, out_dir, v);
      row.metrics = evaluate(r.bundle, r.memory, dataset, r.head);
      write_metrics(out_dir, "metrics", row.metrics);
      const auto diag = compound_diagnostics(config, r.bundle, r.memory, r.head, dataset);
      memory::write_diagnostics(out_dir / "diagnostics.csv", diag);
      row.indicator_gap = indicator_gap_probe(diag);
    } else {
      const Stage2Result r = adapt(config, from, dataset, v);
      row.metrics = evaluate(r.bundle, r.memory, dataset, r.head);
    }
    rows.push_back(std::move(row));
    io::write_atomic(out_dir / "ablation.csv", ablation_csv(rows));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,avg_compound,avg_compound_open,indicator_gap";
  if (!rows.empty()) {
    for (const SplitMetric& s : rows.front().metrics.splits) out += "," + s.name;
  }
  out += "\n";
  for (const AblationRow& r : rows) {
    out += r.variant + "," + io::format_float(r.metrics.avg_compound) + "," +
           io::format_float(r.metrics.avg_compound_open) + "," + io::format_float(r.indicator_gap);
    for (const SplitMetric& s : r.metrics.splits) out += "," + io::format_float(s.accuracy);
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

std::size_t export_embeddings(const ModelBundle& bundle, const data::CompoundDataset& dataset,
                              EmbeddingKind kind, const std::filesystem::path& path) {
  struct Part {
    std::string split;
    const data::ImageSet* images;
    const std::vector<int>* labels;
    const std::vector<int>* tags;
  };
  std::vector<Part> parts{{"source_train", &dataset.source_train.images, &dataset.source_train.labels, nullptr},
                          {"source_test", &dataset.source_test.images, &dataset.source_test.labels, nullptr},
                          {"compound", &dataset.compound.images, &dataset.compound.labels,
                           &dataset.compound.domain_tags}};
  for (const auto& open : dataset.open_domains) {
    parts.push_back({open.name, &open.images, &open.labels, &open.domain_tags});
  }
  std::vector<Tensor> features;
  for (const Part& p : parts) {
    const Tensor images = all_images(*p.images);
    features.push_back(kind == EmbeddingKind::class_features ? models::class_encode(bundle, images)
                                                             : models::domain_encode(bundle, images));
  }
  const Tensor all = models::stack_rows(features);
  const std::size_t n = all.dim(0), d = all.dim(1);
  const Pca proj = pca(all, 2);

  std::string head = "id,split,hidden_tag,label";
  std::string csv = head;
  for (std::size_t j = 0; j < d; ++j) csv += ",e" + std::to_string(j);
  csv += "\n";
  std::string pca_csv = head + ",pc1,pc2\n";
  std::size_t row = 0;
  for (const Part& p : parts) {
    for (std::size_t i = 0; i < p.images->size(); ++i, ++row) {
      const int tag = p.tags && !p.tags->empty() ? (*p.tags)[i] : -1;
      const std::string prefix = std::to_string(i) + "," + p.split + "," + std::to_string(tag) + "," +
                                 std::to_string((*p.labels)[i]);
      csv += prefix;
      for (std::size_t j = 0; j < d; ++j) csv += "," + io::format_float(all[row * d + j]);
      csv += "\n";
      pca_csv += prefix + "," + io::format_float(proj.projection[row * 2]) + "," +
                 io::format_float(proj.projection[row * 2 + 1]) + "\n";
    }
  }
  io::write_atomic(path, csv);
  std::filesystem::path companion = path;
  companion.replace_filename(path.stem().string() + ".pca2.csv");
  io::write_atomic(companion, pca_csv);
  return n;
}

// ---------------------------------------------------------------------------

RunResult run_experiment(const ExperimentConfig& config, const data::CompoundDataset& dataset) {
  validate(config);
  const std::filesystem::path out = resolve_output_dir(config);
  io::write_atomic(out / "config.json", config_json(config).dump(2) + "\n");
  RunResult r;
  r.stage1 = run_stage1(config, dataset, out);
  r.stage2 = run_stage2(config, stage1_checkpoint(config, r.stage1.bundle), dataset, out);
  r.source_only = evaluate_plain(r.stage1.bundle, dataset);
  r.adapted = evaluate(r.stage2.bundle, r.stage2.memory, dataset, r.stage2.head);
  write_metrics(out, "metrics_source_only", r.source_only);
  write_metrics(out, "metrics", r.adapted);

  r.knn = knn_probe(r.stage2.disentangled, dataset, config.probe.knn_k);
  r.knn_adapted = knn_probe(r.stage2.bundle, dataset, config.probe.knn_k);
  const auto rows = compound_diagnostics(config, r.stage2.bundle, r.stage2.memory, r.stage2.head, dataset);
  memory::write_diagnostics(out / "diagnostics.csv", rows);
  r.indicator_gap = r.stage2.head.gate == memory::GateMode::learned ? indicator_gap_probe(rows) : 0.0;
  const nlohmann::json probes = {{"knn_k", r.knn.k},
                                 {"knn_class_rate", round6(r.knn.class_rate)},
                                 {"knn_domain_rate", round6(r.knn.domain_rate)},
                                 {"knn_class_rate_adapted", round6(r.knn_adapted.class_rate)},
                                 {"indicator_gap_spearman", round6(r.indicator_gap)}};
  io::write_atomic(out / "probes.json", probes.dump(2) + "\n");
  return r;
}

}  // namespace ocda::harness
