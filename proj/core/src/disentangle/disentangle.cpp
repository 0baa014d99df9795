#include "ocda/disentangle/disentangle.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "ocda/error.hpp"
#include "ocda/io.hpp"
#include "ocda/numerics/nn.hpp"

namespace ocda::disentangle {

using models::NetId;
using numerics::Graph;
using numerics::Shape;

void validate(const DisentangleConfig& c) {
  if (c.batch_size < 1) throw ConfigError("disentangle: batch_size must be at least 1");
  if (!(c.gamma >= 0.0f)) throw ConfigError("disentangle: gamma must be non-negative");
  if (c.disc_steps < 1) throw ConfigError("disentangle: disc_steps must be at least 1");
  if (!(c.lr > 0.0f)) throw ConfigError("disentangle: lr must be positive");
}

void to_json(nlohmann::json& j, const DisentangleConfig& c) {
  j = {{"iterations", c.iterations}, {"batch_size", c.batch_size}, {"gamma", c.gamma},
       {"norm", c.norm == ReconNorm::l2 ? "l2" : "l1"}, {"disc_steps", c.disc_steps},
       {"lr", c.lr}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, DisentangleConfig& c) {
  static const std::set<std::string> keys{"iterations", "batch_size", "gamma", "norm",
                                          "disc_steps", "lr",         "seed"};
  if (!j.is_object()) throw ConfigError("disentangle: expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw ConfigError("disentangle: unknown key '" + key + "'");
  }
  try {
    c = DisentangleConfig{};
    c.iterations = j.value("iterations", c.iterations);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.gamma = j.value("gamma", c.gamma);
    const std::string norm = j.value("norm", std::string("l2"));
    if (norm != "l2" && norm != "l1") throw ConfigError("disentangle: norm must be l2 or l1");
    c.norm = norm == "l2" ? ReconNorm::l2 : ReconNorm::l1;
    c.disc_steps = j.value("disc_steps", c.disc_steps);
    c.lr = j.value("lr", c.lr);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("disentangle: ") + e.what());
  }
}

std::vector<int> argmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("argmax_rows: expected (B, C), got " + numerics::to_string(logits.shape()));
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  std::vector<int> out(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 1; c < cols; ++c) {
      if (logits[r * cols + c] > logits[r * cols + static_cast<std::size_t>(out[r])]) {
        out[r] = static_cast<int>(c);
      }
    }
  }
  return out;
}

std::vector<int> pseudo_label(const ModelBundle& bundle, const Tensor& images) {
  return argmax_rows(models::classify(bundle, models::class_encode(bundle, images)));
}

Var confusion_loss(Var disc_logits, std::span<const int> z_random) {
  return numerics::mean_cross_entropy(disc_logits, z_random);
}

Var discriminator_loss(Var disc_logits, std::span<const int> labels) {
  return numerics::mean_cross_entropy(disc_logits, labels);
}

Var reconstruction_loss(Var decoded, Var original, ReconNorm norm) {
  if (decoded.shape() != original.shape()) {
    throw ShapeError("reconstruction_loss: shapes differ: " + numerics::to_string(decoded.shape()) +
                     " vs " + numerics::to_string(original.shape()));
  }
  const Shape& s = decoded.shape();
  const std::size_t batch = s.empty() ? 1 : s[0];
  const std::size_t per = batch == 0 ? 0 : numerics::numel(s) / batch;
  Var diff = numerics::reshape(numerics::sub(decoded, original), {batch, per});
  if (norm == ReconNorm::l2) return numerics::mean(numerics::l2_norm(diff));
  return numerics::mean(numerics::sum(numerics::abs_value(diff), 1));
}

DisentangleState::DisentangleState(float lr)
    : discriminator(numerics::AdamHyper{lr}),
      domain_encoder(numerics::AdamHyper{lr}),
      decoder(numerics::AdamHyper{lr}) {}

namespace {

Tensor concat_rows(const Tensor& a, const Tensor& b) { return models::stack_rows({a, b}); }

void note(StepTrace* trace, const char* event) {
  if (trace) trace->events.emplace_back(event);
}

}  // namespace

StepReport disentangle_step(ModelBundle& bundle, DisentangleState& state,
                            const Tensor& source_images, std::span<const int> source_labels,
                            const Tensor& target_images, const DisentangleConfig& config, Rng& rng,
                            StepTrace* trace) {
  if (source_images.rank() != 4 || source_images.dim(0) != source_labels.size()) {
    throw ShapeError("disentangle_step: source images and labels disagree");
  }
  const auto& arch = bundle.arch;
  StepReport report;

  // Labels for the discriminator: true on source, pseudo on target.
  std::vector<int> labels(source_labels.begin(), source_labels.end());
  const std::vector<int> pseudo = pseudo_label(bundle, target_images);
  labels.insert(labels.end(), pseudo.begin(), pseudo.end());
  const Tensor images = concat_rows(source_images, target_images);

  // (a) discriminator, on pre-update domain features.
  note(trace, "domain_features");
  const Tensor domain_features = models::domain_encode(bundle, images);
  if (trace) trace->disc_input = domain_features;
  for (std::size_t s = 0; s < config.disc_steps; ++s) {
    Graph g;
    auto d = models::bind(g, bundle.net(NetId::discriminator), true);
    Var loss = discriminator_loss(models::discriminate(arch, d, g.constant(domain_features)), labels);
    report.disc_loss = loss.value().item();
    auto grads = numerics::gradients(g, loss, d.vars);
    state.discriminator.step(bundle.net(NetId::discriminator), grads);
    note(trace, "update:discriminator");
  }

  // (b) domain encoder and decoder against the updated discriminator.
  std::vector<int> z(labels.size());
  for (int& v : z) v = static_cast<int>(uniform_index(rng, arch.num_classes));
  const Tensor class_features = models::class_encode(bundle, images);

  Graph g;
  auto enc = models::bind(g, bundle.net(NetId::domain_encoder), true);
  auto dec = models::bind(g, bundle.net(NetId::decoder), true);
  auto disc = models::bind(g, bundle.net(NetId::discriminator), false);
  Var x = g.constant(images);
  Var v_domain = models::encode(arch, enc, x, "domain_encode");
  Var conf = confusion_loss(models::discriminate(arch, disc, v_domain), z);
  Var recon = models::decode(arch, dec, g.constant(class_features), v_domain);
  Var rec = reconstruction_loss(recon, x, config.norm);
  Var total = numerics::add(conf, numerics::scale(rec, config.gamma));
  report.confusion_loss = conf.value().item();
  report.rec_loss = rec.value().item();

  std::vector<Var> wrt = enc.vars;
  wrt.insert(wrt.end(), dec.vars.begin(), dec.vars.end());
  auto grads = numerics::gradients(g, total, wrt);
  std::span<const Tensor> all(grads);
  state.domain_encoder.step(bundle.net(NetId::domain_encoder), all.first(enc.vars.size()));
  note(trace, "update:domain_encoder");
  state.decoder.step(bundle.net(NetId::decoder), all.subspan(enc.vars.size()));
  note(trace, "update:decoder");
  if (trace) trace->decoder_grads.assign(grads.begin() + static_cast<long>(enc.vars.size()), grads.end());
  return report;
}

std::vector<LossRow> train_disentangler(ModelBundle& bundle, const data::LabeledSplit& source,
                                        const data::ImageSet& target,
                                        const DisentangleConfig& config) {
  validate(config);
  if (source.size() == 0 || target.empty()) {
    throw DataError("train_disentangler: source and target must be non-empty");
  }
  DisentangleState state(config.lr);
  data::BatchCycler source_batches(source.size(), config.batch_size, mix_seed(config.seed, 1));
  data::BatchCycler target_batches(target.size(), config.batch_size, mix_seed(config.seed, 2));
  std::vector<LossRow> rows;
  rows.reserve(config.iterations);
  std::vector<int> labels;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const auto& si = source_batches.next();
    const auto& ti = target_batches.next();
    labels.clear();
    for (std::size_t i : si) labels.push_back(source.labels[i]);
    Rng rng(mix_seed(config.seed, 1000 + it));
    StepReport r = disentangle_step(bundle, state, source.images.batch(si), labels,
                                    target.batch(ti), config, rng);
    rows.push_back({it, r});
  }
  return rows;
}

std::string loss_curve_csv(const std::vector<LossRow>& rows) {
  std::string out = "iteration,disc_loss,confusion_loss,rec_loss\n";
  for (const LossRow& r : rows) {
    out += std::to_string(r.iteration) + "," + io::format_float(r.report.disc_loss) + "," +
           io::format_float(r.report.confusion_loss) + "," + io::format_float(r.report.rec_loss) +
           "\n";
  }
  return out;
}

void write_loss_curve(const std::filesystem::path& path, const std::vector<LossRow>& rows) {
  io::write_atomic(path, loss_curve_csv(rows));
}

}  // namespace ocda::disentangle
