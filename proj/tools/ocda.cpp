// ocda: command-line driver for the two-stage adaptation pipeline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ocda/data/glyphs.hpp"
#include "ocda/data/idx.hpp"
#include "ocda/error.hpp"
#include "ocda/harness/pipeline.hpp"
#include "ocda/io.hpp"

namespace fs = std::filesystem;
using namespace ocda;
using namespace ocda::harness;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct Setup {
  ExperimentConfig config;
  data::CompoundDataset dataset;
  fs::path out;
};

Setup prepare(const fs::path& config_path) {
  Setup s;
  s.config = load_config(config_path);
  s.dataset = load_dataset(s.config);
  s.out = resolve_output_dir(s.config);
  io::write_atomic(s.out / "config.json", config_json(s.config).dump(2) + "\n");
  return s;
}

AdaptVariant variant_named(const std::string& name) {
  for (const AdaptVariant& v : ablation_variants()) {
    if (v.name == name && v.adapted) return v;
  }
  if (name == "full") return {};
  throw ConfigError("unknown adapt variant '" + name +
                    "' (expected full, +adversarial, +curriculum, +enhancer or +indicator)");
}

void print_metrics(const MetricsReport& r) {
  std::cout << metrics_csv(r);
}

MetricsReport evaluate_checkpoint(const Checkpoint& ckpt, const data::CompoundDataset& dataset) {
  if (ckpt.meta.value("stage", std::string()) == "adapted") {
    return evaluate(ckpt.bundle, memory_from(ckpt), dataset, head_from(ckpt));
  }
  return evaluate_plain(ckpt.bundle, dataset);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open compound domain adaptation training lab"};
  app.require_subcommand(1);
  app.footer(std::string("Relative output dirs are placed under $") + kOutputRootEnv + " when set.");

  fs::path config_path, from, ckpt, out_path;
  std::string variant = "full";
  std::size_t k = 0;
  std::string kind = "class";

  auto* train = app.add_subcommand("train-source", "Stage 1: train E_class and the classifier on source");
  train->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  auto* dis = app.add_subcommand("disentangle", "Train the domain encoder from a stage-1 checkpoint");
  dis->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  dis->add_option("--from", from, "Stage-1 checkpoint")->required()->check(CLI::ExistingFile);

  auto* ad = app.add_subcommand("adapt", "Stage 2: memory head and curriculum adaptation");
  ad->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  ad->add_option("--from", from, "Stage-1 or disentangled checkpoint")->required()->check(CLI::ExistingFile);
  ad->add_option("--variant", variant, "full, +adversarial, +curriculum, +enhancer or +indicator");

  auto* ev = app.add_subcommand("eval", "Per-domain accuracy of a checkpoint");
  ev->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  ev->add_option("--ckpt", ckpt, "Checkpoint to evaluate")->required()->check(CLI::ExistingFile);

  auto* probe = app.add_subcommand("probe", "Representation probes");
  probe->require_subcommand(1);
  auto* knn = probe->add_subcommand("knn", "kNN domain identification of E_class vs E_domain");
  auto* ind = probe->add_subcommand("indicator", "Spearman correlation of the indicator with domain gap");
  auto* emb = probe->add_subcommand("embeddings", "Export embeddings and a PCA-2D companion");
  for (auto* p : {knn, ind, emb}) {
    p->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    p->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  }
  knn->add_option("--k", k, "Neighbors (default: probe.knn_k from the config)");
  emb->add_option("--kind", kind, "class or domain")->check(CLI::IsMember({"class", "domain"}));
  emb->add_option("--out", out_path, "Output CSV (default: <output dir>/embeddings_<kind>.csv)");

  auto* abl = app.add_subcommand("ablate", "Run the five-variant ablation suite");
  abl->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  auto* run = app.add_subcommand("run", "Both stages, evaluation and probes");
  run->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  std::size_t digit_count = 1000;
  std::uint64_t digit_seed = 0;
  std::size_t digit_size = 28;
  fs::path images_out, labels_out;
  auto* gen = app.add_subcommand("generate-digits", "Render procedural digits as an IDX pair");
  gen->add_option("--count", digit_count, "Number of images");
  gen->add_option("--seed", digit_seed, "Render seed");
  gen->add_option("--size", digit_size, "Square image size in pixels");
  gen->add_option("--images", images_out, "Images IDX path")->required();
  gen->add_option("--labels", labels_out, "Labels IDX path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen) {
      data::write_idx(data::render_digits(digit_count, digit_seed, digit_size), images_out, labels_out);
      std::cout << "wrote " << digit_count << " digits to " << images_out.string() << "\n";
      return 0;
    }
    Setup s = prepare(config_path);
    if (*train) {
      const Stage1Result r = run_stage1(s.config, s.dataset, s.out);
      const MetricsReport m = evaluate_plain(r.bundle, s.dataset);
      write_metrics(s.out, "metrics_source_only", m);
      print_metrics(m);
    } else if (*dis) {
      const Checkpoint c = models::load_checkpoint(from);
      if (c.meta.value("stage", std::string()) != "source") {
        throw DataError("disentangle: --from must be a stage-1 checkpoint");
      }
      const DisentangleResult r = run_disentangle(s.config, c.bundle, s.dataset);
      disentangle::write_loss_curve(s.out / "disentangle_loss.csv", r.curve);
      models::save_checkpoint(s.out / "disentangled.ckpt", disentangled_checkpoint(s.config, r.bundle));
      const KnnProbe p = knn_probe(r.bundle, s.dataset, s.config.probe.knn_k);
      std::cout << "knn_class_rate," << io::format_float(p.class_rate) << "\nknn_domain_rate,"
                << io::format_float(p.domain_rate) << "\n";
    } else if (*ad) {
      const AdaptVariant v = variant_named(variant);
      const Stage2Result r = run_stage2(s.config, models::load_checkpoint(from), s.dataset, s.out, v);
      const MetricsReport m = evaluate(r.bundle, r.memory, s.dataset, r.head);
      write_metrics(s.out, "metrics", m);
      print_metrics(m);
    } else if (*ev) {
      print_metrics(evaluate_checkpoint(models::load_checkpoint(ckpt), s.dataset));
    } else if (*knn) {
      const KnnProbe p =
          knn_probe(models::load_checkpoint(ckpt).bundle, s.dataset, k ? k : s.config.probe.knn_k);
      std::cout << "k," << p.k << "\nknn_class_rate," << io::format_float(p.class_rate)
                << "\nknn_domain_rate," << io::format_float(p.domain_rate) << "\n";
    } else if (*ind) {
      const Checkpoint c = models::load_checkpoint(ckpt);
      const auto rows = compound_diagnostics(s.config, c.bundle, memory_from(c), head_from(c), s.dataset);
      memory::write_diagnostics(s.out / "diagnostics.csv", rows);
      std::cout << "indicator_gap_spearman," << io::format_float(indicator_gap_probe(rows)) << "\n";
    } else if (*emb) {
      const fs::path path = out_path.empty() ? s.out / ("embeddings_" + kind + ".csv") : out_path;
      const auto which = kind == "class" ? EmbeddingKind::class_features : EmbeddingKind::domain_features;
      const std::size_t rows = export_embeddings(models::load_checkpoint(ckpt).bundle, s.dataset, which, path);
      std::cout << "wrote " << rows << " rows to " << path.string() << "\n";
    } else if (*abl) {
      std::cout << ablation_csv(ablation_suite(s.config, s.dataset, s.out));
    } else if (*run) {
      const RunResult r = run_experiment(s.config, s.dataset);
      std::cout << "source-only\n";
      print_metrics(r.source_only);
      std::cout << "adapted\n";
      print_metrics(r.adapted);
      std::cout << "knn_class_rate," << io::format_float(r.knn.class_rate)
                << "\nknn_class_rate_adapted," << io::format_float(r.knn_adapted.class_rate)
                << "\nknn_domain_rate," << io::format_float(r.knn.domain_rate) << "\nindicator_gap_spearman,"
                << io::format_float(r.indicator_gap) << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return 0;
}
