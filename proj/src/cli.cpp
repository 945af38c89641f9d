#include "crackbench/cli.hpp"

#include <optional>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>

#include "crackbench/errors.hpp"
#include "crackbench/localize.hpp"
#include "crackbench/log.hpp"
#include "crackbench/report.hpp"
#include "crackbench/stats.hpp"
#include "crackbench/training.hpp"

namespace crackbench::cli {

namespace {

struct IngestArgs {
  std::string root;
  int patch_size = kDefaultPatchSize;
};

struct SplitArgs {
  std::string root;
  int patch_size = kDefaultPatchSize;
  SplitSpec spec;
  bool unstratified = false;
  std::string out;
};

struct RunArgs {
  std::optional<std::string> manifest;
  std::optional<std::string> dataset_root;
  std::optional<std::string> split_manifest;
  std::optional<std::string> output_dir;
  std::optional<std::string> weights;
  std::vector<std::string> backbones;
  std::vector<std::string> modes;
  std::optional<int> n_runs;
  std::optional<std::uint64_t> base_seed;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
  std::optional<double> threshold;
  std::optional<double> margin;
  std::optional<int> patience;
  std::optional<int> patch_size;
  bool untrained_head = false;
  bool no_save_models = false;
};

struct CompareArgs {
  std::string results;
  double alpha = kDefaultAlpha;
  std::vector<std::string> metrics;
  std::optional<std::string> mode;
  std::optional<std::string> out;
};

struct LocalizeArgs {
  std::string model;
  std::string image;
  std::optional<int> window;
  std::optional<int> stride;
  double threshold = 0.5;
  bool cover_edges = false;
  double merge_iou = kDefaultMergeIou;
  bool no_merge = false;
  int batch_size = 32;
  std::optional<std::string> out;
  std::optional<std::string> annotate;
};

struct ReportArgs {
  std::string results;
  std::optional<std::string> out;
  double alpha = kDefaultAlpha;
  std::size_t gallery_limit = 0;
};

struct InitWeightsArgs {
  std::optional<std::string> weights;
  std::vector<std::string> backbones;
  std::uint64_t seed = 0;
};

std::vector<std::string> all_metric_names() {
  return {std::begin(kMetricNames), std::end(kMetricNames)};
}

int cmd_ingest(const IngestArgs& a, std::ostream& out) {
  const auto ds = load_patch_dataset(a.root, a.patch_size);
  const auto count = [&](Label l) {
    auto it = ds.class_counts.find(l);
    return it == ds.class_counts.end() ? std::size_t{0} : it->second;
  };
  fmt::print(out, "{} patches ({}/{})\n", ds.size(), count(Label::negative),
             count(Label::positive));
  fmt::print(out, "negative {}, positive {}, skipped {}\n", count(Label::negative),
             count(Label::positive), ds.skipped);
  return kExitOk;
}

int cmd_split(const SplitArgs& a, std::ostream& out) {
  auto spec = a.spec;
  spec.stratified = !a.unstratified;
  const auto ds = load_patch_dataset(a.root, a.patch_size);
  const auto parts = split(ds, spec);
  save_manifest(a.out, make_manifest(ds, spec, parts));
  fmt::print(out, "train {}, val {}, test {} -> {}\n", parts.train.size(), parts.val.size(),
             parts.test.size(), a.out);
  return kExitOk;
}

ExperimentManifest effective_manifest(const RunArgs& a) {
  ExperimentManifest m;
  if (a.manifest) {
    m = load_experiment_manifest(*a.manifest);
  } else {
    m.output_dir = std::filesystem::absolute(m.output_dir);
  }
  const auto abs = [](const std::string& p) { return std::filesystem::absolute(p); };
  if (a.dataset_root) {
    m.dataset_root = abs(*a.dataset_root);
  }
  if (a.split_manifest) {
    m.split_manifest = abs(*a.split_manifest);
  }
  if (a.output_dir) {
    m.output_dir = abs(*a.output_dir);
  }
  if (a.weights) {
    m.weight_store = abs(*a.weights);
  }
  if (!a.backbones.empty()) {
    m.backbones = a.backbones;
  }
  if (!a.modes.empty()) {
    m.modes.clear();
    for (const auto& mode : a.modes) {
      m.modes.push_back(train_mode_from_string(mode));
    }
  }
  if (a.n_runs) {
    m.n_runs = *a.n_runs;
  }
  if (a.base_seed) {
    m.base_seed = *a.base_seed;
  }
  if (a.epochs) {
    m.train_config.epochs = *a.epochs;
  }
  if (a.batch_size) {
    m.train_config.batch_size = *a.batch_size;
  }
  if (a.learning_rate) {
    m.train_config.learning_rate = *a.learning_rate;
  }
  if (a.threshold) {
    m.train_config.decision_threshold = *a.threshold;
  }
  if (a.margin) {
    m.train_config.margin = *a.margin;
  }
  if (a.patience) {
    m.train_config.early_stopping_patience = *a.patience;
  }
  if (a.patch_size) {
    m.patch_size = *a.patch_size;
  }
  if (a.untrained_head) {
    m.train_config.frozen_head_training = false;
  }
  if (a.no_save_models) {
    m.save_models = false;
  }
  if (m.backbones.empty()) {
    for (const auto& d : list_backbones()) {
      m.backbones.push_back(d.name);
    }
  }
  if (m.modes.empty()) {
    m.modes = {TrainMode::frozen_features, TrainMode::fine_tune_all};
  }
  if (!m.weight_store) {
    m.weight_store = default_weight_store();
  }
  return m;
}

int cmd_run(const RunArgs& a, std::ostream& out) {
  const auto manifest = effective_manifest(a);
  const auto outcome = run_experiment(manifest);
  fmt::print(out, "{} run result(s) in {}\n", outcome.result_files.size(),
             (manifest.output_dir / "runs").string());
  for (const auto& f : outcome.failures) {
    fmt::print(out, "FAILED {} {} seed {}: {}\n", f.backbone, to_string(f.mode), f.seed,
               f.message);
  }
  return outcome.failures.empty() ? kExitOk : outcome.failures.front().kind;
}

int cmd_compare(const CompareArgs& a, std::ostream& out) {
  const auto files = list_result_files(a.results);
  const auto metrics = a.metrics.empty() ? all_metric_names() : a.metrics;
  if (a.mode) {
    train_mode_from_string(*a.mode);
  }
  const auto target = a.out ? std::filesystem::path(*a.out)
                            : std::filesystem::path(a.results) / "comparison.json";

  // A single model group has nothing to compare against; say so and succeed.
  std::set<std::pair<std::string, TrainMode>> groups;
  for (const auto& f : files) {
    const auto r = load_run_result(f);
    if (!a.mode || to_string(r.mode) == *a.mode) {
      groups.emplace(r.backbone, r.mode);
    }
  }
  if (groups.size() == 1) {
    const auto reason = "only one model group (" + groups.begin()->first + ", " +
                        std::string(to_string(groups.begin()->second)) + ")";
    out << "ANOVA not computed: " << reason << "\n";
    write_text_file(target, nlohmann::json{{"skipped", reason}}.dump(2) + "\n");
    return kExitOk;
  }

  const auto comparison = compare_models(files, metrics, a.alpha, a.mode);
  out << render_comparison_markdown(comparison);
  write_text_file(target, comparison_to_json(comparison));
  return kExitOk;
}

int cmd_localize(const LocalizeArgs& a, std::ostream& out) {
  const auto model = ClassifierModel::load(a.model);
  const auto pixels = read_rgb(a.image);
  if (!pixels) {
    throw DataError("cannot decode image " + a.image);
  }
  WindowConfig cfg;
  cfg.window_size = a.window.value_or(model.patch_size());
  cfg.stride = a.stride.value_or(cfg.window_size);
  cfg.score_threshold = a.threshold;
  cfg.cover_edges = a.cover_edges;
  cfg.batch_size = a.batch_size;
  cfg.validate();
  const SourceImage image{*pixels, std::filesystem::path(a.image).filename().string()};
  auto detections = slide(model, image, cfg);
  const double merge_iou = a.no_merge ? 0.0 : a.merge_iou;
  if (!a.no_merge) {
    detections = merge_boxes(detections, a.merge_iou);
  }
  const auto doc = detections_to_json(image.identifier, cfg, merge_iou, detections);
  if (a.out) {
    write_text_file(*a.out, doc);
  } else {
    out << doc;
  }
  if (a.annotate) {
    write_rgb(*a.annotate, annotate(*pixels, detections));
  }
  log::info(std::to_string(detections.size()) + " detection(s) in " + a.image);
  return kExitOk;
}

int cmd_report(const ReportArgs& a, std::ostream& out) {
  ReportOptions options;
  options.alpha = a.alpha;
  options.gallery_limit = a.gallery_limit;
  const auto report = build_report(a.results, options);
  const auto out_dir = a.out ? std::filesystem::path(*a.out) : std::filesystem::path(a.results);
  write_report(report, a.results, out_dir);
  fmt::print(out, "{} ({} gallery entr{})\n", (out_dir / "report.md").string(),
             report.gallery.size(), report.gallery.size() == 1 ? "y" : "ies");
  return kExitOk;
}

int cmd_init_weights(const InitWeightsArgs& a, std::ostream& out) {
  std::vector<std::string> names = a.backbones;
  if (names.empty()) {
    for (const auto& d : list_backbones()) {
      names.push_back(d.name);
    }
  }
  const auto store = a.weights ? std::filesystem::path(*a.weights) : default_weight_store();
  for (const auto& path : init_weight_store(store, names, a.seed)) {
    fmt::print(out, "{}\n", path.string());
  }
  return kExitOk;
}

} // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e) != nullptr ||
      dynamic_cast<const CLI::ParseError*>(&e) != nullptr) {
    return kExitUsage;
  }
  if (dynamic_cast<const DataError*>(&e) != nullptr ||
      dynamic_cast<const ConfigError*>(&e) != nullptr) {
    return kExitData;
  }
  return kExitRuntime;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Benchmark harness for transfer-learned concrete crack classifiers."};
  app.name(args.empty() ? "crackbench" : std::filesystem::path(args[0]).filename().string());
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->capture_default_str();
  app.footer(std::string("Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime or "
                         "training failure.\nThe weight store defaults to $") +
             kWeightStoreEnv + " when set, else ./weights.");

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Load a patch dataset and print class counts "
                                                  "as '<total> patches (<negative>/<positive>)'");
  ingest_cmd->add_option("--root", ingest.root, "Directory holding Positive/ and Negative/")
      ->required();
  ingest_cmd->add_option("--patch-size", ingest.patch_size, "Patch side length")
      ->capture_default_str();

  SplitArgs split_args;
  auto* split_cmd = app.add_subcommand("split", "Write a seeded train/val/test split manifest");
  split_cmd->add_option("--root", split_args.root, "Dataset root")->required();
  split_cmd->add_option("--patch-size", split_args.patch_size)->capture_default_str();
  split_cmd->add_option("--train-fraction", split_args.spec.train_fraction)
      ->capture_default_str();
  split_cmd->add_option("--val-fraction", split_args.spec.val_fraction_of_train,
                        "Validation share of the training portion")
      ->capture_default_str();
  split_cmd->add_option("--seed", split_args.spec.seed)->capture_default_str();
  split_cmd->add_flag("--unstratified", split_args.unstratified,
                      "Shuffle the whole dataset instead of each class");
  split_cmd->add_option("--out", split_args.out, "Manifest path")->required();

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand(
      "run", "Train and evaluate every (backbone, mode, seed) cell of an experiment. Flags "
             "override manifest values, which override defaults.");
  run_cmd->add_option("--manifest", run_args.manifest, "Experiment manifest (JSON)");
  run_cmd->add_option("--dataset-root", run_args.dataset_root);
  run_cmd->add_option("--split-manifest", run_args.split_manifest,
                      "Pinned split; drawn from the manifest's split settings when absent");
  run_cmd->add_option("--output-dir", run_args.output_dir);
  run_cmd->add_option("--weights", run_args.weights, "Weight store directory");
  run_cmd->add_option("--backbone", run_args.backbones, "Backbone name (repeatable)");
  run_cmd->add_option("--mode", run_args.modes, "frozen_features or fine_tune_all (repeatable)");
  run_cmd->add_option("--n-runs", run_args.n_runs);
  run_cmd->add_option("--base-seed", run_args.base_seed, "Run r uses base seed + r");
  run_cmd->add_option("--epochs", run_args.epochs);
  run_cmd->add_option("--batch-size", run_args.batch_size);
  run_cmd->add_option("--learning-rate", run_args.learning_rate);
  run_cmd->add_option("--threshold", run_args.threshold, "Decision threshold");
  run_cmd->add_option("--margin", run_args.margin, "Width of the low-confidence band");
  run_cmd->add_option("--patience", run_args.patience, "Early stopping patience (0 = off)");
  run_cmd->add_option("--patch-size", run_args.patch_size);
  run_cmd->add_flag("--untrained-head", run_args.untrained_head,
                    "frozen_features: evaluate the seeded head without training it");
  run_cmd->add_flag("--no-save-models", run_args.no_save_models);

  CompareArgs compare;
  auto* compare_cmd =
      app.add_subcommand("compare", "One-way ANOVA across models for each metric");
  compare_cmd->add_option("--results", compare.results, "Results directory")->required();
  compare_cmd->add_option("--alpha", compare.alpha)->capture_default_str();
  compare_cmd->add_option("--metric", compare.metrics, "Metric name (repeatable; default all)");
  compare_cmd->add_option("--mode", compare.mode, "Restrict to one training mode");
  compare_cmd->add_option("--out", compare.out,
                          "Comparison JSON path (default <results>/comparison.json)");

  LocalizeArgs loc;
  auto* loc_cmd = app.add_subcommand("localize", "Slide a saved model over an image");
  loc_cmd->add_option("--model", loc.model, "Model checkpoint written by run")->required();
  loc_cmd->add_option("--image", loc.image, "Image to scan")->required();
  loc_cmd->add_option("--window", loc.window, "Window size (default: model patch size)");
  loc_cmd->add_option("--stride", loc.stride, "Stride (default: window size)");
  loc_cmd->add_option("--threshold", loc.threshold, "Score threshold")->capture_default_str();
  loc_cmd->add_flag("--cover-edges", loc.cover_edges, "Add clamped windows at the margins");
  loc_cmd->add_option("--merge-iou", loc.merge_iou)->capture_default_str();
  loc_cmd->add_flag("--no-merge", loc.no_merge, "Emit raw window detections");
  loc_cmd->add_option("--batch-size", loc.batch_size)->capture_default_str();
  loc_cmd->add_option("--out", loc.out, "Detection JSON path (default stdout)");
  loc_cmd->add_option("--annotate", loc.annotate, "Write a copy of the image with boxes");

  ReportArgs rep;
  auto* rep_cmd = app.add_subcommand("report", "Render tables, ANOVA and misclassified patches");
  rep_cmd->add_option("--results", rep.results, "Results directory")->required();
  rep_cmd->add_option("--out", rep.out, "Output directory (default: results directory)");
  rep_cmd->add_option("--alpha", rep.alpha)->capture_default_str();
  rep_cmd->add_option("--gallery-limit", rep.gallery_limit, "0 keeps every entry")
      ->capture_default_str();

  InitWeightsArgs init;
  auto* init_cmd = app.add_subcommand(
      "init-weights", "Write seed-initialized backbone checkpoints into a weight store");
  init_cmd->add_option("--weights", init.weights, "Weight store directory");
  init_cmd->add_option("--backbone", init.backbones, "Backbone name (repeatable; default all)");
  init_cmd->add_option("--seed", init.seed)->capture_default_str();

  std::vector<const char*> argv;
  for (const auto& a : args) {
    argv.push_back(a.c_str());
  }
  if (argv.empty()) {
    argv.push_back("crackbench");
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    log::use_stderr();
    log::set_level(log_level);
    if (*ingest_cmd) {
      return cmd_ingest(ingest, out);
    }
    if (*split_cmd) {
      return cmd_split(split_args, out);
    }
    if (*run_cmd) {
      return cmd_run(run_args, out);
    }
    if (*compare_cmd) {
      return cmd_compare(compare, out);
    }
    if (*loc_cmd) {
      return cmd_localize(loc, out);
    }
    if (*rep_cmd) {
      return cmd_report(rep, out);
    }
    if (*init_cmd) {
      return cmd_init_weights(init, out);
    }
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return exit_code_for(e);
  }
  return kExitUsage;
}

} // namespace crackbench::cli
