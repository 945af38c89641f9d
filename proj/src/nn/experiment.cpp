#include <nlohmann/json.hpp>

#include "crackbench/log.hpp"
#include "crackbench/report.hpp"
#include "crackbench/training.hpp"

namespace crackbench {

namespace {

using json = nlohmann::ordered_json;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& text) {
  std::filesystem::path p(text);
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

int failure_kind(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e) != nullptr) {
    return 1;
  }
  if (dynamic_cast<const DataError*>(&e) != nullptr ||
      dynamic_cast<const ConfigError*>(&e) != nullptr) {
    return 2;
  }
  return 3;
}

} // namespace

void ExperimentManifest::validate() const {
  if (n_runs < 1) {
    throw UsageError("n_runs must be >= 1");
  }
  if (backbones.empty()) {
    throw UsageError("experiment lists no backbones");
  }
  if (modes.empty()) {
    throw UsageError("experiment lists no modes");
  }
  if (patch_size <= 0) {
    throw UsageError("patch_size must be positive");
  }
  if (dataset_root.empty()) {
    throw UsageError("dataset_root is required");
  }
  for (const auto& name : backbones) {
    BackboneRegistry::instance().get(name);
  }
  train_config.validate();
}

ExperimentManifest experiment_manifest_from_json(std::string_view text,
                                                 const std::filesystem::path& base_dir) {
  static const std::vector<std::string> kKeys = {
      "dataset_root", "split_manifest", "split",        "backbones",  "modes",
      "n_runs",       "base_seed",      "train_config", "output_dir", "weight_store",
      "patch_size",   "save_models"};
  ExperimentManifest m;
  try {
    const auto doc = json::parse(text);
    if (!doc.is_object()) {
      throw UsageError("experiment manifest must be a JSON object");
    }
    for (const auto& [key, value] : doc.items()) {
      if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
        throw UsageError("unknown experiment manifest key '" + key + "'");
      }
    }
    if (doc.contains("dataset_root")) {
      m.dataset_root = resolve(base_dir, doc.at("dataset_root").get<std::string>());
    }
    if (doc.contains("split_manifest") && !doc.at("split_manifest").is_null()) {
      m.split_manifest = resolve(base_dir, doc.at("split_manifest").get<std::string>());
    }
    if (doc.contains("split")) {
      const auto& s = doc.at("split");
      for (const auto& [key, value] : s.items()) {
        if (key != "train_fraction" && key != "val_fraction_of_train" && key != "seed" &&
            key != "stratified") {
          throw UsageError("unknown split key '" + key + "'");
        }
      }
      m.split.train_fraction = s.value("train_fraction", m.split.train_fraction);
      m.split.val_fraction_of_train = s.value("val_fraction_of_train", m.split.val_fraction_of_train);
      m.split.seed = s.value("seed", m.split.seed);
      m.split.stratified = s.value("stratified", m.split.stratified);
    }
    if (doc.contains("backbones")) {
      m.backbones = doc.at("backbones").get<std::vector<std::string>>();
    }
    if (doc.contains("modes")) {
      for (const auto& mode : doc.at("modes")) {
        m.modes.push_back(train_mode_from_string(mode.get<std::string>()));
      }
    }
    m.n_runs = doc.value("n_runs", m.n_runs);
    m.base_seed = doc.value("base_seed", m.base_seed);
    if (doc.contains("train_config")) {
      m.train_config = train_config_from_json(doc.at("train_config").dump());
    }
    if (doc.contains("output_dir")) {
      m.output_dir = resolve(base_dir, doc.at("output_dir").get<std::string>());
    } else {
      m.output_dir = resolve(base_dir, m.output_dir.string());
    }
    if (doc.contains("weight_store") && !doc.at("weight_store").is_null()) {
      m.weight_store = resolve(base_dir, doc.at("weight_store").get<std::string>());
    }
    m.patch_size = doc.value("patch_size", m.patch_size);
    m.save_models = doc.value("save_models", m.save_models);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("malformed experiment manifest: ") + e.what());
  }
  return m;
}

std::string experiment_manifest_to_json(const ExperimentManifest& m) {
  json doc;
  doc["dataset_root"] = m.dataset_root.generic_string();
  doc["split_manifest"] =
      m.split_manifest ? json(m.split_manifest->generic_string()) : json(nullptr);
  doc["split"] = {{"train_fraction", m.split.train_fraction},
                  {"val_fraction_of_train", m.split.val_fraction_of_train},
                  {"seed", m.split.seed},
                  {"stratified", m.split.stratified}};
  doc["backbones"] = m.backbones;
  json modes = json::array();
  for (auto mode : m.modes) {
    modes.push_back(std::string(to_string(mode)));
  }
  doc["modes"] = modes;
  doc["n_runs"] = m.n_runs;
  doc["base_seed"] = m.base_seed;
  doc["train_config"] = json::parse(train_config_to_json(m.train_config));
  doc["output_dir"] = m.output_dir.generic_string();
  doc["weight_store"] = m.weight_store ? json(m.weight_store->generic_string()) : json(nullptr);
  doc["patch_size"] = m.patch_size;
  doc["save_models"] = m.save_models;
  return doc.dump(2) + "\n";
}

ExperimentManifest load_experiment_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("experiment manifest not found: " + path.string());
  }
  const auto base = std::filesystem::absolute(path).parent_path();
  return experiment_manifest_from_json(read_text_file(path), base);
}

ExperimentOutcome run_experiment(const ExperimentManifest& manifest) {
  manifest.validate();
  const auto dataset = load_patch_dataset(manifest.dataset_root, manifest.patch_size);
  log::info("loaded " + std::to_string(dataset.size()) + " patches from " + dataset.root.string());

  std::filesystem::create_directories(manifest.output_dir);
  std::filesystem::path split_path;
  SplitResult parts;
  if (manifest.split_manifest) {
    split_path = std::filesystem::absolute(*manifest.split_manifest);
    parts = resolve_manifest(dataset, load_manifest(split_path));
  } else {
    parts = split(dataset, manifest.split);
    split_path = std::filesystem::absolute(manifest.output_dir / "split.json");
    save_manifest(split_path, make_manifest(dataset, manifest.split, parts));
  }
  if (parts.test.empty()) {
    throw DataError("the split leaves no test patches");
  }
  write_text_file(manifest.output_dir / "effective_manifest.json",
                  experiment_manifest_to_json(manifest));

  const std::span<const ImagePatch> all(dataset.patches);
  const PatchSubset train_set{all, parts.train};
  const PatchSubset val_set{all, parts.val};
  const PatchSubset test_set{all, parts.test};

  BuildOptions build;
  build.weight_store = manifest.weight_store.value_or(default_weight_store());
  build.patch_size = manifest.patch_size;
  build.decision_threshold = manifest.train_config.decision_threshold;

  const auto runs_dir = manifest.output_dir / "runs";
  std::filesystem::create_directories(runs_dir);

  ExperimentOutcome outcome;
  std::vector<RunResult> results;
  for (const auto& backbone : manifest.backbones) {
    for (auto mode : manifest.modes) {
      for (int r = 0; r < manifest.n_runs; ++r) {
        const auto seed = manifest.base_seed + static_cast<std::uint64_t>(r);
        TrainConfig config = manifest.train_config;
        config.seed = seed;
        try {
          RunResult result;
          result.backbone = backbone;
          result.mode = mode;
          result.seed = seed;
          result.config = config;
          result.started_at = utc_timestamp();
          result.dataset_root = std::filesystem::absolute(dataset.root).generic_string();
          result.split_manifest = split_path.generic_string();

          auto model = build_classifier(backbone, mode, seed, build);
          const auto record = train(model, train_set, val_set, config);
          const auto ev =
              evaluate_detailed(model, test_set, config.decision_threshold, config.margin);

          result.confusion = ev.confusion;
          result.metrics = MetricVector::from(ev.confusion);
          result.per_epoch = record.per_epoch;
          result.low_confidence = ev.low_confidence;
          for (std::size_t i = 0; i < test_set.size(); ++i) {
            result.predictions.push_back(
                {dataset.relpaths[parts.test[i]], test_set[i].label, ev.scores[i]});
          }
          result.finished_at = utc_timestamp();
          result.wall_clock_seconds = record.wall_clock_seconds;

          const auto file = runs_dir / run_result_filename(backbone, mode, seed);
          save_run_result(file, result);
          if (manifest.save_models) {
            auto stem = file.stem().string();
            model.save(manifest.output_dir / "models" / (stem + ".pt"), config.digest());
          }
          log::info(backbone + " " + std::string(to_string(mode)) + " seed " + std::to_string(seed) +
                    ": accuracy " + log::fixed(result.metrics.accuracy.value_or(0.0), 4));
          outcome.result_files.push_back(file);
          outcome.metrics[{backbone, mode}].push_back(result.metrics);
          results.push_back(std::move(result));
        } catch (const std::exception& e) {
          log::error(backbone + " " + std::string(to_string(mode)) + " seed " + std::to_string(seed) +
                     " failed: " + e.what());
          outcome.failures.push_back({backbone, mode, seed, e.what(), failure_kind(e)});
        }
      }
    }
  }
  if (!results.empty()) {
    write_aggregate_tables(results, manifest.output_dir);
  }
  return outcome;
}

} // namespace crackbench
