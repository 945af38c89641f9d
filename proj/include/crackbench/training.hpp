#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crackbench/dataset.hpp"
#include "crackbench/errors.hpp"
#include "crackbench/metrics.hpp"
#include "crackbench/model.hpp"
#include "crackbench/results.hpp"

namespace crackbench {

/// A view of selected patches from a larger collection. Indices refer to
/// `patches`; the collection must outlive the subset.
struct PatchSubset {
  std::span<const ImagePatch> patches;
  std::vector<std::size_t> indices;

  /// Every patch in order.
  static PatchSubset all(std::span<const ImagePatch> patches);

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
  const ImagePatch& operator[](std::size_t i) const { return patches[indices[i]]; }
  std::vector<ImagePatch> materialize() const;
};

struct TrainRunRecord {
  TrainConfig config;
  std::string model_id;
  TrainMode mode = TrainMode::fine_tune_all;
  std::vector<EpochStats> per_epoch;
  /// Checksum of every network tensor after training.
  std::string final_weights_checksum;
  double wall_clock_seconds = 0.0;
  /// False for the frozen sub-mode that evaluates the seeded head untouched.
  bool head_trained = true;
  bool stopped_early = false;
};

/// Raised when the loss stops being finite. Carries the epochs that completed
/// with a finite loss.
class TrainingDiverged : public TrainingError {
public:
  TrainingDiverged(const std::string& message, TrainRunRecord partial)
      : TrainingError(message), partial_(std::move(partial)) {}
  const TrainRunRecord& partial() const { return partial_; }

private:
  TrainRunRecord partial_;
};

/// Optimizes the model's trainable partition with binary cross-entropy.
/// The epoch order is a seeded shuffle drawn from config.seed. In
/// frozen_features mode the backbone stays in inference mode and its pooled
/// features are computed once, so only the head sees gradient updates.
///
/// Throws UsageError for an empty or single-class training set.
TrainRunRecord train(ClassifierModel& model, const PatchSubset& train_set,
                     const PatchSubset& val_set, const TrainConfig& config);

/// Confusion matrix of classify(predict(x), threshold) against labels.
/// Throws UsageError for an empty test set.
ConfusionMatrix evaluate(const PatchScorer& model, const PatchSubset& test_set, double threshold);

struct Evaluation {
  ConfusionMatrix confusion;
  std::vector<double> scores;
  /// Items within the abstain band around the threshold.
  std::uint64_t low_confidence = 0;
};

Evaluation evaluate_detailed(const PatchScorer& model, const PatchSubset& test_set,
                             double threshold, double margin);

/// Declarative experiment description. Relative paths in a manifest file are
/// resolved against the manifest's directory.
struct ExperimentManifest {
  std::filesystem::path dataset_root;
  /// Pinned split; when absent one is drawn from `split` and written to the
  /// output directory.
  std::optional<std::filesystem::path> split_manifest;
  SplitSpec split;
  std::vector<std::string> backbones;
  std::vector<TrainMode> modes;
  int n_runs = 5;
  /// Run r uses seed base_seed + r.
  std::uint64_t base_seed = 0;
  TrainConfig train_config;
  std::filesystem::path output_dir = "results";
  std::optional<std::filesystem::path> weight_store;
  int patch_size = kDefaultPatchSize;
  bool save_models = true;

  /// Throws UsageError on invalid values.
  void validate() const;
};

ExperimentManifest experiment_manifest_from_json(std::string_view text,
                                                 const std::filesystem::path& base_dir);
std::string experiment_manifest_to_json(const ExperimentManifest& manifest);
ExperimentManifest load_experiment_manifest(const std::filesystem::path& path);

struct CellFailure {
  std::string backbone;
  TrainMode mode = TrainMode::fine_tune_all;
  std::uint64_t seed = 0;
  std::string message;
  /// Exit-code class of the failure: 1 usage, 2 data, 3 runtime.
  int kind = 3;
};

struct ExperimentOutcome {
  std::vector<std::filesystem::path> result_files;
  std::map<std::pair<std::string, TrainMode>, std::vector<MetricVector>> metrics;
  std::vector<CellFailure> failures;
};

/// Runs n_runs seeds for every (backbone, mode) cell against one pinned test
/// split. Writes <output_dir>/runs/*.json, the effective manifest, optional
/// model artifacts and per-mode aggregate tables. A failing run is recorded
/// and its siblings still execute.
ExperimentOutcome run_experiment(const ExperimentManifest& manifest);

} // namespace crackbench
