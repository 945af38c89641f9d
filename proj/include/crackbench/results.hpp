#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crackbench/image.hpp"
#include "crackbench/metrics.hpp"
#include "crackbench/scorer.hpp"

namespace crackbench {

/// Training hyperparameters. Everything that influences a run is recorded
/// here and echoed into its result file.
struct TrainConfig {
  int epochs = 500;
  int batch_size = 32;
  /// Unset means the mode default: 1e-4 for fine_tune_all, 1e-3 head-only.
  std::optional<double> learning_rate;
  std::string optimizer_id = "adam";
  std::string loss_id = "binary_cross_entropy";
  std::uint64_t seed = 0;
  /// Width of the low-confidence band around the decision threshold. Inert
  /// for training and metrics.
  double margin = 0.2;
  std::string sampling = "random_shuffle_per_epoch";
  /// frozen_features only: train the head (true) or evaluate the seeded,
  /// untrained head directly (false).
  bool frozen_head_training = true;
  /// Stop after this many epochs without validation improvement; 0 = off.
  int early_stopping_patience = 0;
  double decision_threshold = 0.5;

  double resolved_learning_rate(TrainMode mode) const;

  /// Throws UsageError when a field is out of range or an identifier unknown.
  void validate() const;

  /// Hex SHA-256 of the canonical JSON form.
  std::string digest() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

std::string train_config_to_json(const TrainConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(std::string_view text);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> val_accuracy;

  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct PredictionRecord {
  std::string path;
  Label label = Label::negative;
  double score = 0.0;

  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

/// One persisted training-and-evaluation run.
struct RunResult {
  std::string backbone;
  TrainMode mode = TrainMode::fine_tune_all;
  std::uint64_t seed = 0;
  TrainConfig config;
  ConfusionMatrix confusion;
  MetricVector metrics;
  std::vector<EpochStats> per_epoch;
  std::string started_at;
  std::string finished_at;
  double wall_clock_seconds = 0.0;
  std::string dataset_root;
  std::string split_manifest;
  std::size_t low_confidence = 0;
  std::vector<PredictionRecord> predictions;
};

/// "<backbone>__<mode>__seed<seed>.json"
std::string run_result_filename(std::string_view backbone, TrainMode mode, std::uint64_t seed);

std::string run_result_to_json(const RunResult& result);
RunResult run_result_from_json(std::string_view text);

void save_run_result(const std::filesystem::path& path, const RunResult& result);
/// Throws DataError naming the file when it is missing or malformed.
RunResult load_run_result(const std::filesystem::path& path);

/// Every "*__seed*.json" run result inside dir (or dir/runs when that exists),
/// sorted by filename.
std::vector<std::filesystem::path> list_result_files(const std::filesystem::path& dir);

/// Current UTC time as ISO-8601.
std::string utc_timestamp();

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

} // namespace crackbench
