#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crackbench/backbone.hpp"
#include "crackbench/dataset.hpp"
#include "crackbench/scorer.hpp"

namespace crackbench {

namespace nn {
class CrackNetImpl;
}

/// Environment variable overriding the weight store directory.
inline constexpr const char* kWeightStoreEnv = "CRACKBENCH_WEIGHTS";

/// $CRACKBENCH_WEIGHTS when set, else "./weights".
std::filesystem::path default_weight_store();

/// Location of a backbone checkpoint inside a weight store: <store>/<name>.pt
std::filesystem::path checkpoint_path(const std::filesystem::path& store, std::string_view name);

/// Writes seed-initialized checkpoints for the given backbones. These are not
/// ImageNet weights; they let the harness run where no pretrained checkpoint
/// can be obtained. Returns the written paths.
std::vector<std::filesystem::path> init_weight_store(const std::filesystem::path& store,
                                                     std::span<const std::string> names,
                                                     std::uint64_t seed);

/// Checksum of the tensors stored in a backbone checkpoint file.
std::string checkpoint_checksum(const std::filesystem::path& checkpoint);

struct ParameterCounts {
  std::int64_t total = 0;
  std::int64_t trainable = 0;
  std::int64_t frozen = 0;
  std::int64_t head = 0;
};

struct BuildOptions {
  std::filesystem::path weight_store = default_weight_store();
  int patch_size = kDefaultPatchSize;
  double decision_threshold = 0.5;
};

/// A registered backbone with a binary head grafted on, in one of the two
/// trainability regimes.
class ClassifierModel final : public PatchScorer {
public:
  struct Impl;

  explicit ClassifierModel(std::unique_ptr<Impl> impl);
  ClassifierModel(ClassifierModel&&) noexcept;
  ClassifierModel& operator=(ClassifierModel&&) noexcept;
  ~ClassifierModel() override;

  const BackboneDescriptor& backbone() const;
  TrainMode mode() const;
  std::uint64_t seed() const;
  double decision_threshold() const;
  void set_decision_threshold(double threshold);

  /// Crack probabilities in inference mode. Patches are normalized with the
  /// backbone's preprocessing contract (including resizing) here.
  /// Throws DataError for patches of the wrong size.
  std::vector<double> predict(std::span<const ImagePatch> batch) const override;
  int patch_size() const override;

  ParameterCounts parameter_counts() const;

  /// Checksum of backbone parameters and buffers.
  std::string backbone_checksum() const;
  /// Checksum of the backbone as loaded from the weight store.
  const std::string& pretrained_checksum() const;
  std::string head_checksum() const;
  /// Checksum of every parameter and buffer.
  std::string weights_checksum() const;

  /// Writes the full network state to `checkpoint` and a JSON sidecar
  /// {backbone, mode, seed, decision_threshold, preprocessing_id,
  /// training_config_digest, patch_size} next to it (checkpoint + ".json").
  void save(const std::filesystem::path& checkpoint,
            const std::string& training_config_digest = {}) const;

  /// Restores a model written by save(). No weight store is consulted.
  static ClassifierModel load(const std::filesystem::path& checkpoint);

  Impl& impl() { return *impl_; }
  const Impl& impl() const { return *impl_; }

private:
  std::unique_ptr<Impl> impl_;
};

/// Loads the named backbone from the weight store, removes its classifier,
/// attaches a head initialized from `seed` and sets trainability per mode.
///
/// Throws ConfigError for unknown names (listing the registry) and for a
/// missing checkpoint (naming its path).
ClassifierModel build_classifier(std::string_view name, TrainMode mode, std::uint64_t seed,
                                 const BuildOptions& options = {});

/// Sidecar path for a saved model checkpoint.
std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

} // namespace crackbench
