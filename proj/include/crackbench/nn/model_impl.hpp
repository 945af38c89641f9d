#pragma once

#include <mutex>
#include <string>

#include "crackbench/model.hpp"
#include "crackbench/nn/network.hpp"

namespace crackbench {

struct ClassifierModel::Impl {
  BackboneDescriptor descriptor;
  TrainMode mode = TrainMode::fine_tune_all;
  std::uint64_t seed = 0;
  double decision_threshold = 0.5;
  int patch_size = kDefaultPatchSize;
  nn::CrackNet net{nullptr};
  std::string pretrained_checksum;
  /// Serializes inference; module train/eval flags are shared state.
  mutable std::mutex inference_mutex;
};

} // namespace crackbench
