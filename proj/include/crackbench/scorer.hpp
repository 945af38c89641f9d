#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "crackbench/image.hpp"

namespace crackbench {

enum class TrainMode {
  frozen_features, // backbone fixed; only the head may learn
  fine_tune_all,   // every parameter learns
};

std::string_view to_string(TrainMode mode);
TrainMode train_mode_from_string(std::string_view text);

/// Anything that maps raw patches to crack probabilities. ClassifierModel is
/// the production implementation; evaluation and localization only need this.
class PatchScorer {
public:
  virtual ~PatchScorer() = default;

  /// One probability in [0, 1] per patch, in input order.
  virtual std::vector<double> predict(std::span<const ImagePatch> batch) const = 0;

  /// Side length of the patches predict() accepts.
  virtual int patch_size() const = 0;
};

/// positive iff probability >= threshold. Throws UsageError when probability
/// is outside [0, 1] or threshold outside (0, 1).
Label classify(double probability, double threshold);

/// True when the probability lies within margin / 2 of the threshold. Reported
/// as low confidence; never changes the classification.
bool within_abstain_band(double probability, double threshold, double margin);

} // namespace crackbench
