#include "crackbench/scorer.hpp"

#include <cmath>
#include <string>

#include "crackbench/errors.hpp"

namespace crackbench {

std::string_view to_string(TrainMode mode) {
  return mode == TrainMode::frozen_features ? "frozen_features" : "fine_tune_all";
}

TrainMode train_mode_from_string(std::string_view text) {
  if (text == "frozen_features") {
    return TrainMode::frozen_features;
  }
  if (text == "fine_tune_all") {
    return TrainMode::fine_tune_all;
  }
  throw UsageError("unknown training mode '" + std::string(text) +
                   "' (expected frozen_features or fine_tune_all)");
}

Label classify(double probability, double threshold) {
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw UsageError("probability " + std::to_string(probability) + " outside [0, 1]");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw UsageError("threshold " + std::to_string(threshold) + " outside (0, 1)");
  }
  return probability >= threshold ? Label::positive : Label::negative;
}

bool within_abstain_band(double probability, double threshold, double margin) {
  return margin > 0.0 && std::abs(probability - threshold) < margin / 2.0;
}

} // namespace crackbench
