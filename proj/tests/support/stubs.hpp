#pragma once

#include <functional>
#include <vector>

#include "crackbench/scorer.hpp"

namespace crackbench::testing {

/// Scores each patch with a caller-supplied function.
class FunctionScorer : public PatchScorer {
public:
  FunctionScorer(int patch_size, std::function<double(const ImagePatch&)> fn)
      : patch_size_(patch_size), fn_(std::move(fn)) {}

  std::vector<double> predict(std::span<const ImagePatch> batch) const override {
    ++calls;
    std::vector<double> out;
    for (const auto& p : batch) {
      ++scored;
      out.push_back(fn_(p));
    }
    return out;
  }
  int patch_size() const override { return patch_size_; }

  mutable std::size_t calls = 0;
  mutable std::size_t scored = 0;

private:
  int patch_size_;
  std::function<double(const ImagePatch&)> fn_;
};

inline FunctionScorer constant_scorer(int patch_size, double value) {
  return FunctionScorer(patch_size, [value](const ImagePatch&) { return value; });
}

/// Echoes the true label as a probability.
inline FunctionScorer oracle_scorer(int patch_size) {
  return FunctionScorer(patch_size, [](const ImagePatch& p) {
    return p.label == Label::positive ? 1.0 : 0.0;
  });
}

} // namespace crackbench::testing
