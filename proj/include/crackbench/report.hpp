#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crackbench/metrics.hpp"
#include "crackbench/results.hpp"
#include "crackbench/stats.hpp"

namespace crackbench {

/// Aggregate table rows per training mode, models in registry order.
std::map<TrainMode, std::vector<TableRow>> aggregate_tables(std::span<const RunResult> runs);

/// Writes aggregate_<mode>.csv and aggregate_<mode>.md for every mode present.
/// Returns the written paths.
std::vector<std::filesystem::path> write_aggregate_tables(std::span<const RunResult> runs,
                                                          const std::filesystem::path& out_dir);

/// A misclassified test patch.
struct GalleryEntry {
  std::string backbone;
  TrainMode mode = TrainMode::fine_tune_all;
  std::uint64_t seed = 0;
  std::string path; // relative to the dataset root
  Label label = Label::negative;
  double score = 0.0;
  /// Probability mass on the wrong class: score for false positives,
  /// 1 - score for false negatives.
  double confidence = 0.0;
  std::string file_name; // name of the copy inside gallery/

  bool false_positive() const { return label == Label::negative; }
};

struct ReportOptions {
  double alpha = kDefaultAlpha;
  std::vector<std::string> metrics{"accuracy", "precision", "recall", "f1"};
  /// 0 keeps every misclassification.
  std::size_t gallery_limit = 0;
};

struct Report {
  std::map<TrainMode, std::vector<TableRow>> tables;
  std::map<TrainMode, std::map<std::string, ModelComparison>> anova;
  /// Modes for which no comparison was possible, with the reason.
  std::map<TrainMode, std::string> anova_skipped;
  std::vector<GalleryEntry> gallery;
};

/// Builds the report from the run result files in results_dir. Gallery
/// entries are checked against each run's split manifest when it is readable;
/// an entry outside the test split raises DataError.
Report build_report(const std::filesystem::path& results_dir, const ReportOptions& options = {});

std::string render_report_markdown(const Report& report);

/// Writes report.md and copies gallery patches into out_dir/gallery. The
/// markdown depends only on the result files, so regenerating it is
/// byte-identical.
void write_report(const Report& report, const std::filesystem::path& results_dir,
                  const std::filesystem::path& out_dir);

} // namespace crackbench
