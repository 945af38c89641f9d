#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace crackbench {

/// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
///
/// Evaluated with the modified Lentz continued fraction, using the symmetry
/// I_x(a, b) = 1 - I_{1-x}(b, a) to stay in the rapidly converging region.
/// Relative accuracy is ~1e-14 for the parameter range used by F tails.
double regularized_incomplete_beta(double x, double a, double b);

/// P(F > f) for an F(d1, d2) variable: I_{d2 / (d2 + d1 f)}(d2 / 2, d1 / 2).
/// Throws UsageError for non-positive degrees of freedom or non-finite f.
double f_upper_tail(double f, int d1, int d2);

struct MetricSample {
  std::string group_label;
  std::string metric_name;
  std::vector<double> values;
};

struct AnovaResult {
  double f_statistic = 0.0;
  int df_between = 0;
  int df_within = 0;
  double ss_between = 0.0;
  double ss_within = 0.0;
  double p_value = 1.0;
  double alpha = 0.05;
  bool significant = false;
  /// Within-group variance is zero but group means differ: p reported as 0.
  bool exact_separation = false;
  /// Every observation identical: F defined as 0 and p as 1.
  bool degenerate = false;
};

inline constexpr double kDefaultAlpha = 0.05;

/// Unbalanced one-way ANOVA across k >= 2 groups of the same metric.
/// Throws UsageError for fewer than two groups, empty groups, non-finite
/// values, mixed metric names or N - k < 1.
AnovaResult one_way_anova(std::span<const MetricSample> groups, double alpha = kDefaultAlpha);

struct ModelComparison {
  AnovaResult anova;
  std::map<std::string, std::size_t> group_sizes;
  std::size_t excluded_undefined = 0;
};

/// Loads run result files, groups their metric vectors by model and runs one
/// ANOVA per requested metric.
///
/// When `mode` is set only runs of that training mode are used. Without a
/// filter, runs from several modes are grouped as "<backbone>/<mode>".
/// Throws DataError naming the offending file for missing or malformed input.
std::map<std::string, ModelComparison>
compare_models(std::span<const std::filesystem::path> result_files,
               std::span<const std::string> metric_names, double alpha = kDefaultAlpha,
               const std::optional<std::string>& mode = std::nullopt);

/// Comparison report document:
/// {metric: {F, df: [d1, d2], p, alpha, significant, groups: {model: n}, ...}}.
std::string comparison_to_json(const std::map<std::string, ModelComparison>& comparison);

/// Markdown table of the comparison, one row per metric.
std::string render_comparison_markdown(const std::map<std::string, ModelComparison>& comparison);

} // namespace crackbench
