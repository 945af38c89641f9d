#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace crackbench {

/// Binary confusion counts; "positive" means cracked.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// A metric value, or nullopt when its denominator is zero.
using MetricValue = std::optional<double>;

MetricValue accuracy(const ConfusionMatrix& cm);
MetricValue precision(const ConfusionMatrix& cm);
MetricValue recall(const ConfusionMatrix& cm);
MetricValue f1(const ConfusionMatrix& cm);

/// Harmonic combination of precision and recall; undefined when either is
/// undefined or both are zero.
MetricValue f1(MetricValue precision, MetricValue recall);

struct MetricVector {
  MetricValue accuracy;
  MetricValue precision;
  MetricValue recall;
  MetricValue f1;

  static MetricVector from(const ConfusionMatrix& cm);

  friend bool operator==(const MetricVector&, const MetricVector&) = default;
};

/// Metric names in table column order.
inline constexpr std::string_view kMetricNames[] = {"accuracy", "precision", "recall", "f1"};

/// Looks up a metric by name ("accuracy", "precision", "recall", "f1").
/// Throws UsageError for unknown names.
MetricValue metric_by_name(const MetricVector& metrics, std::string_view name);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0; // sample standard deviation (n - 1); 0 when n <= 1
  std::size_t n = 0;
  std::size_t excluded = 0; // runs where the metric was undefined
};

struct AggregateMetrics {
  MetricSummary accuracy;
  MetricSummary precision;
  MetricSummary recall;
  MetricSummary f1;

  const MetricSummary& by_name(std::string_view name) const;
};

/// Mean and sample standard deviation over runs, skipping undefined values.
/// Throws UsageError when runs is empty.
AggregateMetrics aggregate(std::span<const MetricVector> runs);

/// Table cell "mean±std": mean to three decimals, std to two significant
/// digits (e.g. "0.996±0.0042"). A summary with n = 0 renders as "n/a".
std::string format_cell(const MetricSummary& summary);

struct TableRow {
  std::string model;
  AggregateMetrics metrics;
};

/// Aligned markdown table with columns Model, Accuracy, Precision, Recall, F1.
std::string render_markdown_table(std::span<const TableRow> rows);

/// CSV with the same columns, each metric split into mean/std/n/excluded.
std::string render_csv_table(std::span<const TableRow> rows);

} // namespace crackbench
