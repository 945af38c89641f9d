#include "crackbench/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "crackbench/errors.hpp"

namespace crackbench {

namespace {

MetricValue ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) {
    return std::nullopt;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

MetricSummary summarize(std::span<const MetricVector> runs, MetricValue MetricVector::*field) {
  MetricSummary s;
  std::vector<double> values;
  for (const auto& r : runs) {
    if (const auto& v = r.*field) {
      values.push_back(*v);
    } else {
      ++s.excluded;
    }
  }
  s.n = values.size();
  if (values.empty()) {
    return s;
  }
  // Sort so the floating-point sums do not depend on run order.
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) {
      ss += (v - s.mean) * (v - s.mean);
    }
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

} // namespace

MetricValue accuracy(const ConfusionMatrix& cm) { return ratio(cm.tp + cm.tn, cm.total()); }

MetricValue precision(const ConfusionMatrix& cm) { return ratio(cm.tp, cm.tp + cm.fp); }

MetricValue recall(const ConfusionMatrix& cm) { return ratio(cm.tp, cm.tp + cm.fn); }

MetricValue f1(MetricValue p, MetricValue r) {
  if (!p || !r || *p + *r == 0.0) {
    return std::nullopt;
  }
  return 2.0 * (*p * *r) / (*p + *r);
}

MetricValue f1(const ConfusionMatrix& cm) { return f1(precision(cm), recall(cm)); }

MetricVector MetricVector::from(const ConfusionMatrix& cm) {
  return {crackbench::accuracy(cm), crackbench::precision(cm), crackbench::recall(cm),
          crackbench::f1(cm)};
}

MetricValue metric_by_name(const MetricVector& m, std::string_view name) {
  if (name == "accuracy") {
    return m.accuracy;
  }
  if (name == "precision") {
    return m.precision;
  }
  if (name == "recall") {
    return m.recall;
  }
  if (name == "f1") {
    return m.f1;
  }
  throw UsageError("unknown metric '" + std::string(name) +
                   "' (expected accuracy, precision, recall or f1)");
}

const MetricSummary& AggregateMetrics::by_name(std::string_view name) const {
  if (name == "accuracy") {
    return accuracy;
  }
  if (name == "precision") {
    return precision;
  }
  if (name == "recall") {
    return recall;
  }
  if (name == "f1") {
    return f1;
  }
  throw UsageError("unknown metric '" + std::string(name) + "'");
}

AggregateMetrics aggregate(std::span<const MetricVector> runs) {
  if (runs.empty()) {
    throw UsageError("cannot aggregate an empty run list");
  }
  return {summarize(runs, &MetricVector::accuracy), summarize(runs, &MetricVector::precision),
          summarize(runs, &MetricVector::recall), summarize(runs, &MetricVector::f1)};
}

std::string format_cell(const MetricSummary& s) {
  if (s.n == 0) {
    return "n/a";
  }
  std::string out = fixed(s.mean, 3) + "±";
  if (s.std == 0.0) {
    return out + "0";
  }
  // Two significant digits.
  const int magnitude = static_cast<int>(std::floor(std::log10(s.std)));
  return out + fixed(s.std, std::max(0, 1 - magnitude));
}

std::string render_markdown_table(std::span<const TableRow> rows) {
  static constexpr std::array<const char*, 5> kHeader{"Model", "Accuracy", "Precision", "Recall",
                                                      "F1"};
  std::vector<std::array<std::string, 5>> cells;
  for (const auto& r : rows) {
    cells.push_back({r.model, format_cell(r.metrics.accuracy), format_cell(r.metrics.precision),
                     format_cell(r.metrics.recall), format_cell(r.metrics.f1)});
  }

  // Width in code points; "±" is two bytes in UTF-8.
  auto display_width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) {
      w += (c & 0xC0) != 0x80;
    }
    return w;
  };
  std::array<std::size_t, 5> width{};
  for (std::size_t c = 0; c < 5; ++c) {
    width[c] = display_width(kHeader[c]);
    for (const auto& row : cells) {
      width[c] = std::max(width[c], display_width(row[c]));
    }
  }

  std::ostringstream os;
  auto emit = [&](auto&& cell_at) {
    os << '|';
    for (std::size_t c = 0; c < 5; ++c) {
      const std::string cell = cell_at(c);
      os << ' ' << cell << std::string(width[c] - display_width(cell), ' ') << " |";
    }
    os << '\n';
  };
  emit([&](std::size_t c) { return std::string(kHeader[c]); });
  emit([&](std::size_t c) { return std::string(width[c], '-'); });
  for (const auto& row : cells) {
    emit([&](std::size_t c) { return row[c]; });
  }
  return os.str();
}

std::string render_csv_table(std::span<const TableRow> rows) {
  std::ostringstream os;
  os << "model";
  for (auto name : kMetricNames) {
    os << ',' << name << "_mean," << name << "_std," << name << "_n," << name << "_excluded";
  }
  os << '\n';
  char buf[64];
  for (const auto& r : rows) {
    os << r.model;
    for (auto name : kMetricNames) {
      const auto& s = r.metrics.by_name(name);
      os << ',';
      if (s.n > 0) {
        std::snprintf(buf, sizeof buf, "%.17g", s.mean);
        os << buf;
      }
      os << ',';
      if (s.n > 0) {
        std::snprintf(buf, sizeof buf, "%.17g", s.std);
        os << buf;
      }
      os << ',' << s.n << ',' << s.excluded;
    }
    os << '\n';
  }
  return os.str();
}

} // namespace crackbench
