#include "crackbench/stats.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "crackbench/errors.hpp"
#include "crackbench/results.hpp"

namespace crackbench {

namespace {

// Continued fraction for I_x(a, b), modified Lentz evaluation.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEpsilon = 1e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) {
    d = kTiny;
  }
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) {
      d = kTiny;
    }
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) {
      c = kTiny;
    }
    d = 1.0 / d;
    h *= d * c;

    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) {
      d = kTiny;
    }
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) {
      c = kTiny;
    }
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEpsilon) {
      return h;
    }
  }
  spdlog::warn("incomplete beta continued fraction did not converge (a={}, b={}, x={})", a, b, x);
  return h;
}

bool all_finite(const std::vector<double>& values) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      return false;
    }
  }
  return true;
}

} // namespace

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0 && b > 0.0) || !(x >= 0.0 && x <= 1.0)) {
    throw UsageError("incomplete beta requires a, b > 0 and x in [0, 1]");
  }
  if (x == 0.0 || x == 1.0) {
    return x;
  }
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double f_upper_tail(double f, int d1, int d2) {
  if (d1 <= 0 || d2 <= 0) {
    throw UsageError("F distribution degrees of freedom must be positive");
  }
  if (std::isnan(f)) {
    throw UsageError("F statistic is NaN");
  }
  if (f <= 0.0) {
    return 1.0;
  }
  if (std::isinf(f)) {
    return 0.0;
  }
  const double x = d2 / (d2 + d1 * f);
  return regularized_incomplete_beta(x, 0.5 * d2, 0.5 * d1);
}

AnovaResult one_way_anova(std::span<const MetricSample> groups, double alpha) {
  if (groups.size() < 2) {
    throw UsageError("ANOVA needs at least two groups");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw UsageError("alpha must lie in (0, 1)");
  }
  std::size_t total = 0;
  double grand_sum = 0.0;
  for (const auto& g : groups) {
    if (g.values.empty()) {
      throw UsageError("group '" + g.group_label + "' has no observations");
    }
    if (!all_finite(g.values)) {
      throw UsageError("group '" + g.group_label + "' contains non-finite values");
    }
    if (g.metric_name != groups.front().metric_name) {
      throw UsageError("ANOVA groups mix metrics '" + groups.front().metric_name + "' and '" +
                       g.metric_name + "'");
    }
    total += g.values.size();
    for (double v : g.values) {
      grand_sum += v;
    }
  }
  const auto k = static_cast<int>(groups.size());
  const auto n = static_cast<int>(total);
  if (n - k < 1) {
    throw UsageError("ANOVA needs more observations than groups");
  }

  AnovaResult r;
  r.alpha = alpha;
  r.df_between = k - 1;
  r.df_within = n - k;

  // Exact constancy checks, so rounding noise in the sums cannot turn a
  // constant design into a spurious F.
  bool within_constant = true;
  bool all_identical = true;
  const double first = groups.front().values.front();
  for (const auto& g : groups) {
    for (double v : g.values) {
      within_constant = within_constant && v == g.values.front();
      all_identical = all_identical && v == first;
    }
  }

  const double grand_mean = grand_sum / n;
  for (const auto& g : groups) {
    double sum = 0.0;
    for (double v : g.values) {
      sum += v;
    }
    const double mean = sum / static_cast<double>(g.values.size());
    r.ss_between += static_cast<double>(g.values.size()) * (mean - grand_mean) * (mean - grand_mean);
    for (double v : g.values) {
      r.ss_within += (v - mean) * (v - mean);
    }
  }

  if (all_identical) {
    r.ss_between = 0.0;
    r.ss_within = 0.0;
    r.f_statistic = 0.0;
    r.p_value = 1.0;
    r.degenerate = true;
  } else if (within_constant) {
    r.ss_within = 0.0;
    r.f_statistic = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    r.exact_separation = true;
  } else {
    const double ms_between = r.ss_between / r.df_between;
    const double ms_within = r.ss_within / r.df_within;
    r.f_statistic = ms_between / ms_within;
    r.p_value = f_upper_tail(r.f_statistic, r.df_between, r.df_within);
  }
  r.significant = r.p_value < alpha;
  return r;
}

std::map<std::string, ModelComparison>
compare_models(std::span<const std::filesystem::path> result_files,
               std::span<const std::string> metric_names, double alpha,
               const std::optional<std::string>& mode) {
  std::vector<RunResult> runs;
  runs.reserve(result_files.size());
  for (const auto& path : result_files) {
    runs.push_back(load_run_result(path));
  }
  if (mode) {
    std::erase_if(runs, [&](const RunResult& r) { return to_string(r.mode) != *mode; });
  }

  bool mixed_modes = false;
  for (const auto& r : runs) {
    mixed_modes = mixed_modes || r.mode != runs.front().mode;
  }
  auto label_of = [&](const RunResult& r) {
    return mixed_modes ? r.backbone + "/" + std::string(to_string(r.mode)) : r.backbone;
  };

  std::map<std::string, ModelComparison> out;
  for (const auto& metric : metric_names) {
    std::map<std::string, MetricSample> grouped;
    std::map<std::string, std::size_t> sizes;
    std::size_t excluded = 0;
    for (const auto& r : runs) {
      const auto label = label_of(r);
      auto& sample = grouped[label];
      sample.group_label = label;
      sample.metric_name = metric;
      if (auto v = metric_by_name(r.metrics, metric)) {
        sample.values.push_back(*v);
        ++sizes[label];
      } else {
        ++excluded;
      }
    }
    if (excluded > 0) {
      spdlog::info("{}: excluded {} undefined value(s)", metric, excluded);
    }
    std::vector<MetricSample> samples;
    for (auto& [label, sample] : grouped) {
      if (!sample.values.empty()) {
        samples.push_back(std::move(sample));
      }
    }
    if (samples.size() < 2) {
      throw DataError("comparison of '" + metric + "' needs at least two model groups, found " +
                      std::to_string(samples.size()));
    }
    ModelComparison cmp;
    cmp.anova = one_way_anova(samples, alpha);
    cmp.group_sizes = std::move(sizes);
    cmp.excluded_undefined = excluded;
    out.emplace(metric, std::move(cmp));
  }
  return out;
}

std::string comparison_to_json(const std::map<std::string, ModelComparison>& comparison) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [metric, cmp] : comparison) {
    const auto& a = cmp.anova;
    nlohmann::json entry;
    entry["F"] = std::isfinite(a.f_statistic) ? nlohmann::json(a.f_statistic) : nlohmann::json();
    entry["df"] = {a.df_between, a.df_within};
    entry["p"] = a.p_value;
    entry["alpha"] = a.alpha;
    entry["significant"] = a.significant;
    entry["groups"] = cmp.group_sizes;
    entry["ss_between"] = a.ss_between;
    entry["ss_within"] = a.ss_within;
    entry["exact_separation"] = a.exact_separation;
    entry["degenerate"] = a.degenerate;
    entry["excluded_undefined"] = cmp.excluded_undefined;
    doc[metric] = std::move(entry);
  }
  return doc.dump(2) + "\n";
}

std::string render_comparison_markdown(const std::map<std::string, ModelComparison>& comparison) {
  std::ostringstream os;
  os << "| Metric | F | df | p | alpha | Significant |\n";
  os << "|---|---|---|---|---|---|\n";
  char f_buf[32];
  char p_buf[32];
  for (auto name : kMetricNames) {
    auto it = comparison.find(std::string(name));
    if (it == comparison.end()) {
      continue;
    }
    const auto& a = it->second.anova;
    if (std::isfinite(a.f_statistic)) {
      std::snprintf(f_buf, sizeof f_buf, "%.4g", a.f_statistic);
    } else {
      std::snprintf(f_buf, sizeof f_buf, "inf");
    }
    std::snprintf(p_buf, sizeof p_buf, "%.2g", a.p_value);
    os << "| " << name << " | " << f_buf << " | (" << a.df_between << ", " << a.df_within
       << ") | " << p_buf << " | " << a.alpha << " | " << (a.significant ? "yes" : "no");
    if (a.exact_separation) {
      os << " (exact separation)";
    } else if (a.degenerate) {
      os << " (degenerate)";
    }
    os << " |\n";
  }
  return os.str();
}

} // namespace crackbench
