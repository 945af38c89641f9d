#include "crackbench/report.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "crackbench/backbone.hpp"
#include "crackbench/dataset.hpp"
#include "crackbench/errors.hpp"

namespace crackbench {

namespace {

constexpr TrainMode kModes[] = {TrainMode::frozen_features, TrainMode::fine_tune_all};

// Registry order first, then any other names alphabetically.
std::vector<std::string> ordered_models(const std::set<std::string>& names) {
  std::vector<std::string> out;
  for (const auto& d : list_backbones()) {
    if (names.contains(d.name)) {
      out.push_back(d.name);
    }
  }
  for (const auto& n : names) {
    if (std::find(out.begin(), out.end(), n) == out.end()) {
      out.push_back(n);
    }
  }
  return out;
}

std::string mode_title(TrainMode mode) {
  return mode == TrainMode::frozen_features
             ? "Pre-trained backbones, frozen features (frozen_features)"
             : "Fine-tuned networks (fine_tune_all)";
}

std::string sanitize(std::string name) {
  for (char& c : name) {
    if (c == '/' || c == '\\' || c == ' ') {
      c = '_';
    }
  }
  return name;
}

} // namespace

std::map<TrainMode, std::vector<TableRow>> aggregate_tables(std::span<const RunResult> runs) {
  std::map<TrainMode, std::vector<TableRow>> tables;
  for (auto mode : kModes) {
    std::map<std::string, std::vector<MetricVector>> per_model;
    std::set<std::string> names;
    for (const auto& r : runs) {
      if (r.mode == mode) {
        per_model[r.backbone].push_back(r.metrics);
        names.insert(r.backbone);
      }
    }
    if (names.empty()) {
      continue;
    }
    auto& rows = tables[mode];
    for (const auto& name : ordered_models(names)) {
      rows.push_back({name, aggregate(per_model[name])});
    }
  }
  return tables;
}

std::vector<std::filesystem::path> write_aggregate_tables(std::span<const RunResult> runs,
                                                          const std::filesystem::path& out_dir) {
  std::vector<std::filesystem::path> written;
  for (const auto& [mode, rows] : aggregate_tables(runs)) {
    const auto stem = out_dir / ("aggregate_" + std::string(to_string(mode)));
    write_text_file(stem.string() + ".csv", render_csv_table(rows));
    write_text_file(stem.string() + ".md", render_markdown_table(rows));
    written.emplace_back(stem.string() + ".csv");
    written.emplace_back(stem.string() + ".md");
  }
  return written;
}

Report build_report(const std::filesystem::path& results_dir, const ReportOptions& options) {
  const auto files = list_result_files(results_dir);
  if (files.empty()) {
    throw DataError("no run result files in " + results_dir.string());
  }
  std::vector<RunResult> runs;
  for (const auto& f : files) {
    runs.push_back(load_run_result(f));
  }

  Report report;
  report.tables = aggregate_tables(runs);

  for (const auto& [mode, rows] : report.tables) {
    if (rows.size() < 2) {
      report.anova_skipped[mode] = "only one model";
      continue;
    }
    try {
      report.anova[mode] =
          compare_models(files, options.metrics, options.alpha, std::string(to_string(mode)));
    } catch (const Error& e) {
      report.anova_skipped[mode] = e.what();
    }
  }

  std::map<std::string, std::set<std::string>> test_sets;
  for (const auto& r : runs) {
    if (!r.split_manifest.empty() && !test_sets.contains(r.split_manifest) &&
        std::filesystem::is_regular_file(r.split_manifest)) {
      const auto manifest = load_manifest(r.split_manifest);
      test_sets[r.split_manifest] = {manifest.test.begin(), manifest.test.end()};
    }
    const double threshold = r.config.decision_threshold;
    for (const auto& p : r.predictions) {
      const Label predicted = p.score >= threshold ? Label::positive : Label::negative;
      if (predicted == p.label) {
        continue;
      }
      if (auto it = test_sets.find(r.split_manifest);
          it != test_sets.end() && !it->second.contains(p.path)) {
        throw DataError("prediction for " + p.path + " in " + r.backbone +
                        " run is not part of the test split");
      }
      GalleryEntry g;
      g.backbone = r.backbone;
      g.mode = r.mode;
      g.seed = r.seed;
      g.path = p.path;
      g.label = p.label;
      g.score = p.score;
      g.confidence = p.label == Label::negative ? p.score : 1.0 - p.score;
      report.gallery.push_back(std::move(g));
    }
  }
  std::sort(report.gallery.begin(), report.gallery.end(),
            [](const GalleryEntry& a, const GalleryEntry& b) {
              if (a.confidence != b.confidence) {
                return a.confidence > b.confidence;
              }
              return std::tie(a.backbone, a.mode, a.seed, a.path) <
                     std::tie(b.backbone, b.mode, b.seed, b.path);
            });
  if (options.gallery_limit > 0 && report.gallery.size() > options.gallery_limit) {
    report.gallery.resize(options.gallery_limit);
  }
  for (std::size_t i = 0; i < report.gallery.size(); ++i) {
    auto& g = report.gallery[i];
    const auto base = std::filesystem::path(g.path).filename().string();
    g.file_name = fmt::format("{:03}_{}_{:.4f}_{}_{}_seed{}_{}", i + 1,
                              g.false_positive() ? "fp" : "fn", g.score, sanitize(g.backbone),
                              to_string(g.mode), g.seed, base);
  }
  return report;
}

std::string render_report_markdown(const Report& report) {
  std::ostringstream os;
  os << "# Concrete crack classification benchmark\n\n";
  for (const auto& [mode, rows] : report.tables) {
    os << "## " << mode_title(mode) << "\n\n" << render_markdown_table(rows) << "\n";
  }
  for (auto mode : kModes) {
    if (auto it = report.anova.find(mode); it != report.anova.end()) {
      os << "## One-way ANOVA across models (" << to_string(mode) << ")\n\n"
         << render_comparison_markdown(it->second) << "\n";
    } else if (auto skip = report.anova_skipped.find(mode); skip != report.anova_skipped.end()) {
      os << "## One-way ANOVA across models (" << to_string(mode) << ")\n\n"
         << "Not computed: " << skip->second << ".\n\n";
    }
  }

  os << "## Misclassified test patches\n\n";
  if (report.gallery.empty()) {
    os << "No misclassified test patches.\n";
    return os.str();
  }
  os << "| # | Kind | Score | Model | Mode | Seed | Patch | Copy |\n";
  os << "|---|---|---|---|---|---|---|---|\n";
  for (std::size_t i = 0; i < report.gallery.size(); ++i) {
    const auto& g = report.gallery[i];
    os << fmt::format("| {} | {} | {:.4f} | {} | {} | {} | {} | gallery/{} |\n", i + 1,
                      g.false_positive() ? "false positive" : "false negative", g.score,
                      g.backbone, to_string(g.mode), g.seed, g.path, g.file_name);
  }
  return os.str();
}

void write_report(const Report& report, const std::filesystem::path& results_dir,
                  const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  write_text_file(out_dir / "report.md", render_report_markdown(report));

  const auto gallery_dir = out_dir / "gallery";
  fs::remove_all(gallery_dir);
  fs::create_directories(gallery_dir);
  if (report.gallery.empty()) {
    return;
  }
  std::map<std::string, std::string> roots;
  for (const auto& f : list_result_files(results_dir)) {
    const auto r = load_run_result(f);
    roots[r.backbone + "|" + std::string(to_string(r.mode)) + "|" + std::to_string(r.seed)] =
        r.dataset_root;
  }
  for (const auto& g : report.gallery) {
    const auto key = g.backbone + "|" + std::string(to_string(g.mode)) + "|" + std::to_string(g.seed);
    const fs::path src = fs::path(roots[key]) / g.path;
    std::error_code ec;
    fs::copy_file(src, gallery_dir / g.file_name, fs::copy_options::overwrite_existing, ec);
    if (ec) {
      spdlog::warn("gallery: cannot copy {}: {}", src.string(), ec.message());
    }
  }
}

} // namespace crackbench
