#include "crackbench/localize.hpp"

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>
#include <opencv2/imgproc.hpp>

#include "crackbench/errors.hpp"

namespace crackbench {

namespace {

bool by_position(const Detection& a, const Detection& b) {
  return std::tie(a.y, a.x, a.height, a.width) < std::tie(b.y, b.x, b.height, b.width);
}

struct DisjointSets {
  std::vector<std::size_t> parent;

  explicit DisjointSets(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), std::size_t{0});
  }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

// One pass of component merging; returns the merged boxes.
std::vector<Detection> merge_once(const std::vector<Detection>& boxes, double threshold) {
  DisjointSets sets(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      if (iou(boxes[i], boxes[j]) >= threshold) {
        sets.unite(i, j);
      }
    }
  }
  std::vector<Detection> merged;
  std::vector<std::ptrdiff_t> slot(boxes.size(), -1);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto root = sets.find(i);
    const auto& b = boxes[i];
    if (slot[root] < 0) {
      slot[root] = static_cast<std::ptrdiff_t>(merged.size());
      merged.push_back(b);
      continue;
    }
    auto& m = merged[static_cast<std::size_t>(slot[root])];
    const int x1 = std::max(m.x + m.width, b.x + b.width);
    const int y1 = std::max(m.y + m.height, b.y + b.height);
    m.x = std::min(m.x, b.x);
    m.y = std::min(m.y, b.y);
    m.width = x1 - m.x;
    m.height = y1 - m.y;
    m.score = std::max(m.score, b.score);
  }
  return merged;
}

} // namespace

void WindowConfig::validate() const {
  if (window_size < 1 || stride < 1) {
    throw UsageError("window_size and stride must be >= 1");
  }
  if (!(score_threshold > 0.0 && score_threshold < 1.0)) {
    throw UsageError("score_threshold must lie in (0, 1)");
  }
  if (batch_size < 1) {
    throw UsageError("batch_size must be >= 1");
  }
}

double iou(const Detection& a, const Detection& b) {
  const long long ix = std::max(0, std::min(a.x + a.width, b.x + b.width) - std::max(a.x, b.x));
  const long long iy =
      std::max(0, std::min(a.y + a.height, b.y + b.height) - std::max(a.y, b.y));
  const long long inter = ix * iy;
  if (inter == 0) {
    return 0.0;
  }
  return static_cast<double>(inter) / static_cast<double>(a.area() + b.area() - inter);
}

std::size_t window_count(int height, int width, const WindowConfig& cfg) {
  return grid_offsets(height, width, cfg.window_size, cfg.stride, cfg.cover_edges).size();
}

std::vector<Detection> slide(const PatchScorer& scorer, const SourceImage& image,
                             const WindowConfig& cfg) {
  cfg.validate();
  if (scorer.patch_size() != cfg.window_size) {
    throw UsageError("window size " + std::to_string(cfg.window_size) +
                     " does not match the model patch size " +
                     std::to_string(scorer.patch_size()));
  }
  const auto offsets = grid_offsets(image.pixels.height(), image.pixels.width(), cfg.window_size,
                                    cfg.stride, cfg.cover_edges);

  std::vector<Detection> out;
  std::vector<ImagePatch> batch;
  batch.reserve(static_cast<std::size_t>(cfg.batch_size));
  for (std::size_t start = 0; start < offsets.size(); start += batch.size()) {
    batch.clear();
    const std::size_t end =
        std::min(offsets.size(), start + static_cast<std::size_t>(cfg.batch_size));
    for (std::size_t i = start; i < end; ++i) {
      ImagePatch p;
      p.pixels = image.pixels.crop(offsets[i].row, offsets[i].col, cfg.window_size);
      p.source_id = image.identifier;
      p.origin = offsets[i];
      batch.push_back(std::move(p));
    }
    const auto scores = scorer.predict(batch);
    if (scores.size() != batch.size()) {
      throw DataError("scorer returned " + std::to_string(scores.size()) + " scores for " +
                      std::to_string(batch.size()) + " windows");
    }
    for (std::size_t k = 0; k < scores.size(); ++k) {
      if (scores[k] >= cfg.score_threshold) {
        const auto& off = offsets[start + k];
        out.push_back({off.col, off.row, cfg.window_size, cfg.window_size, scores[k]});
      }
    }
  }
  std::sort(out.begin(), out.end(), by_position);
  return out;
}

std::vector<Detection> merge_boxes(std::span<const Detection> detections, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw UsageError("iou_threshold must lie in (0, 1]");
  }
  std::vector<Detection> boxes(detections.begin(), detections.end());
  std::sort(boxes.begin(), boxes.end(), by_position);
  while (true) {
    auto merged = merge_once(boxes, iou_threshold);
    std::sort(merged.begin(), merged.end(), by_position);
    if (merged.size() == boxes.size()) {
      return merged;
    }
    boxes = std::move(merged);
  }
}

std::string detections_to_json(const std::string& image_id, const WindowConfig& cfg,
                               double merge_iou, std::span<const Detection> detections) {
  nlohmann::json dets = nlohmann::json::array();
  for (const auto& d : detections) {
    dets.push_back(
        {{"x", d.x}, {"y", d.y}, {"width", d.width}, {"height", d.height}, {"score", d.score}});
  }
  nlohmann::json doc{
      {"image_id", image_id},
      {"config",
       {{"window_size", cfg.window_size},
        {"stride", cfg.stride},
        {"score_threshold", cfg.score_threshold},
        {"cover_edges", cfg.cover_edges},
        {"merge_iou", merge_iou}}},
      {"detections", std::move(dets)},
  };
  return doc.dump(2) + "\n";
}

RgbImage annotate(const RgbImage& image, std::span<const Detection> detections, int thickness) {
  RgbImage out = image;
  cv::Mat canvas(out.height(), out.width(), CV_8UC3, out.pixels().data());
  for (const auto& d : detections) {
    cv::rectangle(canvas, cv::Rect(d.x, d.y, d.width, d.height), cv::Scalar(255, 0, 0),
                  thickness);
  }
  return out;
}

} // namespace crackbench
