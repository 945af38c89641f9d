#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "crackbench/dataset.hpp"
#include "crackbench/scorer.hpp"

namespace crackbench {

struct WindowConfig {
  int window_size = kDefaultPatchSize;
  int stride = kDefaultPatchSize;
  double score_threshold = 0.5;
  /// Add clamped windows covering right/bottom margins narrower than stride.
  bool cover_edges = false;
  /// Windows scored per predict() call. Does not affect results.
  int batch_size = 32;

  void validate() const;
};

struct Detection {
  int x = 0; // left column
  int y = 0; // top row
  int width = 0;
  int height = 0;
  double score = 0.0;

  long long area() const { return static_cast<long long>(width) * height; }
  bool contains(int px, int py) const {
    return px >= x && px < x + width && py >= y && py < y + height;
  }
  bool contains(const Detection& other) const {
    return other.x >= x && other.y >= y && other.x + other.width <= x + width &&
           other.y + other.height <= y + height;
  }

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Intersection over union; 0 for disjoint boxes.
double iou(const Detection& a, const Detection& b);

/// Scores every grid window (same offsets as extract_patches) and keeps those
/// with score >= score_threshold. Output ordered by (y, x).
std::vector<Detection> slide(const PatchScorer& scorer, const SourceImage& image,
                             const WindowConfig& cfg);

/// Number of windows slide() will evaluate for an image of this size.
std::size_t window_count(int height, int width, const WindowConfig& cfg);

inline constexpr double kDefaultMergeIou = 0.1;

/// Replaces every connected component of the "IoU >= threshold" relation by
/// the bounding box of its members, scored with the member maximum. Repeats
/// until no pair of output boxes reaches the threshold. Output ordered by
/// (y, x, height, width).
std::vector<Detection> merge_boxes(std::span<const Detection> detections,
                                   double iou_threshold = kDefaultMergeIou);

/// {image_id, config, detections: [{x, y, width, height, score}]}
std::string detections_to_json(const std::string& image_id, const WindowConfig& cfg,
                               double merge_iou, std::span<const Detection> detections);

/// Copy of the image with each box outline drawn in red.
RgbImage annotate(const RgbImage& image, std::span<const Detection> detections,
                  int thickness = 3);

} // namespace crackbench
