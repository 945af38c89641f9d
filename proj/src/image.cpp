#include "crackbench/image.hpp"

#include <algorithm>
#include <cstring>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "crackbench/errors.hpp"

namespace crackbench {

std::string_view to_string(Label label) {
  return label == Label::positive ? "positive" : "negative";
}

Label label_from_string(std::string_view text) {
  if (text == "positive") {
    return Label::positive;
  }
  if (text == "negative") {
    return Label::negative;
  }
  throw DataError("unknown label '" + std::string(text) + "'");
}

RgbImage::RgbImage(int height, int width)
    : height_(height), width_(width),
      pixels_(static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0) * 3, 0) {
  if (height < 0 || width < 0) {
    throw UsageError("image dimensions must be non-negative");
  }
}

RgbImage::RgbImage(int height, int width, std::vector<std::uint8_t> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  if (height < 0 || width < 0 ||
      pixels_.size() != static_cast<std::size_t>(height) * width * 3) {
    throw DataError("pixel buffer does not match " + std::to_string(height) + "x" +
                    std::to_string(width) + "x3");
  }
}

RgbImage RgbImage::crop(int row, int col, int size) const {
  if (row < 0 || col < 0 || row + size > height_ || col + size > width_) {
    throw UsageError("crop window outside the image");
  }
  RgbImage out(size, size);
  const std::size_t row_bytes = static_cast<std::size_t>(size) * 3;
  for (int r = 0; r < size; ++r) {
    const auto* src = pixels_.data() + (static_cast<std::size_t>(row + r) * width_ + col) * 3;
    std::memcpy(out.pixels_.data() + r * row_bytes, src, row_bytes);
  }
  return out;
}

std::optional<RgbImage> read_rgb(const std::filesystem::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty() || raw.depth() != CV_8U || raw.channels() != 3) {
    return std::nullopt;
  }
  cv::Mat rgb;
  cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB);
  if (!rgb.isContinuous()) {
    rgb = rgb.clone();
  }
  std::vector<std::uint8_t> pixels(rgb.data, rgb.data + rgb.total() * 3);
  return RgbImage(rgb.rows, rgb.cols, std::move(pixels));
}

void write_rgb(const std::filesystem::path& path, const RgbImage& image) {
  cv::Mat rgb(image.height(), image.width(), CV_8UC3,
              const_cast<std::uint8_t*>(image.pixels().data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), bgr)) {
    throw DataError("cannot write image " + path.string());
  }
}

} // namespace crackbench
