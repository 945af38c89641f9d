#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crackbench/grid.hpp"

namespace crackbench {

enum class Label : std::uint8_t { negative = 0, positive = 1 };

std::string_view to_string(Label label);
Label label_from_string(std::string_view text);

/// Interleaved 8-bit RGB raster, row-major (height x width x 3).
class RgbImage {
public:
  RgbImage() = default;
  RgbImage(int height, int width);
  RgbImage(int height, int width, std::vector<std::uint8_t> pixels);

  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return pixels_.empty(); }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  std::uint8_t at(int row, int col, int channel) const {
    return pixels_[(static_cast<std::size_t>(row) * width_ + col) * 3 + channel];
  }
  std::uint8_t& at(int row, int col, int channel) {
    return pixels_[(static_cast<std::size_t>(row) * width_ + col) * 3 + channel];
  }

  /// Copy of the size x size block whose top-left corner is (row, col).
  RgbImage crop(int row, int col, int size) const;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Decodes a raster file as RGB. Returns nullopt when the file cannot be
/// decoded or does not carry exactly three channels.
std::optional<RgbImage> read_rgb(const std::filesystem::path& path);

/// Encodes by extension (PNG is lossless and preferred for fixtures).
void write_rgb(const std::filesystem::path& path, const RgbImage& image);

struct ImagePatch {
  RgbImage pixels;
  Label label = Label::negative;
  std::optional<std::string> source_id;
  std::optional<GridOffset> origin;

  int size() const { return pixels.height(); }
};

struct SourceImage {
  RgbImage pixels;
  std::string identifier;
};

} // namespace crackbench
