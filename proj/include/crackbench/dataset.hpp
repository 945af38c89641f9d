#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "crackbench/image.hpp"

namespace crackbench {

inline constexpr int kDefaultPatchSize = 227;

/// Labeled patches loaded from `<root>/Positive` and `<root>/Negative`.
///
/// Patches are ordered lexicographically by relative path, so two loads of
/// the same directory contents always agree on indices.
struct PatchDataset {
  std::vector<ImagePatch> patches;
  /// Relative path (generic form, e.g. "Positive/00001.jpg") of each patch.
  std::vector<std::string> relpaths;
  std::map<Label, std::size_t> class_counts;
  std::filesystem::path root;
  std::string loaded_at;
  std::size_t skipped = 0;
  int patch_size = kDefaultPatchSize;

  std::size_t size() const { return patches.size(); }
  bool empty() const { return patches.empty(); }
};

/// Reads every decodable patch_size x patch_size RGB file under the two class
/// directories. Files with any other geometry are skipped (never resized)
/// and counted in `skipped`.
///
/// Throws ConfigError when the root or a class directory is missing and
/// DataError when no image could be loaded.
PatchDataset load_patch_dataset(const std::filesystem::path& root,
                                int patch_size = kDefaultPatchSize);

struct SplitSpec {
  double train_fraction = 0.8;
  double val_fraction_of_train = 0.1;
  std::uint64_t seed = 0;
  bool stratified = true;

  double test_fraction() const { return 1.0 - train_fraction; }
};

struct SplitResult {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Deterministic (optionally stratified) partition of dataset indices.
///
/// Per class (or over the whole dataset when unstratified) the indices are
/// shuffled with SplitRng(seed); the first round(n * train_fraction) go to the
/// training portion, of which the first round(n_train * val_fraction_of_train)
/// become validation. Classes are visited negative-then-positive from a
/// single generator stream. Each output list is sorted ascending.
SplitResult split(const PatchDataset& dataset, const SplitSpec& spec);

/// Same as above, driven by labels alone.
SplitResult split(std::span<const Label> labels, const SplitSpec& spec);

/// Split manifest: the split settings plus the relative paths of each partition.
struct SplitManifest {
  SplitSpec spec;
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

SplitManifest make_manifest(const PatchDataset& dataset, const SplitSpec& spec,
                            const SplitResult& result);

/// Canonical JSON text; identical inputs produce byte-identical output.
std::string manifest_to_json(const SplitManifest& manifest);
SplitManifest manifest_from_json(std::string_view text);

void save_manifest(const std::filesystem::path& path, const SplitManifest& manifest);
SplitManifest load_manifest(const std::filesystem::path& path);

/// Maps manifest paths back onto dataset indices. Throws DataError if a path
/// is not present in the dataset.
SplitResult resolve_manifest(const PatchDataset& dataset, const SplitManifest& manifest);

/// Real-valued H x W x 3 raster (interleaved, row-major).
struct FloatImage {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  double at(int row, int col, int channel) const {
    return values[(static_cast<std::size_t>(row) * width + col) * 3 + channel];
  }
};

struct UnitRange {};
struct BackboneSpecific {
  std::string backbone;
};
using NormalizeScheme = std::variant<UnitRange, BackboneSpecific>;

/// unit_range maps v -> v / 255. BackboneSpecific applies the registered
/// preprocessing contract of the named backbone, including the bilinear
/// resize to its native input size. Unknown names throw ConfigError.
FloatImage normalize(const ImagePatch& patch, const NormalizeScheme& scheme);

/// Non-overlapping (or strided) tiling of a source image into patches. Each
/// patch inherits the source identifier and records its origin offset.
/// Patch labels default to negative; labelling is up to the caller.
std::vector<ImagePatch> extract_patches(const SourceImage& image, int patch_size, int stride);

inline std::vector<ImagePatch> extract_patches(const SourceImage& image,
                                               int patch_size = kDefaultPatchSize) {
  return extract_patches(image, patch_size, patch_size);
}

} // namespace crackbench
