#include "crackbench/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>
#include <opencv2/imgproc.hpp>
#include <spdlog/spdlog.h>

#include "crackbench/backbone.hpp"
#include "crackbench/errors.hpp"
#include "crackbench/results.hpp"
#include "crackbench/rng.hpp"

namespace crackbench {

namespace {

constexpr std::array<std::pair<const char*, Label>, 2> kClassDirs{{
    {"Negative", Label::negative},
    {"Positive", Label::positive},
}};

std::size_t portion(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
}

void validate_spec(const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0)) {
    throw UsageError("train_fraction must lie in (0, 1]");
  }
  if (!(spec.val_fraction_of_train >= 0.0 && spec.val_fraction_of_train < 1.0)) {
    throw UsageError("val_fraction_of_train must lie in [0, 1)");
  }
}

// Shuffles `pool` and appends its train/val/test portions.
void partition(std::vector<std::size_t> pool, const SplitSpec& spec, SplitRng& rng,
               SplitResult& out) {
  rng.shuffle(std::span<std::size_t>(pool));
  const std::size_t n_train = portion(pool.size(), spec.train_fraction);
  const std::size_t n_val = portion(n_train, spec.val_fraction_of_train);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (i < n_val) {
      out.val.push_back(pool[i]);
    } else if (i < n_train) {
      out.train.push_back(pool[i]);
    } else {
      out.test.push_back(pool[i]);
    }
  }
}

double rounded(double v) { return std::round(v * 1e12) / 1e12; }

} // namespace

PatchDataset load_patch_dataset(const std::filesystem::path& root, int patch_size) {
  namespace fs = std::filesystem;
  if (patch_size <= 0) {
    throw UsageError("patch_size must be positive");
  }
  if (!fs::is_directory(root)) {
    throw ConfigError("dataset root not found: " + root.string());
  }

  std::vector<std::pair<std::string, Label>> entries;
  for (const auto& [dir_name, label] : kClassDirs) {
    const fs::path dir = root / dir_name;
    if (!fs::is_directory(dir)) {
      throw ConfigError("class directory not found: " + dir.string());
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file()) {
        entries.emplace_back(entry.path().lexically_relative(root).generic_string(), label);
      }
    }
  }
  std::sort(entries.begin(), entries.end());

  PatchDataset ds;
  ds.root = root;
  ds.patch_size = patch_size;
  ds.loaded_at = utc_timestamp();
  ds.class_counts = {{Label::negative, 0}, {Label::positive, 0}};
  for (const auto& [rel, label] : entries) {
    auto image = read_rgb(root / rel);
    if (!image) {
      spdlog::warn("skipping {}: not a decodable 3-channel image", rel);
      ++ds.skipped;
      continue;
    }
    if (image->height() != patch_size || image->width() != patch_size) {
      spdlog::warn("skipping {}: {}x{} instead of {}x{}", rel, image->height(), image->width(),
                   patch_size, patch_size);
      ++ds.skipped;
      continue;
    }
    ImagePatch patch;
    patch.pixels = std::move(*image);
    patch.label = label;
    patch.source_id = rel;
    ds.patches.push_back(std::move(patch));
    ds.relpaths.push_back(rel);
    ++ds.class_counts[label];
  }

  if (ds.patches.empty()) {
    throw DataError("no loadable " + std::to_string(patch_size) + "x" +
                    std::to_string(patch_size) + " images under " + root.string());
  }
  return ds;
}

SplitResult split(std::span<const Label> labels, const SplitSpec& spec) {
  validate_spec(spec);
  if (labels.empty()) {
    throw DataError("cannot split an empty dataset");
  }

  std::vector<std::size_t> negatives;
  std::vector<std::size_t> positives;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] == Label::positive ? positives : negatives).push_back(i);
  }

  bool stratified = spec.stratified;
  if (stratified && (negatives.empty() || positives.empty())) {
    spdlog::warn("single-class dataset: proceeding with an unstratified split");
    stratified = false;
  }

  SplitRng rng(spec.seed);
  SplitResult out;
  if (stratified) {
    partition(std::move(negatives), spec, rng, out);
    partition(std::move(positives), spec, rng, out);
  } else {
    std::vector<std::size_t> all(labels.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      all[i] = i;
    }
    partition(std::move(all), spec, rng, out);
  }

  if (out.train.empty()) {
    throw UsageError("split leaves the training set empty");
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

SplitResult split(const PatchDataset& dataset, const SplitSpec& spec) {
  std::vector<Label> labels;
  labels.reserve(dataset.size());
  for (const auto& p : dataset.patches) {
    labels.push_back(p.label);
  }
  return split(labels, spec);
}

SplitManifest make_manifest(const PatchDataset& dataset, const SplitSpec& spec,
                            const SplitResult& result) {
  auto paths = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::string> out;
    out.reserve(idx.size());
    for (auto i : idx) {
      out.push_back(dataset.relpaths.at(i));
    }
    return out;
  };
  return {spec, paths(result.train), paths(result.val), paths(result.test)};
}

std::string manifest_to_json(const SplitManifest& m) {
  nlohmann::json j;
  j["seed"] = m.spec.seed;
  j["stratified"] = m.spec.stratified;
  j["fractions"] = {{"train", m.spec.train_fraction},
                    {"val_of_train", m.spec.val_fraction_of_train},
                    {"test", rounded(m.spec.test_fraction())}};
  j["train"] = m.train;
  j["val"] = m.val;
  j["test"] = m.test;
  return j.dump(2) + "\n";
}

SplitManifest manifest_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SplitManifest m;
    m.spec.seed = j.at("seed").get<std::uint64_t>();
    m.spec.stratified = j.value("stratified", true);
    m.spec.train_fraction = j.at("fractions").at("train").get<double>();
    m.spec.val_fraction_of_train = j.at("fractions").at("val_of_train").get<double>();
    m.train = j.at("train").get<std::vector<std::string>>();
    m.val = j.at("val").get<std::vector<std::string>>();
    m.test = j.at("test").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed split manifest: ") + e.what());
  }
}

void save_manifest(const std::filesystem::path& path, const SplitManifest& manifest) {
  write_text_file(path, manifest_to_json(manifest));
}

SplitManifest load_manifest(const std::filesystem::path& path) {
  try {
    return manifest_from_json(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

SplitResult resolve_manifest(const PatchDataset& dataset, const SplitManifest& manifest) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < dataset.relpaths.size(); ++i) {
    index.emplace(dataset.relpaths[i], i);
  }
  auto lookup = [&](const std::vector<std::string>& paths) {
    std::vector<std::size_t> out;
    out.reserve(paths.size());
    for (const auto& p : paths) {
      auto it = index.find(p);
      if (it == index.end()) {
        throw DataError("split manifest references " + p + ", which is not in the dataset");
      }
      out.push_back(it->second);
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  return {lookup(manifest.train), lookup(manifest.val), lookup(manifest.test)};
}

FloatImage normalize(const ImagePatch& patch, const NormalizeScheme& scheme) {
  const RgbImage& px = patch.pixels;
  if (px.empty()) {
    throw DataError("cannot normalize an empty patch");
  }

  Preprocessing pre{PixelScaling::unit_range, px.height()};
  if (const auto* named = std::get_if<BackboneSpecific>(&scheme)) {
    pre = BackboneRegistry::instance().get(named->backbone).preprocessing();
  }

  static constexpr std::array<double, 3> kMean{0.485, 0.456, 0.406};
  static constexpr std::array<double, 3> kStd{0.229, 0.224, 0.225};

  FloatImage out;
  out.height = px.height();
  out.width = px.width();
  out.values.resize(px.pixels().size());
  const auto src = px.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double v = src[i];
    switch (pre.scaling) {
    case PixelScaling::unit_range:
      out.values[i] = v / 255.0;
      break;
    case PixelScaling::imagenet_mean_std:
      out.values[i] = (v / 255.0 - kMean[i % 3]) / kStd[i % 3];
      break;
    case PixelScaling::symmetric_unit:
      out.values[i] = v / 127.5 - 1.0;
      break;
    }
  }

  if (std::holds_alternative<BackboneSpecific>(scheme) &&
      (pre.input_size != out.height || pre.input_size != out.width)) {
    cv::Mat src_mat(out.height, out.width, CV_64FC3, out.values.data());
    cv::Mat resized;
    cv::resize(src_mat, resized, cv::Size(pre.input_size, pre.input_size), 0, 0,
               cv::INTER_LINEAR);
    FloatImage scaled;
    scaled.height = pre.input_size;
    scaled.width = pre.input_size;
    scaled.values.assign(resized.ptr<double>(), resized.ptr<double>() + resized.total() * 3);
    return scaled;
  }
  return out;
}

std::vector<ImagePatch> extract_patches(const SourceImage& image, int patch_size, int stride) {
  if (patch_size <= 0 || stride <= 0) {
    throw UsageError("patch_size and stride must be positive");
  }
  std::vector<ImagePatch> out;
  const auto offsets =
      grid_offsets(image.pixels.height(), image.pixels.width(), patch_size, stride);
  out.reserve(offsets.size());
  for (const auto& off : offsets) {
    ImagePatch p;
    p.pixels = image.pixels.crop(off.row, off.col, patch_size);
    p.source_id = image.identifier;
    p.origin = off;
    out.push_back(std::move(p));
  }
  return out;
}

} // namespace crackbench
