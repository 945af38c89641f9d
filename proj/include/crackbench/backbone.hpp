#pragma once

#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace crackbench {

/// Pixel scaling applied before a backbone sees a patch.
enum class PixelScaling {
  unit_range,        // v / 255
  imagenet_mean_std, // (v / 255 - mean) / std, ImageNet RGB statistics
  symmetric_unit,    // v / 127.5 - 1
};

std::string_view to_string(PixelScaling scaling);
PixelScaling pixel_scaling_from_string(std::string_view text);

/// Normalization contract: a scaling rule plus the side length the network
/// expects. Serialized as "<scaling>@<size>", e.g. "symmetric_unit@299".
struct Preprocessing {
  PixelScaling scaling = PixelScaling::unit_range;
  int input_size = 224;

  std::string id() const;
  static Preprocessing parse(std::string_view id);

  friend bool operator==(const Preprocessing&, const Preprocessing&) = default;
};

/// Registry entry describing a pretrained backbone. The layer and parameter
/// figures are the published descriptors of each architecture, kept for
/// reporting; the actual parameter count of a built network is measured.
struct BackboneDescriptor {
  std::string name;
  int declared_layers = 0;
  double declared_params_millions = 0.0;
  int native_input_size = 224;
  std::string preprocessing_id;

  Preprocessing preprocessing() const { return Preprocessing::parse(preprocessing_id); }

  friend bool operator==(const BackboneDescriptor&, const BackboneDescriptor&) = default;
};

/// Name-keyed descriptor table. Ships with VGG19, ResNet50, InceptionV3 and
/// EfficientNetV2 (B0). Additional entries may be registered at startup.
class BackboneRegistry {
public:
  static BackboneRegistry& instance();

  std::vector<BackboneDescriptor> list() const;
  std::optional<BackboneDescriptor> find(std::string_view name) const;

  /// Throws ConfigError naming the registered backbones.
  BackboneDescriptor get(std::string_view name) const;

  /// Throws UsageError on duplicate names.
  void add(BackboneDescriptor descriptor);
  /// Removes a previously added entry; returns false if absent.
  bool remove(std::string_view name);

  std::string names_joined() const;

private:
  BackboneRegistry();

  mutable std::mutex mutex_;
  std::vector<BackboneDescriptor> entries_;
};

/// Registered descriptors in registration order (the four shipped ones first).
std::vector<BackboneDescriptor> list_backbones();

} // namespace crackbench
