#include "crackbench/backbone.hpp"

#include <algorithm>
#include <charconv>

#include "crackbench/errors.hpp"

namespace crackbench {

std::string_view to_string(PixelScaling scaling) {
  switch (scaling) {
  case PixelScaling::unit_range:
    return "unit_range";
  case PixelScaling::imagenet_mean_std:
    return "imagenet_mean_std";
  case PixelScaling::symmetric_unit:
    return "symmetric_unit";
  }
  return "unknown";
}

PixelScaling pixel_scaling_from_string(std::string_view text) {
  for (auto s : {PixelScaling::unit_range, PixelScaling::imagenet_mean_std,
                 PixelScaling::symmetric_unit}) {
    if (to_string(s) == text) {
      return s;
    }
  }
  throw ConfigError("unknown pixel scaling '" + std::string(text) + "'");
}

std::string Preprocessing::id() const {
  return std::string(to_string(scaling)) + "@" + std::to_string(input_size);
}

Preprocessing Preprocessing::parse(std::string_view id) {
  const auto at = id.find('@');
  if (at == std::string_view::npos) {
    throw ConfigError("malformed preprocessing id '" + std::string(id) + "'");
  }
  Preprocessing p;
  p.scaling = pixel_scaling_from_string(id.substr(0, at));
  const auto digits = id.substr(at + 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), p.input_size);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || p.input_size <= 0) {
    throw ConfigError("malformed preprocessing id '" + std::string(id) + "'");
  }
  return p;
}

BackboneRegistry::BackboneRegistry() {
  // Layer counts and parameter figures (millions) as published for each
  // architecture; EfficientNetV2 is pinned to its B0 variant.
  entries_ = {
      {"VGG19", 19, 143.0, 224, "imagenet_mean_std@224"},
      {"ResNet50", 50, 23.0, 224, "imagenet_mean_std@224"},
      {"InceptionV3", 48, 21.0, 299, "symmetric_unit@299"},
      {"EfficientNetV2", 237, 25.0, 224, "symmetric_unit@224"},
  };
}

BackboneRegistry& BackboneRegistry::instance() {
  static BackboneRegistry registry;
  return registry;
}

std::vector<BackboneDescriptor> BackboneRegistry::list() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::optional<BackboneDescriptor> BackboneRegistry::find(std::string_view name) const {
  std::lock_guard lock(mutex_);
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const BackboneDescriptor& d) { return d.name == name; });
  if (it == entries_.end()) {
    return std::nullopt;
  }
  return *it;
}

std::string BackboneRegistry::names_joined() const {
  std::lock_guard lock(mutex_);
  std::string out;
  for (const auto& d : entries_) {
    if (!out.empty()) {
      out += ", ";
    }
    out += d.name;
  }
  return out;
}

BackboneDescriptor BackboneRegistry::get(std::string_view name) const {
  if (auto d = find(name)) {
    return *d;
  }
  throw ConfigError("unknown backbone '" + std::string(name) + "' (registered: " +
                    names_joined() + ")");
}

void BackboneRegistry::add(BackboneDescriptor descriptor) {
  Preprocessing::parse(descriptor.preprocessing_id);
  std::lock_guard lock(mutex_);
  for (const auto& d : entries_) {
    if (d.name == descriptor.name) {
      throw UsageError("backbone '" + descriptor.name + "' is already registered");
    }
  }
  entries_.push_back(std::move(descriptor));
}

bool BackboneRegistry::remove(std::string_view name) {
  std::lock_guard lock(mutex_);
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const BackboneDescriptor& d) { return d.name == name; });
  if (it == entries_.end()) {
    return false;
  }
  entries_.erase(it);
  return true;
}

std::vector<BackboneDescriptor> list_backbones() { return BackboneRegistry::instance().list(); }

} // namespace crackbench
