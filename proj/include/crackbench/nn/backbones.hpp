#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

namespace crackbench::nn {

/// Convolutional feature extractor: the pretrained network minus its original
/// classification layers. forward() returns an [N, C, h, w] feature map.
///
/// Parameter names of the VGG19, ResNet50 and InceptionV3 implementations
/// follow torchvision's state dict layout, so converted torchvision
/// checkpoints load without renaming.
class Backbone : public torch::nn::Module {
public:
  virtual torch::Tensor forward(torch::Tensor x) = 0;
  virtual std::int64_t feature_channels() const = 0;
};

using BackboneFactory = std::function<std::shared_ptr<Backbone>()>;

/// Factories keyed by registry name. The four shipped backbones are
/// registered on first use; tests may add their own.
void register_backbone_factory(const std::string& name, BackboneFactory factory);
void unregister_backbone_factory(const std::string& name);

/// Builds a freshly initialized backbone, drawing from torch's global
/// generator. Throws ConfigError for names without a factory.
std::shared_ptr<Backbone> make_backbone(std::string_view name);

std::shared_ptr<Backbone> make_vgg19();
std::shared_ptr<Backbone> make_resnet50();
std::shared_ptr<Backbone> make_inception_v3();
std::shared_ptr<Backbone> make_efficientnet_v2_b0();

} // namespace crackbench::nn
