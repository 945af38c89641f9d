#include "crackbench/nn/backbones.hpp"

#include <map>
#include <mutex>

#include "crackbench/errors.hpp"

namespace crackbench::nn {

namespace {

using torch::nn::BatchNorm2d;
using torch::nn::BatchNorm2dOptions;
using torch::nn::Conv2d;
using torch::nn::Conv2dOptions;

Conv2d conv_hw(std::int64_t in, std::int64_t out, std::int64_t kh, std::int64_t kw,
               std::int64_t stride = 1, std::int64_t ph = 0, std::int64_t pw = 0,
               bool bias = false, std::int64_t groups = 1) {
  return Conv2d(Conv2dOptions(in, out, {kh, kw})
                    .stride(stride)
                    .padding({ph, pw})
                    .bias(bias)
                    .groups(groups));
}

Conv2d conv(std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t stride = 1,
            std::int64_t pad = 0, bool bias = false, std::int64_t groups = 1) {
  return conv_hw(in, out, k, k, stride, pad, pad, bias, groups);
}

BatchNorm2d batch_norm(std::int64_t channels, double eps = 1e-5) {
  return BatchNorm2d(BatchNorm2dOptions(channels).eps(eps));
}

// He-normal convolutions, unit batch norms.
void initialize(torch::nn::Module& root) {
  torch::NoGradGuard no_grad;
  for (const auto& m : root.modules(/*include_self=*/false)) {
    if (auto* c = m->as<torch::nn::Conv2dImpl>()) {
      torch::nn::init::kaiming_normal_(c->weight, 0.0, torch::kFanOut, torch::kReLU);
      if (c->bias.defined()) {
        c->bias.zero_();
      }
    } else if (auto* bn = m->as<torch::nn::BatchNorm2dImpl>()) {
      bn->weight.fill_(1.0);
      bn->bias.zero_();
    }
  }
}

// ---------------------------------------------------------------------------
// VGG19

class Vgg19 final : public Backbone {
public:
  Vgg19() {
    static constexpr int kPool = 0;
    static constexpr int kConfig[] = {64,  64,  kPool, 128, 128, kPool, 256, 256, 256,
                                      256, kPool, 512, 512, 512, 512, kPool, 512, 512,
                                      512, 512, kPool};
    torch::nn::Sequential seq;
    std::int64_t in = 3;
    for (int c : kConfig) {
      if (c == kPool) {
        seq->push_back(torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(2).stride(2)));
      } else {
        seq->push_back(conv(in, c, 3, 1, 1, /*bias=*/true));
        seq->push_back(torch::nn::ReLU(torch::nn::ReLUOptions(true)));
        in = c;
      }
    }
    features_ = register_module("features", seq);
    initialize(*this);
  }

  torch::Tensor forward(torch::Tensor x) override { return features_->forward(x); }
  std::int64_t feature_channels() const override { return 512; }

private:
  torch::nn::Sequential features_{nullptr};
};

// ---------------------------------------------------------------------------
// ResNet50

class BottleneckImpl : public torch::nn::Module {
public:
  static constexpr std::int64_t kExpansion = 4;

  BottleneckImpl(std::int64_t in, std::int64_t planes, std::int64_t stride)
      : conv1(register_module("conv1", conv(in, planes, 1))),
        bn1(register_module("bn1", batch_norm(planes))),
        conv2(register_module("conv2", conv(planes, planes, 3, stride, 1))),
        bn2(register_module("bn2", batch_norm(planes))),
        conv3(register_module("conv3", conv(planes, planes * kExpansion, 1))),
        bn3(register_module("bn3", batch_norm(planes * kExpansion))) {
    if (stride != 1 || in != planes * kExpansion) {
      downsample = register_module(
          "downsample", torch::nn::Sequential(conv(in, planes * kExpansion, 1, stride),
                                              batch_norm(planes * kExpansion)));
    }
  }

  torch::Tensor forward(torch::Tensor x) {
    auto out = torch::relu(bn1(conv1(x)));
    out = torch::relu(bn2(conv2(out)));
    out = bn3(conv3(out));
    auto identity = downsample ? downsample->forward(x) : x;
    return torch::relu(out + identity);
  }

  Conv2d conv1;
  BatchNorm2d bn1;
  Conv2d conv2;
  BatchNorm2d bn2;
  Conv2d conv3;
  BatchNorm2d bn3;
  torch::nn::Sequential downsample{nullptr};
};
TORCH_MODULE(Bottleneck);

class ResNet50 final : public Backbone {
public:
  ResNet50()
      : conv1_(register_module("conv1", conv(3, 64, 7, 2, 3))),
        bn1_(register_module("bn1", batch_norm(64))) {
    std::int64_t in = 64;
    auto layer = [&](std::int64_t planes, int blocks, std::int64_t stride) {
      torch::nn::Sequential seq;
      for (int i = 0; i < blocks; ++i) {
        seq->push_back(Bottleneck(in, planes, i == 0 ? stride : 1));
        in = planes * BottleneckImpl::kExpansion;
      }
      return seq;
    };
    layer1_ = register_module("layer1", layer(64, 3, 1));
    layer2_ = register_module("layer2", layer(128, 4, 2));
    layer3_ = register_module("layer3", layer(256, 6, 2));
    layer4_ = register_module("layer4", layer(512, 3, 2));
    initialize(*this);
  }

  torch::Tensor forward(torch::Tensor x) override {
    x = torch::relu(bn1_(conv1_(x)));
    x = torch::max_pool2d(x, 3, 2, 1);
    x = layer1_->forward(x);
    x = layer2_->forward(x);
    x = layer3_->forward(x);
    return layer4_->forward(x);
  }
  std::int64_t feature_channels() const override { return 2048; }

private:
  Conv2d conv1_;
  BatchNorm2d bn1_;
  torch::nn::Sequential layer1_{nullptr};
  torch::nn::Sequential layer2_{nullptr};
  torch::nn::Sequential layer3_{nullptr};
  torch::nn::Sequential layer4_{nullptr};
};

// ---------------------------------------------------------------------------
// InceptionV3 (no auxiliary classifier)

class BasicConv2dImpl : public torch::nn::Module {
public:
  BasicConv2dImpl(std::int64_t in, std::int64_t out, std::int64_t kh, std::int64_t kw,
                  std::int64_t stride = 1, std::int64_t ph = 0, std::int64_t pw = 0)
      : conv(register_module("conv", conv_hw(in, out, kh, kw, stride, ph, pw))),
        bn(register_module("bn", batch_norm(out, 1e-3))) {}

  torch::Tensor forward(torch::Tensor x) { return torch::relu(bn(conv(x))); }

  Conv2d conv;
  BatchNorm2d bn;
};
TORCH_MODULE(BasicConv2d);

BasicConv2d square(std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t stride = 1,
                   std::int64_t pad = 0) {
  return BasicConv2d(in, out, k, k, stride, pad, pad);
}

torch::Tensor avg_pool_same(const torch::Tensor& x) { return torch::avg_pool2d(x, 3, 1, 1); }

class InceptionAImpl : public torch::nn::Module {
public:
  InceptionAImpl(std::int64_t in, std::int64_t pool_features)
      : branch1x1(register_module("branch1x1", square(in, 64, 1))),
        branch5x5_1(register_module("branch5x5_1", square(in, 48, 1))),
        branch5x5_2(register_module("branch5x5_2", square(48, 64, 5, 1, 2))),
        branch3x3dbl_1(register_module("branch3x3dbl_1", square(in, 64, 1))),
        branch3x3dbl_2(register_module("branch3x3dbl_2", square(64, 96, 3, 1, 1))),
        branch3x3dbl_3(register_module("branch3x3dbl_3", square(96, 96, 3, 1, 1))),
        branch_pool(register_module("branch_pool", square(in, pool_features, 1))) {}

  torch::Tensor forward(torch::Tensor x) {
    return torch::cat({branch1x1(x), branch5x5_2(branch5x5_1(x)),
                       branch3x3dbl_3(branch3x3dbl_2(branch3x3dbl_1(x))),
                       branch_pool(avg_pool_same(x))},
                      1);
  }

  BasicConv2d branch1x1, branch5x5_1, branch5x5_2, branch3x3dbl_1, branch3x3dbl_2,
      branch3x3dbl_3, branch_pool;
};
TORCH_MODULE(InceptionA);

class InceptionBImpl : public torch::nn::Module {
public:
  explicit InceptionBImpl(std::int64_t in)
      : branch3x3(register_module("branch3x3", square(in, 384, 3, 2))),
        branch3x3dbl_1(register_module("branch3x3dbl_1", square(in, 64, 1))),
        branch3x3dbl_2(register_module("branch3x3dbl_2", square(64, 96, 3, 1, 1))),
        branch3x3dbl_3(register_module("branch3x3dbl_3", square(96, 96, 3, 2))) {}

  torch::Tensor forward(torch::Tensor x) {
    return torch::cat({branch3x3(x), branch3x3dbl_3(branch3x3dbl_2(branch3x3dbl_1(x))),
                       torch::max_pool2d(x, 3, 2)},
                      1);
  }

  BasicConv2d branch3x3, branch3x3dbl_1, branch3x3dbl_2, branch3x3dbl_3;
};
TORCH_MODULE(InceptionB);

class InceptionCImpl : public torch::nn::Module {
public:
  InceptionCImpl(std::int64_t in, std::int64_t c7)
      : branch1x1(register_module("branch1x1", square(in, 192, 1))),
        branch7x7_1(register_module("branch7x7_1", square(in, c7, 1))),
        branch7x7_2(register_module("branch7x7_2", BasicConv2d(c7, c7, 1, 7, 1, 0, 3))),
        branch7x7_3(register_module("branch7x7_3", BasicConv2d(c7, 192, 7, 1, 1, 3, 0))),
        branch7x7dbl_1(register_module("branch7x7dbl_1", square(in, c7, 1))),
        branch7x7dbl_2(register_module("branch7x7dbl_2", BasicConv2d(c7, c7, 7, 1, 1, 3, 0))),
        branch7x7dbl_3(register_module("branch7x7dbl_3", BasicConv2d(c7, c7, 1, 7, 1, 0, 3))),
        branch7x7dbl_4(register_module("branch7x7dbl_4", BasicConv2d(c7, c7, 7, 1, 1, 3, 0))),
        branch7x7dbl_5(register_module("branch7x7dbl_5", BasicConv2d(c7, 192, 1, 7, 1, 0, 3))),
        branch_pool(register_module("branch_pool", square(in, 192, 1))) {}

  torch::Tensor forward(torch::Tensor x) {
    auto b7 = branch7x7_3(branch7x7_2(branch7x7_1(x)));
    auto bd = branch7x7dbl_1(x);
    bd = branch7x7dbl_5(branch7x7dbl_4(branch7x7dbl_3(branch7x7dbl_2(bd))));
    return torch::cat({branch1x1(x), b7, bd, branch_pool(avg_pool_same(x))}, 1);
  }

  BasicConv2d branch1x1, branch7x7_1, branch7x7_2, branch7x7_3, branch7x7dbl_1, branch7x7dbl_2,
      branch7x7dbl_3, branch7x7dbl_4, branch7x7dbl_5, branch_pool;
};
TORCH_MODULE(InceptionC);

class InceptionDImpl : public torch::nn::Module {
public:
  explicit InceptionDImpl(std::int64_t in)
      : branch3x3_1(register_module("branch3x3_1", square(in, 192, 1))),
        branch3x3_2(register_module("branch3x3_2", square(192, 320, 3, 2))),
        branch7x7x3_1(register_module("branch7x7x3_1", square(in, 192, 1))),
        branch7x7x3_2(register_module("branch7x7x3_2", BasicConv2d(192, 192, 1, 7, 1, 0, 3))),
        branch7x7x3_3(register_module("branch7x7x3_3", BasicConv2d(192, 192, 7, 1, 1, 3, 0))),
        branch7x7x3_4(register_module("branch7x7x3_4", square(192, 192, 3, 2))) {}

  torch::Tensor forward(torch::Tensor x) {
    auto b3 = branch3x3_2(branch3x3_1(x));
    auto b7 = branch7x7x3_4(branch7x7x3_3(branch7x7x3_2(branch7x7x3_1(x))));
    return torch::cat({b3, b7, torch::max_pool2d(x, 3, 2)}, 1);
  }

  BasicConv2d branch3x3_1, branch3x3_2, branch7x7x3_1, branch7x7x3_2, branch7x7x3_3,
      branch7x7x3_4;
};
TORCH_MODULE(InceptionD);

class InceptionEImpl : public torch::nn::Module {
public:
  explicit InceptionEImpl(std::int64_t in)
      : branch1x1(register_module("branch1x1", square(in, 320, 1))),
        branch3x3_1(register_module("branch3x3_1", square(in, 384, 1))),
        branch3x3_2a(register_module("branch3x3_2a", BasicConv2d(384, 384, 1, 3, 1, 0, 1))),
        branch3x3_2b(register_module("branch3x3_2b", BasicConv2d(384, 384, 3, 1, 1, 1, 0))),
        branch3x3dbl_1(register_module("branch3x3dbl_1", square(in, 448, 1))),
        branch3x3dbl_2(register_module("branch3x3dbl_2", square(448, 384, 3, 1, 1))),
        branch3x3dbl_3a(register_module("branch3x3dbl_3a", BasicConv2d(384, 384, 1, 3, 1, 0, 1))),
        branch3x3dbl_3b(register_module("branch3x3dbl_3b", BasicConv2d(384, 384, 3, 1, 1, 1, 0))),
        branch_pool(register_module("branch_pool", square(in, 192, 1))) {}

  torch::Tensor forward(torch::Tensor x) {
    auto b3 = branch3x3_1(x);
    b3 = torch::cat({branch3x3_2a(b3), branch3x3_2b(b3)}, 1);
    auto bd = branch3x3dbl_2(branch3x3dbl_1(x));
    bd = torch::cat({branch3x3dbl_3a(bd), branch3x3dbl_3b(bd)}, 1);
    return torch::cat({branch1x1(x), b3, bd, branch_pool(avg_pool_same(x))}, 1);
  }

  BasicConv2d branch1x1, branch3x3_1, branch3x3_2a, branch3x3_2b, branch3x3dbl_1, branch3x3dbl_2,
      branch3x3dbl_3a, branch3x3dbl_3b, branch_pool;
};
TORCH_MODULE(InceptionE);

class InceptionV3 final : public Backbone {
public:
  InceptionV3()
      : Conv2d_1a_3x3(register_module("Conv2d_1a_3x3", square(3, 32, 3, 2))),
        Conv2d_2a_3x3(register_module("Conv2d_2a_3x3", square(32, 32, 3))),
        Conv2d_2b_3x3(register_module("Conv2d_2b_3x3", square(32, 64, 3, 1, 1))),
        Conv2d_3b_1x1(register_module("Conv2d_3b_1x1", square(64, 80, 1))),
        Conv2d_4a_3x3(register_module("Conv2d_4a_3x3", square(80, 192, 3))),
        Mixed_5b(register_module("Mixed_5b", InceptionA(192, 32))),
        Mixed_5c(register_module("Mixed_5c", InceptionA(256, 64))),
        Mixed_5d(register_module("Mixed_5d", InceptionA(288, 64))),
        Mixed_6a(register_module("Mixed_6a", InceptionB(288))),
        Mixed_6b(register_module("Mixed_6b", InceptionC(768, 128))),
        Mixed_6c(register_module("Mixed_6c", InceptionC(768, 160))),
        Mixed_6d(register_module("Mixed_6d", InceptionC(768, 160))),
        Mixed_6e(register_module("Mixed_6e", InceptionC(768, 192))),
        Mixed_7a(register_module("Mixed_7a", InceptionD(768))),
        Mixed_7b(register_module("Mixed_7b", InceptionE(1280))),
        Mixed_7c(register_module("Mixed_7c", InceptionE(2048))) {
    initialize(*this);
  }

  torch::Tensor forward(torch::Tensor x) override {
    x = Conv2d_2b_3x3(Conv2d_2a_3x3(Conv2d_1a_3x3(x)));
    x = torch::max_pool2d(x, 3, 2);
    x = Conv2d_4a_3x3(Conv2d_3b_1x1(x));
    x = torch::max_pool2d(x, 3, 2);
    x = Mixed_5d(Mixed_5c(Mixed_5b(x)));
    x = Mixed_6a(x);
    x = Mixed_6e(Mixed_6d(Mixed_6c(Mixed_6b(x))));
    x = Mixed_7a(x);
    return Mixed_7c(Mixed_7b(x));
  }
  std::int64_t feature_channels() const override { return 2048; }

private:
  // Member names mirror the torchvision module names.
  BasicConv2d Conv2d_1a_3x3, Conv2d_2a_3x3, Conv2d_2b_3x3, Conv2d_3b_1x1, Conv2d_4a_3x3;
  InceptionA Mixed_5b, Mixed_5c, Mixed_5d;
  InceptionB Mixed_6a;
  InceptionC Mixed_6b, Mixed_6c, Mixed_6d, Mixed_6e;
  InceptionD Mixed_7a;
  InceptionE Mixed_7b, Mixed_7c;
};

// ---------------------------------------------------------------------------
// EfficientNetV2-B0

constexpr double kEfficientNetBnEps = 1e-3;

class ConvBnActImpl : public torch::nn::Module {
public:
  ConvBnActImpl(std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t stride,
                bool activation, std::int64_t groups = 1)
      : conv(register_module("conv", crackbench::nn::conv(in, out, k, stride, k / 2, false,
                                                           groups))),
        bn(register_module("bn", batch_norm(out, kEfficientNetBnEps))), activation_(activation) {}

  torch::Tensor forward(torch::Tensor x) {
    x = bn(conv(x));
    return activation_ ? torch::silu(x) : x;
  }

  Conv2d conv;
  BatchNorm2d bn;

private:
  bool activation_;
};
TORCH_MODULE(ConvBnAct);

class SqueezeExciteImpl : public torch::nn::Module {
public:
  SqueezeExciteImpl(std::int64_t channels, std::int64_t squeezed)
      : reduce(register_module("reduce", conv(channels, squeezed, 1, 1, 0, true))),
        expand(register_module("expand", conv(squeezed, channels, 1, 1, 0, true))) {}

  torch::Tensor forward(torch::Tensor x) {
    auto s = x.mean({2, 3}, /*keepdim=*/true);
    s = torch::sigmoid(expand(torch::silu(reduce(s))));
    return x * s;
  }

  Conv2d reduce;
  Conv2d expand;
};
TORCH_MODULE(SqueezeExcite);

// Fused-MBConv: a full k x k convolution in place of expand + depthwise.
class FusedMBConvImpl : public torch::nn::Module {
public:
  FusedMBConvImpl(std::int64_t in, std::int64_t out, std::int64_t expand_ratio,
                  std::int64_t stride)
      : residual_(stride == 1 && in == out) {
    if (expand_ratio == 1) {
      project = register_module("project", ConvBnAct(in, out, 3, stride, true));
    } else {
      expand = register_module("expand", ConvBnAct(in, in * expand_ratio, 3, stride, true));
      project = register_module("project", ConvBnAct(in * expand_ratio, out, 1, 1, false));
    }
  }

  torch::Tensor forward(torch::Tensor x) {
    auto y = expand ? expand(x) : x;
    y = project(y);
    return residual_ ? y + x : y;
  }

  ConvBnAct expand{nullptr};
  ConvBnAct project{nullptr};

private:
  bool residual_;
};
TORCH_MODULE(FusedMBConv);

class MBConvImpl : public torch::nn::Module {
public:
  MBConvImpl(std::int64_t in, std::int64_t out, std::int64_t expand_ratio, std::int64_t stride,
             double se_ratio)
      : residual_(stride == 1 && in == out) {
    const std::int64_t mid = in * expand_ratio;
    expand = register_module("expand", ConvBnAct(in, mid, 1, 1, true));
    depthwise = register_module("depthwise", ConvBnAct(mid, mid, 3, stride, true, mid));
    const auto squeezed = std::max<std::int64_t>(1, static_cast<std::int64_t>(in * se_ratio));
    se = register_module("se", SqueezeExcite(mid, squeezed));
    project = register_module("project", ConvBnAct(mid, out, 1, 1, false));
  }

  torch::Tensor forward(torch::Tensor x) {
    auto y = project(se(depthwise(expand(x))));
    return residual_ ? y + x : y;
  }

  ConvBnAct expand{nullptr};
  ConvBnAct depthwise{nullptr};
  SqueezeExcite se{nullptr};
  ConvBnAct project{nullptr};

private:
  bool residual_;
};
TORCH_MODULE(MBConv);

class EfficientNetV2B0 final : public Backbone {
public:
  EfficientNetV2B0() {
    struct Stage {
      bool fused;
      int repeats;
      std::int64_t in;
      std::int64_t out;
      std::int64_t expand;
      std::int64_t stride;
      double se;
    };
    static constexpr Stage kStages[] = {
        {true, 1, 32, 16, 1, 1, 0.0},    {true, 2, 16, 32, 4, 2, 0.0},
        {true, 2, 32, 48, 4, 2, 0.0},    {false, 3, 48, 96, 4, 2, 0.25},
        {false, 5, 96, 112, 6, 1, 0.25}, {false, 8, 112, 192, 6, 2, 0.25},
    };

    stem_ = register_module("stem", ConvBnAct(3, 32, 3, 2, true));
    torch::nn::Sequential blocks;
    for (const auto& s : kStages) {
      for (int i = 0; i < s.repeats; ++i) {
        const auto in = i == 0 ? s.in : s.out;
        const auto stride = i == 0 ? s.stride : 1;
        if (s.fused) {
          blocks->push_back(FusedMBConv(in, s.out, s.expand, stride));
        } else {
          blocks->push_back(MBConv(in, s.out, s.expand, stride, s.se));
        }
      }
    }
    blocks_ = register_module("blocks", blocks);
    top_ = register_module("top", ConvBnAct(192, 1280, 1, 1, true));
    initialize(*this);
  }

  torch::Tensor forward(torch::Tensor x) override { return top_(blocks_->forward(stem_(x))); }
  std::int64_t feature_channels() const override { return 1280; }

private:
  ConvBnAct stem_{nullptr};
  torch::nn::Sequential blocks_{nullptr};
  ConvBnAct top_{nullptr};
};

// ---------------------------------------------------------------------------

struct FactoryTable {
  std::mutex mutex;
  std::map<std::string, BackboneFactory, std::less<>> factories{
      {"VGG19", make_vgg19},
      {"ResNet50", make_resnet50},
      {"InceptionV3", make_inception_v3},
      {"EfficientNetV2", make_efficientnet_v2_b0},
  };
};

FactoryTable& factory_table() {
  static FactoryTable table;
  return table;
}

} // namespace

std::shared_ptr<Backbone> make_vgg19() { return std::make_shared<Vgg19>(); }
std::shared_ptr<Backbone> make_resnet50() { return std::make_shared<ResNet50>(); }
std::shared_ptr<Backbone> make_inception_v3() { return std::make_shared<InceptionV3>(); }
std::shared_ptr<Backbone> make_efficientnet_v2_b0() {
  return std::make_shared<EfficientNetV2B0>();
}

void register_backbone_factory(const std::string& name, BackboneFactory factory) {
  auto& table = factory_table();
  std::lock_guard lock(table.mutex);
  table.factories[name] = std::move(factory);
}

void unregister_backbone_factory(const std::string& name) {
  auto& table = factory_table();
  std::lock_guard lock(table.mutex);
  table.factories.erase(name);
}

std::shared_ptr<Backbone> make_backbone(std::string_view name) {
  BackboneFactory factory;
  {
    auto& table = factory_table();
    std::lock_guard lock(table.mutex);
    auto it = table.factories.find(name);
    if (it == table.factories.end()) {
      throw ConfigError("no network implementation for backbone '" + std::string(name) + "'");
    }
    factory = it->second;
  }
  return factory();
}

} // namespace crackbench::nn
