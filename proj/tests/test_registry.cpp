#include <gtest/gtest.h>

#include "crackbench/backbone.hpp"
#include "crackbench/errors.hpp"
#include "crackbench/scorer.hpp"

using namespace crackbench;

TEST(Registry, ShipsTheFourPublishedDescriptors) {
  const auto all = list_backbones();
  ASSERT_GE(all.size(), 4U);
  EXPECT_EQ(all[0].name, "VGG19");
  EXPECT_EQ(all[0].declared_layers, 19);
  EXPECT_EQ(all[0].declared_params_millions, 143.0);
  EXPECT_EQ(all[1].name, "ResNet50");
  EXPECT_EQ(all[1].declared_layers, 50);
  EXPECT_EQ(all[1].declared_params_millions, 23.0);
  EXPECT_EQ(all[2].name, "InceptionV3");
  EXPECT_EQ(all[2].declared_layers, 48);
  EXPECT_EQ(all[2].declared_params_millions, 21.0);
  EXPECT_EQ(all[3].name, "EfficientNetV2");
  EXPECT_EQ(all[3].declared_layers, 237);
  EXPECT_EQ(all[3].declared_params_millions, 25.0);
}

TEST(Registry, PreprocessingContracts) {
  const auto& reg = BackboneRegistry::instance();
  EXPECT_EQ(reg.get("VGG19").preprocessing(),
            (Preprocessing{PixelScaling::imagenet_mean_std, 224}));
  EXPECT_EQ(reg.get("InceptionV3").preprocessing().input_size, 299);
  EXPECT_EQ(reg.get("EfficientNetV2").preprocessing().scaling, PixelScaling::symmetric_unit);
  EXPECT_EQ(Preprocessing::parse("symmetric_unit@299").id(), "symmetric_unit@299");
  EXPECT_THROW(Preprocessing::parse("symmetric_unit"), ConfigError);
  EXPECT_THROW(Preprocessing::parse("odd@224"), ConfigError);
  EXPECT_THROW(Preprocessing::parse("unit_range@-3"), ConfigError);
}

TEST(Registry, UnknownNameListsRegistry) {
  try {
    BackboneRegistry::instance().get("AlexNet");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("AlexNet"), std::string::npos);
    EXPECT_NE(msg.find("ResNet50"), std::string::npos);
  }
  EXPECT_FALSE(BackboneRegistry::instance().find("AlexNet").has_value());
}

TEST(Registry, AddAndRemove) {
  auto& reg = BackboneRegistry::instance();
  const BackboneDescriptor extra{"TinyNet", 3, 0.01, 32, "unit_range@32"};
  reg.add(extra);
  EXPECT_EQ(reg.get("TinyNet"), extra);
  EXPECT_THROW(reg.add(extra), UsageError);
  EXPECT_TRUE(reg.remove("TinyNet"));
  EXPECT_FALSE(reg.remove("TinyNet"));
  EXPECT_EQ(list_backbones().size(), 4U);
}

TEST(Classify, ThresholdBoundary) {
  EXPECT_EQ(classify(0.5, 0.5), Label::positive);
  EXPECT_EQ(classify(0.5, 0.50001), Label::negative);
  EXPECT_EQ(classify(0.0, 0.5), Label::negative);
  EXPECT_EQ(classify(1.0, 0.5), Label::positive);
  EXPECT_THROW(classify(1.2, 0.5), UsageError);
  EXPECT_THROW(classify(-0.1, 0.5), UsageError);
  EXPECT_THROW(classify(0.5, 0.0), UsageError);
  EXPECT_THROW(classify(0.5, 1.0), UsageError);
}

TEST(Classify, MonotoneInProbability) {
  for (double t : {0.1, 0.5, 0.9}) {
    Label prev = Label::negative;
    for (int i = 0; i <= 1000; ++i) {
      const auto l = classify(i / 1000.0, t);
      EXPECT_GE(static_cast<int>(l), static_cast<int>(prev));
      prev = l;
    }
  }
}

TEST(AbstainBand, FlagsOnlyNearThreshold) {
  EXPECT_TRUE(within_abstain_band(0.55, 0.5, 0.2));
  EXPECT_TRUE(within_abstain_band(0.41, 0.5, 0.2));
  EXPECT_FALSE(within_abstain_band(0.65, 0.5, 0.2));
  EXPECT_FALSE(within_abstain_band(0.5, 0.5, 0.0));
}

TEST(TrainModeNames, RoundTrip) {
  for (auto m : {TrainMode::frozen_features, TrainMode::fine_tune_all}) {
    EXPECT_EQ(train_mode_from_string(to_string(m)), m);
  }
  EXPECT_THROW(train_mode_from_string("partial"), UsageError);
}
