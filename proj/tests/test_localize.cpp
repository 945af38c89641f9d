#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "crackbench/errors.hpp"
#include "crackbench/localize.hpp"
#include "support/stubs.hpp"

using namespace crackbench;
using crackbench::testing::FunctionScorer;

namespace {

// Fires iff the window covers pixel (px, py).
FunctionScorer pixel_scorer(int window, int px, int py) {
  return FunctionScorer(window, [=](const ImagePatch& p) {
    const Detection box{p.origin->col, p.origin->row, window, window, 0.0};
    return box.contains(px, py) ? 1.0 : 0.0;
  });
}

Detection bounding_box(std::span<const Detection> boxes) {
  Detection out = boxes.front();
  for (const auto& b : boxes) {
    const int x1 = std::max(out.x + out.width, b.x + b.width);
    const int y1 = std::max(out.y + out.height, b.y + b.height);
    out.x = std::min(out.x, b.x);
    out.y = std::min(out.y, b.y);
    out.width = x1 - out.x;
    out.height = y1 - out.y;
  }
  return out;
}

} // namespace

TEST(Iou, Examples) {
  const Detection a{0, 0, 100, 100, 0.9};
  const Detection b{50, 50, 100, 100, 0.8};
  EXPECT_NEAR(iou(a, b), 2500.0 / 17500.0, 1e-9);
  EXPECT_NEAR(iou(a, b), 0.142857, 1e-6);
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(a, {100, 0, 10, 10, 0}), 0.0);
  EXPECT_EQ(iou(a, {300, 300, 10, 10, 0}), 0.0);
}

TEST(Iou, SymmetricAndOneOnlyWhenIdentical) {
  std::mt19937_64 gen(8);
  std::uniform_int_distribution<int> pos(0, 60);
  std::uniform_int_distribution<int> size(1, 40);
  for (int i = 0; i < 2000; ++i) {
    const Detection a{pos(gen), pos(gen), size(gen), size(gen), 0};
    const Detection b{pos(gen), pos(gen), size(gen), size(gen), 0};
    EXPECT_EQ(iou(a, b), iou(b, a));
    EXPECT_EQ(iou(a, b) == 1.0, a == b);
  }
}

TEST(MergeBoxes, Examples) {
  EXPECT_TRUE(merge_boxes({}).empty());

  const std::vector twins{Detection{10, 10, 50, 50, 0.6}, Detection{10, 10, 50, 50, 0.7}};
  const auto one = merge_boxes(twins);
  ASSERT_EQ(one.size(), 1U);
  EXPECT_EQ(one[0].score, 0.7);

  const std::vector pair{Detection{0, 0, 100, 100, 0.9}, Detection{50, 50, 100, 100, 0.8}};
  EXPECT_EQ(merge_boxes(pair, 0.2).size(), 2U);
  const auto merged = merge_boxes(pair, 0.1);
  ASSERT_EQ(merged.size(), 1U);
  EXPECT_EQ(merged[0], (Detection{0, 0, 150, 150, 0.9}));

  EXPECT_THROW(merge_boxes(pair, 0.0), UsageError);
  EXPECT_THROW(merge_boxes(pair, 1.5), UsageError);
}

TEST(MergeBoxes, IdempotentContainingAndSeparated) {
  std::mt19937_64 gen(21);
  std::uniform_int_distribution<int> pos(0, 400);
  std::uniform_int_distribution<int> size(20, 120);
  std::uniform_int_distribution<int> n(0, 25);
  std::uniform_real_distribution<double> score(0.5, 1.0);
  for (double threshold : {0.05, 0.1, 0.3, 0.7}) {
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<Detection> boxes;
      const int count = n(gen);
      for (int i = 0; i < count; ++i) {
        boxes.push_back({pos(gen), pos(gen), size(gen), size(gen), score(gen)});
      }
      const auto once = merge_boxes(boxes, threshold);
      EXPECT_EQ(merge_boxes(once, threshold), once);
      EXPECT_LE(once.size(), boxes.size());
      for (const auto& b : boxes) {
        EXPECT_TRUE(std::any_of(once.begin(), once.end(),
                                [&](const Detection& m) { return m.contains(b); }));
      }
      for (std::size_t i = 0; i < once.size(); ++i) {
        for (std::size_t j = i + 1; j < once.size(); ++j) {
          EXPECT_LT(iou(once[i], once[j]), threshold);
        }
      }
    }
  }
}

TEST(Slide, WindowCountAndOrder) {
  auto scorer = crackbench::testing::constant_scorer(227, 0.9);
  const SourceImage img{RgbImage(800, 1000), "wide"};
  const WindowConfig cfg{227, 100, 0.5, false, 7};
  EXPECT_EQ(window_count(800, 1000, cfg), 48U);
  const auto dets = slide(scorer, img, cfg);
  EXPECT_EQ(dets.size(), 48U);
  EXPECT_EQ(scorer.scored, 48U);
  EXPECT_EQ(scorer.calls, 7U);
  EXPECT_TRUE(std::is_sorted(dets.begin(), dets.end(), [](const auto& a, const auto& b) {
    return std::tie(a.y, a.x) < std::tie(b.y, b.x);
  }));
  EXPECT_EQ(dets.back().x, 700);
  EXPECT_EQ(dets.back().y, 500);
}

TEST(Slide, ConstantZeroScorerFindsNothing) {
  const auto scorer = crackbench::testing::constant_scorer(227, 0.0);
  const SourceImage img{RgbImage(3024, 4032), "full"};
  EXPECT_TRUE(slide(scorer, img, {}).empty());
  EXPECT_EQ(window_count(3024, 4032, {}), 221U);
}

TEST(Slide, PlantedPixelIsInsideEveryBox) {
  const auto scorer = pixel_scorer(227, 300, 300);
  const SourceImage img{RgbImage(800, 1000), "planted"};
  const WindowConfig cfg{227, 100, 0.5, false, 32};
  const auto dets = slide(scorer, img, cfg);
  // Offsets 100, 200 and 300 along each axis cover 300.
  ASSERT_EQ(dets.size(), 9U);
  for (const auto& d : dets) {
    EXPECT_TRUE(d.contains(300, 300));
  }
  const auto merged = merge_boxes(dets);
  ASSERT_EQ(merged.size(), 1U);
  EXPECT_EQ(merged[0], (Detection{100, 100, 427, 427, 1.0}));
}

TEST(Slide, CoverEdgesAddsClampedWindows) {
  const SourceImage img{RgbImage(300, 500), "edge"};
  const auto scorer = pixel_scorer(227, 490, 290);
  WindowConfig cfg{227, 227, 0.5, false, 32};
  EXPECT_TRUE(slide(scorer, img, cfg).empty());
  cfg.cover_edges = true;
  EXPECT_EQ(window_count(300, 500, cfg), 6U);
  const auto dets = slide(scorer, img, cfg);
  ASSERT_EQ(dets.size(), 1U);
  EXPECT_EQ(dets[0], (Detection{273, 73, 227, 227, 1.0}));
}

TEST(Slide, BatchSizeDoesNotChangeResults) {
  const SourceImage img{RgbImage(600, 700), "b"};
  auto score = [](const ImagePatch& p) {
    return ((p.origin->row * 31 + p.origin->col * 17) % 100) / 100.0;
  };
  const FunctionScorer scorer(50, score);
  WindowConfig cfg{50, 30, 0.4, true, 1};
  const auto reference = slide(scorer, img, cfg);
  for (int b : {2, 5, 64, 10000}) {
    cfg.batch_size = b;
    EXPECT_EQ(slide(scorer, img, cfg), reference) << b;
  }
}

TEST(Slide, ConfigErrors) {
  const auto scorer = crackbench::testing::constant_scorer(227, 0.9);
  const SourceImage img{RgbImage(300, 300), "e"};
  EXPECT_THROW(slide(scorer, img, {100, 100, 0.5, false, 32}), UsageError);
  EXPECT_THROW(slide(scorer, img, {227, 0, 0.5, false, 32}), UsageError);
  EXPECT_THROW(slide(scorer, img, {227, 227, 1.0, false, 32}), UsageError);
  EXPECT_THROW(slide(scorer, img, {227, 227, 0.5, false, 0}), UsageError);
}

TEST(Localization, MatchesBruteForceUnion) {
  std::mt19937_64 gen(77);
  std::uniform_int_distribution<int> extent(120, 520);
  std::uniform_int_distribution<int> window(16, 100);
  for (int trial = 0; trial < 200; ++trial) {
    const int h = extent(gen);
    const int w = extent(gen);
    const int win = window(gen);
    // Strides up to 0.8 * window keep neighbouring covering windows above the
    // default merge IoU, so they chain into one component.
    const int stride = std::uniform_int_distribution<int>(1, win * 4 / 5)(gen);
    const int px = std::uniform_int_distribution<int>(0, w - 1)(gen);
    const int py = std::uniform_int_distribution<int>(0, h - 1)(gen);
    const auto scorer = pixel_scorer(win, px, py);
    const WindowConfig cfg{win, stride, 0.5, true, 64};
    const auto dets = slide(scorer, SourceImage{RgbImage(h, w), "t"}, cfg);

    // Every window position, enumerated directly, including clamped edges.
    auto starts = [&](int extent) {
      std::vector<int> out;
      for (int s = 0; s + win <= extent; s += stride) {
        out.push_back(s);
      }
      if (!out.empty() && out.back() + win != extent) {
        out.push_back(extent - win);
      }
      return out;
    };
    std::vector<Detection> expected;
    for (int r : starts(h)) {
      for (int c : starts(w)) {
        if (px >= c && px < c + win && py >= r && py < r + win) {
          expected.push_back({c, r, win, win, 1.0});
        }
      }
    }
    std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
      return std::tie(a.y, a.x) < std::tie(b.y, b.x);
    });
    ASSERT_EQ(dets, expected);
    ASSERT_FALSE(dets.empty());
    const auto merged = merge_boxes(dets);
    for (const auto& m : merged) {
      EXPECT_TRUE(m.contains(px, py));
    }
    ASSERT_EQ(merged.size(), 1U);
    EXPECT_GE(iou(merged[0], bounding_box(expected)), 0.99);
  }
}

TEST(Localization, JsonAndAnnotation) {
  const std::vector dets{Detection{10, 20, 30, 30, 0.75}};
  const WindowConfig cfg{30, 30, 0.5, false, 32};
  const auto json = detections_to_json("img", cfg, 0.1, dets);
  EXPECT_NE(json.find("\"image_id\": \"img\""), std::string::npos);
  EXPECT_NE(json.find("\"score\": 0.75"), std::string::npos);

  const RgbImage blank(100, 100);
  const auto drawn = annotate(blank, dets, 1);
  EXPECT_EQ(drawn.at(20, 10, 0), 255);
  EXPECT_EQ(drawn.at(20, 10, 1), 0);
  EXPECT_EQ(drawn.at(35, 25, 0), 0);
  EXPECT_EQ(blank.at(20, 10, 0), 0);
}
