#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include <boost/math/special_functions/beta.hpp>
#include <gtest/gtest.h>

#include "crackbench/errors.hpp"
#include "crackbench/results.hpp"
#include "crackbench/stats.hpp"
#include "support/synthetic.hpp"

using namespace crackbench;

namespace {

MetricSample sample(std::string label, std::vector<double> values,
                    std::string metric = "accuracy") {
  return {std::move(label), std::move(metric), std::move(values)};
}

// SciPy reference values (tests/oracles/derive.py).
struct TailCase {
  double f;
  int d1;
  int d2;
  double expected;
};
constexpr TailCase kTailCases[] = {
    {1.0, 1, 1, 0.5000000000000001},
    {2.5, 3, 10, 0.11903956265827816},
    {0.7, 5, 7, 0.6410244959937808},
    {10.0, 4, 30, 2.8928437923539454e-05},
    {1.2, 200, 200, 0.09909792302369622},
    {0.01, 200, 3, 0.9999999999999999},
    {4.0, 1, 12, 0.06865501403808592},
    {50.0, 7, 9, 1.7205780634610756e-06},
    {1000000.0, 1, 1, 0.000636619560161118},
    {3.0, 2, 6, 0.125},
    {0.5, 150, 180, 0.999992706442207},
    {2.0, 37, 41, 0.015987101325342243},
};

struct BetaCase {
  double x;
  double a;
  double b;
  double expected;
};
constexpr BetaCase kBetaCases[] = {
    {0.5, 0.5, 0.5, 0.5000000000000001},  {0.3, 2.0, 3.0, 0.34829999999999994},
    {0.9, 10.0, 0.5, 0.15164090963470994}, {0.01, 0.5, 100.0, 0.843224134575559},
    {0.999, 100.0, 100.0, 1.0},           {0.2, 1.0, 1.0, 0.2},
    {0.75, 30.5, 12.5, 0.7106209045695111},
};

} // namespace

TEST(IncompleteBeta, ReferenceValues) {
  for (const auto& c : kBetaCases) {
    EXPECT_NEAR(regularized_incomplete_beta(c.x, c.a, c.b), c.expected, 1e-12)
        << c.x << " " << c.a << " " << c.b;
  }
  EXPECT_EQ(regularized_incomplete_beta(0.0, 2.0, 3.0), 0.0);
  EXPECT_EQ(regularized_incomplete_beta(1.0, 2.0, 3.0), 1.0);
}

TEST(IncompleteBeta, AgreesWithBoostAcrossRandomArguments) {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> x(0.0, 1.0);
  std::uniform_int_distribution<int> half_df(1, 400);
  for (int i = 0; i < 3000; ++i) {
    const double a = half_df(gen) / 2.0;
    const double b = half_df(gen) / 2.0;
    const double xv = x(gen);
    EXPECT_NEAR(regularized_incomplete_beta(xv, a, b), boost::math::ibeta(a, b, xv), 1e-11)
        << xv << " " << a << " " << b;
  }
}

TEST(FUpperTail, ReferenceValues) {
  for (const auto& c : kTailCases) {
    EXPECT_NEAR(f_upper_tail(c.f, c.d1, c.d2), c.expected, 1e-10)
        << c.f << " " << c.d1 << " " << c.d2;
  }
}

TEST(FUpperTail, Boundaries) {
  EXPECT_EQ(f_upper_tail(0.0, 3, 5), 1.0);
  EXPECT_EQ(f_upper_tail(std::numeric_limits<double>::infinity(), 3, 5), 0.0);
  EXPECT_NEAR(f_upper_tail(3.0, 2, 6), 0.125, 1e-10);
  EXPECT_NEAR(f_upper_tail(1.0, 1, 1), 0.5, 1e-12);
}

TEST(FUpperTail, InvalidArguments) {
  EXPECT_THROW(f_upper_tail(1.0, 0, 5), UsageError);
  EXPECT_THROW(f_upper_tail(1.0, 3, -1), UsageError);
  EXPECT_THROW(f_upper_tail(std::nan(""), 3, 5), UsageError);
}

TEST(FUpperTail, ClosedFormForTwoNumeratorDegrees) {
  for (int d2 = 2; d2 <= 50; ++d2) {
    for (double f = 0.1; f <= 20.0 + 1e-9; f += 0.1) {
      const double closed = std::pow(d2 / (d2 + 2.0 * f), d2 / 2.0);
      ASSERT_NEAR(f_upper_tail(f, 2, d2), closed, 1e-10) << f << " " << d2;
    }
  }
}

TEST(FUpperTail, MonotoneNonIncreasing) {
  for (int d1 : {1, 3, 10, 120}) {
    for (int d2 : {1, 4, 30, 200}) {
      double prev = 1.0;
      for (double f = 0.0; f < 60.0; f += 0.25) {
        const double p = f_upper_tail(f, d1, d2);
        ASSERT_LE(p, prev + 1e-15);
        ASSERT_GE(p, 0.0);
        prev = p;
      }
    }
  }
}

TEST(FUpperTail, MatchesBoostOverDocumentedRange) {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<int> df(1, 200);
  std::uniform_real_distribution<double> logf(-3.0, 6.0);
  for (int i = 0; i < 2000; ++i) {
    const int d1 = df(gen);
    const int d2 = df(gen);
    const double f = std::pow(10.0, logf(gen));
    const double x = d2 / (d2 + d1 * f);
    const double reference = boost::math::ibeta(d2 / 2.0, d1 / 2.0, x);
    ASSERT_NEAR(f_upper_tail(f, d1, d2), reference, 1e-10) << f << " " << d1 << " " << d2;
  }
}

TEST(Anova, ThreeGroupFixture) {
  const std::vector groups{sample("A", {1, 2, 3}), sample("B", {2, 3, 4}),
                           sample("C", {3, 4, 5})};
  const auto r = one_way_anova(groups);
  EXPECT_NEAR(r.ss_between, 6.0, 1e-12);
  EXPECT_NEAR(r.ss_within, 6.0, 1e-12);
  EXPECT_EQ(r.df_between, 2);
  EXPECT_EQ(r.df_within, 6);
  EXPECT_NEAR(r.f_statistic, 3.0, 1e-12);
  EXPECT_NEAR(r.p_value, 0.125, 1e-9);
  EXPECT_FALSE(r.significant);
  EXPECT_TRUE(one_way_anova(groups, 0.2).significant);
}

TEST(Anova, UnbalancedFixtureMatchesReference) {
  const std::vector groups{sample("a", {0.81, 0.84, 0.79}),
                           sample("b", {0.88, 0.86, 0.90, 0.87, 0.89}),
                           sample("c", {0.80, 0.83})};
  const auto r = one_way_anova(groups);
  EXPECT_NEAR(r.f_statistic, 14.034355828220868, 1e-9);
  EXPECT_NEAR(r.p_value, 0.00355323393248733, 1e-12);
  EXPECT_EQ(r.df_between, 2);
  EXPECT_EQ(r.df_within, 7);
  EXPECT_TRUE(r.significant);
}

TEST(Anova, FourModelFixtureIsSignificant) {
  const std::vector groups{sample("VGG19", {0.920, 0.924, 0.919, 0.923, 0.925}),
                           sample("ResNet50", {0.994, 0.996, 0.991, 0.995, 0.993}),
                           sample("InceptionV3", {0.973, 0.970, 0.977, 0.972, 0.975}),
                           sample("EfficientNetV2", {0.996, 0.999, 0.990, 0.998, 0.997})};
  const auto r = one_way_anova(groups);
  EXPECT_NEAR(r.f_statistic, 779.5916114790452, 1e-7);
  EXPECT_NEAR(r.p_value, 1.512156700247045e-17, 1e-25);
  EXPECT_TRUE(r.significant);
}

TEST(Anova, IdenticalConstantsAreDegenerate) {
  const std::vector groups{sample("A", {0.5, 0.5}), sample("B", {0.5, 0.5, 0.5})};
  const auto r = one_way_anova(groups);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.f_statistic, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_FALSE(r.significant);
}

TEST(Anova, ConstantDistinctGroupsAreExactlySeparated) {
  const std::vector groups{sample("A", {0.5, 0.5}), sample("B", {0.7, 0.7})};
  const auto r = one_way_anova(groups);
  EXPECT_TRUE(r.exact_separation);
  EXPECT_EQ(r.p_value, 0.0);
  EXPECT_TRUE(std::isinf(r.f_statistic));
  EXPECT_TRUE(r.significant);
}

TEST(Anova, Preconditions) {
  EXPECT_THROW(one_way_anova(std::vector{sample("A", {1, 2})}), UsageError);
  EXPECT_THROW(one_way_anova(std::vector{sample("A", {1}), sample("B", {2})}), UsageError);
  EXPECT_THROW(one_way_anova(std::vector{sample("A", {}), sample("B", {2, 3})}), UsageError);
  EXPECT_THROW(one_way_anova(std::vector{sample("A", {1, 2}), sample("B", {2, 3}, "f1")}),
               UsageError);
  EXPECT_THROW(one_way_anova(std::vector{sample("A", {1, std::nan("")}), sample("B", {2, 3})}),
               UsageError);
}

TEST(Anova, TwoGroupsEqualSquaredT) {
  const std::vector groups{sample("a", {0.2, 0.5, 0.4, 0.9}),
                           sample("b", {0.6, 0.8, 0.7, 1.1, 0.95})};
  const auto r = one_way_anova(groups);
  EXPECT_NEAR(r.f_statistic, 4.052631578947364, 1e-9);
  EXPECT_NEAR(r.p_value, 0.08397900658605033, 1e-12);
}

TEST(Anova, SignificanceMatchesAlpha) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<MetricSample> groups;
    for (int g = 0; g < 3; ++g) {
      std::vector<double> v;
      for (int j = 0; j < 4; ++j) {
        v.push_back(noise(gen) + 0.5 * g);
      }
      groups.push_back(sample(std::to_string(g), v));
    }
    const auto r = one_way_anova(groups, 0.05);
    EXPECT_EQ(r.significant, r.p_value < 0.05);
    EXPECT_EQ(r.df_between, 2);
    EXPECT_EQ(r.df_within, 9);
  }
}

namespace {

RunResult run(const std::string& backbone, TrainMode mode, std::uint64_t seed, double acc,
              std::optional<double> precision = std::nullopt) {
  RunResult r;
  r.backbone = backbone;
  r.mode = mode;
  r.seed = seed;
  r.metrics.accuracy = acc;
  r.metrics.precision = precision.value_or(acc);
  r.metrics.recall = acc;
  r.metrics.f1 = acc;
  return r;
}

} // namespace

class CompareModelsTest : public ::testing::Test {
protected:
  crackbench::testing::TempDir dir{"compare"};

  std::filesystem::path write(const RunResult& r) {
    const auto p = dir / run_result_filename(r.backbone, r.mode, r.seed);
    save_run_result(p, r);
    return p;
  }
};

TEST_F(CompareModelsTest, GroupsByModelAndRunsOneAnovaPerMetric) {
  std::vector<std::filesystem::path> files;
  const double a[] = {1, 2, 3};
  const double b[] = {2, 3, 4};
  const double c[] = {3, 4, 5};
  for (int s = 0; s < 3; ++s) {
    files.push_back(write(run("A", TrainMode::fine_tune_all, s, a[s])));
    files.push_back(write(run("B", TrainMode::fine_tune_all, s, b[s])));
    files.push_back(write(run("C", TrainMode::fine_tune_all, s, c[s])));
  }
  const std::vector<std::string> metrics{"accuracy"};
  const auto cmp = compare_models(files, metrics);
  ASSERT_EQ(cmp.size(), 1U);
  const auto& acc = cmp.at("accuracy");
  EXPECT_NEAR(acc.anova.f_statistic, 3.0, 1e-12);
  EXPECT_NEAR(acc.anova.p_value, 0.125, 1e-9);
  EXPECT_EQ(acc.group_sizes.at("B"), 3U);

  const std::vector<std::string> all{"accuracy", "precision", "recall", "f1"};
  EXPECT_EQ(compare_models(files, all).size(), 4U);
}

TEST_F(CompareModelsTest, ConstantGroupsAreNotSignificant) {
  std::vector<std::filesystem::path> files;
  for (const char* model : {"VGG19", "ResNet50", "InceptionV3", "EfficientNetV2"}) {
    for (int s = 0; s < 5; ++s) {
      files.push_back(write(run(model, TrainMode::fine_tune_all, s, 0.9)));
    }
  }
  const std::vector<std::string> metrics{"accuracy"};
  const auto cmp = compare_models(files, metrics);
  EXPECT_FALSE(cmp.at("accuracy").anova.significant);
  EXPECT_TRUE(cmp.at("accuracy").anova.degenerate);
}

TEST_F(CompareModelsTest, ExcludesUndefinedValues) {
  std::vector<std::filesystem::path> files;
  files.push_back(write(run("A", TrainMode::fine_tune_all, 0, 0.5)));
  files.push_back(write(run("A", TrainMode::fine_tune_all, 1, 0.6)));
  auto undefined = run("A", TrainMode::fine_tune_all, 2, 0.7);
  undefined.metrics.precision.reset();
  files.push_back(write(undefined));
  files.push_back(write(run("B", TrainMode::fine_tune_all, 0, 0.8)));
  files.push_back(write(run("B", TrainMode::fine_tune_all, 1, 0.9)));
  const std::vector<std::string> metrics{"precision"};
  const auto cmp = compare_models(files, metrics);
  EXPECT_EQ(cmp.at("precision").excluded_undefined, 1U);
  EXPECT_EQ(cmp.at("precision").group_sizes.at("A"), 2U);
}

TEST_F(CompareModelsTest, ModeFilterAndMixedModeLabels) {
  std::vector<std::filesystem::path> files;
  for (int s = 0; s < 2; ++s) {
    files.push_back(write(run("A", TrainMode::fine_tune_all, s, 0.9 + 0.01 * s)));
    files.push_back(write(run("A", TrainMode::frozen_features, s, 0.7 + 0.01 * s)));
  }
  const std::vector<std::string> metrics{"accuracy"};
  EXPECT_THROW(compare_models(files, metrics, 0.05, "fine_tune_all"), DataError);
  const auto mixed = compare_models(files, metrics);
  EXPECT_EQ(mixed.at("accuracy").group_sizes.count("A/fine_tune_all"), 1U);
  EXPECT_EQ(mixed.at("accuracy").group_sizes.count("A/frozen_features"), 1U);
}

TEST_F(CompareModelsTest, MissingOrMalformedFilesNameTheFile) {
  const std::vector<std::string> metrics{"accuracy"};
  const std::vector<std::filesystem::path> missing{dir / "nope__fine_tune_all__seed0.json"};
  try {
    compare_models(missing, metrics);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("nope__fine_tune_all__seed0.json"), std::string::npos);
  }
  write_text_file(dir / "bad__fine_tune_all__seed0.json", "{not json");
  const std::vector<std::filesystem::path> bad{dir / "bad__fine_tune_all__seed0.json"};
  EXPECT_THROW(compare_models(bad, metrics), DataError);
}

TEST_F(CompareModelsTest, JsonDocumentShape) {
  std::vector<std::filesystem::path> files;
  const double a[] = {1, 2, 3};
  const double b[] = {2, 3, 4};
  const double c[] = {3, 4, 5};
  for (int s = 0; s < 3; ++s) {
    files.push_back(write(run("A", TrainMode::fine_tune_all, s, a[s])));
    files.push_back(write(run("B", TrainMode::fine_tune_all, s, b[s])));
    files.push_back(write(run("C", TrainMode::fine_tune_all, s, c[s])));
  }
  const std::vector<std::string> metrics{"accuracy"};
  const auto json = comparison_to_json(compare_models(files, metrics));
  for (const char* key : {"\"accuracy\"", "\"F\"", "\"df\"", "\"p\"", "\"alpha\"",
                          "\"significant\"", "\"groups\""}) {
    EXPECT_NE(json.find(key), std::string::npos) << key;
  }
  const auto md = render_comparison_markdown(compare_models(files, metrics));
  EXPECT_NE(md.find("accuracy"), std::string::npos);
}
