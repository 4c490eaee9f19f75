#include <updens/benchmark.hpp>
#include <updens/test_functions.hpp>

#include <gtest/gtest.h>

#include <array>
#include <filesystem>
#include <sstream>

using namespace updens;

TEST(TestFunctions, KnownValues)
{
  const std::array<double, 5> zero{};
  EXPECT_NEAR(eval_test_function(TestFunctionId::m4, zero), 1.0, 1e-14);
  EXPECT_NEAR(eval_test_function(TestFunctionId::m1, zero), -3.605170, 1e-6);
  const std::array<double, 5> e1{1.0, 0.0, 0.0, 0.0, 0.0};
  EXPECT_NEAR(eval_test_function(TestFunctionId::m3, e1), 1.818182, 1e-6);
  EXPECT_THROW(eval_test_function(TestFunctionId::m1, std::array<double, 2>{}), Error);
}

TEST(TestFunctions, ImperfectModelIsAShift)
{
  const std::array<double, 5> x{0.1, -0.3, 0.7, 1.1, -2.0};
  const auto truth = true_model(TestFunctionId::m2);
  const auto m = imperfect_model(TestFunctionId::m2, 0.5, 4.32);
  EXPECT_NEAR(m(x) - truth(x), 2.16, 1e-12);
  EXPECT_THROW(imperfect_model(TestFunctionId::m2, -0.1, 4.32), Error);
}

TEST(TestFunctions, Parse)
{
  EXPECT_EQ(parse_test_function("m3"), TestFunctionId::m3);
  EXPECT_FALSE(parse_test_function("m5").has_value());
  EXPECT_EQ(to_string(TestFunctionId::m1), "m1");
}

TEST(TestFunctions, LambdaStarSmallSample)
{
  Rng rng(1);
  EXPECT_NEAR(compute_lambda_star(TestFunctionId::m4, 50000, rng), 5.86, 0.3);
  EXPECT_THROW(compute_lambda_star(TestFunctionId::m4, 10, rng), Error);
  // IQR of a standard normal
  Rng r2(2);
  EXPECT_NEAR(lambda_star_of([](std::span<const double> x) { return x[0]; }, 100000, r2, 1), 1.34898, 0.02);
}

TEST(Benchmark, ReferenceCacheRoundTrip)
{
  const auto dir = std::filesystem::temp_directory_path() / "updens_ref_cache_test";
  std::filesystem::remove_all(dir);
  const auto a = cached_reference_density(TestFunctionId::m4, 10000, 3, dir.string());
  const auto b = cached_reference_density(TestFunctionId::m4, 10000, 3, dir.string());
  EXPECT_TRUE(same_grid(a.grid, b.grid));
  EXPECT_EQ(a.values, b.values);
  EXPECT_DOUBLE_EQ(a.bandwidth, b.bandwidth);
  EXPECT_NEAR(riemann_integral(a.values, a.grid), 1.0, 1e-3);
  std::filesystem::remove_all(dir);
}

TEST(Benchmark, RepetitionAndReport)
{
  ExperimentConfig cfg;
  cfg.function = TestFunctionId::m4;
  cfg.sigma_m = 0.1;
  cfg.repetitions = 2;
  cfg.base_seed = 5;
  cfg.estimators = {EstimatorKind::est1, EstimatorKind::est2, EstimatorKind::est4};
  auto& ec = cfg.estimator;
  ec.design_size = 40;
  ec.anchor_count = 30;
  ec.kde_size = 2000;
  ec.surrogate_grid = {{0, 1, 1, 5, 1}};
  ec.residual_grid = {{{0, 1, 1, 5, 1}, 0.5}};
  ec.fit.starts = 1;
  ec.fit.lm.max_iterations = 20;
  Rng rng(1);
  const auto ref = reference_density(TestFunctionId::m4, 10000, rng);
  const auto scores = run_experiment(cfg, ref);
  ASSERT_EQ(scores.size(), 3u);
  for (const auto& s : scores) {
    ASSERT_EQ(s.l1.size(), 2u);
    for (double v : s.l1) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 2.0 + 1e-6);
    }
  }
  EXPECT_EQ(run_experiment(cfg, ref)[1].l1, scores[1].l1);

  BenchmarkReport report;
  report.add(cfg, scores);
  std::ostringstream csv, md;
  report.write_csv(csv);
  report.write_markdown(md);
  EXPECT_NE(csv.str().find("m4,0.1,est2,"), std::string::npos);
  EXPECT_NE(md.str().find("| m4 | est4 |"), std::string::npos);
  ASSERT_NE(report.find(TestFunctionId::m4, 0.1, EstimatorKind::est1), nullptr);
  EXPECT_EQ(report.find(TestFunctionId::m1, 0.1, EstimatorKind::est1), nullptr);
}

TEST(Benchmark, MedianAndIqr)
{
  EXPECT_DOUBLE_EQ(median_of({3.0, 1.0, 2.0}), 2.0);
  EXPECT_DOUBLE_EQ(median_of({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_DOUBLE_EQ(iqr_of({1.0, 2.0, 3.0, 4.0, 5.0}), 2.0);
}
