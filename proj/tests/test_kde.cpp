#include <updens/kde.hpp>
#include <updens/random.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace updens;

namespace {

double normal_pdf(double y, double mu)
{
  return std::exp(-0.5 * (y - mu) * (y - mu)) / std::sqrt(2.0 * std::numbers::pi);
}

std::vector<double> normals(std::size_t n, std::uint64_t seed, double scale = 1.0)
{
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

} // namespace

TEST(Kde, SingleCenterIsTheKernel)
{
  const KernelDensityModel k({0.0}, 1.0);
  EXPECT_NEAR(k(0.0), 0.398942, 1e-6);
  EXPECT_NEAR(k(1.0), 0.241971, 1e-6);
  const KernelDensityModel e({0.0}, 2.0, Kernel::epanechnikov);
  EXPECT_NEAR(e(0.0), 0.375, 1e-15);
  EXPECT_EQ(e(2.5), 0.0);
}

TEST(Kde, WindowedEvaluationMatchesDirectSum)
{
  const auto c = normals(500, 3);
  const auto k = KernelDensityModel::fit(c);
  const DensityGrid g{-5.0, 5.0, 97};
  const auto v = k.evaluate(g);
  for (std::size_t i = 0; i < g.subintervals; i += 7) {
    double s = 0.0;
    for (double x : c) s += kernel_value(Kernel::gaussian, (g.midpoint(i) - x) / k.bandwidth());
    s /= static_cast<double>(c.size()) * k.bandwidth();
    EXPECT_NEAR(v[i], s, 1e-15 + 1e-12 * s);
    EXPECT_DOUBLE_EQ(v[i], k(g.midpoint(i)));
  }
}

TEST(Kde, SilvermanBranches)
{
  // clean normal sample: std is the smaller spread
  std::vector<double> a{-2.0, -1.0, 0.0, 1.0, 2.0};
  const auto ta = silverman_terms(a);
  EXPECT_NEAR(ta.stddev, std::sqrt(2.5), 1e-12);
  EXPECT_NEAR(ta.iqr_scaled, 2.0 / 1.349, 1e-12);
  EXPECT_DOUBLE_EQ(ta.spread, std::min(ta.stddev, ta.iqr_scaled));
  EXPECT_NEAR(ta.bandwidth, ta.spread * std::pow(4.0 / 15.0, 0.2), 1e-12);

  // one far outlier inflates std but not the IQR
  std::vector<double> b{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 100.0};
  const auto tb = silverman_terms(b);
  EXPECT_LT(tb.iqr_scaled, tb.stddev);
  EXPECT_DOUBLE_EQ(tb.spread, tb.iqr_scaled);

  // zero IQR falls back to the std branch
  std::vector<double> c{1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 5.0};
  EXPECT_GT(silverman_bandwidth(c), 0.0);

  try {
    silverman_bandwidth({2.0, 2.0, 2.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateSample);
  }
}

TEST(Kde, QuantilesInterpolateLinearly)
{
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(interquartile_range({4.0, 1.0, 3.0, 2.0}), 1.5);
}

TEST(Kde, DefaultGridIntegratesToOne)
{
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto k = KernelDensityModel::fit(normals(50 + 100 * s, s, 1.0 + s));
    const auto g = default_grid(k);
    EXPECT_NEAR(riemann_integral(k.evaluate(g), g), 1.0, 1e-6);
  }
  // narrow bandwidth over a wide range refines the grid
  const KernelDensityModel wide({0.0, 1000.0}, 0.01);
  const auto g = default_grid(wide);
  EXPECT_GT(g.subintervals, default_subintervals);
  EXPECT_NEAR(riemann_integral(wide.evaluate(g), g), 1.0, 1e-6);
}

TEST(L1, ShiftedNormalsClosedForm)
{
  const DensityGrid g{-8.0, 9.0, 10000};
  const double l1 = l1_riemann([](double y) { return normal_pdf(y, 0.0); }, [](double y) { return normal_pdf(y, 1.0); }, g);
  EXPECT_NEAR(l1, 0.765845, 1e-4);
  const auto sc = scheffe_check([](double y) { return normal_pdf(y, 0.0); }, [](double y) { return normal_pdf(y, 1.0); }, g);
  EXPECT_NEAR(sc.l1, sc.positive_part, 1e-6);
}

TEST(L1, MetricProperties)
{
  const DensityGrid g{-10.0, 10.0, 2000};
  const auto f = KernelDensityModel::fit(normals(100, 1)).evaluate(g);
  const auto h = KernelDensityModel::fit(normals(100, 2)).evaluate(g);
  const auto k = KernelDensityModel::fit(normals(100, 3, 2.0)).evaluate(g);
  EXPECT_EQ(l1_riemann(f, f, g), 0.0);
  EXPECT_DOUBLE_EQ(l1_riemann(f, h, g), l1_riemann(h, f, g));
  EXPECT_LE(l1_riemann(f, k, g), l1_riemann(f, h, g) + l1_riemann(h, k, g) + 1e-12);
  EXPECT_LE(l1_riemann(f, k, g), 2.0 + 1e-6);
  std::vector<double> shorter(f.begin(), f.end() - 1);
  try {
    l1_riemann(shorter, h, g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridMismatch);
  }
}

TEST(DensityCsv, RoundTripWithCommentHeader)
{
  const DensityGrid g{-1.0, 2.0, 30};
  std::vector<double> v(30);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.1 * static_cast<double>(i);
  std::stringstream ss;
  ss << "# a config echo\n";
  write_density_csv(ss, v, g);
  const auto t = read_density_csv(ss);
  EXPECT_TRUE(same_grid(t.grid, g));
  EXPECT_EQ(t.values, v);
}

TEST(DensityCsv, RejectsUnevenAbscissae)
{
  std::stringstream ss("y,density\n0,1\n1,1\n3,1\n");
  EXPECT_THROW(read_density_csv(ss), Error);
}

TEST(Kde, InvalidArguments)
{
  EXPECT_THROW(KernelDensityModel({}, 1.0), Error);
  EXPECT_THROW(KernelDensityModel({1.0}, 0.0), Error);
  EXPECT_THROW(KernelDensityModel({NAN}, 1.0), Error);
}
