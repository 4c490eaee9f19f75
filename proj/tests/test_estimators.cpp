#include <updens/estimators.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace updens;

namespace {

EstimatorConfig small_config(int d)
{
  EstimatorConfig c;
  c.design_size = 60;
  c.anchor_count = 50;
  c.kde_size = 3000;
  c.surrogate_grid = {{0, 1, 1, d, 1}, {0, 1, 2, d, 1}};
  c.residual_grid = {{{0, 1, 1, d, 1}, 0.5}, {{0, 1, 1, d, 1}, 1.0}};
  c.fit.starts = 2;
  c.fit.lm.max_iterations = 40;
  return c;
}

LabeledSample gaussian_sample(Eigen::Index n, int d, const SimulationModel& f, std::uint64_t seed)
{
  Rng rng(seed);
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = rng.normal();
  }
  return {x, f.evaluate(x)};
}

SimulationModel linear(std::vector<double> a, double shift = 0.0)
{
  return SimulationModel("linear", [a, shift](std::span<const double> x) {
    double y = shift;
    for (std::size_t j = 0; j < a.size(); ++j) y += a[j] * x[j];
    return y;
  });
}

double integral_on_default_grid(const KernelDensityModel& k)
{
  const auto g = default_grid(k);
  return riemann_integral(k.evaluate(g), g);
}

} // namespace

TEST(Estimators, Est1IsKdeOfOutputs)
{
  const auto s = gaussian_sample(20, 2, linear({1.0, 2.0}), 1);
  const auto k = estimate_est1(s);
  EXPECT_EQ(k.centers().size(), 20u);
  EXPECT_NEAR(integral_on_default_grid(k), 1.0, 1e-3);
  EXPECT_THROW(estimate_est1(gaussian_sample(1, 2, linear({1.0, 2.0}), 1)), Error);
}

TEST(Estimators, LinearSimulatorMatchesClosedForm)
{
  const std::vector<double> a{1.0, -0.5, 2.0};
  const auto sim = linear(a);
  const auto s = gaussian_sample(30, 3, sim, 2);
  const auto im = GaussianInputModel::fit(InputSample(s.inputs));
  auto cfg = small_config(3);
  cfg.kde_size = 10000;
  const auto r = estimate_est2(sim, im, TrainingDomain::around(im), cfg, Rng(3));
  Eigen::Map<const Vector> av(a.data(), 3);
  const double mu = av.dot(im.mean());
  const double sd = std::sqrt(av.dot(im.covariance() * av));
  const auto target = [&](double y) {
    return std::exp(-0.5 * std::pow((y - mu) / sd, 2)) / (sd * std::sqrt(2.0 * std::numbers::pi));
  };
  const DensityGrid g{mu - 8 * sd, mu + 8 * sd, 10000};
  EXPECT_LE(l1_riemann([&](double y) { return r.density(y); }, target, g), 0.15);
}

TEST(Estimators, PerfectModelCollapse)
{
  const auto sim = linear({0.7, 0.2, -1.0});
  const auto s = gaussian_sample(15, 3, sim, 4);
  const auto im = GaussianInputModel::fit(InputSample(s.inputs));
  auto cfg = small_config(3);
  for (auto& c : cfg.residual_grid) c.weight = 0.0;
  const Rng rng(5);
  const auto dom = TrainingDomain::around(im);
  const auto e2 = estimate_est2(sim, im, dom, cfg, rng);
  const auto e4 = estimate_est4(s, sim, im, dom, cfg, rng);
  const auto g = default_grid(e2.density);
  EXPECT_LE(l1_riemann(e2.density.evaluate(g), e4.density.evaluate(g), g), 1e-6);
  EXPECT_EQ(e4.residual_report->winner().weight, 0.0);
}

TEST(Estimators, SharedStreamsShareTheBaseSurrogate)
{
  const auto sim = linear({1.0, 1.0});
  const auto s = gaussian_sample(12, 2, sim, 6);
  const auto im = GaussianInputModel::fit(InputSample(s.inputs));
  const auto cfg = small_config(2);
  const Rng rng(7);
  const auto dom = TrainingDomain::around(im);
  const auto e2 = estimate_est2(sim, im, dom, cfg, rng);
  const auto e4 = estimate_est4(s, sim, im, dom, cfg, rng);
  EXPECT_EQ(e2.base->model.network().weights(), e4.base->model.network().weights());
}

TEST(Estimators, Deterministic)
{
  const auto sim = linear({0.3, -0.2}, 1.0);
  const auto s = gaussian_sample(12, 2, linear({0.3, -0.2}), 8);
  const auto im = GaussianInputModel::fit(InputSample(s.inputs));
  const auto cfg = small_config(2);
  const auto dom = TrainingDomain::around(im);
  const auto a = estimate_est4(s, sim, im, dom, cfg, Rng(9));
  const auto b = estimate_est4(s, sim, im, dom, cfg, Rng(9));
  EXPECT_EQ(a.density.centers(), b.density.centers());
  const auto c = estimate_est3(s, im, cfg, Rng(9));
  const auto d = estimate_est3(s, im, cfg, Rng(9));
  EXPECT_EQ(c.density.centers(), d.density.centers());
}

TEST(Estimators, ResidualCorrectionRemovesConstantOffset)
{
  // the simulator misses a constant 3; residual fitting should recover most of it
  const std::vector<double> a{1.0, 0.5};
  const auto truth = linear(a, 3.0);
  const auto sim = linear(a);
  const auto s = gaussian_sample(40, 2, truth, 10);
  const auto im = GaussianInputModel::fit(InputSample(s.inputs));
  const auto cfg = small_config(2);
  const auto dom = TrainingDomain::around(im);
  const auto e2 = estimate_est2(sim, im, dom, cfg, Rng(11));
  const auto e4 = estimate_est4(s, sim, im, dom, cfg, Rng(11));
  auto mean_of = [](const KernelDensityModel& k) {
    double m = 0.0;
    for (double c : k.centers()) m += c;
    return m / static_cast<double>(k.centers().size());
  };
  EXPECT_NEAR(mean_of(e4.density) - mean_of(e2.density), 3.0, 0.3);
}

TEST(Estimators, AllEstimatesNormalize)
{
  const auto sim = linear({1.0, -1.0, 0.5});
  const auto s = gaussian_sample(10, 3, linear({1.0, -1.0, 0.8}), 12);
  const auto im = GaussianInputModel::fit(InputSample(s.inputs));
  const auto cfg = small_config(3);
  const auto dom = TrainingDomain::around(im);
  EXPECT_NEAR(integral_on_default_grid(estimate_est1(s, cfg)), 1.0, 1e-3);
  EXPECT_NEAR(integral_on_default_grid(estimate_est2(sim, im, dom, cfg, Rng(1)).density), 1.0, 1e-3);
  EXPECT_NEAR(integral_on_default_grid(estimate_est3(s, im, cfg, Rng(1)).density), 1.0, 1e-3);
  EXPECT_NEAR(integral_on_default_grid(estimate_est4(s, sim, im, dom, cfg, Rng(1)).density), 1.0, 1e-3);
}

TEST(Estimators, ConstantOutputsCollapseOntoTheConstant)
{
  const auto sim = SimulationModel("const", [](std::span<const double>) { return 2.5; });
  const auto s = gaussian_sample(10, 2, sim, 13);
  const auto im = GaussianInputModel::fit(InputSample(s.inputs));
  const auto cfg = small_config(2);
  const auto r = estimate_est2(sim, im, TrainingDomain::around(im), cfg, Rng(1));
  EXPECT_NEAR(integral_on_default_grid(r.density), 1.0, 1e-3);
  EXPECT_LE(r.density.bandwidth(), 1e-3);
}

TEST(Estimators, TrainingDomain)
{
  const GaussianInputModel im(Vector::Constant(2, 1.0), Matrix::Identity(2, 2) * 4.0);
  const auto d = TrainingDomain::around(im);
  EXPECT_DOUBLE_EQ(d.lower(0), -3.0);
  EXPECT_DOUBLE_EQ(d.upper(1), 5.0);
  Rng rng(1);
  const Matrix u = d.sample_uniform(100, rng);
  EXPECT_GE(u.minCoeff(), -3.0);
  EXPECT_LE(u.maxCoeff(), 5.0);
  const GaussianInputModel flat(Vector::Constant(1, 7.0), Matrix::Zero(1, 1));
  const auto f = TrainingDomain::around(flat);
  EXPECT_LT(f.lower(0), f.upper(0));
}

TEST(Estimators, LinearFitSimulatorIsExactOnLinearData)
{
  const auto truth = linear({2.0, -3.0}, 0.5);
  const auto s = gaussian_sample(10, 2, truth, 14);
  const auto fit = fit_linear_simulator(s);
  Vector x(2);
  x << 0.3, 1.7;
  EXPECT_NEAR(fit(x), truth(x), 1e-10);
}

TEST(Estimators, Est4RejectsZeroAnchors)
{
  const auto sim = linear({1.0});
  const auto s = gaussian_sample(10, 1, sim, 15);
  const auto im = GaussianInputModel::fit(InputSample(s.inputs));
  auto cfg = small_config(1);
  cfg.anchor_count = 0;
  EXPECT_THROW(estimate_est4(s, sim, im, TrainingDomain::around(im), cfg, Rng(1)), Error);
}

TEST(Estimators, Grids)
{
  EXPECT_EQ(full_surrogate_grid(5).size(), 300u);
  EXPECT_EQ(full_residual_grid(5).size(), 45u);
  EXPECT_EQ(desk_surrogate_grid(5).size(), 36u);
  EXPECT_EQ(desk_residual_grid(5).size(), 30u);
  EXPECT_EQ(full_residual_grid(2).size(), 30u);
  for (const auto& a : full_surrogate_grid(3)) EXPECT_NO_THROW(a.validate());
}
