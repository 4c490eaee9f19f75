#include <updens/network.hpp>
#include <updens/random.hpp>

#include <gtest/gtest.h>

#include <vector>

using namespace updens;

namespace {

std::vector<double> random_weights(const NetworkArchitecture& a, Rng& rng, double scale = 1.0)
{
  std::vector<double> w(weight_count(a));
  for (auto& v : w) v = scale * rng.uniform(-1.0, 1.0);
  return w;
}

} // namespace

TEST(Network, WeightCounts)
{
  // level 0: (M+1) + M(J+1) + MJ(d+1) with J = 4 d*
  EXPECT_EQ(weight_count({0, 1, 2, 3, 1}), 3u + 2 * 5 + 8 * 4);
  const NetworkArchitecture l1{1, 2, 1, 2, 1};
  // each g_k has 1-input level-0 block, each f_jk is a level-0 block on 2 inputs
  const auto g = weight_count({0, 1, 1, 1, 1});
  const auto f = weight_count({0, 1, 1, 2, 1});
  EXPECT_EQ(weight_count(l1), 2 * (g + f));
}

TEST(Network, ZeroWeightsGiveZero)
{
  const HierarchicalNetwork net({1, 2, 3, 4, 2});
  EXPECT_EQ(net(Vector::Ones(4)), 0.0);
}

TEST(Network, LevelZeroClosedForm)
{
  // M = 1, d* = 1 (J = 4), d = 1
  const NetworkArchitecture a{0, 1, 1, 1, 1};
  std::vector<double> w(weight_count(a), 0.0);
  w[0] = 0.5;  // mu_0
  w[1] = 2.0;  // mu_1
  w[2] = 0.1;  // lambda_10
  w[3] = 1.0;  // lambda_11
  w[7] = -0.2; // theta_110
  w[8] = 3.0;  // theta_111
  const HierarchicalNetwork net(a, w);
  const double x = 0.7;
  const double inner = logistic(-0.2 + 3.0 * x);
  // the other three lambda_1j are zero
  EXPECT_NEAR(net(Vector::Constant(1, x)), 0.5 + 2.0 * logistic(0.1 + inner), 1e-14);
}

TEST(Network, GradientMatchesFiniteDifferences)
{
  Rng rng(21);
  for (const NetworkArchitecture a : {NetworkArchitecture{0, 1, 3, 4, 2}, NetworkArchitecture{1, 2, 2, 3, 2},
                                      NetworkArchitecture{2, 1, 1, 2, 1}}) {
    const auto w = random_weights(a, rng);
    const NetworkTopology topo(a);
    NetworkEvaluator ev(topo);
    std::vector<double> x(static_cast<std::size_t>(a.input_dim));
    for (auto& v : x) v = rng.normal();
    std::vector<double> grad(w.size());
    ev.value_and_gradient(w, x, grad);
    for (std::size_t k = 0; k < w.size(); ++k) {
      auto wp = w, wm = w;
      wp[k] += 1e-5;
      wm[k] -= 1e-5;
      const double fd = (ev.value(wp, x) - ev.value(wm, x)) / 2e-5;
      EXPECT_NEAR(grad[k], fd, 1e-6 * std::max(1.0, std::abs(fd))) << a.describe() << " weight " << k;
    }
  }
}

TEST(Network, InnerUnitPermutationInvariance)
{
  const NetworkArchitecture a{0, 1, 2, 2, 1};
  Rng rng(4);
  auto w = random_weights(a, rng);
  const HierarchicalNetwork net(a, w);
  // swap hidden units 1 and 2: mu, lambda rows and theta blocks
  const int m = 2, j = 4, q = 2;
  auto v = w;
  std::swap(v[1], v[2]);
  const std::size_t lam = m + 1;
  for (int k = 0; k <= j; ++k) std::swap(v[lam + k], v[lam + (j + 1) + k]);
  const std::size_t th = lam + m * (j + 1);
  for (int k = 0; k < j * (q + 1); ++k) std::swap(v[th + k], v[th + j * (q + 1) + k]);
  const HierarchicalNetwork swapped(a, v);
  Vector x(2);
  x << 0.3, -1.2;
  EXPECT_NEAR(net(x), swapped(x), 1e-14);
}

TEST(Network, JsonRoundTripAndBounds)
{
  NetworkArchitecture a{1, 1, 2, 3, 2};
  Rng rng(2);
  const HierarchicalNetwork net(a, random_weights(a, rng));
  const auto back = HierarchicalNetwork::from_json(net.to_json());
  EXPECT_EQ(back.architecture(), a);
  EXPECT_EQ(back.weights(), net.weights());

  a.weight_bound = 0.5;
  EXPECT_THROW(HierarchicalNetwork(a, random_weights(a, rng, 2.0)), Error);
  EXPECT_EQ(architecture_from_json(to_json(a)).weight_bound, 0.5);
}

TEST(Network, RejectsWrongInputDimension)
{
  const HierarchicalNetwork net({0, 1, 1, 3, 1});
  try {
    net(Vector::Zero(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Network, LevelZeroOutputBound)
{
  const NetworkArchitecture a{0, 1, 3, 2, 1};
  Rng rng(8);
  const HierarchicalNetwork net(a, random_weights(a, rng, 3.0));
  const double b = level0_output_bound(net);
  for (int t = 0; t < 200; ++t) {
    Vector x(2);
    x << 10 * rng.normal(), 10 * rng.normal();
    EXPECT_LE(std::abs(net(x)), b);
  }
}
