#include <updens/levenberg_marquardt.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace updens;

namespace {

// r_i(a, b) = a * exp(b t_i) - y_i
struct ExpFit
{
  Eigen::VectorXd t;
  Eigen::VectorXd y;

  Eigen::Index residual_count() const { return t.size(); }
  void residuals(const Eigen::VectorXd& p, Eigen::VectorXd& r)
  {
    r = (p(0) * (p(1) * t.array()).exp()).matrix() - y;
  }
  void jacobian(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& j)
  {
    residuals(p, r);
    const Eigen::ArrayXd e = (p(1) * t.array()).exp();
    j.col(0) = e.matrix();
    j.col(1) = (p(0) * t.array() * e).matrix();
  }
};

// underdetermined: 1 residual, 3 parameters
struct Plane
{
  Eigen::Index residual_count() const { return 1; }
  void residuals(const Eigen::VectorXd& p, Eigen::VectorXd& r) { r(0) = p.sum() - 3.0; }
  void jacobian(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& j)
  {
    residuals(p, r);
    j.setOnes();
  }
};

} // namespace

TEST(LevenbergMarquardt, RecoversExponential)
{
  ExpFit f;
  f.t = Eigen::VectorXd::LinSpaced(20, 0.0, 1.0);
  f.y = (2.0 * (-1.5 * f.t.array()).exp()).matrix();
  const auto res = levenberg_marquardt(f, Eigen::Vector2d(1.0, 0.0), LMConfig{});
  EXPECT_NEAR(res.params(0), 2.0, 1e-6);
  EXPECT_NEAR(res.params(1), -1.5, 1e-6);
}

TEST(LevenbergMarquardt, AcceptedObjectivesDecrease)
{
  ExpFit f;
  f.t = Eigen::VectorXd::LinSpaced(30, -1.0, 2.0);
  f.y = (0.5 * (0.8 * f.t.array()).exp()).matrix() + 0.01 * Eigen::VectorXd::LinSpaced(30, -1.0, 1.0);
  const auto res = levenberg_marquardt(f, Eigen::Vector2d(-1.0, 2.0), LMConfig{});
  ASSERT_GE(res.accepted.size(), 2u);
  for (std::size_t k = 1; k < res.accepted.size(); ++k) EXPECT_LT(res.accepted[k], res.accepted[k - 1]);
  EXPECT_EQ(res.objective, res.accepted.back());
}

TEST(LevenbergMarquardt, DualFormForWideProblems)
{
  Plane p;
  const auto res = levenberg_marquardt(p, Eigen::Vector3d::Zero(), LMConfig{});
  EXPECT_NEAR(res.params.sum(), 3.0, 1e-8);
  // minimum-norm direction from zero
  EXPECT_NEAR(res.params(0), res.params(2), 1e-12);
}

TEST(LevenbergMarquardt, BoxProjection)
{
  Plane p;
  LMConfig cfg;
  cfg.box = 0.5;
  const auto res = levenberg_marquardt(p, Eigen::Vector3d::Zero(), cfg);
  EXPECT_LE(res.params.cwiseAbs().maxCoeff(), 0.5);
  EXPECT_NEAR(res.objective, 2.25, 1e-8);
}

TEST(LevenbergMarquardt, RespectsIterationCap)
{
  ExpFit f;
  f.t = Eigen::VectorXd::LinSpaced(10, 0.0, 3.0);
  f.y = (3.0 * (1.1 * f.t.array()).exp()).matrix();
  LMConfig cfg;
  cfg.max_iterations = 2;
  const auto res = levenberg_marquardt(f, Eigen::Vector2d(0.1, 0.1), cfg);
  EXPECT_LE(res.iterations, 2);
}
