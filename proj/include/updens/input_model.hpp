#pragma once

/**
 * Multivariate-normal input distribution: moment estimation from a small
 * sample, Cholesky factorization with a jitter fallback for singular
 * covariances, and synthetic-input generation X = L Z + mean.
 */

#include "error.hpp"
#include "random.hpp"
#include "types.hpp"

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace updens {

//! Non-empty set of equal-dimension finite points, one per row.
class InputSample
{
public:
  InputSample() = default;

  explicit InputSample(Matrix rows) : rows_(std::move(rows)) { validate(); }

  static InputSample from_rows(const std::vector<std::vector<double>>& rows)
  {
    if (rows.empty()) throw Error(ErrorCode::EmptySample, "no rows");
    Matrix m(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.front().size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "row " + std::to_string(i) + " has " +
                      std::to_string(rows[i].size()) + " entries, expected " +
                      std::to_string(rows.front().size()));
      }
      for (std::size_t j = 0; j < rows[i].size(); ++j) {
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
      }
    }
    return InputSample(std::move(m));
  }

  Eigen::Index size() const noexcept { return rows_.rows(); }
  Eigen::Index dim() const noexcept { return rows_.cols(); }
  const Matrix& rows() const noexcept { return rows_; }
  auto row(Eigen::Index i) const { return rows_.row(i); }

private:
  void validate() const
  {
    if (rows_.rows() == 0) throw Error(ErrorCode::EmptySample, "no rows");
    if (rows_.cols() == 0) throw Error(ErrorCode::DimensionMismatch, "zero-dimensional rows");
    if (!rows_.allFinite()) throw Error(ErrorCode::NonFiniteData, "sample contains non-finite entries");
  }

  Matrix rows_;
};

inline Vector estimate_mean(const InputSample& sample)
{
  if (sample.size() == 0) throw Error(ErrorCode::EmptySample, "");
  return sample.rows().colwise().mean().transpose();
}

//! Maximum-likelihood covariance (1/n normalization).
inline Matrix estimate_covariance(const InputSample& sample)
{
  if (sample.size() == 0) throw Error(ErrorCode::EmptySample, "");
  const Vector mean = estimate_mean(sample);
  const Matrix centered = sample.rows().rowwise() - mean.transpose();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(sample.size());
  // exact symmetry, independent of the product's rounding
  return (0.5 * (cov + cov.transpose())).eval();
}

//! Jitter schedule for singular covariances, relative to trace/d.
struct JitterPolicy
{
  double initial = 1e-10;
  double maximum = 1e-6;
  double factor = 10.0;
};

/**
 * Lower-triangular L with L L^T = sigma.
 *
 * If the plain factorization fails, eps * trace(sigma)/d * I is added with eps
 * escalating from `policy.initial` to `policy.maximum`. An all-zero matrix
 * factors to the zero matrix.
 */
inline Matrix cholesky(const Matrix& sigma, const JitterPolicy& policy = {})
{
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
    throw Error(ErrorCode::DimensionMismatch, "covariance must be square and non-empty");
  }
  if (!sigma.allFinite()) throw Error(ErrorCode::NonFiniteData, "covariance");
  const double scale = sigma.cwiseAbs().maxCoeff();
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorCode::NotSymmetric, "");
  }
  const auto d = sigma.rows();
  if (scale == 0.0) return Matrix::Zero(d, d);

  const Eigen::MatrixXd sym = 0.5 * (sigma + sigma.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() == Eigen::Success) return Matrix(llt.matrixL());

  const double base = sym.trace() / static_cast<double>(d);
  if (base > 0.0) {
    for (double eps = policy.initial; eps <= policy.maximum * (1.0 + 1e-12); eps *= policy.factor) {
      llt.compute(sym + eps * base * Eigen::MatrixXd::Identity(d, d));
      if (llt.info() == Eigen::Success) return Matrix(llt.matrixL());
    }
  }
  throw Error(ErrorCode::NotPositiveDefinite,
              "factorization failed after jitter up to " + std::to_string(policy.maximum) + " * trace/d");
}

//! Fitted input distribution N(mean, covariance); immutable after construction.
class GaussianInputModel
{
public:
  GaussianInputModel(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance))
  {
    if (covariance_.rows() != mean_.size() || covariance_.cols() != mean_.size()) {
      throw Error(ErrorCode::DimensionMismatch, "mean and covariance sizes differ");
    }
    chol_ = cholesky(covariance_);
  }

  static GaussianInputModel fit(const InputSample& sample)
  {
    return GaussianInputModel(estimate_mean(sample), estimate_covariance(sample));
  }

  Eigen::Index dim() const noexcept { return mean_.size(); }
  const Vector& mean() const noexcept { return mean_; }
  const Matrix& covariance() const noexcept { return covariance_; }
  const Matrix& chol() const noexcept { return chol_; }

  nlohmann::json to_json() const
  {
    nlohmann::json j;
    j["dim"] = dim();
    j["mean"] = std::vector<double>(mean_.data(), mean_.data() + mean_.size());
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < dim(); ++i) {
      std::vector<double> r(static_cast<std::size_t>(dim()));
      for (Eigen::Index k = 0; k < dim(); ++k) r[static_cast<std::size_t>(k)] = covariance_(i, k);
      rows.push_back(r);
    }
    j["covariance"] = rows;
    return j;
  }

  //! Inverse of to_json; the Cholesky factor is recomputed.
  static GaussianInputModel from_json(const nlohmann::json& j)
  {
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto cov = j.at("covariance").get<std::vector<std::vector<double>>>();
    const auto d = j.at("dim").get<std::size_t>();
    if (mean.size() != d || cov.size() != d) {
      throw Error(ErrorCode::DimensionMismatch, "model JSON dim does not match arrays");
    }
    Vector m = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(d));
    Matrix c(d, d);
    for (std::size_t i = 0; i < d; ++i) {
      if (cov[i].size() != d) throw Error(ErrorCode::DimensionMismatch, "covariance row " + std::to_string(i));
      for (std::size_t k = 0; k < d; ++k) {
        c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = cov[i][k];
      }
    }
    return GaussianInputModel(std::move(m), std::move(c));
  }

private:
  Vector mean_;
  Matrix covariance_;
  Matrix chol_;
};

//! `count` draws of chol * Z + mean, Z standard normal.
inline InputSample sample_gaussian(const GaussianInputModel& model, Eigen::Index count, Rng& rng)
{
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "count must be >= 1");
  const auto d = model.dim();
  Matrix out(count, d);
  Vector z(d);
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) z(k) = rng.normal();
    out.row(i) = (model.chol() * z + model.mean()).transpose();
  }
  return InputSample(std::move(out));
}

} // namespace updens
