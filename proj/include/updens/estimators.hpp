#pragma once

/**
 * The four output-density estimators:
 *   est1  KDE of the observed outputs Y_1..Y_n;
 *   est2  KDE of a surrogate of the simulation model, propagated through
 *         synthetic inputs drawn from the fitted input distribution;
 *   est3  as est2 with a surrogate fitted directly on (X_i, Y_i);
 *   est4  as est2 with the surrogate corrected by a network fitted to the
 *         residuals Y_i - surrogate(X_i), regularized by zero-target anchors.
 *
 * Random streams are split by pipeline stage, so est2 and est4 run with the
 * same seed share the surrogate design, its fit and the synthetic inputs.
 * Synthetic inputs are one stream of N1 + N2 draws: the first N1 are anchors
 * for the residual fit, the remaining N2 feed the KDE.
 */

#include "error.hpp"
#include "input_model.hpp"
#include "kde.hpp"
#include "random.hpp"
#include "simulation.hpp"
#include "surrogate.hpp"
#include "types.hpp"

#include <Eigen/QR>

#include <optional>
#include <string>
#include <vector>

namespace updens {

//! Paired observations (X_i, Y_i).
struct LabeledSample
{
  Matrix inputs;
  Vector outputs;

  LabeledSample() = default;
  LabeledSample(Matrix x, Vector y) : inputs(std::move(x)), outputs(std::move(y))
  {
    if (inputs.rows() != outputs.size()) throw Error(ErrorCode::DimensionMismatch, "inputs and outputs differ in length");
    if (inputs.rows() == 0) throw Error(ErrorCode::EmptySample, "labeled sample is empty");
    if (!inputs.allFinite() || !outputs.allFinite()) throw Error(ErrorCode::NonFiniteData, "labeled sample");
  }

  Eigen::Index size() const noexcept { return inputs.rows(); }
  Eigen::Index dim() const noexcept { return inputs.cols(); }
  std::vector<double> output_vector() const { return {outputs.data(), outputs.data() + outputs.size()}; }
};

//! Hyper-rectangle for the uniform surrogate design points.
struct TrainingDomain
{
  Vector lower;
  Vector upper;

  void validate() const
  {
    if (lower.size() != upper.size() || lower.size() == 0) throw Error(ErrorCode::DimensionMismatch, "domain bounds");
    if (!((upper - lower).array() > 0.0).all()) throw Error(ErrorCode::InvalidArgument, "domain needs lower < upper");
  }

  /**
   * mean_j +- width * sqrt(cov_jj). A zero variance gets half-width
   * 1e-6 * max(1, |mean_j|) so the box stays non-degenerate.
   */
  static TrainingDomain around(const GaussianInputModel& model, double width = 2.0)
  {
    TrainingDomain d;
    d.lower.resize(model.dim());
    d.upper.resize(model.dim());
    for (Eigen::Index j = 0; j < model.dim(); ++j) {
      double half = width * std::sqrt(std::max(model.covariance()(j, j), 0.0));
      if (!(half > 0.0)) half = 1e-6 * std::max(1.0, std::abs(model.mean()(j)));
      d.lower(j) = model.mean()(j) - half;
      d.upper(j) = model.mean()(j) + half;
    }
    return d;
  }

  Matrix sample_uniform(Eigen::Index count, Rng& rng) const
  {
    validate();
    Matrix u(count, lower.size());
    for (Eigen::Index i = 0; i < count; ++i) {
      for (Eigen::Index j = 0; j < lower.size(); ++j) u(i, j) = rng.uniform(lower(j), upper(j));
    }
    return u;
  }
};

//! base(x) + residual(x).
class ImprovedSurrogate
{
public:
  ImprovedSurrogate(SurrogateModel base, SurrogateModel residual) : base_(std::move(base)), residual_(std::move(residual)) {}

  double operator()(const Vector& x) const { return base_(x) + residual_(x); }
  Vector evaluate(const Matrix& points) const { return base_.evaluate(points) + residual_.evaluate(points); }

  const SurrogateModel& base() const noexcept { return base_; }
  const SurrogateModel& residual() const noexcept { return residual_; }

private:
  SurrogateModel base_;
  SurrogateModel residual_;
};

enum class EstimatorKind
{
  est1 = 1,
  est2 = 2,
  est3 = 3,
  est4 = 4,
};

inline std::string to_string(EstimatorKind k)
{
  return "est" + std::to_string(static_cast<int>(k));
}

//! The simulation-model surrogate grid: l in {0,1,2}, I in {1,2}, d* in 1..d,
//! M in {1..6, 16, 26, 36, 46}.
inline std::vector<NetworkArchitecture> full_surrogate_grid(int d)
{
  std::vector<NetworkArchitecture> g;
  for (int l : {0, 1, 2}) {
    for (int i : {1, 2}) {
      for (int ds = 1; ds <= d; ++ds) {
        for (int m : {1, 2, 3, 4, 5, 6, 16, 26, 36, 46}) g.push_back({l, i, m, d, ds});
      }
    }
  }
  return g;
}

//! The residual grid: l = 0, I = 1, d* in {1,2,4} (clipped to d), M in {1,3,5},
//! w in {0, 0.25, 0.5, 0.75, 1}.
inline std::vector<WeightedCandidate> full_residual_grid(int d, std::vector<double> weights = {0.0, 0.25, 0.5, 0.75, 1.0})
{
  std::vector<WeightedCandidate> g;
  for (int ds : {1, 2, 4}) {
    if (ds > d) continue;
    for (int m : {1, 3, 5}) {
      for (double w : weights) g.push_back({{0, 1, m, d, ds}, w});
    }
  }
  return g;
}

/**
 * Reduced grids sized for single-core runs of the benchmark. Surrogate:
 * l in {0,1}, I = 1, d* in {1,2,3}, M in 1..6. Residual: l = 0, I = 1,
 * d* in {1,2}, M in {1,3,5} and the full w grid.
 */
inline std::vector<NetworkArchitecture> desk_surrogate_grid(int d)
{
  std::vector<NetworkArchitecture> g;
  for (int l : {0, 1}) {
    for (int ds = 1; ds <= std::min(3, d); ++ds) {
      for (int m = 1; m <= 6; ++m) g.push_back({l, 1, m, d, ds});
    }
  }
  return g;
}

inline std::vector<WeightedCandidate> desk_residual_grid(int d, std::vector<double> weights = {0.0, 0.25, 0.5, 0.75, 1.0})
{
  std::vector<WeightedCandidate> g;
  for (int ds = 1; ds <= std::min(2, d); ++ds) {
    for (int m : {1, 3, 5}) {
      for (double w : weights) g.push_back({{0, 1, m, d, ds}, w});
    }
  }
  return g;
}

struct EstimatorConfig
{
  Eigen::Index design_size = 200;   // L_n
  Eigen::Index anchor_count = 200;  // N_{n,1}
  Eigen::Index kde_size = 10000;    // N_{n,2}
  std::vector<NetworkArchitecture> surrogate_grid;
  std::vector<WeightedCandidate> residual_grid;
  int folds = 5;
  double train_fraction = 2.0 / 3.0;
  FitConfig fit;
  std::optional<double> bandwidth;
  Kernel kernel = Kernel::gaussian;
  TruncationLevel base_truncation;
  TruncationLevel residual_truncation;

  static EstimatorConfig desk(int d)
  {
    EstimatorConfig c;
    c.surrogate_grid = desk_surrogate_grid(d);
    c.residual_grid = desk_residual_grid(d);
    return c;
  }

  static EstimatorConfig full(int d)
  {
    EstimatorConfig c;
    c.surrogate_grid = full_surrogate_grid(d);
    c.residual_grid = full_residual_grid(d);
    return c;
  }

  void validate() const
  {
    if (design_size < 1 || kde_size < 1 || anchor_count < 0) throw Error(ErrorCode::InvalidArgument, "sizes must be positive");
    if (surrogate_grid.empty() || residual_grid.empty()) throw Error(ErrorCode::EmptyCandidates, "empty architecture grid");
  }
};

//! Named sub-streams of one estimator run.
namespace stream {
inline constexpr std::uint64_t design = 1;
inline constexpr std::uint64_t surrogate_fit = 2;
inline constexpr std::uint64_t synthetic = 3;
inline constexpr std::uint64_t residual_fit = 4;
inline constexpr std::uint64_t direct_fit = 5;
} // namespace stream

struct BaseSurrogate
{
  SurrogateModel model;
  SelectionReport report;
};

struct EstimateResult
{
  KernelDensityModel density;
  std::optional<BaseSurrogate> base;
  std::optional<ImprovedSurrogate> improved;
  std::optional<SelectionReport> residual_report;
};

//! eps_i = Y_i - surrogate(X_i).
template <typename Surrogate>
Vector compute_residuals(const LabeledSample& sample, const Surrogate& surrogate)
{
  return sample.outputs - surrogate.evaluate(sample.inputs);
}

/**
 * KDE over propagated outputs. A constant output sample has no
 * normal-reference bandwidth; it gets h = 1e-6 * max(1, |value|) so the
 * estimate collapses onto the constant instead of failing.
 */
inline KernelDensityModel density_of_outputs(const Vector& outputs, const EstimatorConfig& cfg)
{
  std::vector<double> c(outputs.data(), outputs.data() + outputs.size());
  if (cfg.bandwidth) return KernelDensityModel(std::move(c), *cfg.bandwidth, cfg.kernel);
  double h = 0.0;
  try {
    h = silverman_bandwidth(c);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateSample || c.empty()) throw;
    h = 1e-6 * std::max(1.0, std::abs(c.front()));
  }
  return KernelDensityModel(std::move(c), h, cfg.kernel);
}

//! The N1 + N2 synthetic inputs of a run.
inline Matrix synthetic_inputs(const GaussianInputModel& model, const EstimatorConfig& cfg, const Rng& rng)
{
  Rng r = rng.split(stream::synthetic);
  return sample_gaussian(model, cfg.anchor_count + cfg.kde_size, r).rows();
}

inline KernelDensityModel estimate_est1(const LabeledSample& sample, const EstimatorConfig& cfg = {})
{
  if (sample.size() < 2) throw Error(ErrorCode::TooFewPoints, "est1 needs at least 2 outputs");
  return KernelDensityModel::fit(sample.output_vector(), cfg.bandwidth, cfg.kernel);
}

//! Surrogate of the simulation model from L_n uniform design points.
inline BaseSurrogate fit_base_surrogate(const SimulationModel& sim, const TrainingDomain& domain,
                                        const EstimatorConfig& cfg, const Rng& rng)
{
  cfg.validate();
  Rng design_rng = rng.split(stream::design);
  const Matrix u = domain.sample_uniform(cfg.design_size, design_rng);
  const Vector y = sim.evaluate(u);
  auto sel = cfg.design_size >= 2
               ? select_architecture_split(cfg.surrogate_grid, u, y, cfg.fit, rng.split(stream::surrogate_fit),
                                           cfg.train_fraction)
               : SelectionResult{fit_least_squares(cfg.surrogate_grid.front(), u, y, cfg.fit,
                                                   rng.split(stream::surrogate_fit)).net,
                                 SelectionReport{{{cfg.surrogate_grid.front(), 1.0, 0.0, 0.0}}, 0}};
  return {SurrogateModel(std::move(sel.net), cfg.base_truncation), std::move(sel.report)};
}

inline EstimateResult estimate_est2_with(BaseSurrogate base, const Matrix& synthetic, const EstimatorConfig& cfg)
{
  const Vector out = base.model.evaluate(synthetic.bottomRows(cfg.kde_size));
  return {density_of_outputs(out, cfg), std::move(base), std::nullopt, std::nullopt};
}

inline EstimateResult estimate_est2(const SimulationModel& sim, const GaussianInputModel& input_model,
                                    const TrainingDomain& domain, const EstimatorConfig& cfg, const Rng& rng)
{
  auto base = fit_base_surrogate(sim, domain, cfg, rng);
  return estimate_est2_with(std::move(base), synthetic_inputs(input_model, cfg, rng), cfg);
}

inline EstimateResult estimate_est3(const LabeledSample& sample, const GaussianInputModel& input_model,
                                    const EstimatorConfig& cfg, const Rng& rng)
{
  cfg.validate();
  if (sample.size() < 2) throw Error(ErrorCode::TooFewPoints, "est3 needs at least 2 labeled points");
  auto sel = select_architecture_split(cfg.surrogate_grid, sample.inputs, sample.outputs, cfg.fit,
                                       rng.split(stream::direct_fit), cfg.train_fraction);
  BaseSurrogate direct{SurrogateModel(std::move(sel.net), cfg.base_truncation), std::move(sel.report)};
  const Matrix synthetic = synthetic_inputs(input_model, cfg, rng);
  const Vector out = direct.model.evaluate(synthetic.bottomRows(cfg.kde_size));
  return {density_of_outputs(out, cfg), std::move(direct), std::nullopt, std::nullopt};
}

inline EstimateResult estimate_est4_with(const LabeledSample& sample, BaseSurrogate base, const Matrix& synthetic,
                                         const EstimatorConfig& cfg, const Rng& rng)
{
  if (cfg.anchor_count < 1) throw Error(ErrorCode::InvalidArgument, "est4 needs at least one anchor");
  const Vector eps = compute_residuals(sample, base.model);
  const Matrix anchors = synthetic.topRows(cfg.anchor_count);
  auto sel = select_architecture_cv(cfg.residual_grid, sample.inputs, eps, anchors, cfg.fit,
                                    rng.split(stream::residual_fit), cfg.folds);
  ImprovedSurrogate improved(base.model, SurrogateModel(std::move(sel.net), cfg.residual_truncation));
  const Vector out = improved.evaluate(synthetic.bottomRows(cfg.kde_size));
  return {density_of_outputs(out, cfg), std::move(base), std::move(improved), std::move(sel.report)};
}

inline EstimateResult estimate_est4(const LabeledSample& sample, const SimulationModel& sim,
                                    const GaussianInputModel& input_model, const TrainingDomain& domain,
                                    const EstimatorConfig& cfg, const Rng& rng)
{
  auto base = fit_base_surrogate(sim, domain, cfg, rng);
  return estimate_est4_with(sample, std::move(base), synthetic_inputs(input_model, cfg, rng), cfg, rng);
}

/**
 * Linear response surface fitted by least squares to a labeled sample; a
 * stand-in simulation model when no physical simulator is available.
 */
inline SimulationModel fit_linear_simulator(const LabeledSample& sample)
{
  const auto n = sample.size();
  const auto d = sample.dim();
  const Vector center = sample.inputs.colwise().mean().transpose();
  Vector scale(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double s = std::sqrt((sample.inputs.col(j).array() - center(j)).square().mean());
    scale(j) = s > 0.0 ? s : 1.0;
  }
  Eigen::MatrixXd design(n, d + 1);
  design.col(0).setOnes();
  for (Eigen::Index j = 0; j < d; ++j) design.col(j + 1) = (sample.inputs.col(j).array() - center(j)) / scale(j);
  const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(Eigen::VectorXd(sample.outputs));
  return SimulationModel("builtin:linear-fit", [center, scale, coef](std::span<const double> x) {
    double y = coef(0);
    for (std::size_t j = 0; j < x.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      y += coef(jj + 1) * (x[j] - center(jj)) / scale(jj);
    }
    return y;
  });
}

} // namespace updens
