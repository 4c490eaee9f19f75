#pragma once

/**
 * Least squares fitting of hierarchical networks, truncation, and
 * data-driven architecture selection (hold-out split and k-fold CV).
 */

#include "error.hpp"
#include "levenberg_marquardt.hpp"
#include "network.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "types.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace updens {

struct FitConfig
{
  LMConfig lm;
  //! Multi-starts per fit; the first start is always all-zero.
  int starts = 5;
  //! Random starts are uniform in [-init_range, init_range].
  double init_range = 0.5;
  //! Worker cap for candidate fits (0 = hardware concurrency).
  unsigned threads = 1;
};

struct FitResult
{
  HierarchicalNetwork net;
  //! Training objective of `net` in the caller's units.
  double objective = 0.0;
  int start_index = 0;
};

namespace detail {

struct AffineNormalization
{
  Vector center;
  Vector scale;
  double output_scale = 1.0;
};

inline AffineNormalization normalization_for(const Matrix& inputs, const Vector& targets)
{
  AffineNormalization n;
  n.center = inputs.colwise().mean().transpose();
  n.scale.resize(inputs.cols());
  for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
    const double var = (inputs.col(j).array() - n.center(j)).square().mean();
    n.scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
    if (!std::isfinite(n.scale(j)) || n.scale(j) == 0.0) n.scale(j) = 1.0;
  }
  const double rms = targets.size() > 0 ? std::sqrt(targets.squaredNorm() / static_cast<double>(targets.size())) : 0.0;
  n.output_scale = rms > 0.0 && std::isfinite(rms) ? rms : 1.0;
  return n;
}

/**
 * Rewrites weights fitted on normalized coordinates ((x - center) / scale in,
 * output / output_scale out) into weights acting on raw coordinates. Exact
 * because inputs enter leaf blocks affinely and root outputs are affine in mu.
 */
inline std::vector<double> fold_normalization(const NetworkTopology& topo, std::vector<double> w,
                                              const AffineNormalization& n)
{
  const int m = topo.architecture().hidden_units;
  const int nj = topo.inner_units();
  for (const auto& blk : topo.blocks()) {
    if (!blk.leaf()) continue;
    const int q = blk.input_dim;
    double* theta = w.data() + blk.offset + (m + 1) + m * (nj + 1);
    for (int u = 0; u < m * nj; ++u) {
      double* th = theta + u * (q + 1);
      for (int v = 0; v < q; ++v) {
        th[v + 1] /= n.scale(v);
        th[0] -= th[v + 1] * n.center(v);
      }
    }
  }
  for (auto r : topo.root()) {
    double* mu = w.data() + topo.blocks()[r].offset;
    for (int i = 0; i <= m; ++i) mu[i] *= n.output_scale;
  }
  return w;
}

//! Stacked residuals sqrt(weight_i) * (f(x_i) - y_i).
class WeightedResiduals
{
public:
  WeightedResiduals(const NetworkTopology& topo, const Matrix& x, const Vector& y, const Vector& row_weights)
    : eval_(topo), x_(x), y_(y), sqrt_w_(row_weights.cwiseSqrt())
  {}

  Eigen::Index residual_count() const { return x_.rows(); }

  void residuals(const Eigen::VectorXd& p, Eigen::VectorXd& r)
  {
    const std::span<const double> w(p.data(), static_cast<std::size_t>(p.size()));
    for (Eigen::Index i = 0; i < x_.rows(); ++i) {
      r(i) = sqrt_w_(i) * (eval_.value(w, row(i)) - y_(i));
    }
  }

  void jacobian(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& jac)
  {
    const std::span<const double> w(p.data(), static_cast<std::size_t>(p.size()));
    grad_.resize(p.size());
    for (Eigen::Index i = 0; i < x_.rows(); ++i) {
      const double f = eval_.value_and_gradient(w, row(i), std::span<double>(grad_.data(), grad_.size()));
      r(i) = sqrt_w_(i) * (f - y_(i));
      jac.row(i) = sqrt_w_(i) * grad_.transpose();
    }
  }

private:
  std::span<const double> row(Eigen::Index i) const
  {
    return {x_.row(i).data(), static_cast<std::size_t>(x_.cols())};
  }

  NetworkEvaluator eval_;
  const Matrix& x_;
  const Vector& y_;
  Vector sqrt_w_;
  Eigen::VectorXd grad_;
};

inline void require_finite(const Matrix& x, const Vector& y)
{
  if (!x.allFinite()) throw Error(ErrorCode::NonFiniteData, "non-finite input");
  if (!y.allFinite()) throw Error(ErrorCode::NonFiniteData, "non-finite target");
}

/**
 * Multi-start LM on sum_i weight_i (f(x_i) - y_i)^2. Rows with zero weight
 * are dropped. Inputs are standardized using `norm_rows` and outputs scaled
 * by the RMS of `norm_targets`; the result is folded back to raw units.
 */
inline FitResult fit_rows(const NetworkArchitecture& arch, const Matrix& x, const Vector& y, const Vector& row_weights,
                          const Matrix& norm_rows, const Vector& norm_targets, const FitConfig& cfg, const Rng& rng)
{
  arch.validate();
  if (x.cols() != arch.input_dim) {
    throw Error(ErrorCode::DimensionMismatch, "inputs have " + std::to_string(x.cols()) +
                                                " columns, architecture expects " + std::to_string(arch.input_dim));
  }
  require_finite(x, y);
  // with a finite gamma the box must hold for raw weights, so no rescaling
  const auto norm = arch.bounded()
                      ? AffineNormalization{Vector::Zero(x.cols()), Vector::Ones(x.cols()), 1.0}
                      : normalization_for(norm_rows, norm_targets);

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (row_weights(i) > 0.0) keep.push_back(i);
  }
  Matrix xs(static_cast<Eigen::Index>(keep.size()), x.cols());
  Vector ys(static_cast<Eigen::Index>(keep.size()));
  Vector ws(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto i = keep[k];
    const auto kk = static_cast<Eigen::Index>(k);
    xs.row(kk) = (x.row(i) - norm.center.transpose()).cwiseQuotient(norm.scale.transpose());
    ys(kk) = y(i) / norm.output_scale;
    ws(kk) = row_weights(i);
  }

  auto topo = std::make_shared<NetworkTopology>(arch);
  const auto p = static_cast<Eigen::Index>(topo->weight_count());
  LMConfig lm = cfg.lm;
  if (arch.bounded()) lm.box = std::min(lm.box, arch.weight_bound);

  Eigen::VectorXd best;
  double best_obj = std::numeric_limits<double>::infinity();
  int best_start = 0;
  if (keep.empty()) {
    best = Eigen::VectorXd::Zero(p);
    best_obj = 0.0;
  } else {
    WeightedResiduals problem(*topo, xs, ys, ws);
    for (int s = 0; s < std::max(1, cfg.starts); ++s) {
      Eigen::VectorXd init = Eigen::VectorXd::Zero(p);
      if (s > 0) {
        Rng r = rng.split(static_cast<std::uint64_t>(s));
        for (Eigen::Index k = 0; k < p; ++k) init(k) = r.uniform(-cfg.init_range, cfg.init_range);
      }
      auto res = levenberg_marquardt(problem, std::move(init), lm);
      if (res.objective < best_obj) {
        best_obj = res.objective;
        best = std::move(res.params);
        best_start = s;
      }
    }
  }
  std::vector<double> w(best.data(), best.data() + best.size());
  w = fold_normalization(*topo, std::move(w), norm);
  return {HierarchicalNetwork(arch, std::move(w)), best_obj * norm.output_scale * norm.output_scale, best_start};
}

} // namespace detail

//! Empirical L2 risk (1/n) sum (f(x_i) - y_i)^2.
inline double empirical_risk(const HierarchicalNetwork& net, const Matrix& x, const Vector& y)
{
  if (x.rows() == 0) return 0.0;
  return (net.evaluate(x) - y).squaredNorm() / static_cast<double>(x.rows());
}

//! Objective w/n sum (f(X_i) - eps_i)^2 + (1 - w)/N1 sum f(anchor_i)^2.
inline double weighted_objective(const HierarchicalNetwork& net, const Matrix& x, const Vector& y, const Matrix& anchors,
                                 double w)
{
  double obj = w * empirical_risk(net, x, y);
  if (anchors.rows() > 0 && w < 1.0) {
    obj += (1.0 - w) * net.evaluate(anchors).squaredNorm() / static_cast<double>(anchors.rows());
  }
  return obj;
}

/**
 * Least squares network fit by multi-start Levenberg-Marquardt. The all-zero
 * start is always tried, so the returned risk never exceeds the risk of the
 * zero network.
 */
inline FitResult fit_least_squares(const NetworkArchitecture& arch, const Matrix& inputs, const Vector& targets,
                                   const FitConfig& cfg, const Rng& rng)
{
  if (inputs.rows() != targets.size()) throw Error(ErrorCode::DimensionMismatch, "inputs and targets differ in length");
  if (inputs.rows() == 0) throw Error(ErrorCode::EmptySample, "no training points");
  const Vector weights = Vector::Constant(inputs.rows(), 1.0 / static_cast<double>(inputs.rows()));
  return detail::fit_rows(arch, inputs, targets, weights, inputs, targets, cfg, rng);
}

/**
 * Weighted fit of labeled residuals with zero-target anchors:
 * w/n sum |f(X_i) - eps_i|^2 + (1 - w)/N1 sum |f(anchor_i)|^2.
 */
inline FitResult fit_weighted_least_squares(const NetworkArchitecture& arch, const Matrix& inputs,
                                            const Vector& targets, const Matrix& anchors, double w,
                                            const FitConfig& cfg, const Rng& rng)
{
  if (!(w >= 0.0 && w <= 1.0)) throw Error(ErrorCode::InvalidArgument, "weight must lie in [0, 1]");
  if (inputs.rows() != targets.size()) throw Error(ErrorCode::DimensionMismatch, "inputs and targets differ in length");
  if (inputs.rows() == 0) throw Error(ErrorCode::EmptySample, "no labeled points");
  if (anchors.rows() == 0 && w < 1.0) throw Error(ErrorCode::InvalidArgument, "anchors required when w < 1");
  if (anchors.rows() > 0 && anchors.cols() != inputs.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "anchor dimension differs from inputs");
  }
  const auto n = inputs.rows();
  const auto na = w < 1.0 ? anchors.rows() : 0;
  Matrix x(n + na, inputs.cols());
  Vector y = Vector::Zero(n + na);
  Vector rw(n + na);
  x.topRows(n) = inputs;
  y.head(n) = targets;
  rw.head(n).setConstant(w / static_cast<double>(n));
  if (na > 0) {
    x.bottomRows(na) = anchors;
    rw.tail(na).setConstant((1.0 - w) / static_cast<double>(na));
  }
  return detail::fit_rows(arch, x, y, rw, inputs, targets, cfg, rng);
}

//! Clipping bound T_beta; disabled by default.
struct TruncationLevel
{
  std::optional<double> bound;

  static TruncationLevel disabled() { return {}; }
  static TruncationLevel at(double beta)
  {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw Error(ErrorCode::InvalidArgument, "truncation bound must be finite and positive");
    return {beta};
  }

  double apply(double z) const
  {
    if (!bound) return z;
    return std::copysign(std::min(std::abs(z), *bound), z);
  }
};

//! Fitted predictor x -> T_beta(net(x)).
class SurrogateModel
{
public:
  SurrogateModel(HierarchicalNetwork net, TruncationLevel level = {}) : net_(std::move(net)), level_(level) {}

  double operator()(const Vector& x) const { return level_.apply(net_(x)); }

  Vector evaluate(const Matrix& points) const
  {
    Vector v = net_.evaluate(points);
    if (level_.bound) v = v.unaryExpr([this](double z) { return level_.apply(z); });
    return v;
  }

  const HierarchicalNetwork& network() const noexcept { return net_; }
  const TruncationLevel& truncation() const noexcept { return level_; }

  nlohmann::json to_json() const
  {
    auto j = net_.to_json();
    j["truncation"] = level_.bound ? nlohmann::json(*level_.bound) : nlohmann::json(nullptr);
    return j;
  }

private:
  HierarchicalNetwork net_;
  TruncationLevel level_;
};

inline SurrogateModel truncate(HierarchicalNetwork net, TruncationLevel level)
{
  return SurrogateModel(std::move(net), level);
}

struct CandidateScore
{
  NetworkArchitecture architecture;
  double weight = 1.0; // w for weighted fits
  double train_objective = 0.0;
  double validation_risk = 0.0;
};

struct SelectionReport
{
  std::vector<CandidateScore> candidates;
  std::size_t selected = 0;

  const CandidateScore& winner() const { return candidates.at(selected); }
};

struct SelectionResult
{
  HierarchicalNetwork net;
  SelectionReport report;
};

namespace detail {

//! Index of the smallest risk; later candidates must win by more than a
//! rounding-level margin, so exact ties go to the earliest.
inline std::size_t argmin_with_ties(const std::vector<double>& risks, double scale)
{
  std::size_t best = 0;
  for (std::size_t i = 1; i < risks.size(); ++i) {
    const double tol = 1e-9 * risks[best] + 1e-12 * scale;
    if (risks[i] < risks[best] - tol) best = i;
  }
  return best;
}

inline Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& idx)
{
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(idx[k]);
  return out;
}

inline Vector take(const Vector& v, const std::vector<Eigen::Index>& idx)
{
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Eigen::Index>(k)) = v(idx[k]);
  return out;
}

inline double mean_square(const Vector& y)
{
  return y.size() ? y.squaredNorm() / static_cast<double>(y.size()) : 0.0;
}

} // namespace detail

/**
 * Hold-out selection: after a seeded shuffle, the first ceil(train_fraction L)
 * points (at most L - 1) train every candidate and the rest score it. Returns
 * the network fitted on the training part of the best candidate.
 */
inline SelectionResult select_architecture_split(const std::vector<NetworkArchitecture>& candidates,
                                                 const Matrix& inputs, const Vector& targets, const FitConfig& cfg,
                                                 const Rng& rng, double train_fraction = 2.0 / 3.0)
{
  if (candidates.empty()) throw Error(ErrorCode::EmptyCandidates, "no candidate architectures");
  const auto n = inputs.rows();
  if (n != targets.size()) throw Error(ErrorCode::DimensionMismatch, "inputs and targets differ in length");
  if (n < 2) throw Error(ErrorCode::TooFewPoints, "hold-out selection needs at least 2 points");
  detail::require_finite(inputs, targets);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng shuffler = rng.split(0);
  shuffle(order, shuffler);
  const auto n_train = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::ceil(train_fraction * static_cast<double>(n) - 1e-12)), n - 1);
  const std::vector<Eigen::Index> train(order.begin(), order.begin() + n_train);
  const std::vector<Eigen::Index> test(order.begin() + n_train, order.end());
  const Matrix xtr = detail::take_rows(inputs, train);
  const Vector ytr = detail::take(targets, train);
  const Matrix xte = detail::take_rows(inputs, test);
  const Vector yte = detail::take(targets, test);

  std::vector<std::optional<FitResult>> fits(candidates.size());
  parallel_for(candidates.size(), cfg.threads, [&](std::size_t c) {
    fits[c] = fit_least_squares(candidates[c], xtr, ytr, cfg, rng.split(1 + c));
  });

  SelectionReport report;
  std::vector<double> risks;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const double risk = empirical_risk(fits[c]->net, xte, yte);
    risks.push_back(std::isfinite(risk) ? risk : std::numeric_limits<double>::infinity());
    report.candidates.push_back({candidates[c], 1.0, fits[c]->objective, risks.back()});
  }
  report.selected = detail::argmin_with_ties(risks, detail::mean_square(targets));
  return {std::move(fits[report.selected]->net), std::move(report)};
}

//! Architecture plus the weight w of the anchor-regularized objective.
struct WeightedCandidate
{
  NetworkArchitecture architecture;
  double weight = 1.0;
};

/**
 * k-fold cross validation of weighted fits. Folds partition the labeled
 * points (after a seeded shuffle); anchors enter every training fold. The
 * winner by mean validation risk is refit on all labeled points.
 */
inline SelectionResult select_architecture_cv(const std::vector<WeightedCandidate>& candidates, const Matrix& inputs,
                                              const Vector& targets, const Matrix& anchors, const FitConfig& cfg,
                                              const Rng& rng, int folds = 5)
{
  if (candidates.empty()) throw Error(ErrorCode::EmptyCandidates, "no candidate architectures");
  const auto n = inputs.rows();
  if (n != targets.size()) throw Error(ErrorCode::DimensionMismatch, "inputs and targets differ in length");
  if (folds < 2 || n < folds) {
    throw Error(ErrorCode::TooFewPoints, std::to_string(n) + " labeled points for " + std::to_string(folds) + " folds");
  }
  detail::require_finite(inputs, targets);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng shuffler = rng.split(0);
  shuffle(order, shuffler);
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < order.size(); ++k) {
    fold_of[static_cast<std::size_t>(order[k])] = static_cast<int>(k * static_cast<std::size_t>(folds) / order.size());
  }

  const std::size_t jobs = candidates.size() * static_cast<std::size_t>(folds);
  std::vector<double> sq_err(jobs, 0.0);
  parallel_for(jobs, cfg.threads, [&](std::size_t job) {
    const std::size_t c = job / static_cast<std::size_t>(folds);
    const int f = static_cast<int>(job % static_cast<std::size_t>(folds));
    std::vector<Eigen::Index> tr, va;
    for (Eigen::Index i = 0; i < n; ++i) (fold_of[static_cast<std::size_t>(i)] == f ? va : tr).push_back(i);
    const auto fit = fit_weighted_least_squares(candidates[c].architecture, detail::take_rows(inputs, tr),
                                                detail::take(targets, tr), anchors, candidates[c].weight, cfg,
                                                rng.split(1 + job));
    const Vector resid = fit.net.evaluate(detail::take_rows(inputs, va)) - detail::take(targets, va);
    sq_err[job] = resid.squaredNorm();
  });

  SelectionReport report;
  std::vector<double> risks;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double total = 0.0;
    for (int f = 0; f < folds; ++f) total += sq_err[c * static_cast<std::size_t>(folds) + static_cast<std::size_t>(f)];
    const double risk = total / static_cast<double>(n);
    risks.push_back(std::isfinite(risk) ? risk : std::numeric_limits<double>::infinity());
    report.candidates.push_back({candidates[c].architecture, candidates[c].weight, 0.0, risks.back()});
  }
  report.selected = detail::argmin_with_ties(risks, detail::mean_square(targets));
  const auto& win = candidates[report.selected];
  auto refit = fit_weighted_least_squares(win.architecture, inputs, targets, anchors, win.weight, cfg,
                                          rng.split(1 + jobs));
  report.candidates[report.selected].train_objective = refit.objective;
  return {std::move(refit.net), std::move(report)};
}

} // namespace updens
