#pragma once

/**
 * Simulation study: for each repetition draw X_1..X_n ~ N(0, I_5), observe
 * Y_i = m*(X_i), hand the estimators the imperfect model m* + sigma_m lambda*,
 * and score every estimated density against a large-sample reference KDE by
 * the midpoint-rule L1 distance on the reference grid.
 */

#include "estimators.hpp"
#include "kde.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "test_functions.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace updens {

//! Large-sample KDE of m*(X), tabulated on its scoring grid.
struct ReferenceDensity
{
  DensityGrid grid;
  std::vector<double> values;
  double bandwidth = 0.0;
};

inline ReferenceDensity reference_density(TestFunctionId id, std::size_t sample_size, Rng& rng,
                                          std::size_t subintervals = default_subintervals)
{
  if (sample_size < 10000) throw Error(ErrorCode::InvalidArgument, "reference density needs at least 10^4 draws");
  std::vector<double> y(sample_size);
  std::array<double, test_function_dim> x{};
  for (auto& v : y) {
    for (auto& c : x) c = rng.normal();
    v = eval_test_function(id, x);
  }
  const auto kde = KernelDensityModel::fit(std::move(y));
  ReferenceDensity ref;
  ref.grid = scoring_grid(kde, subintervals);
  ref.values = kde.evaluate(ref.grid);
  ref.bandwidth = kde.bandwidth();
  return ref;
}

/**
 * reference_density with an on-disk cache keyed by function, sample size,
 * seed and bandwidth rule. An empty `cache_dir` disables caching.
 */
inline ReferenceDensity cached_reference_density(TestFunctionId id, std::size_t sample_size, std::uint64_t seed,
                                                 const std::string& cache_dir)
{
  std::filesystem::path file;
  if (!cache_dir.empty()) {
    file = std::filesystem::path(cache_dir) /
           ("ref_" + to_string(id) + "_" + std::to_string(sample_size) + "_" + std::to_string(seed) + "_silverman.csv");
    std::ifstream in(file);
    if (in) {
      std::string header;
      std::getline(in, header);
      double h = 0.0;
      if (header.rfind("# bandwidth ", 0) == 0) h = std::stod(header.substr(12));
      auto t = read_density_csv(in);
      return {t.grid, std::move(t.values), h};
    }
  }
  Rng rng(seed);
  auto ref = reference_density(id, sample_size, rng);
  if (!file.empty()) {
    std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    out << "# bandwidth " << std::setprecision(17) << ref.bandwidth << '\n';
    write_density_csv(out, ref.values, ref.grid);
  }
  return ref;
}

struct ExperimentConfig
{
  TestFunctionId function = TestFunctionId::m4;
  double sigma_m = 0.1;
  std::vector<EstimatorKind> estimators{EstimatorKind::est1, EstimatorKind::est2, EstimatorKind::est3,
                                        EstimatorKind::est4};
  int repetitions = 10;
  std::uint64_t base_seed = 1;
  Eigen::Index sample_size = 10; // n
  EstimatorConfig estimator = EstimatorConfig::desk(test_function_dim);
  //! Defaults to the published value for the function.
  std::optional<double> lambda_star;
  unsigned threads = 1;
};

struct EstimatorScores
{
  EstimatorKind kind;
  std::vector<double> l1; // one per repetition, in repetition order
};

inline double median_of(std::vector<double> v)
{
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

inline double iqr_of(std::vector<double> v)
{
  return interquartile_range(std::move(v));
}

//! L1 error of every requested estimator in one repetition.
inline std::map<EstimatorKind, double> run_repetition(const ExperimentConfig& cfg, const ReferenceDensity& ref, int rep)
{
  const Rng rep_rng(derive_seed(cfg.base_seed, static_cast<std::uint64_t>(rep)));
  Rng sample_rng = rep_rng.split(0);
  const Rng pipeline = rep_rng.split(1);

  Matrix x(cfg.sample_size, test_function_dim);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = sample_rng.normal();
  }
  const auto truth = true_model(cfg.function);
  const LabeledSample sample(x, truth.evaluate(x));
  const double lambda = cfg.lambda_star.value_or(published_lambda_star(cfg.function));
  const auto sim = imperfect_model(cfg.function, cfg.sigma_m, lambda);
  const auto input_model = GaussianInputModel::fit(InputSample(x));
  const auto domain = TrainingDomain::around(input_model);
  const auto& ec = cfg.estimator;

  auto score = [&](const KernelDensityModel& kde) { return l1_riemann(kde.evaluate(ref.grid), ref.values, ref.grid); };

  std::map<EstimatorKind, double> out;
  const auto wants = [&](EstimatorKind k) {
    return std::find(cfg.estimators.begin(), cfg.estimators.end(), k) != cfg.estimators.end();
  };
  if (wants(EstimatorKind::est1)) out[EstimatorKind::est1] = score(estimate_est1(sample, ec));
  std::optional<Matrix> synthetic;
  if (wants(EstimatorKind::est2) || wants(EstimatorKind::est3) || wants(EstimatorKind::est4)) {
    synthetic = synthetic_inputs(input_model, ec, pipeline);
  }
  if (wants(EstimatorKind::est2) || wants(EstimatorKind::est4)) {
    auto base = fit_base_surrogate(sim, domain, ec, pipeline);
    if (wants(EstimatorKind::est2)) out[EstimatorKind::est2] = score(estimate_est2_with(base, *synthetic, ec).density);
    if (wants(EstimatorKind::est4)) {
      out[EstimatorKind::est4] = score(estimate_est4_with(sample, std::move(base), *synthetic, ec, pipeline).density);
    }
  }
  if (wants(EstimatorKind::est3)) out[EstimatorKind::est3] = score(estimate_est3(sample, input_model, ec, pipeline).density);
  return out;
}

inline std::vector<EstimatorScores> run_experiment(const ExperimentConfig& cfg, const ReferenceDensity& ref)
{
  if (cfg.repetitions < 1) throw Error(ErrorCode::InvalidArgument, "repetitions must be >= 1");
  std::vector<std::map<EstimatorKind, double>> per_rep(static_cast<std::size_t>(cfg.repetitions));
  parallel_for(per_rep.size(), cfg.threads,
               [&](std::size_t r) { per_rep[r] = run_repetition(cfg, ref, static_cast<int>(r)); });
  std::vector<EstimatorScores> scores;
  for (auto k : cfg.estimators) {
    EstimatorScores s{k, {}};
    for (const auto& m : per_rep) s.l1.push_back(m.at(k));
    scores.push_back(std::move(s));
  }
  return scores;
}

struct BenchmarkCell
{
  TestFunctionId function;
  double sigma_m = 0.0;
  EstimatorKind estimator;
  double median = 0.0;
  double iqr = 0.0;
  int repetitions = 0;
  std::uint64_t base_seed = 0;
  std::vector<double> l1;
};

struct BenchmarkReport
{
  std::vector<BenchmarkCell> cells;

  void add(const ExperimentConfig& cfg, const std::vector<EstimatorScores>& scores)
  {
    for (const auto& s : scores) {
      cells.push_back({cfg.function, cfg.sigma_m, s.kind, median_of(s.l1), iqr_of(s.l1), cfg.repetitions,
                       cfg.base_seed, s.l1});
    }
  }

  const BenchmarkCell* find(TestFunctionId f, double sigma, EstimatorKind k) const
  {
    for (const auto& c : cells) {
      if (c.function == f && c.sigma_m == sigma && c.estimator == k) return &c;
    }
    return nullptr;
  }

  void write_csv(std::ostream& os) const
  {
    os << "function,sigma_m,estimator,median_l1,iqr_l1,repetitions,base_seed\n";
    os << std::setprecision(6);
    for (const auto& c : cells) {
      os << to_string(c.function) << ',' << c.sigma_m << ',' << to_string(c.estimator) << ',' << c.median << ','
         << c.iqr << ',' << c.repetitions << ',' << c.base_seed << '\n';
    }
  }

  //! Rows: estimators per function; columns: sigma_m; cells "median (IQR)".
  void write_markdown(std::ostream& os) const
  {
    std::vector<double> sigmas;
    std::vector<TestFunctionId> functions;
    std::vector<EstimatorKind> kinds;
    for (const auto& c : cells) {
      if (std::find(sigmas.begin(), sigmas.end(), c.sigma_m) == sigmas.end()) sigmas.push_back(c.sigma_m);
      if (std::find(functions.begin(), functions.end(), c.function) == functions.end()) functions.push_back(c.function);
      if (std::find(kinds.begin(), kinds.end(), c.estimator) == kinds.end()) kinds.push_back(c.estimator);
    }
    std::sort(sigmas.begin(), sigmas.end());
    std::sort(kinds.begin(), kinds.end());
    os << "| function | estimator |";
    for (double s : sigmas) os << " sigma_m = " << s << " |";
    os << "\n|---|---|";
    for (std::size_t i = 0; i < sigmas.size(); ++i) os << "---|";
    os << '\n';
    for (auto f : functions) {
      for (auto k : kinds) {
        os << "| " << to_string(f) << " | " << to_string(k) << " |";
        for (double s : sigmas) {
          const auto* c = find(f, s, k);
          std::ostringstream cell;
          cell << std::fixed << std::setprecision(3);
          if (c) cell << ' ' << c->median << " (" << c->iqr << ") |";
          else cell << " - |";
          os << cell.str();
        }
        os << '\n';
      }
    }
  }
};

} // namespace updens
