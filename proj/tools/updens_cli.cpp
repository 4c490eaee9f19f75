#include <updens/updens.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
using namespace updens;

constexpr const char* version = "0.1.0";

struct UsageError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

// Exit code 1 is reserved for numerical failures; everything else the user
// can fix by changing flags or files maps to 2.
int exit_code_for(ErrorCode c)
{
  switch (c) {
    case ErrorCode::NotPositiveDefinite:
    case ErrorCode::NotSymmetric:
    case ErrorCode::NonFiniteData:
    case ErrorCode::DegenerateSample:
    case ErrorCode::TooFewPoints:
      return 1;
    default:
      return 2;
  }
}

std::ofstream open_output(const std::string& path)
{
  if (const auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  return out;
}

std::string read_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_echo(std::ostream& os, const std::string& command, const json& config)
{
  os << "# updens " << version << ' ' << command << '\n';
  os << "# config " << config.dump() << '\n';
}

// A config file is either a JSON object or any file carrying a "# config"
// echo line, so an output file can be fed back to reproduce itself.
json load_config(const std::string& path)
{
  const auto text = read_file(path);
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("# config ", 0) == 0) return json::parse(line.substr(9));
  }
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    throw UsageError("'" + path + "' holds neither a JSON config nor a config echo");
  }
}

template <typename T>
void take(const json& j, const char* key, T& dst)
{
  if (j.contains(key) && !j.at(key).is_null()) dst = j.at(key).get<T>();
}

template <typename T>
void take(const json& j, const char* key, std::optional<T>& dst)
{
  if (j.contains(key)) dst = j.at(key).is_null() ? std::nullopt : std::optional<T>(j.at(key).get<T>());
}

std::vector<std::string> split_list(const std::string& s)
{
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_number(const std::string& s, const std::string& what)
{
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw UsageError("invalid " + what + " '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) throw UsageError("invalid " + what + " '" + s + "'");
  return v;
}

double checked_sigma(double s)
{
  if (!(s >= 0.0) || !std::isfinite(s)) {
    std::ostringstream m;
    m << "invalid sigma_m " << s << " (must be >= 0)";
    throw UsageError(m.str());
  }
  return s;
}

void print_vector(std::ostream& os, const Vector& v)
{
  os << '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v(i);
  os << "]\n";
}

// ---------------------------------------------------------------- fit-input

struct FitInputArgs
{
  std::string data;
  std::string out;
  bool all_inputs = false;
};

int cmd_fit_input(const FitInputArgs& a)
{
  const auto rd = ingest_real_data_file(a.data);
  Matrix x = rd.sample.inputs;
  if (a.all_inputs) {
    x.conservativeResize(Eigen::NoChange, x.cols() + 1);
    x.col(x.cols() - 1) = rd.sample.outputs;
  }
  const auto model = GaussianInputModel::fit(InputSample(x));
  if (x.rows() == 1) std::cerr << "warning: single observation, covariance is zero\n";
  auto out = open_output(a.out);
  out << std::setw(2) << model.to_json() << '\n';
  std::cout << std::setprecision(6);
  std::cout << "n = " << x.rows() << ", dim = " << model.dim() << "\nmean = ";
  print_vector(std::cout, model.mean());
  std::cout << "covariance =\n";
  for (Eigen::Index i = 0; i < model.dim(); ++i) print_vector(std::cout, model.covariance().row(i).transpose());
  return 0;
}

// ------------------------------------------------------------------- sample

struct SampleArgs
{
  std::string model;
  std::string function;
  std::int64_t count = 0;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_sample(const SampleArgs& a)
{
  if (!a.seed) throw UsageError("--seed is required");
  if (a.count < 1) throw UsageError("--count must be >= 1");
  if (a.model.empty() == a.function.empty()) throw UsageError("give exactly one of --model and --function");
  Rng rng(*a.seed);
  json cfg{{"count", a.count}, {"seed", *a.seed}};
  auto out = open_output(a.out);
  out << std::setprecision(17);
  if (!a.model.empty()) {
    cfg["model"] = a.model;
    const auto model = GaussianInputModel::from_json(json::parse(read_file(a.model)));
    const auto s = sample_gaussian(model, a.count, rng);
    write_echo(out, "sample", cfg);
    for (Eigen::Index j = 0; j < s.dim(); ++j) out << (j ? "," : "") << 'x' << j + 1;
    out << '\n';
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      for (Eigen::Index j = 0; j < s.dim(); ++j) out << (j ? "," : "") << s.rows()(i, j);
      out << '\n';
    }
  } else {
    const auto id = parse_test_function(a.function);
    if (!id) throw UsageError("unknown test function '" + a.function + "'");
    cfg["function"] = a.function;
    write_echo(out, "sample", cfg);
    // labeled sample X ~ N(0, I_5), Y = m*(X)
    for (int j = 0; j < test_function_dim; ++j) out << 'x' << j + 1 << ',';
    out << "y\n";
    std::array<double, test_function_dim> x{};
    for (std::int64_t i = 0; i < a.count; ++i) {
      for (auto& c : x) {
        c = rng.normal();
        out << c << ',';
      }
      out << eval_test_function(*id, x) << '\n';
    }
  }
  std::cout << "wrote " << a.count << " rows to " << a.out << '\n';
  return 0;
}

// ----------------------------------------------------------------- estimate

// Everything that determines an estimate besides the data file contents.
struct EstimateConfig
{
  std::string data;
  std::string simulator;
  int estimator = 4;
  std::uint64_t seed = 0;
  std::string profile = "desk";
  std::optional<double> sigma_m;
  std::optional<double> lambda_star;
  std::int64_t design_size = 200;
  std::int64_t anchor_count = 200;
  std::int64_t kde_size = 10000;
  int folds = 5;
  std::optional<double> bandwidth;
  std::optional<double> truncate_base;
  std::optional<double> truncate_residual;
  std::string input_model;
  unsigned threads = 1;

  json to_json() const
  {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return {{"data", data},
            {"simulator", simulator},
            {"estimator", estimator},
            {"seed", seed},
            {"profile", profile},
            {"sigma_m", opt(sigma_m)},
            {"lambda_star", opt(lambda_star)},
            {"design_size", design_size},
            {"anchor_count", anchor_count},
            {"kde_size", kde_size},
            {"folds", folds},
            {"bandwidth", opt(bandwidth)},
            {"truncate_base", opt(truncate_base)},
            {"truncate_residual", opt(truncate_residual)},
            {"input_model", input_model}};
  }

  void merge(const json& j)
  {
    take(j, "data", data);
    take(j, "simulator", simulator);
    take(j, "estimator", estimator);
    take(j, "seed", seed);
    take(j, "profile", profile);
    take(j, "sigma_m", sigma_m);
    take(j, "lambda_star", lambda_star);
    take(j, "design_size", design_size);
    take(j, "anchor_count", anchor_count);
    take(j, "kde_size", kde_size);
    take(j, "folds", folds);
    take(j, "bandwidth", bandwidth);
    take(j, "truncate_base", truncate_base);
    take(j, "truncate_residual", truncate_residual);
    take(j, "input_model", input_model);
  }
};

EstimatorConfig estimator_config(const std::string& profile, int d)
{
  if (profile == "desk") return EstimatorConfig::desk(d);
  if (profile == "full") return EstimatorConfig::full(d);
  throw UsageError("unknown profile '" + profile + "' (desk or full)");
}

SimulationModel resolve_simulator(const EstimateConfig& c, const LabeledSample& sample)
{
  const std::string& s = c.simulator;
  if (s.rfind("builtin:", 0) == 0) {
    const auto name = s.substr(8);
    if (name == "linear-fit") return fit_linear_simulator(sample);
    const auto id = parse_test_function(name);
    if (!id) throw UsageError("unknown builtin simulator '" + name + "'");
    if (sample.dim() != test_function_dim) throw UsageError("builtin test functions need 5 input columns");
    const double sigma = checked_sigma(c.sigma_m.value_or(0.0));
    return imperfect_model(*id, sigma, c.lambda_star.value_or(published_lambda_star(*id)));
  }
  if (s.rfind("exec:", 0) == 0) return make_process_simulator(s.substr(5));
  throw UsageError("simulator must be builtin:<name> or exec:<command>, got '" + s + "'");
}

void print_report(std::ostream& os, const std::string& label, const SelectionReport& r)
{
  const auto& w = r.winner();
  os << label << ": " << w.architecture.describe();
  if (w.weight != 1.0 || label == "residual") os << ", w = " << w.weight;
  os << " (validation risk " << w.validation_risk << ")\n";
}

int cmd_estimate(EstimateConfig c, const std::string& out_path)
{
  if (c.data.empty()) throw UsageError("--data is required");
  if (out_path.empty()) throw UsageError("--out-density is required");
  if (c.estimator < 1 || c.estimator > 4) throw UsageError("--estimator must be 1, 2, 3 or 4");
  if ((c.estimator == 2 || c.estimator == 4) && c.simulator.empty()) {
    throw UsageError("simulator required for estimator " + std::to_string(c.estimator));
  }
  if (c.design_size < 1 || c.anchor_count < 1 || c.kde_size < 1) throw UsageError("sizes must be >= 1");
  if (c.sigma_m) checked_sigma(*c.sigma_m);

  const auto rd = ingest_real_data_file(c.data);
  const auto& sample = rd.sample;
  auto ec = estimator_config(c.profile, static_cast<int>(sample.dim()));
  ec.design_size = c.design_size;
  ec.anchor_count = c.anchor_count;
  ec.kde_size = c.kde_size;
  ec.folds = c.folds;
  ec.bandwidth = c.bandwidth;
  ec.fit.threads = c.threads;
  if (c.truncate_base) ec.base_truncation = TruncationLevel::at(*c.truncate_base);
  if (c.truncate_residual) ec.residual_truncation = TruncationLevel::at(*c.truncate_residual);

  const auto input_model = c.input_model.empty()
                             ? GaussianInputModel::fit(InputSample(sample.inputs))
                             : GaussianInputModel::from_json(json::parse(read_file(c.input_model)));
  if (input_model.dim() != sample.dim()) throw Error(ErrorCode::DimensionMismatch, "input model and data dimensions differ");
  const auto domain = TrainingDomain::around(input_model);
  const Rng rng(c.seed);

  std::cout << std::setprecision(6);
  std::optional<KernelDensityModel> density;
  if (c.estimator == 1) {
    density = estimate_est1(sample, ec);
  } else if (c.estimator == 3) {
    auto r = estimate_est3(sample, input_model, ec, rng);
    print_report(std::cout, "direct surrogate", r.base->report);
    density = std::move(r.density);
  } else {
    const auto sim = resolve_simulator(c, sample);
    auto r = c.estimator == 2 ? estimate_est2(sim, input_model, domain, ec, rng)
                              : estimate_est4(sample, sim, input_model, domain, ec, rng);
    print_report(std::cout, "surrogate", r.base->report);
    if (r.residual_report) print_report(std::cout, "residual", *r.residual_report);
    density = std::move(r.density);
  }

  const auto grid = default_grid(*density);
  const auto values = density->evaluate(grid);
  auto out = open_output(out_path);
  write_echo(out, "estimate", c.to_json());
  write_density_csv(out, values, grid);
  std::cout << "est" << c.estimator << ": bandwidth " << density->bandwidth() << ", grid [" << grid.lower << ", "
            << grid.upper << "] x " << grid.subintervals << ", integral " << riemann_integral(values, grid) << '\n';
  return 0;
}

// ---------------------------------------------------------------- benchmark

struct BenchmarkConfig
{
  std::vector<std::string> functions{"m1", "m2", "m3", "m4"};
  std::vector<double> sigmas{0.1, 0.3, 0.5};
  std::vector<int> estimators{1, 2, 3, 4};
  int repetitions = 10;
  std::uint64_t seed = 0;
  std::int64_t sample_size = 10;
  std::int64_t reference_size = 100000;
  std::string profile = "desk";
  std::string lambda = "published";

  json to_json() const
  {
    return {{"functions", functions},       {"sigmas", sigmas},
            {"estimators", estimators},     {"reps", repetitions},
            {"seed", seed},                 {"sample_size", sample_size},
            {"reference_size", reference_size}, {"profile", profile},
            {"lambda", lambda}};
  }

  void merge(const json& j)
  {
    take(j, "functions", functions);
    take(j, "sigmas", sigmas);
    take(j, "estimators", estimators);
    take(j, "reps", repetitions);
    take(j, "seed", seed);
    take(j, "sample_size", sample_size);
    take(j, "reference_size", reference_size);
    take(j, "profile", profile);
    take(j, "lambda", lambda);
  }
};

int cmd_benchmark(const BenchmarkConfig& c, const std::string& out_path, const std::string& markdown_path,
                  const std::string& cache_dir, unsigned threads)
{
  if (out_path.empty()) throw UsageError("--out is required");
  if (c.repetitions < 1) throw UsageError("--reps must be >= 1");
  if (c.sample_size < 5) throw UsageError("--sample-size must be >= 5");
  if (c.reference_size < 10000) throw UsageError("--reference-size must be >= 10000");
  if (c.lambda != "published" && c.lambda != "computed") throw UsageError("--lambda must be published or computed");
  std::vector<TestFunctionId> ids;
  for (const auto& f : c.functions) {
    const auto id = parse_test_function(f);
    if (!id) throw UsageError("unknown test function '" + f + "'");
    ids.push_back(*id);
  }
  for (double s : c.sigmas) checked_sigma(s);
  std::vector<EstimatorKind> kinds;
  for (int k : c.estimators) {
    if (k < 1 || k > 4) throw UsageError("estimators must be in 1..4");
    kinds.push_back(static_cast<EstimatorKind>(k));
  }
  if (ids.empty() || c.sigmas.empty() || kinds.empty()) throw UsageError("empty benchmark grid");

  BenchmarkReport report;
  std::cout << std::setprecision(6);
  for (std::size_t fi = 0; fi < ids.size(); ++fi) {
    const auto id = ids[fi];
    const auto ref_seed = derive_seed(c.seed, 1000 + static_cast<std::uint64_t>(id));
    const auto ref = cached_reference_density(id, static_cast<std::size_t>(c.reference_size), ref_seed, cache_dir);
    std::optional<double> lambda;
    if (c.lambda == "computed") {
      Rng lr(derive_seed(c.seed, 2000 + static_cast<std::uint64_t>(id)));
      lambda = compute_lambda_star(id, 1000000, lr);
    }
    for (std::size_t si = 0; si < c.sigmas.size(); ++si) {
      ExperimentConfig ex;
      ex.function = id;
      ex.sigma_m = c.sigmas[si];
      ex.estimators = kinds;
      ex.repetitions = c.repetitions;
      ex.base_seed = derive_seed(c.seed, 100 * static_cast<std::uint64_t>(id) + si);
      ex.sample_size = c.sample_size;
      ex.estimator = estimator_config(c.profile, test_function_dim);
      ex.lambda_star = lambda;
      ex.threads = threads;
      const auto scores = run_experiment(ex, ref);
      report.add(ex, scores);
      for (const auto& s : scores) {
        std::cout << to_string(id) << " sigma_m=" << ex.sigma_m << ' ' << to_string(s.kind) << ": median L1 "
                  << median_of(s.l1) << " (IQR " << iqr_of(s.l1) << ")\n";
      }
    }
  }
  {
    auto out = open_output(out_path);
    write_echo(out, "benchmark", c.to_json());
    report.write_csv(out);
  }
  const auto md = markdown_path.empty() ? std::filesystem::path(out_path).replace_extension(".md").string() : markdown_path;
  auto out = open_output(md);
  write_echo(out, "benchmark", c.to_json());
  out << '\n';
  report.write_markdown(out);
  return 0;
}

// ----------------------------------------------------------------------- l1

TabulatedDensity read_density_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return read_density_csv(in);
}

int cmd_l1(const std::string& a_path, const std::string& b_path)
{
  const auto a = read_density_file(a_path);
  const auto b = read_density_file(b_path);
  if (!same_grid(a.grid, b.grid)) throw Error(ErrorCode::GridMismatch, "'" + a_path + "' and '" + b_path + "' use different grids");
  std::cout << std::setprecision(6) << l1_riemann(a.values, b.values, a.grid) << '\n';
  return 0;
}

// ------------------------------------------------------------ export-density

struct ExportArgs
{
  std::optional<std::vector<double>> normal;
  std::string values;
  std::optional<std::string> column;
  std::optional<double> bandwidth;
  std::optional<double> lower;
  std::optional<double> upper;
  std::size_t subintervals = default_subintervals;
  std::string out;
};

int cmd_export_density(const ExportArgs& a)
{
  if (a.out.empty()) throw UsageError("--out is required");
  if (a.normal.has_value() == !a.values.empty()) throw UsageError("give exactly one of --normal and --values");
  if (a.lower.has_value() != a.upper.has_value()) throw UsageError("--lower and --upper go together");
  json cfg{{"subintervals", a.subintervals}};
  if (a.lower) {
    cfg["lower"] = *a.lower;
    cfg["upper"] = *a.upper;
  }
  std::vector<double> values;
  DensityGrid grid;
  if (a.normal) {
    if (a.normal->size() != 2 || !((*a.normal)[1] > 0.0)) throw UsageError("--normal takes MEAN,SD with SD > 0");
    if (!a.lower) throw UsageError("--normal needs --lower and --upper");
    const double mu = (*a.normal)[0];
    const double sd = (*a.normal)[1];
    grid = {*a.lower, *a.upper, a.subintervals};
    grid.validate();
    values = tabulate([&](double y) { return kernel_value(Kernel::gaussian, (y - mu) / sd) / sd; }, grid);
    cfg["normal"] = *a.normal;
  } else {
    const auto rd = ingest_real_data_file(a.values);
    Vector col = rd.sample.outputs;
    if (a.column && *a.column != rd.output_name) {
      const auto it = std::find(rd.input_names.begin(), rd.input_names.end(), *a.column);
      if (it == rd.input_names.end()) throw UsageError("no column '" + *a.column + "' in '" + a.values + "'");
      col = rd.sample.inputs.col(it - rd.input_names.begin());
    }
    const auto kde = KernelDensityModel::fit(std::vector<double>(col.data(), col.data() + col.size()), a.bandwidth);
    grid = a.lower ? DensityGrid{*a.lower, *a.upper, a.subintervals} : default_grid(kde, a.subintervals);
    grid.validate();
    values = kde.evaluate(grid);
    cfg["values"] = a.values;
    cfg["column"] = a.column.value_or(rd.output_name);
    cfg["bandwidth"] = kde.bandwidth();
  }
  auto out = open_output(a.out);
  write_echo(out, "export-density", cfg);
  write_density_csv(out, values, grid);
  std::cout << std::setprecision(6) << "integral " << riemann_integral(values, grid) << " over [" << grid.lower << ", "
            << grid.upper << "]\n";
  return 0;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Output density estimation from small samples and imperfect simulation models"};
  app.set_version_flag("--version", version);
  app.require_subcommand(1);

  FitInputArgs fit;
  auto* fit_cmd = app.add_subcommand("fit-input", "Fit a Gaussian input model to a data CSV");
  fit_cmd->add_option("--data", fit.data, "Data CSV (header with optional :eK scale suffixes)")->required();
  fit_cmd->add_option("--out", fit.out, "Output JSON")->required();
  fit_cmd->add_flag("--all-inputs", fit.all_inputs, "Treat the last column as an input too");

  SampleArgs smp;
  auto* sample_cmd = app.add_subcommand("sample", "Draw inputs from a model, or a labeled sample of a test function");
  sample_cmd->add_option("--model", smp.model, "Input model JSON");
  sample_cmd->add_option("--function", smp.function, "Test function m1..m4 (X ~ N(0, I_5))");
  sample_cmd->add_option("--count", smp.count, "Number of draws")->required();
  sample_cmd->add_option("--seed", smp.seed, "Random seed")->required();
  sample_cmd->add_option("--out", smp.out, "Output CSV")->required();

  EstimateConfig est;
  std::string est_config;
  std::string est_out;
  auto* est_cmd = app.add_subcommand("estimate", "Estimate the output density with est1..est4");
  est_cmd->add_option("--config", est_config, "JSON config, or a file carrying a config echo; flags override it");
  est_cmd->add_option("--data", est.data, "Labeled data CSV (inputs then output)");
  est_cmd->add_option("--simulator", est.simulator, "builtin:m1..m4, builtin:linear-fit or exec:<command>");
  est_cmd->add_option("--estimator", est.estimator, "1, 2, 3 or 4");
  est_cmd->add_option("--seed", est.seed, "Random seed");
  est_cmd->add_option("--profile", est.profile, "Architecture grids: desk or full");
  est_cmd->add_option("--sigma-m", est.sigma_m, "Model error level for builtin test functions");
  est_cmd->add_option("--lambda-star", est.lambda_star, "Override the published lambda*");
  est_cmd->add_option("--design-size", est.design_size, "Simulator design points L_n");
  est_cmd->add_option("--anchors", est.anchor_count, "Anchor points N1");
  est_cmd->add_option("--kde-size", est.kde_size, "Propagated points N2");
  est_cmd->add_option("--folds", est.folds, "Cross-validation folds for the residual fit");
  est_cmd->add_option("--bandwidth", est.bandwidth, "Fixed KDE bandwidth");
  est_cmd->add_option("--truncate-base", est.truncate_base, "Clip surrogate predictions at +-beta");
  est_cmd->add_option("--truncate-residual", est.truncate_residual, "Clip residual predictions at +-beta");
  est_cmd->add_option("--input-model", est.input_model, "Input model JSON instead of fitting one to --data");
  est_cmd->add_option("--out-density", est_out, "Density CSV");
  est_cmd->add_option("--threads", est.threads, "Worker cap (0 = all cores)");

  BenchmarkConfig bench;
  std::string bench_config;
  std::string functions;
  std::string sigmas;
  std::string estimators;
  std::string bench_out;
  std::string bench_md;
  std::string cache_dir;
  unsigned bench_threads = 1;
  std::optional<std::uint64_t> bench_seed;
  auto* bench_cmd = app.add_subcommand("benchmark", "Simulation study on the m1..m4 test functions");
  bench_cmd->add_option("--config", bench_config, "JSON config, or a report carrying a config echo");
  bench_cmd->add_option("--functions", functions, "Comma-separated subset of m1,m2,m3,m4");
  bench_cmd->add_option("--sigmas", sigmas, "Comma-separated sigma_m values");
  bench_cmd->add_option("--estimators", estimators, "Comma-separated subset of 1,2,3,4");
  bench_cmd->add_option("--reps", bench.repetitions, "Repetitions per cell");
  bench_cmd->add_option("--seed", bench_seed, "Random seed");
  bench_cmd->add_option("--sample-size", bench.sample_size, "Labeled sample size n");
  bench_cmd->add_option("--reference-size", bench.reference_size, "Draws behind the reference density");
  bench_cmd->add_option("--profile", bench.profile, "Architecture grids: desk or full");
  bench_cmd->add_option("--lambda", bench.lambda, "lambda* source: published or computed");
  bench_cmd->add_option("--out", bench_out, "Report CSV");
  bench_cmd->add_option("--markdown", bench_md, "Markdown table (default: --out with .md)");
  bench_cmd->add_option("--cache-dir", cache_dir, "Reference density cache");
  bench_cmd->add_option("--threads", bench_threads, "Worker cap (0 = all cores)");

  std::string l1_a;
  std::string l1_b;
  auto* l1_cmd = app.add_subcommand("l1", "L1 distance between two density CSVs on the same grid");
  l1_cmd->add_option("--density-a", l1_a)->required();
  l1_cmd->add_option("--density-b", l1_b)->required();

  ExportArgs exp;
  auto* exp_cmd = app.add_subcommand("export-density", "Tabulate a normal density or a KDE of a data column");
  exp_cmd->add_option("--normal", exp.normal, "MEAN,SD")->delimiter(',')->expected(2);
  exp_cmd->add_option("--values", exp.values, "Data CSV whose column is smoothed");
  exp_cmd->add_option("--column", exp.column, "Column name (default: last)");
  exp_cmd->add_option("--bandwidth", exp.bandwidth, "Fixed bandwidth");
  exp_cmd->add_option("--lower", exp.lower);
  exp_cmd->add_option("--upper", exp.upper);
  exp_cmd->add_option("--subintervals", exp.subintervals);
  exp_cmd->add_option("--out", exp.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*fit_cmd) return cmd_fit_input(fit);
    if (*sample_cmd) return cmd_sample(smp);
    if (*est_cmd) {
      EstimateConfig c;
      if (!est_config.empty()) c.merge(load_config(est_config));
      // explicit flags win over the config file
      auto given = [&](const char* flag) { return est_cmd->count(flag) > 0; };
      if (given("--data")) c.data = est.data;
      if (given("--simulator")) c.simulator = est.simulator;
      if (given("--estimator")) c.estimator = est.estimator;
      if (given("--seed")) c.seed = est.seed;
      if (given("--profile")) c.profile = est.profile;
      if (given("--sigma-m")) c.sigma_m = est.sigma_m;
      if (given("--lambda-star")) c.lambda_star = est.lambda_star;
      if (given("--design-size")) c.design_size = est.design_size;
      if (given("--anchors")) c.anchor_count = est.anchor_count;
      if (given("--kde-size")) c.kde_size = est.kde_size;
      if (given("--folds")) c.folds = est.folds;
      if (given("--bandwidth")) c.bandwidth = est.bandwidth;
      if (given("--truncate-base")) c.truncate_base = est.truncate_base;
      if (given("--truncate-residual")) c.truncate_residual = est.truncate_residual;
      if (given("--input-model")) c.input_model = est.input_model;
      if (est_config.empty() && est_cmd->count("--seed") == 0) throw UsageError("--seed is required");
      c.threads = est.threads;
      return cmd_estimate(c, est_out);
    }
    if (*bench_cmd) {
      BenchmarkConfig c;
      if (!bench_config.empty()) c.merge(load_config(bench_config));
      if (!functions.empty()) c.functions = split_list(functions);
      if (!sigmas.empty()) {
        c.sigmas.clear();
        for (const auto& s : split_list(sigmas)) c.sigmas.push_back(checked_sigma(parse_number(s, "sigma_m")));
      }
      if (!estimators.empty()) {
        c.estimators.clear();
        for (const auto& s : split_list(estimators)) {
          auto t = s.rfind("est", 0) == 0 ? s.substr(3) : s;
          c.estimators.push_back(static_cast<int>(parse_number(t, "estimator")));
        }
      }
      if (bench_cmd->count("--reps")) c.repetitions = bench.repetitions;
      if (bench_cmd->count("--sample-size")) c.sample_size = bench.sample_size;
      if (bench_cmd->count("--reference-size")) c.reference_size = bench.reference_size;
      if (bench_cmd->count("--profile")) c.profile = bench.profile;
      if (bench_cmd->count("--lambda")) c.lambda = bench.lambda;
      if (bench_seed) c.seed = *bench_seed;
      else if (bench_config.empty()) throw UsageError("--seed is required");
      return cmd_benchmark(c, bench_out, bench_md, cache_dir, bench_threads);
    }
    if (*l1_cmd) return cmd_l1(l1_a, l1_b);
    if (*exp_cmd) return cmd_export_density(exp);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
