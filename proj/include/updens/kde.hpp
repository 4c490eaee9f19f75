#pragma once

/**
 * One-dimensional kernel density estimation, normal-reference bandwidth and
 * midpoint-rule L1 distances on equidistant grids.
 */

#include "error.hpp"
#include "types.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace updens {

enum class Kernel
{
  gaussian,
  epanechnikov,
};

inline double kernel_value(Kernel k, double u)
{
  switch (k) {
    case Kernel::gaussian: return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
    case Kernel::epanechnikov: return std::abs(u) < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
  }
  return 0.0;
}

//! |u| beyond which the kernel is treated as zero (below 1e-17 for the Gaussian).
inline double kernel_support(Kernel k)
{
  return k == Kernel::gaussian ? 9.0 : 1.0;
}

//! Sample quantile with linear interpolation between order statistics
//! (the R type 7 / numpy default definition). `sorted` must be ascending.
inline double quantile_sorted(const std::vector<double>& sorted, double p)
{
  if (sorted.empty()) throw Error(ErrorCode::EmptySample, "quantile of empty data");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double interquartile_range(std::vector<double> values)
{
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, 0.75) - quantile_sorted(values, 0.25);
}

//! Spread terms of the normal-reference rule, exposed for inspection.
struct SilvermanTerms
{
  double stddev = 0.0; // 1/(N-1) normalization
  double iqr_scaled = 0.0; // IQR / 1.349
  double spread = 0.0; // min of the positive terms
  double bandwidth = 0.0;
};

inline SilvermanTerms silverman_terms(const std::vector<double>& values)
{
  const auto n = values.size();
  if (n < 2) throw Error(ErrorCode::DegenerateSample, "bandwidth needs at least 2 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  SilvermanTerms t;
  t.stddev = std::sqrt(ss / static_cast<double>(n - 1));
  t.iqr_scaled = interquartile_range(values) / 1.349;
  if (t.stddev > 0.0 && t.iqr_scaled > 0.0) t.spread = std::min(t.stddev, t.iqr_scaled);
  else t.spread = std::max(t.stddev, t.iqr_scaled);
  if (!(t.spread > 0.0) || !std::isfinite(t.spread)) {
    throw Error(ErrorCode::DegenerateSample, "all values are equal");
  }
  t.bandwidth = t.spread * std::pow(4.0 / (3.0 * static_cast<double>(n)), 0.2);
  return t;
}

/**
 * Normal-reference bandwidth spread * (4 / (3N))^(1/5) with
 * spread = min(sample std, IQR / 1.349). When one term is zero the other is
 * used; all-equal samples are rejected.
 */
inline double silverman_bandwidth(const std::vector<double>& values)
{
  return silverman_terms(values).bandwidth;
}

//! Equidistant partition of [lower, upper]; abscissae are the midpoints.
struct DensityGrid
{
  double lower = 0.0;
  double upper = 1.0;
  std::size_t subintervals = 10000;

  void validate() const
  {
    if (!(lower < upper) || !std::isfinite(lower) || !std::isfinite(upper) || subintervals < 2) {
      throw Error(ErrorCode::InvalidArgument, "grid needs lower < upper and at least 2 subintervals");
    }
  }

  double step() const { return (upper - lower) / static_cast<double>(subintervals); }
  double midpoint(std::size_t i) const { return lower + (static_cast<double>(i) + 0.5) * step(); }

  std::vector<double> midpoints() const
  {
    std::vector<double> m(subintervals);
    for (std::size_t i = 0; i < subintervals; ++i) m[i] = midpoint(i);
    return m;
  }

  friend bool operator==(const DensityGrid&, const DensityGrid&) = default;
};

//! Rosenblatt-Parzen estimate (1 / (N h)) sum K((y - c_i) / h).
class KernelDensityModel
{
public:
  KernelDensityModel(std::vector<double> centers, double bandwidth, Kernel kernel = Kernel::gaussian)
    : centers_(std::move(centers)), h_(bandwidth), kernel_(kernel)
  {
    if (centers_.empty()) throw Error(ErrorCode::EmptySample, "no kernel centers");
    if (!(h_ > 0.0) || !std::isfinite(h_)) throw Error(ErrorCode::InvalidArgument, "bandwidth must be positive");
    for (double c : centers_) {
      if (!std::isfinite(c)) throw Error(ErrorCode::NonFiniteData, "kernel center");
    }
    std::sort(centers_.begin(), centers_.end());
  }

  //! Normal-reference bandwidth unless `bandwidth` is given.
  static KernelDensityModel fit(std::vector<double> centers, std::optional<double> bandwidth = {},
                                Kernel kernel = Kernel::gaussian)
  {
    const double h = bandwidth ? *bandwidth : silverman_bandwidth(centers);
    return KernelDensityModel(std::move(centers), h, kernel);
  }

  const std::vector<double>& centers() const noexcept { return centers_; }
  double bandwidth() const noexcept { return h_; }
  Kernel kernel() const noexcept { return kernel_; }

  double operator()(double y) const
  {
    const double reach = kernel_support(kernel_) * h_;
    auto first = std::lower_bound(centers_.begin(), centers_.end(), y - reach);
    auto last = std::upper_bound(first, centers_.end(), y + reach);
    double s = 0.0;
    for (auto it = first; it != last; ++it) s += kernel_value(kernel_, (y - *it) / h_);
    return s / (static_cast<double>(centers_.size()) * h_);
  }

  //! Values at the grid midpoints (sliding window over the sorted centers).
  std::vector<double> evaluate(const DensityGrid& grid) const
  {
    grid.validate();
    std::vector<double> out(grid.subintervals);
    const double reach = kernel_support(kernel_) * h_;
    const double norm = 1.0 / (static_cast<double>(centers_.size()) * h_);
    std::size_t lo = 0;
    std::size_t hi = 0;
    for (std::size_t i = 0; i < grid.subintervals; ++i) {
      const double y = grid.midpoint(i);
      while (lo < centers_.size() && centers_[lo] < y - reach) ++lo;
      if (hi < lo) hi = lo;
      while (hi < centers_.size() && centers_[hi] <= y + reach) ++hi;
      double s = 0.0;
      for (std::size_t k = lo; k < hi; ++k) s += kernel_value(kernel_, (y - centers_[k]) / h_);
      out[i] = s * norm;
    }
    return out;
  }

private:
  std::vector<double> centers_;
  double h_;
  Kernel kernel_;
};

inline constexpr std::size_t default_subintervals = 10000;

/**
 * Grid covering [min - 8h, max + 8h] of the model's centers. Uses 10^4
 * subintervals unless that would make the step exceed h/4, in which case the
 * count grows (capped at 4e6).
 */
inline DensityGrid default_grid(const KernelDensityModel& model, std::size_t subintervals = default_subintervals)
{
  const double h = model.bandwidth();
  DensityGrid g{model.centers().front() - 8.0 * h, model.centers().back() + 8.0 * h, subintervals};
  const double needed = std::ceil((g.upper - g.lower) / (0.25 * h));
  if (needed > static_cast<double>(g.subintervals)) {
    g.subintervals = static_cast<std::size_t>(std::min(needed, 4e6));
  }
  return g;
}

//! Grid for scoring against a reference density: [min - 4h, max + 4h].
inline DensityGrid scoring_grid(const KernelDensityModel& reference, std::size_t subintervals = default_subintervals)
{
  const double h = reference.bandwidth();
  return {reference.centers().front() - 4.0 * h, reference.centers().back() + 4.0 * h, subintervals};
}

inline std::vector<double> tabulate(const std::function<double(double)>& f, const DensityGrid& grid)
{
  grid.validate();
  std::vector<double> v(grid.subintervals);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid.midpoint(i));
  return v;
}

//! Midpoint-rule integral of tabulated values.
inline double riemann_integral(const std::vector<double>& values, const DensityGrid& grid)
{
  double s = 0.0;
  for (double v : values) s += v;
  return s * grid.step();
}

inline double l1_riemann(const std::vector<double>& f, const std::vector<double>& g, const DensityGrid& grid)
{
  grid.validate();
  if (f.size() != grid.subintervals || g.size() != grid.subintervals) {
    throw Error(ErrorCode::GridMismatch, "tabulated values do not match the grid");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += std::abs(f[i] - g[i]);
  return s * grid.step();
}

inline double l1_riemann(const std::function<double(double)>& f, const std::function<double(double)>& g,
                         const DensityGrid& grid)
{
  return l1_riemann(tabulate(f, grid), tabulate(g, grid), grid);
}

struct ScheffeCheck
{
  double l1 = 0.0;
  //! 2 * integral of (f - g)_+
  double positive_part = 0.0;
};

inline ScheffeCheck scheffe_check(const std::vector<double>& f, const std::vector<double>& g, const DensityGrid& grid)
{
  ScheffeCheck r;
  r.l1 = l1_riemann(f, g, grid);
  double pos = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) pos += std::max(f[i] - g[i], 0.0);
  r.positive_part = 2.0 * pos * grid.step();
  return r;
}

inline ScheffeCheck scheffe_check(const std::function<double(double)>& f, const std::function<double(double)>& g,
                                  const DensityGrid& grid)
{
  return scheffe_check(tabulate(f, grid), tabulate(g, grid), grid);
}

//! Two-column CSV "y,density" over the grid midpoints.
inline void write_density_csv(std::ostream& os, const std::vector<double>& values, const DensityGrid& grid)
{
  os << "y,density\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < values.size(); ++i) os << grid.midpoint(i) << ',' << values[i] << '\n';
}

struct TabulatedDensity
{
  DensityGrid grid;
  std::vector<double> values;
};

//! Reads a CSV written by write_density_csv and recovers its grid.
inline TabulatedDensity read_density_csv(std::istream& is)
{
  std::string line;
  // leading '#' lines carry a config echo; the first other line is the header
  do {
    if (!std::getline(is, line)) throw Error(ErrorCode::EmptyData, "density CSV is empty");
  } while (line.empty() || line[0] == '#');
  std::vector<double> ys;
  TabulatedDensity t;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::MalformedRow, line);
    try {
      ys.push_back(std::stod(line.substr(0, comma)));
      t.values.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw Error(ErrorCode::MalformedRow, line);
    }
  }
  if (ys.size() < 2) throw Error(ErrorCode::EmptyData, "density CSV needs at least 2 rows");
  const double step = (ys.back() - ys.front()) / static_cast<double>(ys.size() - 1);
  t.grid = {ys.front() - 0.5 * step, ys.back() + 0.5 * step, ys.size()};
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (std::abs(ys[i] - t.grid.midpoint(i)) > 1e-9 * std::max(1.0, std::abs(step) * static_cast<double>(ys.size()))) {
      throw Error(ErrorCode::GridMismatch, "abscissae are not equidistant");
    }
  }
  return t;
}

//! Grids agree when counts match and end points agree to a relative 1e-9 of the width.
inline bool same_grid(const DensityGrid& a, const DensityGrid& b)
{
  const double tol = 1e-9 * std::max(a.upper - a.lower, b.upper - b.lower);
  return a.subintervals == b.subintervals && std::abs(a.lower - b.lower) <= tol && std::abs(a.upper - b.upper) <= tol;
}

} // namespace updens
