#pragma once

/**
 * Hierarchical networks built from logistic-squasher blocks.
 *
 * A level-0 block with input dimension q, M outer units and J = 4 d* inner
 * units per outer unit computes
 *
 *   f(x) = mu_0 + sum_i mu_i * s( sum_j lambda_ij * s( sum_v theta_ijv x_v + theta_ij0 ) + lambda_i0 )
 *
 * with s(z) = 1 / (1 + exp(-z)). A level-l network (l > 0) is
 *
 *   h(x) = sum_{k=1..I} g_k( f_1k(x), ..., f_d*k(x) )
 *
 * where each g_k is a level-0 block on d* inputs and each f_jk a level-(l-1)
 * network on the original input.
 *
 * Weight layout of a level-0 block (q = input dimension):
 *   [mu_0, mu_1..mu_M]                                    M + 1
 *   for i = 1..M: [lambda_i0, lambda_i1..lambda_iJ]        M (J + 1)
 *   for i = 1..M, j = 1..J: [theta_ij0, theta_ij1..ijq]    M J (q + 1)
 *
 * Weight layout of a level-l network: for k = 1..I, the block g_k followed by
 * the layouts of f_1k, ..., f_d*k in order.
 */

#include "error.hpp"
#include "types.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <algorithm>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace updens {

struct NetworkArchitecture
{
  int level = 0;
  int outer_count = 1;  // I
  int hidden_units = 1; // M
  int input_dim = 1;    // d
  int interaction_order = 1; // d*
  double weight_bound = std::numeric_limits<double>::infinity(); // gamma

  void validate() const
  {
    if (level < 0 || outer_count < 1 || hidden_units < 1 || input_dim < 1 ||
        interaction_order < 1 || interaction_order > input_dim || !(weight_bound > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "invalid network architecture " + describe());
    }
  }

  bool bounded() const noexcept { return std::isfinite(weight_bound); }

  std::string describe() const
  {
    return "l=" + std::to_string(level) + " I=" + std::to_string(outer_count) +
           " M=" + std::to_string(hidden_units) + " d=" + std::to_string(input_dim) +
           " d*=" + std::to_string(interaction_order);
  }

  friend bool operator==(const NetworkArchitecture&, const NetworkArchitecture&) = default;
};

inline nlohmann::json to_json(const NetworkArchitecture& a)
{
  nlohmann::json j{{"level", a.level},
                   {"outer_count", a.outer_count},
                   {"hidden_units", a.hidden_units},
                   {"input_dim", a.input_dim},
                   {"interaction_order", a.interaction_order}};
  // JSON has no infinity; null means unbounded
  j["weight_bound"] = a.bounded() ? nlohmann::json(a.weight_bound) : nlohmann::json(nullptr);
  return j;
}

inline NetworkArchitecture architecture_from_json(const nlohmann::json& j)
{
  NetworkArchitecture a;
  a.level = j.at("level").get<int>();
  a.outer_count = j.at("outer_count").get<int>();
  a.hidden_units = j.at("hidden_units").get<int>();
  a.input_dim = j.at("input_dim").get<int>();
  a.interaction_order = j.at("interaction_order").get<int>();
  const auto& b = j.at("weight_bound");
  a.weight_bound = b.is_null() ? std::numeric_limits<double>::infinity() : b.get<double>();
  a.validate();
  return a;
}

inline double logistic(double z)
{
  return 1.0 / (1.0 + std::exp(-z));
}

namespace detail {

inline std::size_t block_weight_count(int hidden, int inner, int input)
{
  const auto m = static_cast<std::size_t>(hidden);
  const auto j = static_cast<std::size_t>(inner);
  const auto q = static_cast<std::size_t>(input);
  return (m + 1) + m * (j + 1) + m * j * (q + 1);
}

//! One level-0 block in the flattened network tree.
struct Block
{
  std::size_t offset = 0; // first weight
  int input_dim = 0;
  // leaf blocks read x; inner blocks read input_dim groups, each the sum of
  // the listed blocks' outputs
  std::vector<std::vector<std::size_t>> input_groups;

  bool leaf() const noexcept { return input_groups.empty(); }
};

} // namespace detail

/**
 * Flattened block tree of an architecture. Blocks are stored children first,
 * so a forward pass over the list in order sees every input already computed.
 */
class NetworkTopology
{
public:
  explicit NetworkTopology(const NetworkArchitecture& arch) : arch_(arch)
  {
    arch_.validate();
    std::size_t offset = 0;
    root_ = build(arch_.level, offset);
    weight_count_ = offset;
  }

  const NetworkArchitecture& architecture() const noexcept { return arch_; }
  std::size_t weight_count() const noexcept { return weight_count_; }
  const std::vector<detail::Block>& blocks() const noexcept { return blocks_; }
  //! Blocks whose outputs sum to the network output.
  const std::vector<std::size_t>& root() const noexcept { return root_; }
  int inner_units() const noexcept { return 4 * arch_.interaction_order; }

private:
  std::vector<std::size_t> build(int level, std::size_t& offset)
  {
    const int inner = 4 * arch_.interaction_order;
    if (level == 0) {
      detail::Block b;
      b.offset = offset;
      b.input_dim = arch_.input_dim;
      offset += detail::block_weight_count(arch_.hidden_units, inner, arch_.input_dim);
      blocks_.push_back(std::move(b));
      return {blocks_.size() - 1};
    }
    std::vector<std::size_t> terms;
    for (int k = 0; k < arch_.outer_count; ++k) {
      detail::Block g;
      g.offset = offset;
      g.input_dim = arch_.interaction_order;
      offset += detail::block_weight_count(arch_.hidden_units, inner, arch_.interaction_order);
      for (int j = 0; j < arch_.interaction_order; ++j) {
        g.input_groups.push_back(build(level - 1, offset));
      }
      blocks_.push_back(std::move(g));
      terms.push_back(blocks_.size() - 1);
    }
    return terms;
  }

  NetworkArchitecture arch_;
  std::vector<detail::Block> blocks_;
  std::vector<std::size_t> root_;
  std::size_t weight_count_ = 0;
};

inline std::size_t weight_count(const NetworkArchitecture& arch)
{
  return NetworkTopology(arch).weight_count();
}

/**
 * Reusable scratch space for forward and backward passes through one
 * topology. Not thread-safe; use one per thread.
 */
class NetworkEvaluator
{
public:
  explicit NetworkEvaluator(const NetworkTopology& topo) : topo_(&topo)
  {
    const auto& blocks = topo.blocks();
    const auto m = static_cast<std::size_t>(topo.architecture().hidden_units);
    const auto j = static_cast<std::size_t>(topo.inner_units());
    out_.resize(blocks.size());
    adj_.resize(blocks.size());
    inner_.resize(blocks.size(), std::vector<double>(m * j));
    outer_.resize(blocks.size(), std::vector<double>(m));
    inputs_.resize(blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      inputs_[b].resize(static_cast<std::size_t>(blocks[b].input_dim));
    }
    input_grad_.resize(static_cast<std::size_t>(topo.architecture().input_dim));
  }

  double value(std::span<const double> w, std::span<const double> x)
  {
    forward(w, x);
    double y = 0.0;
    for (auto r : topo_->root()) y += out_[r];
    return y;
  }

  //! Returns f(x) and writes df/dw into `grad` (size = weight count).
  double value_and_gradient(std::span<const double> w, std::span<const double> x, std::span<double> grad)
  {
    const double y = value(w, x);
    backward(w, grad);
    return y;
  }

private:
  void forward(std::span<const double> w, std::span<const double> x)
  {
    const auto& blocks = topo_->blocks();
    const int m = topo_->architecture().hidden_units;
    const int nj = topo_->inner_units();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto& blk = blocks[b];
      auto& in = inputs_[b];
      if (blk.leaf()) {
        std::copy(x.begin(), x.end(), in.begin());
      } else {
        for (std::size_t v = 0; v < blk.input_groups.size(); ++v) {
          double s = 0.0;
          for (auto c : blk.input_groups[v]) s += out_[c];
          in[v] = s;
        }
      }
      const int q = blk.input_dim;
      const double* mu = w.data() + blk.offset;
      const double* lambda = mu + (m + 1);
      const double* theta = lambda + m * (nj + 1);
      double y = mu[0];
      for (int i = 0; i < m; ++i) {
        const double* lam = lambda + i * (nj + 1);
        double acc = lam[0];
        for (int j = 0; j < nj; ++j) {
          const double* th = theta + (i * nj + j) * (q + 1);
          double a = th[0];
          for (int v = 0; v < q; ++v) a += th[v + 1] * in[static_cast<std::size_t>(v)];
          const double s = logistic(a);
          inner_[b][static_cast<std::size_t>(i * nj + j)] = s;
          acc += lam[j + 1] * s;
        }
        const double t = logistic(acc);
        outer_[b][static_cast<std::size_t>(i)] = t;
        y += mu[i + 1] * t;
      }
      out_[b] = y;
    }
  }

  void backward(std::span<const double> w, std::span<double> grad)
  {
    const auto& blocks = topo_->blocks();
    const int m = topo_->architecture().hidden_units;
    const int nj = topo_->inner_units();
    std::fill(adj_.begin(), adj_.end(), 0.0);
    for (auto r : topo_->root()) adj_[r] = 1.0;
    for (std::size_t bb = blocks.size(); bb-- > 0;) {
      const auto& blk = blocks[bb];
      const double a = adj_[bb];
      const int q = blk.input_dim;
      const auto& in = inputs_[bb];
      const double* mu = w.data() + blk.offset;
      const double* lambda = mu + (m + 1);
      const double* theta = lambda + m * (nj + 1);
      double* g_mu = grad.data() + blk.offset;
      double* g_lambda = g_mu + (m + 1);
      double* g_theta = g_lambda + m * (nj + 1);
      auto& din = input_grad_;
      std::fill(din.begin(), din.begin() + q, 0.0);
      g_mu[0] = a;
      for (int i = 0; i < m; ++i) {
        const double t = outer_[bb][static_cast<std::size_t>(i)];
        g_mu[i + 1] = a * t;
        const double delta = a * mu[i + 1] * t * (1.0 - t);
        const double* lam = lambda + i * (nj + 1);
        double* glam = g_lambda + i * (nj + 1);
        glam[0] = delta;
        for (int j = 0; j < nj; ++j) {
          const double s = inner_[bb][static_cast<std::size_t>(i * nj + j)];
          glam[j + 1] = delta * s;
          const double eps = delta * lam[j + 1] * s * (1.0 - s);
          const double* th = theta + (i * nj + j) * (q + 1);
          double* gth = g_theta + (i * nj + j) * (q + 1);
          gth[0] = eps;
          for (int v = 0; v < q; ++v) {
            gth[v + 1] = eps * in[static_cast<std::size_t>(v)];
            din[static_cast<std::size_t>(v)] += eps * th[v + 1];
          }
        }
      }
      if (!blk.leaf()) {
        for (std::size_t v = 0; v < blk.input_groups.size(); ++v) {
          for (auto c : blk.input_groups[v]) adj_[c] = din[v];
        }
      }
    }
  }

  const NetworkTopology* topo_;
  std::vector<double> out_;
  std::vector<double> adj_;
  std::vector<std::vector<double>> inner_;
  std::vector<std::vector<double>> outer_;
  std::vector<std::vector<double>> inputs_;
  std::vector<double> input_grad_;
};

/**
 * A member of the hierarchical network class: architecture plus flat weight
 * vector in the layout documented at the top of this header.
 */
class HierarchicalNetwork
{
public:
  explicit HierarchicalNetwork(const NetworkArchitecture& arch)
    : HierarchicalNetwork(arch, std::vector<double>(weight_count(arch), 0.0))
  {}

  HierarchicalNetwork(const NetworkArchitecture& arch, std::vector<double> weights)
    : topo_(std::make_shared<NetworkTopology>(arch)), weights_(std::move(weights))
  {
    if (weights_.size() != topo_->weight_count()) {
      throw Error(ErrorCode::DimensionMismatch,
                  "expected " + std::to_string(topo_->weight_count()) + " weights, got " +
                    std::to_string(weights_.size()));
    }
    if (arch.bounded()) {
      for (double v : weights_) {
        if (std::abs(v) > arch.weight_bound) {
          throw Error(ErrorCode::InvalidArgument, "weight exceeds bound gamma");
        }
      }
    }
  }

  const NetworkArchitecture& architecture() const noexcept { return topo_->architecture(); }
  const NetworkTopology& topology() const noexcept { return *topo_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  int input_dim() const noexcept { return architecture().input_dim; }

  double operator()(std::span<const double> x) const
  {
    check_dim(x.size());
    NetworkEvaluator ev(*topo_);
    return ev.value(weights_, x);
  }

  double operator()(const Vector& x) const { return (*this)(std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))); }

  //! Evaluates every row of `points`.
  Vector evaluate(const Matrix& points) const
  {
    check_dim(static_cast<std::size_t>(points.cols()));
    NetworkEvaluator ev(*topo_);
    Vector out(points.rows());
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      out(i) = ev.value(weights_, std::span<const double>(points.row(i).data(), static_cast<std::size_t>(points.cols())));
    }
    return out;
  }

  nlohmann::json to_json() const
  {
    return {{"architecture", updens::to_json(architecture())}, {"weights", weights_}};
  }

  static HierarchicalNetwork from_json(const nlohmann::json& j)
  {
    return HierarchicalNetwork(architecture_from_json(j.at("architecture")),
                               j.at("weights").get<std::vector<double>>());
  }

private:
  void check_dim(std::size_t n) const
  {
    if (n != static_cast<std::size_t>(input_dim())) {
      throw Error(ErrorCode::DimensionMismatch,
                  "input has " + std::to_string(n) + " components, network expects " + std::to_string(input_dim()));
    }
  }

  std::shared_ptr<const NetworkTopology> topo_;
  std::vector<double> weights_;
};

//! Upper bound |mu_0| + sum |mu_i| on |f| for a level-0 network.
inline double level0_output_bound(const HierarchicalNetwork& net)
{
  const int m = net.architecture().hidden_units;
  double b = 0.0;
  for (int i = 0; i <= m; ++i) b += std::abs(net.weights()[static_cast<std::size_t>(i)]);
  return b;
}

} // namespace updens
