#pragma once

// Residual problems assembled from blocks, in the style of a small
// Ceres-like modeling layer.
//
// A block reads a subset of the global parameters (its "inputs", gathered in
// order into a local vector), writes a fixed number of raw residuals, and
// carries an optional robust wrapper and per-group weights:
//
//   r_g = weight_g * huber_scale(|raw_g|) * raw_g
//
// where groups are consecutive runs of `group_size` residuals (2 for image
// points). Cost is 1/2 sum r^2. Evaluators are generic over the scalar type
// so the same code yields values (double) and Jacobian columns (Dual).

#include "rigfit/dual.hpp"
#include "rigfit/param_layout.hpp"
#include "rigfit/types.hpp"

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace rigfit {

inline constexpr int kJetLanes = 16;
using Jet = Dual<kJetLanes>;

/// Huber cost rho(r) = r^2 for |r| <= delta, 2 delta |r| - delta^2 beyond.
double huber_cost(double r, double delta);
/// Factor s with (s r)^2 = rho(|r|); 1 inside the quadratic zone.
template <typename T>
T huber_scale(const T& norm, double delta) {
  using std::sqrt;
  if (!(value_of(norm) > delta)) return T(1.0);
  return sqrt(2.0 * delta * norm - delta * delta) / norm;
}

struct ResidualBlock {
  std::string term;         ///< loss-term label for the cost breakdown
  std::vector<int> inputs;  ///< global parameter indices, local order
  int size = 0;             ///< raw residual count
  int group_size = 1;
  double huber_delta = 0.0;     ///< <= 0 disables the robust wrapper
  std::vector<double> weights;  ///< one per group; empty means 1
  std::function<void(std::span<const double>, std::span<double>)> eval;
  std::function<void(std::span<const Jet>, std::span<Jet>)> eval_jet;
};

/// Wraps a generic callable `f(std::span<const T> x, std::span<T> r)`.
template <typename F>
ResidualBlock make_block(std::string term, std::vector<int> inputs, int size, F f) {
  ResidualBlock b;
  b.term = std::move(term);
  b.inputs = std::move(inputs);
  b.size = size;
  b.eval = [f](std::span<const double> x, std::span<double> r) { f(x, r); };
  b.eval_jet = [f](std::span<const Jet> x, std::span<Jet> r) { f(x, r); };
  return b;
}

/// Contiguous index range [begin, begin + count).
std::vector<int> index_range(int begin, int count);

class ResidualProblem {
 public:
  explicit ResidualProblem(ParamLayout layout) : layout_(std::move(layout)) {}

  void add(ResidualBlock block);

  const ParamLayout& layout() const { return layout_; }
  ParamLayout& layout() { return layout_; }
  int num_parameters() const { return layout_.size(); }
  int num_residuals() const { return num_residuals_; }
  const std::vector<ResidualBlock>& blocks() const { return blocks_; }
  /// All term labels, in first-appearance order.
  std::vector<std::string> terms() const;

  Eigen::VectorXd residuals(const Eigen::VectorXd& x) const;
  double cost(const Eigen::VectorXd& x) const;
  /// Cost per term label; entries sum to cost(x).
  std::map<std::string, double> cost_breakdown(const Eigen::VectorXd& x) const;
  /// Cost of each block, in insertion order.
  std::vector<double> block_costs(const Eigen::VectorXd& x) const;

  /// Dense Jacobian by forward-mode propagation; frozen columns are zero.
  /// Throws NumericError on non-finite residuals.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;

  /// Normal equations restricted to the active (non-frozen) parameters.
  /// Robust groups beyond delta enter with their Jacobian and residual scaled
  /// by sqrt(delta / |r|), which keeps jtr the exact cost gradient.
  struct Linearization {
    std::vector<int> active;  ///< global index of each active column
    Eigen::VectorXd residuals;
    double cost = 0.0;
    Eigen::MatrixXd jtj;
    Eigen::VectorXd jtr;
  };
  Linearization linearize(const Eigen::VectorXd& x) const;

 private:
  // Residuals of one block at its gathered local inputs (robust + weights
  // applied). With `irls` the robust factor is held constant at sqrt(rho').
  template <typename T>
  void evaluate_block(const ResidualBlock& b, std::span<const T> local, std::span<T> out,
                      bool irls = false) const;

  ParamLayout layout_;
  std::vector<ResidualBlock> blocks_;
  int num_residuals_ = 0;
};

}  // namespace rigfit
