#pragma once

#include "rigfit/problem.hpp"

#include <string>
#include <vector>

namespace rigfit {

struct LmConfig {
  int max_iters = 100;
  double lambda_init = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 1.0 / 3.0;
  /// Relative cost decrease and relative step size below which LM stops.
  double tol = 1e-10;
  /// Max-norm of the gradient below which LM stops.
  double gradient_tol = 1e-10;
};

struct FirstOrderConfig {
  double step = 1e-2;
  int iters = 300;
  double tol = 1e-8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

enum class SolveStatus { converged, max_iterations, diverged, stalled };

const char* to_string(SolveStatus status);

struct SolveResult {
  Eigen::VectorXd x;
  /// Cost at x0, then after every accepted (LM) or taken (first-order) step.
  std::vector<double> cost_trace;
  int iterations = 0;
  int accepted_steps = 0;
  SolveStatus status = SolveStatus::max_iterations;
  double final_cost = 0.0;
  double gradient_norm = 0.0;  ///< max-norm of J^T r over active parameters at x

  bool converged() const { return status == SolveStatus::converged; }
};

/// Levenberg-Marquardt on the active parameters with damping
/// (J^T J + lambda * D) where D = max(diag(J^T J), 1e-9). Steps are accepted
/// only on strict cost decrease, so the accepted-cost sequence is monotone.
SolveResult solve_lm(const ResidualProblem& problem, const Eigen::VectorXd& x0, const LmConfig& config = {});

/// Adam on 1/2 sum r^2. Stops when a step improves the cost by a relative
/// amount in [0, tol) (that step is not taken) or at the iteration cap, and
/// returns the best iterate seen.
SolveResult solve_first_order(const ResidualProblem& problem, const Eigen::VectorXd& x0,
                              const FirstOrderConfig& config = {});

}  // namespace rigfit
