#include "rigfit/solvers.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <limits>

namespace rigfit {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged:
      return "converged";
    case SolveStatus::max_iterations:
      return "max_iterations";
    case SolveStatus::diverged:
      return "diverged";
    case SolveStatus::stalled:
      return "stalled";
  }
  return "unknown";
}

namespace {

constexpr double kMaxLambda = 1e16;

double safe_cost(const ResidualProblem& problem, const Eigen::VectorXd& x) {
  try {
    const double c = problem.cost(x);
    return std::isfinite(c) ? c : std::numeric_limits<double>::infinity();
  } catch (const NumericError&) {
    return std::numeric_limits<double>::infinity();
  } catch (const GeometryError&) {
    return std::numeric_limits<double>::infinity();
  } catch (const InvalidArgument&) {
    // e.g. a step that drives a skeleton scale non-positive
    return std::numeric_limits<double>::infinity();
  }
}

// Large systems from multi-frame problems are mostly block-banded; a sparse
// factorization of the dense normal matrix is much cheaper there.
constexpr int kSparseThreshold = 240;

bool solve_damped(const Eigen::MatrixXd& a, const Eigen::VectorXd& jtr, Eigen::VectorXd& dx) {
  if (a.rows() > kSparseThreshold) {
    const Eigen::SparseMatrix<double> sa = a.sparseView();
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(sa);
    if (ldlt.info() != Eigen::Success) return false;
    dx = ldlt.solve(-jtr);
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success) return false;
    dx = ldlt.solve(-jtr);
  }
  return dx.allFinite() && (a * dx + jtr).norm() <= 1e-8 * (a.norm() * dx.norm() + jtr.norm());
}

Eigen::VectorXd gather(const Eigen::VectorXd& x, const std::vector<int>& idx) {
  Eigen::VectorXd out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out[i] = x[idx[i]];
  return out;
}

}  // namespace

SolveResult solve_lm(const ResidualProblem& problem, const Eigen::VectorXd& x0, const LmConfig& config) {
  if (!x0.allFinite()) throw InvalidArgument("initial parameters are not finite");
  SolveResult res;
  res.x = x0;
  auto lin = problem.linearize(res.x);
  res.cost_trace.push_back(lin.cost);
  double lambda = config.lambda_init;
  const int n = static_cast<int>(lin.active.size());

  auto finish = [&](SolveStatus status) {
    res.status = status;
    res.final_cost = lin.cost;
    res.gradient_norm = n > 0 ? lin.jtr.cwiseAbs().maxCoeff() : 0.0;
    return res;
  };
  if (n == 0) return finish(SolveStatus::converged);

  for (int iter = 0; iter < config.max_iters; ++iter) {
    res.iterations = iter + 1;
    if (lin.jtr.cwiseAbs().maxCoeff() <= config.gradient_tol) return finish(SolveStatus::converged);

    const Eigen::VectorXd diag = lin.jtj.diagonal().cwiseMax(1e-9);
    while (true) {
      Eigen::MatrixXd a = lin.jtj;
      a.diagonal() += lambda * diag;
      Eigen::VectorXd dx;
      bool ok = solve_damped(a, lin.jtr, dx);
      if (!ok) {
        lambda = std::max(lambda * config.lambda_up, 1e-12);
        if (lambda > kMaxLambda) return finish(SolveStatus::stalled);
        continue;
      }
      const Eigen::VectorXd xa = gather(res.x, lin.active);
      if (dx.norm() <= config.tol * (xa.norm() + config.tol)) return finish(SolveStatus::converged);

      Eigen::VectorXd candidate = res.x;
      for (int i = 0; i < n; ++i) candidate[lin.active[i]] += dx[i];
      const double c_new = safe_cost(problem, candidate);
      if (c_new < lin.cost) {
        const double rel = (lin.cost - c_new) / std::max(lin.cost, std::numeric_limits<double>::min());
        res.x = candidate;
        lin = problem.linearize(res.x);
        res.cost_trace.push_back(lin.cost);
        ++res.accepted_steps;
        lambda *= config.lambda_down;
        if (rel < config.tol) return finish(SolveStatus::converged);
        break;
      }
      lambda = std::max(lambda * config.lambda_up, 1e-12);
      if (lambda > kMaxLambda) return finish(SolveStatus::stalled);
    }
  }
  return finish(SolveStatus::max_iterations);
}

SolveResult solve_first_order(const ResidualProblem& problem, const Eigen::VectorXd& x0,
                              const FirstOrderConfig& config) {
  if (!x0.allFinite()) throw InvalidArgument("initial parameters are not finite");
  SolveResult res;
  Eigen::VectorXd x = x0;
  auto lin = problem.linearize(x);
  res.cost_trace.push_back(lin.cost);
  res.x = x;
  double best = lin.cost;
  const int n = static_cast<int>(lin.active.size());
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  res.status = SolveStatus::max_iterations;
  for (int t = 1; t <= config.iters && n > 0; ++t) {
    res.iterations = t;
    const Eigen::VectorXd& g = lin.jtr;
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    const Eigen::VectorXd step =
        config.step * (m / c1).array() / ((v / c2).array().sqrt() + config.epsilon);
    Eigen::VectorXd candidate = x;
    for (int i = 0; i < n; ++i) candidate[lin.active[i]] -= step[i];
    const double c_new = safe_cost(problem, candidate);
    if (!std::isfinite(c_new)) {
      res.status = SolveStatus::diverged;
      break;
    }
    const double rel = (lin.cost - c_new) / std::max(lin.cost, std::numeric_limits<double>::min());
    if (rel >= 0.0 && rel < config.tol) {
      res.status = SolveStatus::converged;
      break;
    }
    x = candidate;
    lin = problem.linearize(x);
    res.cost_trace.push_back(lin.cost);
    ++res.accepted_steps;
    if (lin.cost < best) {
      best = lin.cost;
      res.x = x;
    }
  }
  if (n == 0) res.status = SolveStatus::converged;
  res.final_cost = best;
  res.gradient_norm = n > 0 ? problem.linearize(res.x).jtr.cwiseAbs().maxCoeff() : 0.0;
  return res;
}

}  // namespace rigfit
