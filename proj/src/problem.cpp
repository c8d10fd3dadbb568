#include "rigfit/problem.hpp"

#include <algorithm>
#include <cmath>

namespace rigfit {

double huber_cost(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? a * a : 2.0 * delta * a - delta * delta;
}

std::vector<int> index_range(int begin, int count) {
  std::vector<int> out(count);
  for (int i = 0; i < count; ++i) out[i] = begin + i;
  return out;
}

void ResidualProblem::add(ResidualBlock block) {
  if (block.size < 0 || block.group_size < 1 || block.size % block.group_size != 0) {
    throw InvalidArgument("residual block " + block.term + " has inconsistent sizes");
  }
  if (!block.weights.empty() && static_cast<int>(block.weights.size()) != block.size / block.group_size) {
    throw DimensionError("residual block " + block.term + " needs one weight per group");
  }
  for (int i : block.inputs) {
    if (i < 0 || i >= layout_.size()) throw DimensionError("residual block input out of range");
  }
  num_residuals_ += block.size;
  blocks_.push_back(std::move(block));
}

std::vector<std::string> ResidualProblem::terms() const {
  std::vector<std::string> out;
  for (const auto& b : blocks_) {
    if (std::find(out.begin(), out.end(), b.term) == out.end()) out.push_back(b.term);
  }
  return out;
}

template <typename T>
void ResidualProblem::evaluate_block(const ResidualBlock& b, std::span<const T> local, std::span<T> out,
                                      bool irls) const {
  if constexpr (std::is_same_v<T, double>) {
    b.eval(local, out);
  } else {
    b.eval_jet(local, out);
  }
  const int groups = b.size / b.group_size;
  for (int g = 0; g < groups; ++g) {
    std::span<T> r = out.subspan(g * b.group_size, b.group_size);
    double w = b.weights.empty() ? 1.0 : b.weights[g];
    if (b.huber_delta > 0.0) {
      T n2(0.0);
      for (const T& v : r) n2 += v * v;
      using std::sqrt;
      if (value_of(n2) > b.huber_delta * b.huber_delta) {
        if (irls) {
          // Constant sqrt(rho') weight: exact gradient, Gauss-Newton-friendly Hessian.
          const double s = std::sqrt(b.huber_delta / std::sqrt(value_of(n2)));
          for (T& v : r) v = v * s;
        } else {
          const T s = huber_scale<T>(sqrt(n2), b.huber_delta);
          for (T& v : r) v = v * s;
        }
      }
    }
    if (w != 1.0) {
      for (T& v : r) v = v * w;
    }
  }
}

Eigen::VectorXd ResidualProblem::residuals(const Eigen::VectorXd& x) const {
  if (x.size() != layout_.size()) throw DimensionError("parameter vector size mismatch");
  Eigen::VectorXd r(num_residuals_);
  int row = 0;
  std::vector<double> local;
  for (const auto& b : blocks_) {
    local.resize(b.inputs.size());
    for (size_t i = 0; i < b.inputs.size(); ++i) local[i] = x[b.inputs[i]];
    evaluate_block<double>(b, local, std::span<double>(r.data() + row, b.size));
    row += b.size;
  }
  return r;
}

double ResidualProblem::cost(const Eigen::VectorXd& x) const { return 0.5 * residuals(x).squaredNorm(); }

std::map<std::string, double> ResidualProblem::cost_breakdown(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd r = residuals(x);
  std::map<std::string, double> out;
  int row = 0;
  for (const auto& b : blocks_) {
    out[b.term] += 0.5 * r.segment(row, b.size).squaredNorm();
    row += b.size;
  }
  return out;
}

std::vector<double> ResidualProblem::block_costs(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd r = residuals(x);
  std::vector<double> out;
  int row = 0;
  for (const auto& b : blocks_) {
    out.push_back(0.5 * r.segment(row, b.size).squaredNorm());
    row += b.size;
  }
  return out;
}

ResidualProblem::Linearization ResidualProblem::linearize(const Eigen::VectorXd& x) const {
  if (x.size() != layout_.size()) throw DimensionError("parameter vector size mismatch");
  Linearization lin;
  lin.active = layout_.active_indices();
  std::vector<int> active_pos(layout_.size(), -1);
  for (size_t i = 0; i < lin.active.size(); ++i) active_pos[lin.active[i]] = static_cast<int>(i);
  const int na = static_cast<int>(lin.active.size());
  lin.jtj = Eigen::MatrixXd::Zero(na, na);
  lin.jtr = Eigen::VectorXd::Zero(na);
  lin.residuals.resize(num_residuals_);

  int row = 0;
  std::vector<double> local;
  std::vector<Jet> local_jet;
  std::vector<Jet> out_jet;
  for (const auto& b : blocks_) {
    const int ni = static_cast<int>(b.inputs.size());
    local.resize(ni);
    for (int i = 0; i < ni; ++i) local[i] = x[b.inputs[i]];
    std::span<double> r(lin.residuals.data() + row, b.size);
    evaluate_block<double>(b, local, r);
    for (double v : r) {
      if (!std::isfinite(v)) throw NumericError("non-finite residual in term " + b.term);
    }

    // Local columns that are active, and where they land in the normal equations.
    std::vector<int> cols;
    std::vector<int> dest;
    for (int i = 0; i < ni; ++i) {
      if (active_pos[b.inputs[i]] >= 0) {
        cols.push_back(i);
        dest.push_back(active_pos[b.inputs[i]]);
      }
    }
    if (!cols.empty() && b.size > 0) {
      Eigen::MatrixXd jb(b.size, static_cast<int>(cols.size()));
      Eigen::VectorXd rw(b.size);
      local_jet.resize(ni);
      out_jet.resize(b.size);
      for (size_t start = 0; start < cols.size(); start += kJetLanes) {
        const int lanes = std::min<int>(kJetLanes, static_cast<int>(cols.size() - start));
        for (int i = 0; i < ni; ++i) local_jet[i] = Jet(local[i]);
        for (int l = 0; l < lanes; ++l) local_jet[cols[start + l]].v[l] = 1.0;
        evaluate_block<Jet>(b, local_jet, out_jet, true);
        for (int k = 0; k < b.size; ++k) {
          for (int l = 0; l < lanes; ++l) jb(k, static_cast<int>(start) + l) = out_jet[k].v[l];
          rw[k] = out_jet[k].a;
        }
      }
      if (!jb.allFinite()) throw NumericError("non-finite Jacobian in term " + b.term);
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(jb.cols(), jb.cols());
      h.selfadjointView<Eigen::Lower>().rankUpdate(jb.transpose());
      const Eigen::VectorXd g = jb.transpose() * rw;
      for (size_t a = 0; a < dest.size(); ++a) {
        lin.jtr[dest[a]] += g[a];
        for (size_t c = 0; c <= a; ++c) {
          lin.jtj(dest[a], dest[c]) += h(a, c);
          if (c != a) lin.jtj(dest[c], dest[a]) += h(a, c);
        }
      }
    }
    row += b.size;
  }
  lin.cost = 0.5 * lin.residuals.squaredNorm();
  return lin;
}

Eigen::MatrixXd ResidualProblem::jacobian(const Eigen::VectorXd& x) const {
  if (x.size() != layout_.size()) throw DimensionError("parameter vector size mismatch");
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(num_residuals_, layout_.size());
  int row = 0;
  std::vector<double> local;
  std::vector<Jet> local_jet;
  std::vector<Jet> out_jet;
  std::vector<double> r;
  for (const auto& b : blocks_) {
    const int ni = static_cast<int>(b.inputs.size());
    local.resize(ni);
    for (int i = 0; i < ni; ++i) local[i] = x[b.inputs[i]];
    r.resize(b.size);
    evaluate_block<double>(b, local, r);
    for (double v : r) {
      if (!std::isfinite(v)) throw NumericError("non-finite residual in term " + b.term);
    }
    std::vector<int> cols;
    for (int i = 0; i < ni; ++i) {
      if (!layout_.is_frozen_index(b.inputs[i])) cols.push_back(i);
    }
    local_jet.resize(ni);
    out_jet.resize(b.size);
    for (size_t start = 0; start < cols.size(); start += kJetLanes) {
      const int lanes = std::min<int>(kJetLanes, static_cast<int>(cols.size() - start));
      for (int i = 0; i < ni; ++i) local_jet[i] = Jet(local[i]);
      for (int l = 0; l < lanes; ++l) local_jet[cols[start + l]].v[l] = 1.0;
      evaluate_block<Jet>(b, local_jet, out_jet);
      for (int k = 0; k < b.size; ++k) {
        for (int l = 0; l < lanes; ++l) jac(row + k, b.inputs[cols[start + l]]) += out_jet[k].v[l];
      }
    }
    row += b.size;
  }
  return jac;
}

}  // namespace rigfit
