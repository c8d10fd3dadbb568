#pragma once

// Pose plausibility terms: Gaussian-mixture prior over the non-root pose
// subvector, joint-limit hinge penalty.

#include "rigfit/dual.hpp"
#include "rigfit/rig.hpp"
#include "rigfit/types.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace rigfit {

class GmmPrior {
 public:
  GmmPrior() = default;
  /// Validates (simplex weights, PD covariances) and precomputes factors.
  GmmPrior(Eigen::VectorXd weights, std::vector<Eigen::VectorXd> means,
           std::vector<Eigen::MatrixXd> covariances);

  int dim() const { return dim_; }
  int num_components() const { return static_cast<int>(means_.size()); }
  bool empty() const { return means_.empty(); }

  const Eigen::VectorXd& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& means() const { return means_; }
  const std::vector<Eigen::MatrixXd>& covariances() const { return covariances_; }
  /// Inverse of the lower Cholesky factor of each covariance.
  const std::vector<Eigen::MatrixXd>& whitening() const { return whitening_; }
  /// log w_k - d/2 log(2 pi) - 1/2 log|Sigma_k|
  const Eigen::VectorXd& log_normalizers() const { return log_norm_; }
  const Eigen::VectorXd& log_determinants() const { return log_det_; }

  /// Lower bound on the nll: -log sum_k w_k N(mu_k; mu_k, Sigma_k).
  double nll_lower_bound() const;

 private:
  int dim_ = 0;
  Eigen::VectorXd weights_;
  std::vector<Eigen::VectorXd> means_;
  std::vector<Eigen::MatrixXd> covariances_;
  std::vector<Eigen::MatrixXd> whitening_;
  Eigen::VectorXd log_det_;
  Eigen::VectorXd log_norm_;
};

/// -log sum_k w_k N(x; mu_k, Sigma_k), evaluated with log-sum-exp.
template <typename T>
T gmm_nll(const GmmPrior& prior, const VecX<T>& x) {
  using std::exp;
  using std::log;
  if (x.size() != prior.dim()) throw DimensionError("pose subvector does not match prior dimension");
  const int d = prior.dim();
  const int k_count = prior.num_components();
  std::vector<T> a(k_count);
  int best = 0;
  VecX<T> diff(d);
  for (int k = 0; k < k_count; ++k) {
    const Eigen::MatrixXd& w = prior.whitening()[k];
    for (int i = 0; i < d; ++i) diff[i] = x[i] - prior.means()[k][i];
    T q(0.0);
    for (int i = 0; i < d; ++i) {
      T yi(0.0);
      for (int j = 0; j <= i; ++j) yi += w(i, j) * diff[j];
      q += yi * yi;
    }
    a[k] = prior.log_normalizers()[k] - 0.5 * q;
    if (value_of(a[k]) > value_of(a[best])) best = k;
  }
  T sum(0.0);
  for (int k = 0; k < k_count; ++k) sum += exp(a[k] - a[best]);
  return -(a[best] + log(sum));
}

/// Non-root pose entries (joints 1..J-1, 3 each) in joint-major order.
template <typename T>
VecX<T> prior_subvector(const Mat3X<T>& pose) {
  const int n = static_cast<int>(pose.cols()) - 1;
  VecX<T> out(3 * n);
  for (int j = 0; j < n; ++j) out.template segment<3>(3 * j) = pose.col(j + 1);
  return out;
}

struct GmmFitOptions {
  int max_iters = 100;
  double tol = 1e-8;  ///< stop on relative mean log-likelihood change below this
  double regularization = 1e-6;
  int kmeans_iters = 20;
};

struct GmmFit {
  GmmPrior prior;
  std::vector<double> log_likelihood;  ///< mean per-sample log-likelihood after each E-step
  int iterations = 0;
};

/// EM from a seeded k-means++ initialization. Samples are rows.
GmmFit fit_gmm(const Eigen::MatrixXd& samples, int k, std::uint64_t seed,
               const GmmFitOptions& options = {});

/// Posterior responsibilities, one row per sample.
Eigen::MatrixXd gmm_responsibilities(const GmmPrior& prior, const Eigen::MatrixXd& samples);

/// Sum over joint axes of max(0, a - hi)^2 + max(0, lo - a)^2.
double joint_limit_penalty(const KinematicRig& rig, const RigParams& params);

/// Signed hinge excess per joint axis (zero inside the box), joint-major.
template <typename T>
VecX<T> joint_limit_hinges(const KinematicRig& rig, const Mat3X<T>& pose) {
  VecX<T> out(pose.size());
  for (int j = 0; j < pose.cols(); ++j) {
    for (int a = 0; a < 3; ++a) {
      const T& v = pose(a, j);
      const double hi = rig.limits_hi(a, j);
      const double lo = rig.limits_lo(a, j);
      if (value_of(v) > hi) {
        out[3 * j + a] = v - hi;
      } else if (value_of(v) < lo) {
        out[3 * j + a] = lo - v;
      } else {
        out[3 * j + a] = T(0.0);
      }
    }
  }
  return out;
}

}  // namespace rigfit
