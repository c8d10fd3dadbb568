#include "rigfit/priors.hpp"

#include "rigfit/random.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <limits>
#include <numbers>

namespace rigfit {

GmmPrior::GmmPrior(Eigen::VectorXd weights, std::vector<Eigen::VectorXd> means,
                   std::vector<Eigen::MatrixXd> covariances)
    : weights_(std::move(weights)), means_(std::move(means)), covariances_(std::move(covariances)) {
  const int k = static_cast<int>(means_.size());
  if (k == 0) throw InvalidArgument("GMM needs at least one component");
  if (weights_.size() != k || static_cast<int>(covariances_.size()) != k) {
    throw DimensionError("GMM weights/means/covariances count mismatch");
  }
  dim_ = static_cast<int>(means_[0].size());
  if ((weights_.array() < 0.0).any() || std::abs(weights_.sum() - 1.0) > 1e-12) {
    throw InvalidArgument("GMM weights must lie on the simplex");
  }
  whitening_.resize(k);
  log_det_.resize(k);
  log_norm_.resize(k);
  for (int c = 0; c < k; ++c) {
    if (means_[c].size() != dim_ || covariances_[c].rows() != dim_ || covariances_[c].cols() != dim_) {
      throw DimensionError("GMM component has wrong dimension");
    }
    if ((covariances_[c] - covariances_[c].transpose()).cwiseAbs().maxCoeff() >
        1e-9 * (1.0 + covariances_[c].cwiseAbs().maxCoeff())) {
      throw InvalidArgument("GMM covariance is not symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(covariances_[c]);
    if (llt.info() != Eigen::Success) throw InvalidArgument("GMM covariance is not positive definite");
    const Eigen::MatrixXd lower = llt.matrixL();
    whitening_[c] = lower.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(dim_, dim_));
    log_det_[c] = 2.0 * lower.diagonal().array().log().sum();
    log_norm_[c] = std::log(weights_[c]) - 0.5 * dim_ * std::log(2.0 * std::numbers::pi) - 0.5 * log_det_[c];
  }
}

double GmmPrior::nll_lower_bound() const {
  const double m = log_norm_.maxCoeff();
  return -(m + std::log((log_norm_.array() - m).exp().sum()));
}

namespace {

// Per-sample, per-component log(w_k N(x_i)).
Eigen::MatrixXd component_log_densities(const GmmPrior& prior, const Eigen::MatrixXd& x) {
  const int n = static_cast<int>(x.rows());
  Eigen::MatrixXd out(n, prior.num_components());
  for (int k = 0; k < prior.num_components(); ++k) {
    const Eigen::MatrixXd centered = (x.rowwise() - prior.means()[k].transpose()).transpose();
    const Eigen::MatrixXd y = prior.whitening()[k].triangularView<Eigen::Lower>() * centered;
    out.col(k) = prior.log_normalizers()[k] - 0.5 * y.colwise().squaredNorm().transpose().array();
  }
  return out;
}

Eigen::VectorXd row_log_sum_exp(const Eigen::MatrixXd& a) {
  Eigen::VectorXd out(a.rows());
  for (int i = 0; i < a.rows(); ++i) {
    const double m = a.row(i).maxCoeff();
    out[i] = m + std::log((a.row(i).array() - m).exp().sum());
  }
  return out;
}

Eigen::MatrixXd kmeans_pp(const Eigen::MatrixXd& x, int k, std::uint64_t seed, int iters,
                          std::vector<int>& assignment) {
  CounterRng rng(seed, 0x6b6d);
  const int n = static_cast<int>(x.rows());
  Eigen::MatrixXd centers(k, x.cols());
  centers.row(0) = x.row(rng.index(n));
  Eigen::VectorXd d2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    int pick = n - 1;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (int i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.index(n);
    }
    centers.row(c) = x.row(pick);
    d2 = d2.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  assignment.assign(n, 0);
  for (int it = 0; it < iters; ++it) {
    for (int i = 0; i < n; ++i) {
      (centers.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&assignment[i]);
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (int i = 0; i < n; ++i) {
      sums.row(assignment[i]) += x.row(i);
      counts[assignment[i]] += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0.0) centers.row(c) = sums.row(c) / counts[c];
    }
  }
  return centers;
}

}  // namespace

Eigen::MatrixXd gmm_responsibilities(const GmmPrior& prior, const Eigen::MatrixXd& samples) {
  if (samples.cols() != prior.dim()) throw DimensionError("samples do not match prior dimension");
  Eigen::MatrixXd logp = component_log_densities(prior, samples);
  const Eigen::VectorXd lse = row_log_sum_exp(logp);
  return (logp.colwise() - lse).array().exp().matrix();
}

GmmFit fit_gmm(const Eigen::MatrixXd& samples, int k, std::uint64_t seed, const GmmFitOptions& options) {
  const int n = static_cast<int>(samples.rows());
  const int d = static_cast<int>(samples.cols());
  if (k < 1) throw InvalidArgument("GMM needs at least one component");
  if (n < 10 * k) throw InvalidArgument("fit_gmm needs at least 10 samples per component");
  if (!samples.allFinite()) throw InvalidArgument("samples contain non-finite values");
  const Eigen::RowVectorXd global_mean = samples.colwise().mean();
  if ((samples.rowwise() - global_mean).cwiseAbs().maxCoeff() < 1e-12) {
    throw InvalidArgument("degenerate samples: all identical");
  }
  const Eigen::MatrixXd reg = options.regularization * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd global_centered = samples.rowwise() - global_mean;
  const Eigen::MatrixXd global_cov = global_centered.transpose() * global_centered / n + reg;

  std::vector<int> assignment;
  const Eigen::MatrixXd centers = kmeans_pp(samples, k, seed, options.kmeans_iters, assignment);
  Eigen::VectorXd weights(k);
  std::vector<Eigen::VectorXd> means(k);
  std::vector<Eigen::MatrixXd> covs(k);
  for (int c = 0; c < k; ++c) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i) {
      if (assignment[i] == c) members.push_back(i);
    }
    means[c] = centers.row(c).transpose();
    weights[c] = std::max<double>(static_cast<double>(members.size()), 1.0);
    if (members.size() < 2) {
      covs[c] = global_cov;
      continue;
    }
    Eigen::MatrixXd centered(members.size(), d);
    for (size_t m = 0; m < members.size(); ++m) centered.row(m) = samples.row(members[m]) - centers.row(c);
    covs[c] = centered.transpose() * centered / static_cast<double>(members.size()) + reg;
  }
  weights /= weights.sum();

  GmmFit fit;
  fit.prior = GmmPrior(weights, means, covs);
  double previous = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iters; ++it) {
    // E-step
    const Eigen::MatrixXd logp = component_log_densities(fit.prior, samples);
    const Eigen::VectorXd lse = row_log_sum_exp(logp);
    const double ll = lse.mean();
    fit.log_likelihood.push_back(ll);
    if (it > 0 && std::abs(ll - previous) <= options.tol * std::abs(previous)) break;
    previous = ll;
    const Eigen::MatrixXd resp = (logp.colwise() - lse).array().exp().matrix();

    // M-step
    for (int c = 0; c < k; ++c) {
      const double nk = resp.col(c).sum();
      if (nk < 1e-10) continue;  // empty component keeps its previous shape
      weights[c] = nk;
      means[c] = samples.transpose() * resp.col(c) / nk;
      const Eigen::MatrixXd centered = samples.rowwise() - means[c].transpose();
      covs[c] = centered.transpose() * (centered.array().colwise() * resp.col(c).array()).matrix() / nk + reg;
      covs[c] = 0.5 * (covs[c] + covs[c].transpose());
    }
    weights /= weights.sum();
    fit.prior = GmmPrior(weights, means, covs);
    fit.iterations = it + 1;
  }
  return fit;
}

double joint_limit_penalty(const KinematicRig& rig, const RigParams& params) {
  detail::check_dims(rig, params);
  double sum = 0.0;
  for (int j = 0; j < rig.num_joints(); ++j) {
    for (int a = 0; a < 3; ++a) {
      const double v = params.pose(a, j);
      sum += std::pow(std::max(0.0, v - rig.limits_hi(a, j)), 2) + std::pow(std::max(0.0, rig.limits_lo(a, j) - v), 2);
    }
  }
  return sum;
}

}  // namespace rigfit
