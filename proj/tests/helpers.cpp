#include "helpers.hpp"

namespace rigfit::test {

const KinematicRig& default_rig() {
  static const KinematicRig rig = make_default_rig(0);
  return rig;
}

const GmmPrior& default_prior() {
  static const GmmPrior prior = default_pose_prior(default_rig());
  return prior;
}

KinematicRig chain_rig() {
  KinematicRig rig;
  rig.joints = {{"root", -1, Eigen::Vector3d::Zero()},
                {"spine", 0, Eigen::Vector3d(0, 1, 0)},
                {"l_wrist", 1, Eigen::Vector3d(0.5, 0, 0)},
                {"l_tip", 2, Eigen::Vector3d(0.2, 0, 0)},
                {"r_wrist", 1, Eigen::Vector3d(-0.5, 0, 0)}};
  rig.template_vertices.resize(3, 4);
  rig.template_vertices << 0.1, 0.1, 0.6, -0.3,  //
      0.5, 1.0, 1.05, 1.0,                       //
      0.0, 0.05, 0.0, 0.0;
  rig.skinning = {{{0, 1.0}}, {{0, 0.5}, {1, 0.5}}, {{2, 1.0}}, {{4, 1.0}}};
  rig.anchors = {{1, 0.5}, {1, 1.0}, {3, 0.5}, {4, 0.6}};
  Eigen::Matrix3Xd field = Eigen::Matrix3Xd::Zero(3, 4);
  field.row(0).setConstant(0.01);
  rig.shape_basis = {field};
  rig.limits_lo = Eigen::Matrix3Xd::Constant(3, 5, -M_PI);
  rig.limits_hi = Eigen::Matrix3Xd::Constant(3, 5, M_PI);
  rig.hands[0] = {2, {2, 3}};
  rig.hands[1] = {4, {4}};
  rig.keypoints.eval24 = {0, 1, 2, 3, 4};
  rig.keypoints.body17 = {0, 1, 2, 4};
  rig.keypoints.feet6 = {5, 6};
  rig.keypoints.dense = {0, 1, 2, 3};
  rig.validate();
  return rig;
}

Eigen::MatrixXd numeric_jacobian(const ResidualProblem& problem, const Eigen::VectorXd& x, double h) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(problem.num_residuals(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (problem.layout().is_frozen_index(static_cast<int>(i))) continue;
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp[i] += h;
    xm[i] -= h;
    j.col(i) = (problem.residuals(xp) - problem.residuals(xm)) / (2.0 * h);
  }
  return j;
}

double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor) {
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), floor);
}

}  // namespace rigfit::test
