#pragma once

#include "rigfit/problem.hpp"
#include "rigfit/synth.hpp"

namespace rigfit::test {

/// make_default_rig(0), built once.
const KinematicRig& default_rig();
/// Default prior for default_rig(), fit once.
const GmmPrior& default_prior();

/// Five-joint rig small enough to check by hand: root -> spine (0,1,0) ->
/// l_wrist (0.5,0,0) -> l_tip (0.2,0,0), and spine -> r_wrist (-0.5,0,0).
/// Four vertices, one shape field, limits of +-pi.
KinematicRig chain_rig();

/// Central differences of problem.residuals, step h per coordinate; frozen columns are zero.
Eigen::MatrixXd numeric_jacobian(const ResidualProblem& problem, const Eigen::VectorXd& x, double h = 1e-6);

/// max |a - b| / max(max |b|, floor).
double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1.0);

}  // namespace rigfit::test
