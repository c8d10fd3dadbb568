#pragma once

// Residual block builders shared by the single- and multi-view fitters.
//
// Rig parameters of one frame live at arbitrary global indices (`rig_slots`,
// in the flat packing order of pack_params). Camera extrinsic deltas, when
// optimized, live at six further indices (rotation vector, translation).

#include "rigfit/camera.hpp"
#include "rigfit/observation.hpp"
#include "rigfit/priors.hpp"
#include "rigfit/problem.hpp"
#include "rigfit/rig.hpp"

#include <vector>

namespace rigfit {

struct Kp2dWeights {
  double lambda = 1.0;
  double prompt_upweight = 1.0;
  double huber_px = 0.0;
};

/// Reprojection block for one view. Invisible observations are skipped and
/// visible ones that project behind the camera at `at` are dropped; the
/// number dropped is returned. Weight per point: sqrt(lambda) * conf, times
/// sqrt(prompt_upweight) when prompt-flagged.
int add_kp2d_block(ResidualProblem& problem, const KinematicRig& rig, const Camera& camera,
                   const ObservationSet& observations, const std::vector<int>& rig_slots,
                   const std::vector<int>& camera_slots, const RigParams& at, const Kp2dWeights& weights,
                   const std::string& term = "kp2d");

/// sqrt(lambda) * (x[slots] - target).
void add_param_anchor(ResidualProblem& problem, const std::vector<int>& slots, const Eigen::VectorXd& target,
                      double lambda, const std::string& term);

/// sqrt(lambda) * (keypoint(id) - target) for each listed keypoint id.
/// Per-point weights multiply on top (empty means 1).
void add_point_anchor(ResidualProblem& problem, const KinematicRig& rig, const std::vector<int>& rig_slots,
                      const std::vector<int>& ids, const Eigen::Matrix3Xd& targets, double lambda,
                      const std::string& term, const std::vector<double>& point_weights = {});

/// One residual sqrt(lambda) * sqrt(2 (nll - lower_bound) + 1e-12) over the
/// non-root pose, so its cost is lambda * (nll - lower_bound) up to 5e-13.
void add_gmm_term(ResidualProblem& problem, const KinematicRig& rig, const std::vector<int>& rig_slots,
                  const GmmPrior& prior, double lambda, const std::string& term = "gmm");

void add_shape_l2(ResidualProblem& problem, const KinematicRig& rig, const std::vector<int>& rig_slots,
                  double lambda, const std::string& term = "shape_l2");

/// Hinge residuals max(0, theta - hi) and max(0, lo - theta) per pose axis.
void add_limit_hinges(ResidualProblem& problem, const KinematicRig& rig, const std::vector<int>& rig_slots,
                      double lambda, const std::string& term = "limits");

// Slot helpers in pack_params order.
std::vector<int> pose_slots(const KinematicRig& rig, const std::vector<int>& rig_slots);
std::vector<int> shape_slots(const KinematicRig& rig, const std::vector<int>& rig_slots);

}  // namespace rigfit
