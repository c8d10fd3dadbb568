#pragma once

// Single-image fitting: composite loss over 2D keypoints, anchors to the
// initial estimate, pose prior, shape regularizer and joint-limit hinges.

#include "rigfit/camera.hpp"
#include "rigfit/observation.hpp"
#include "rigfit/priors.hpp"
#include "rigfit/problem.hpp"
#include "rigfit/rig.hpp"
#include "rigfit/solvers.hpp"

#include <map>
#include <string>
#include <vector>

namespace rigfit {

struct FitWeights {
  double kp2d = 1.0;
  double anchor_param = 1e-2;
  double anchor_3d = 1e-1;
  double gmm = 1e-3;
  double shape_l2 = 1e-2;
  double limits = 1.0;
  double prompt_upweight = 10.0;
};

enum class SolverKind { lm, first_order };

struct FitConfig {
  FitWeights weights;
  double huber_px = 5.0;  ///< <= 0 disables the robust wrapper
  SolverKind solver = SolverKind::lm;
  LmConfig lm;
  FirstOrderConfig first_order;
  bool refine_camera = false;
  /// Layout blocks ("pose:<joint>", "root", "skeleton", "shape", "camera") held fixed.
  std::vector<std::string> frozen_blocks;

  /// Throws InvalidArgument on negative weights or prompt_upweight < 1.
  void validate() const;
};

struct FitResult {
  RigParams params;
  Camera camera;
  std::map<std::string, double> breakdown;  ///< final cost per term
  std::vector<double> cost_trace;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  SolveStatus status = SolveStatus::max_iterations;
  bool converged = false;
  int iterations = 0;
  int dropped = 0;  ///< visible keypoints behind the camera at the start
  double mean_reprojection_px = 0.0;
};

/// Problem over [rig params | camera extrinsic delta (6)]. `at` provides the
/// starting point x0 and the behind-camera check; `anchor` the anchor targets.
struct SingleViewProblem {
  ResidualProblem problem;
  Eigen::VectorXd x0;
  int dropped = 0;
};

SingleViewProblem build_single_view_problem(const KinematicRig& rig, const RigParams& at, const RigParams& anchor,
                                            const Camera& camera, const ObservationSet& observations,
                                            const GmmPrior* prior, const FitConfig& config);

/// Residual vector of the composite loss at `params`, anchored at `init_params`.
Eigen::VectorXd single_view_residuals(const KinematicRig& rig, const RigParams& params,
                                      const RigParams& init_params, const Camera& camera,
                                      const ObservationSet& observations, const GmmPrior* prior,
                                      const FitConfig& config);

/// Throws UnderConstrainedError with fewer than 4 visible keypoints.
FitResult fit_single_view(const KinematicRig& rig, const RigParams& init_params, const Camera& camera,
                          const ObservationSet& observations, const GmmPrior* prior, const FitConfig& config);

struct Prompt {
  int id = 0;
  Eigen::Vector2d uv = Eigen::Vector2d::Zero();
};

/// Refits with prompts as prompt-flagged observations, anchored to `params`.
/// `context` adds ordinary observations; a context entry sharing an id with a
/// prompt is ignored. Needs at least one prompt and anchor_param > 0 instead
/// of the 4-keypoint rule, since the anchor keeps the problem well posed.
FitResult prompted_refine(const KinematicRig& rig, const RigParams& params, const Camera& camera,
                          const std::vector<Prompt>& prompts, const FitConfig& config,
                          const ObservationSet& context = {}, const GmmPrior* prior = nullptr);

/// Mean pixel distance over visible observations in front of the camera.
double mean_reprojection_error(const KinematicRig& rig, const RigParams& params, const Camera& camera,
                               const ObservationSet& observations);

/// Camera with the six-vector extrinsic delta applied.
Camera apply_camera_delta(const Camera& camera, const Eigen::Matrix<double, 6, 1>& delta);

}  // namespace rigfit
