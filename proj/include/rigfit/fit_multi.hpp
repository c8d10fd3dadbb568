#pragma once

// Multi-view, multi-frame fitting with shared skeleton and shape, camera
// extrinsic refinement and temporal smoothness. Rounds of block LM (poses,
// then skeleton and shape, then cameras) followed by a joint body solve.

#include "rigfit/fit_single.hpp"
#include "rigfit/triangulation.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rigfit {

struct MultiViewSequence {
  std::vector<Camera> cameras;
  std::vector<std::vector<ObservationSet>> frames;  ///< frames[t][v]
  double fps = 30.0;

  /// Throws on empty input, mismatched view counts or non-positive fps.
  void validate() const;
};

/// Smoothness weight used when none is given: 10 * fps / 30.
double default_lambda_smooth(double fps);

struct MultiFitConfig {
  FitConfig single;  ///< per-frame weights, robust delta and LM settings
  double lambda_kp3d = 1.0;
  std::optional<double> lambda_smooth;  ///< default_lambda_smooth(fps) when unset
  double lambda_accel = 0.0;            ///< second differences, off by default
  bool refine_cameras = true;
  bool smooth_tracks = true;
  int smooth_window = 3;
  RansacConfig ransac;
  int max_rounds = 4;
  double tol = 1e-4;  ///< relative cost improvement per round below which rounds stop
  /// Finish with one LM over pose, root, skeleton and shape together.
  bool joint_polish = true;
  /// Drop 2D observations that RANSAC rejected from the reprojection term.
  bool gate_outliers = true;

  void validate() const;
};

/// sqrt(lambda) * fps * (x_t - x_{t-1}) over pose and root translation, for
/// t = 1..T-1, concatenated. Throws with fewer than two frames.
Eigen::VectorXd temporal_smoothness_residuals(const std::vector<RigParams>& frames, double lambda, double fps);

/// Per-frame initial parameters with shared skeleton scales (median observed
/// bone length over rest length) and zero shape. Root from the triangulated
/// pelvis; each joint's local rotation aligns its rest child offsets with the
/// observed ones in the parent frame (minimal rotation for one child, Kabsch
/// for several, identity when none is observed). Throws UnderConstrainedError
/// when the root joint is missing in any frame.
std::vector<RigParams> init_from_triangulation(const KinematicRig& rig, const std::vector<FrameTriangulation>& frames);

/// Layout: "camera:<v>", "skeleton", "shape", then per frame
/// "pose:<t>" (3J) and "root:<t>" (3).
struct MultiViewProblem {
  ResidualProblem problem;
  Eigen::VectorXd x0;
  std::vector<std::vector<int>> rig_slots;  ///< per frame, pack_params order
  std::vector<int> block_frame;             ///< frame index of each residual block
  int dropped = 0;
};

/// `targets[t]` are the 3D keypoint targets of frame t (may be empty).
MultiViewProblem build_multi_view_problem(const KinematicRig& rig, const MultiViewSequence& seq,
                                          const std::vector<RigParams>& init,
                                          const std::vector<FrameTriangulation>& targets, const GmmPrior* prior,
                                          const MultiFitConfig& config);

struct FrameFit {
  RigParams params;
  std::map<std::string, double> breakdown;
  double mean_reprojection_px = 0.0;
};

struct MultiFitResult {
  std::vector<FrameFit> frames;
  std::vector<Camera> cameras;
  Eigen::VectorXd skeleton;  ///< shared by every frame
  Eigen::VectorXd shape;     ///< shared by every frame
  std::map<std::string, double> breakdown;
  std::vector<double> cost_trace;  ///< initial cost, then after each block solve
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int rounds = 0;
  bool converged = false;
  int dropped = 0;
  std::vector<std::string> warnings;
  std::vector<FrameTriangulation> triangulations;
};

/// Without `init`, needs >= 2 cameras and initializes from triangulation.
/// With `init` (one RigParams per frame; skeleton and shape taken from frame
/// 0) a single camera is allowed.
MultiFitResult fit_multi_view(const KinematicRig& rig, const MultiViewSequence& seq, const GmmPrior* prior,
                              const MultiFitConfig& config, const std::vector<RigParams>* init = nullptr);

}  // namespace rigfit
