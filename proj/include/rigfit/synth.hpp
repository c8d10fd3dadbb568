#pragma once

// Deterministic synthetic scenes: a procedural rig, sampled parameters and
// rendered keypoint observations with ground truth.

#include "rigfit/camera.hpp"
#include "rigfit/observation.hpp"
#include "rigfit/priors.hpp"
#include "rigfit/rig.hpp"

#include <cstdint>
#include <vector>

namespace rigfit {

/// 24 body joints + 15 per hand, capsule-ring surface, 10 shape fields.
KinematicRig make_default_rig(std::uint64_t seed = 0);

struct SampleConfig {
  double pose_spread = 0.25;  ///< fraction of each joint's limit range (around its center)
  double root_rotation_spread = 0.3;
  Eigen::Vector3d root_center = Eigen::Vector3d(0.0, 0.95, 0.0);
  double root_jitter = 0.1;
  double scale_lo = 0.8;
  double scale_hi = 1.2;
  double shape_lo = -2.0;
  double shape_hi = 2.0;
};

/// Uniform in the (spread-shrunk) joint-limit box.
RigParams sample_params(const KinematicRig& rig, std::uint64_t seed, const SampleConfig& config = {});
/// Non-root pose drawn from the prior (clamped to limits); the rest as above.
RigParams sample_params(const KinematicRig& rig, const GmmPrior& prior, std::uint64_t seed,
                        const SampleConfig& config = {});

struct MotionConfig {
  double pose_velocity = 0.01;  ///< max |d pose / frame| per axis, radians
  double root_velocity = 0.01;  ///< max |d root / frame| per axis, meters
};

/// Constant-velocity sequence around a sampled base pose; skeleton and shape shared.
std::vector<RigParams> sample_sequence(const KinematicRig& rig, int frames, std::uint64_t seed,
                                       const SampleConfig& sample = {}, const MotionConfig& motion = {});

/// Adds isotropic N(0, sigma^2) axis-angle noise to every joint rotation.
RigParams perturb_pose(const RigParams& params, double sigma, std::uint64_t seed);

struct RenderConfig {
  double noise_px = 0.0;
  double outlier_rate = 0.0;
  double occlusion_rate = 0.0;
};

struct GroundTruth {
  RigParams params;
  Eigen::Matrix3Xd joints;
  Eigen::Matrix3Xd vertices;
  std::vector<int> keypoint_ids;
  std::vector<Eigen::Matrix2Xd> keypoints2d;  ///< exact projections per view
  std::vector<std::vector<bool>> in_front;    ///< per view, per keypoint
};

struct RenderedFrame {
  std::vector<ObservationSet> views;
  GroundTruth gt;
};

/// Exact projections of rig.observed_keypoints() plus pixel noise, uniform
/// in-image outliers and random occlusion (flagged invisible).
RenderedFrame render_observations(const KinematicRig& rig, const RigParams& params,
                                  const std::vector<Camera>& cameras, const RenderConfig& config,
                                  std::uint64_t seed);

/// Default scene camera intrinsics: 1000 x 1000 px, 60 degree horizontal FOV.
Camera default_intrinsics();
/// Ring of `n` default cameras at 3 m around the standing subject.
std::vector<Camera> default_camera_ring(int n);

/// Default GMM prior fit by EM on sampled poses.
GmmPrior default_pose_prior(const KinematicRig& rig, std::uint64_t seed = 0, int components = 8,
                            int samples = 2000, int max_iters = 30);

}  // namespace rigfit
