#pragma once

// Linear (DLT) and RANSAC triangulation of keypoints seen by calibrated views.

#include "rigfit/camera.hpp"
#include "rigfit/observation.hpp"

#include <cstdint>
#include <limits>
#include <vector>

namespace rigfit {

struct DltResult {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  double residual_px = 0.0;  ///< mean reprojection error over the input views
};

/// Smallest right singular vector of the stacked 2n x 4 system built in
/// normalized image coordinates. Throws InvalidArgument with fewer than two
/// views and GeometryError when all rays are parallel (|d_i x d_j| < 1e-6),
/// the solution is at infinity, or it lies behind one of the cameras.
DltResult triangulate_dlt(const std::vector<Camera>& cameras, const std::vector<Eigen::Vector2d>& pixels);

struct RansacConfig {
  double threshold_px = 4.0;
  int iterations = 64;
  std::uint64_t seed = 0;
};

struct TriangulatedPoint {
  int id = -1;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  std::vector<int> inliers;  ///< positions in the input view list, ascending
  double residual_px = 0.0;  ///< mean reprojection error over the inliers
};

/// Two-view hypotheses (every pair when there are at most `iterations` pairs,
/// otherwise seeded random pairs), consensus by reprojection error below the
/// threshold, ties broken by mean inlier error, then a DLT refit on the
/// winning consensus. Throws GeometryError when no hypothesis reaches two inliers.
TriangulatedPoint triangulate_ransac(const std::vector<Camera>& cameras, const std::vector<Eigen::Vector2d>& pixels,
                                     const RansacConfig& config = {});

struct FrameTriangulation {
  std::vector<TriangulatedPoint> points;  ///< ascending id; inliers are camera indices
  std::vector<int> failed;                ///< ids seen in >= 2 views that did not triangulate
};

/// Triangulates every keypoint id visible in at least two views. `views[v]`
/// are the observations of `cameras[v]`.
FrameTriangulation triangulate_frame(const std::vector<Camera>& cameras, const std::vector<ObservationSet>& views,
                                     const RansacConfig& config = {});

/// Centered moving average over the valid samples of a 3 x T track. The
/// window shrinks symmetrically at the ends, so linear motion passes through
/// unchanged. Invalid samples stay as they are. Window must be odd and positive.
Eigen::Matrix3Xd smooth_track(const Eigen::Matrix3Xd& track, const std::vector<bool>& valid, int window = 3);

}  // namespace rigfit
