#pragma once

// Pose and shape evaluation metrics. Inputs are meters and pixels; 3D errors
// are returned in millimeters.

#include "rigfit/types.hpp"

#include <array>
#include <optional>
#include <vector>

namespace rigfit {

enum class Alignment { none, root };

/// Mean joint distance in mm. Root alignment subtracts column `root` (the
/// pelvis for bodies, the wrist for hands) from both sets.
double mpjpe(const Eigen::Matrix3Xd& pred, const Eigen::Matrix3Xd& gt, Alignment align = Alignment::none,
             int root = 0);

struct Similarity {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  double scale = 1.0;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Matrix3Xd apply(const Eigen::Matrix3Xd& points) const;
};

/// Least-squares similarity mapping pred onto gt (Umeyama), with a proper
/// rotation. Throws GeometryError on fewer than 3 points or collinear input.
Similarity procrustes_align(const Eigen::Matrix3Xd& pred, const Eigen::Matrix3Xd& gt);

double pa_mpjpe(const Eigen::Matrix3Xd& pred, const Eigen::Matrix3Xd& gt);

/// Mean vertex distance in mm after subtracting each side's root joint.
double pve(const Eigen::Matrix3Xd& pred_vertices, const Eigen::Matrix3Xd& gt_vertices,
           const Eigen::Vector3d& pred_root, const Eigen::Vector3d& gt_root);

/// Side length of the tight box over the visible ground-truth keypoints:
/// max(width, height). Zero when fewer than one keypoint is visible.
double bbox_side(const Eigen::Matrix2Xd& gt2d, const std::vector<bool>& visible);

inline constexpr std::array<double, 5> kPckThresholds = {0.01, 0.025, 0.05, 0.075, 0.1};

/// Fraction of visible keypoints with error < alpha * side (strict). Absent
/// when no keypoint is visible. Throws InvalidArgument unless alpha > 0 and side > 0.
std::optional<double> pck(const Eigen::Matrix2Xd& pred2d, const Eigen::Matrix2Xd& gt2d,
                          const std::vector<bool>& visible, double side, double alpha);

/// Mean PCK over kPckThresholds.
std::optional<double> avg_pck(const Eigen::Matrix2Xd& pred2d, const Eigen::Matrix2Xd& gt2d,
                              const std::vector<bool>& visible, double side);

/// Correspondence-free F-score at `threshold_mm`: harmonic mean of the
/// fraction of pred points within the threshold of some gt point and vice
/// versa. With `align`, pred is first Procrustes-aligned onto gt (which then
/// needs equal point counts).
double fscore(const Eigen::Matrix3Xd& pred, const Eigen::Matrix3Xd& gt, double threshold_mm, bool align = true);

/// Mean over joints of the variance (about the mean) of frame-to-frame
/// displacement vectors, mm^2. Needs at least three frames.
double jitter(const std::vector<Eigen::Matrix3Xd>& joints_per_frame);

}  // namespace rigfit
