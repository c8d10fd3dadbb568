#pragma once

// Composition of a hand-subtree solution into a body solution, and the
// wrist/elbow prompted repair of the arm that follows it.

#include "rigfit/fit_single.hpp"

#include <string>
#include <vector>

namespace rigfit {

/// "left" / "right"; anything else is InvalidArgument.
Side parse_side(const std::string& name);
const char* to_string(Side side);

/// Body with the hand subtree's local rotations replaced by `hand_local_pose`
/// (3 x n, subtree order). Every other entry is copied bitwise.
RigParams merge_hand_into_body(const KinematicRig& rig, const RigParams& body, const Eigen::Matrix3Xd& hand_local_pose,
                               Side side);

/// Accept iff confidence >= threshold.
bool hand_gate(double confidence, double threshold = 0.5);

struct ArmPrompt {
  Side side = Side::left;
  Eigen::Vector2d wrist_px = Eigen::Vector2d::Zero();  ///< from the hand solution
  Eigen::Vector2d elbow_px = Eigen::Vector2d::Zero();  ///< from the body solution
};

struct ArmRefineConfig {
  FitConfig fit;
  /// Refine one arm after the other instead of both in one solve.
  bool sequential = false;
};

/// Prompts the wrist and elbow of each listed arm through prompted_refine
/// with both hand subtrees frozen, so finger articulation is kept bitwise.
FitResult prompted_wrist_elbow_refine(const KinematicRig& rig, const RigParams& merged, const Camera& camera,
                                      const std::vector<ArmPrompt>& arms, const ArmRefineConfig& config = {},
                                      const GmmPrior* prior = nullptr);

/// Single-arm convenience overload.
FitResult prompted_wrist_elbow_refine(const KinematicRig& rig, const RigParams& merged, const Camera& camera,
                                      Side side, const Eigen::Vector2d& wrist_target_px,
                                      const Eigen::Vector2d& elbow_px, const ArmRefineConfig& config = {},
                                      const GmmPrior* prior = nullptr);

/// Projected elbow of `params` for the given side; the body's own elbow prompt.
Eigen::Vector2d projected_elbow(const KinematicRig& rig, const RigParams& params, const Camera& camera, Side side);

}  // namespace rigfit
