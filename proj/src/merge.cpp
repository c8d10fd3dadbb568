#include "rigfit/merge.hpp"

namespace rigfit {

Side parse_side(const std::string& name) {
  if (name == "left") return Side::left;
  if (name == "right") return Side::right;
  throw InvalidArgument("handedness must be left or right, got '" + name + "'");
}

const char* to_string(Side side) { return side == Side::left ? "left" : "right"; }

RigParams merge_hand_into_body(const KinematicRig& rig, const RigParams& body, const Eigen::Matrix3Xd& hand_local_pose,
                               Side side) {
  const HandSubtree& hand = hand_subtree(rig, side);
  if (hand_local_pose.cols() != static_cast<Eigen::Index>(hand.joints.size())) {
    throw DimensionError("hand pose does not match the hand subtree");
  }
  return write_subtree_params(rig, body, hand.joints, hand_local_pose);
}

bool hand_gate(double confidence, double threshold) { return confidence >= threshold; }

Eigen::Vector2d projected_elbow(const KinematicRig& rig, const RigParams& params, const Camera& camera, Side side) {
  const int elbow = rig.joints[hand_subtree(rig, side).wrist].parent;
  return project<double>(camera, Eigen::Vector3d(forward_kinematics<double>(rig, params).positions.col(elbow)));
}

namespace {

std::vector<Prompt> arm_prompts(const KinematicRig& rig, const ArmPrompt& arm) {
  const int wrist = hand_subtree(rig, arm.side).wrist;
  const int elbow = rig.joints[wrist].parent;
  if (elbow < 0) throw InvalidArgument("wrist joint has no parent");
  return {Prompt{wrist, arm.wrist_px}, Prompt{elbow, arm.elbow_px}};
}

}  // namespace

FitResult prompted_wrist_elbow_refine(const KinematicRig& rig, const RigParams& merged, const Camera& camera,
                                      const std::vector<ArmPrompt>& arms, const ArmRefineConfig& config,
                                      const GmmPrior* prior) {
  if (arms.empty()) throw InvalidArgument("no arm prompts");
  FitConfig fit = config.fit;
  for (Side s : {Side::left, Side::right}) {
    for (int j : hand_subtree(rig, s).joints) fit.frozen_blocks.push_back("pose:" + rig.joints[j].name);
  }
  if (!config.sequential) {
    std::vector<Prompt> prompts;
    for (const auto& arm : arms) {
      const auto p = arm_prompts(rig, arm);
      prompts.insert(prompts.end(), p.begin(), p.end());
    }
    return prompted_refine(rig, merged, camera, prompts, fit, {}, prior);
  }
  FitResult res;
  RigParams current = merged;
  std::vector<double> trace;
  double initial = 0.0;
  for (size_t i = 0; i < arms.size(); ++i) {
    res = prompted_refine(rig, current, camera, arm_prompts(rig, arms[i]), fit, {}, prior);
    if (i == 0) initial = res.initial_cost;
    trace.insert(trace.end(), res.cost_trace.begin(), res.cost_trace.end());
    current = res.params;
  }
  res.cost_trace = trace;
  res.initial_cost = initial;
  return res;
}

FitResult prompted_wrist_elbow_refine(const KinematicRig& rig, const RigParams& merged, const Camera& camera,
                                      Side side, const Eigen::Vector2d& wrist_target_px,
                                      const Eigen::Vector2d& elbow_px, const ArmRefineConfig& config,
                                      const GmmPrior* prior) {
  return prompted_wrist_elbow_refine(rig, merged, camera, {ArmPrompt{side, wrist_target_px, elbow_px}}, config,
                                     prior);
}

}  // namespace rigfit
