#include "rigfit/rig.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace rigfit {

int KinematicRig::find_joint(const std::string& name) const {
  for (int j = 0; j < num_joints(); ++j) {
    if (joints[j].name == name) return j;
  }
  throw InvalidArgument("unknown joint " + name);
}

std::vector<std::vector<int>> KinematicRig::children() const {
  std::vector<std::vector<int>> out(joints.size());
  for (int j = 0; j < num_joints(); ++j) {
    if (joints[j].parent >= 0) out[joints[j].parent].push_back(j);
  }
  return out;
}

Eigen::Matrix3Xd KinematicRig::rest_positions() const {
  return scaled_rest_positions<double>(*this, Eigen::VectorXd::Ones(num_bones()));
}

std::vector<int> KinematicRig::observed_keypoints() const {
  std::vector<int> ids(joints.size());
  for (int j = 0; j < num_joints(); ++j) ids[j] = j;
  for (int v : keypoints.dense) ids.push_back(num_joints() + v);
  return ids;
}

void KinematicRig::validate() const {
  const int nj = num_joints();
  const int nv = num_vertices();
  if (nj == 0) throw InvalidArgument("rig has no joints");
  int roots = 0;
  for (int j = 0; j < nj; ++j) {
    const int p = joints[j].parent;
    if (p < 0) {
      ++roots;
    } else if (p >= j) {
      throw InvalidArgument("joint " + joints[j].name + " is not topologically ordered");
    }
  }
  if (roots != 1 || joints[0].parent >= 0) throw InvalidArgument("rig must have exactly one root at index 0");

  if (static_cast<int>(skinning.size()) != nv || static_cast<int>(anchors.size()) != nv) {
    throw InvalidArgument("skinning/anchors must have one entry per vertex");
  }
  for (int v = 0; v < nv; ++v) {
    double sum = 0.0;
    for (const SkinWeight& w : skinning[v]) {
      if (w.joint < 0 || w.joint >= nj) throw InvalidArgument("skinning joint out of range");
      if (!(w.weight >= 0.0)) throw InvalidArgument("negative skinning weight");
      sum += w.weight;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw InvalidArgument("skinning weights of vertex " + std::to_string(v) + " do not sum to 1");
    }
    if (anchors[v].joint < 0 || anchors[v].joint >= nj) throw InvalidArgument("anchor joint out of range");
  }
  for (const auto& field : shape_basis) {
    if (field.cols() != nv) throw InvalidArgument("shape basis field has wrong vertex count");
  }
  if (limits_lo.cols() != nj || limits_hi.cols() != nj) throw InvalidArgument("joint limits size mismatch");
  if ((limits_lo.array() > limits_hi.array()).any()) throw InvalidArgument("joint limit lo > hi");

  const auto kids = children();
  std::set<int> seen;
  for (const HandSubtree& h : hands) {
    if (h.wrist < 0 || h.wrist >= nj || h.joints.empty() || h.joints.front() != h.wrist) {
      throw InvalidArgument("hand subtree must start at its wrist");
    }
    // Connected: every non-wrist member has its parent inside the subtree.
    std::set<int> members(h.joints.begin(), h.joints.end());
    for (int j : h.joints) {
      if (j < 0 || j >= nj) throw InvalidArgument("hand subtree joint out of range");
      if (j != h.wrist && !members.count(joints[j].parent)) {
        throw InvalidArgument("hand subtree is not connected");
      }
      if (!seen.insert(j).second) throw InvalidArgument("hand subtrees overlap");
    }
    if (!std::is_sorted(h.joints.begin(), h.joints.end())) throw InvalidArgument("hand subtree not sorted");
  }

  auto check_ids = [&](const std::vector<int>& ids, int limit, const char* what) {
    for (int id : ids) {
      if (id < 0 || id >= limit) throw InvalidArgument(std::string("keypoint map ") + what + " out of range");
    }
  };
  check_ids(keypoints.eval24, nj, "eval24");
  check_ids(keypoints.body17, num_keypoints(), "body17");
  check_ids(keypoints.feet6, num_keypoints(), "feet6");
  check_ids(keypoints.dense, nv, "dense");
}

RigParams rest_params(const KinematicRig& rig) {
  RigParams p;
  p.pose = Eigen::Matrix3Xd::Zero(3, rig.num_joints());
  p.root_translation.setZero();
  p.skeleton = Eigen::VectorXd::Ones(rig.num_bones());
  p.shape = Eigen::VectorXd::Zero(rig.num_shapes());
  return p;
}

void check_params(const KinematicRig& rig, const RigParams& params) {
  detail::check_dims(rig, params);
  if (!params.pose.allFinite() || !params.root_translation.allFinite() || !params.shape.allFinite() ||
      !params.skeleton.allFinite()) {
    throw InvalidArgument("params contain non-finite values");
  }
  if ((params.skeleton.array() <= 0.0).any()) throw InvalidArgument("non-positive skeleton scale");
}

int param_count(const KinematicRig& rig) { return 3 * rig.num_joints() + 3 + rig.num_bones() + rig.num_shapes(); }

Eigen::VectorXd pack_params(const RigParams& p) {
  Eigen::VectorXd x(p.pose.size() + 3 + p.skeleton.size() + p.shape.size());
  x << Eigen::Map<const Eigen::VectorXd>(p.pose.data(), p.pose.size()), p.root_translation, p.skeleton,
      p.shape;
  return x;
}

ParamLayout rig_param_layout(const KinematicRig& rig) {
  ParamLayout layout;
  for (const Joint& j : rig.joints) layout.add_block("pose:" + j.name, 3);
  layout.add_block("root", 3);
  layout.add_block("skeleton", rig.num_bones());
  layout.add_block("shape", rig.num_shapes());
  return layout;
}

const HandSubtree& hand_subtree(const KinematicRig& rig, Side side) {
  return rig.hands[static_cast<int>(side)];
}

Side registered_subtree(const KinematicRig& rig, std::span<const int> joints) {
  for (Side side : {Side::left, Side::right}) {
    const auto& h = hand_subtree(rig, side).joints;
    if (std::equal(h.begin(), h.end(), joints.begin(), joints.end())) return side;
  }
  throw InvalidArgument("index set is not a registered hand subtree");
}

Eigen::Matrix3Xd extract_subtree_params(const KinematicRig& rig, const RigParams& params,
                                        std::span<const int> subtree) {
  registered_subtree(rig, subtree);
  detail::check_dims(rig, params);
  Eigen::Matrix3Xd out(3, static_cast<int>(subtree.size()));
  for (int i = 0; i < out.cols(); ++i) out.col(i) = params.pose.col(subtree[i]);
  return out;
}

RigParams write_subtree_params(const KinematicRig& rig, const RigParams& params,
                               std::span<const int> subtree, const Eigen::Matrix3Xd& local) {
  registered_subtree(rig, subtree);
  detail::check_dims(rig, params);
  if (local.cols() != static_cast<Eigen::Index>(subtree.size())) {
    throw DimensionError("hand pose does not match subtree size");
  }
  RigParams out = params;
  for (int i = 0; i < local.cols(); ++i) out.pose.col(subtree[i]) = local.col(i);
  return out;
}

}  // namespace rigfit
