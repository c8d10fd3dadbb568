#pragma once

// Kinematic rig with skeleton scales decoupled from surface shape.
//
// Joint positions depend only on pose, root translation and per-bone skeleton
// scales. Shape coefficients drive per-vertex offsets expressed in the frames
// of the skinning joints, so they move the surface and never the joints.

#include "rigfit/param_layout.hpp"
#include "rigfit/rotation.hpp"
#include "rigfit/types.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace rigfit {

struct Joint {
  std::string name;
  int parent = -1;  ///< -1 for the root
  Eigen::Vector3d rest_offset = Eigen::Vector3d::Zero();
};

struct SkinWeight {
  int joint = 0;
  double weight = 0.0;
};

/// Attaches a template vertex to the bone ending at `joint`: its base point
/// sits at fraction `t` from the parent joint toward `joint` (t > 1
/// extrapolates past the joint). Skeleton scaling stretches the base point
/// along the bone; the residual offset is carried rigidly.
struct VertexAnchor {
  int joint = 0;
  double t = 0.0;
};

enum class Side { left = 0, right = 1 };

struct HandSubtree {
  int wrist = -1;
  std::vector<int> joints;  ///< wrist first, then descendants in ascending order
};

struct KeypointMaps {
  std::vector<int> eval24;  ///< 3D evaluation joints
  std::vector<int> body17;  ///< 2D body keypoints (keypoint ids)
  std::vector<int> feet6;   ///< 2D feet keypoints (keypoint ids)
  std::vector<int> dense;   ///< surface vertices observed as dense keypoints
};

/// Keypoint ids address joints in [0, J) and surface vertices in [J, J + V).
struct KinematicRig {
  std::vector<Joint> joints;
  Eigen::Matrix3Xd template_vertices;
  std::vector<std::vector<SkinWeight>> skinning;
  std::vector<VertexAnchor> anchors;
  std::vector<Eigen::Matrix3Xd> shape_basis;
  Eigen::Matrix3Xd limits_lo;
  Eigen::Matrix3Xd limits_hi;
  std::array<HandSubtree, 2> hands;
  KeypointMaps keypoints;

  int num_joints() const { return static_cast<int>(joints.size()); }
  int num_bones() const { return num_joints() - 1; }
  int num_vertices() const { return static_cast<int>(template_vertices.cols()); }
  int num_shapes() const { return static_cast<int>(shape_basis.size()); }
  int num_keypoints() const { return num_joints() + num_vertices(); }

  int find_joint(const std::string& name) const;
  std::vector<std::vector<int>> children() const;
  /// Throws InvalidArgument describing the first violated invariant.
  void validate() const;
  /// Keypoint ids of all joints followed by the dense vertex subsample.
  std::vector<int> observed_keypoints() const;
  /// Rest-pose joint positions at unit skeleton scales with the root at the origin.
  Eigen::Matrix3Xd rest_positions() const;
};

template <typename T>
struct RigParamsT {
  Mat3X<T> pose;             ///< axis-angle per joint, radians
  Vec3<T> root_translation;  ///< meters
  VecX<T> skeleton;          ///< scale of bone b, which ends at joint b + 1
  VecX<T> shape;

  template <typename U>
  RigParamsT<U> cast() const {
    return {pose.template cast<U>(), root_translation.template cast<U>(),
            skeleton.template cast<U>(), shape.template cast<U>()};
  }
};
using RigParams = RigParamsT<double>;

/// Identity pose, unit scales, zero shape and translation.
RigParams rest_params(const KinematicRig& rig);
/// Throws DimensionError / InvalidArgument on invalid params.
void check_params(const KinematicRig& rig, const RigParams& params);

// Flat parameter packing: pose (joint-major), root translation, skeleton, shape.
int param_count(const KinematicRig& rig);
Eigen::VectorXd pack_params(const RigParams& params);
/// One block per joint pose ("pose:<name>"), then "root", "skeleton", "shape".
ParamLayout rig_param_layout(const KinematicRig& rig);

template <typename T>
RigParamsT<T> unpack_params(const KinematicRig& rig, std::span<const T> x) {
  const int nj = rig.num_joints();
  const int nb = rig.num_bones();
  const int ns = rig.num_shapes();
  if (static_cast<int>(x.size()) < 3 * nj + 3 + nb + ns) {
    throw DimensionError("parameter vector too short for rig");
  }
  RigParamsT<T> p;
  p.pose.resize(3, nj);
  int k = 0;
  for (int j = 0; j < nj; ++j) {
    for (int a = 0; a < 3; ++a) p.pose(a, j) = x[k++];
  }
  for (int a = 0; a < 3; ++a) p.root_translation[a] = x[k++];
  p.skeleton.resize(nb);
  for (int b = 0; b < nb; ++b) p.skeleton[b] = x[k++];
  p.shape.resize(ns);
  for (int s = 0; s < ns; ++s) p.shape[s] = x[k++];
  return p;
}

template <typename T>
struct SkeletonState {
  std::vector<Mat3<T>> rotations;  ///< global joint orientations
  Mat3X<T> positions;              ///< global joint positions, meters
};

namespace detail {
template <typename T>
void check_dims(const KinematicRig& rig, const RigParamsT<T>& p) {
  if (p.pose.cols() != rig.num_joints() || p.skeleton.size() != rig.num_bones() ||
      p.shape.size() != rig.num_shapes()) {
    throw DimensionError("params do not match rig dimensions");
  }
}
}  // namespace detail

/// Root: rotation(pose_root) at root_translation. Child: parent global, then
/// translate by scale * rest_offset, then rotate by its own pose.
template <typename T>
SkeletonState<T> forward_kinematics(const KinematicRig& rig, const RigParamsT<T>& p) {
  detail::check_dims(rig, p);
  const int nj = rig.num_joints();
  SkeletonState<T> s;
  s.rotations.resize(nj);
  s.positions.resize(3, nj);
  for (int j = 0; j < nj; ++j) {
    const Mat3<T> local = rotation_from_axis_angle<T>(p.pose.col(j));
    const int parent = rig.joints[j].parent;
    if (parent < 0) {
      s.rotations[j] = local;
      s.positions.col(j) = p.root_translation;
      continue;
    }
    const T& scale = p.skeleton[j - 1];
    if (!(value_of(scale) > 0.0)) throw InvalidArgument("non-positive skeleton scale");
    const Vec3<T> offset = rig.joints[j].rest_offset.template cast<T>() * scale;
    s.positions.col(j) = s.positions.col(parent) + s.rotations[parent] * offset;
    s.rotations[j] = s.rotations[parent] * local;
  }
  return s;
}

/// Rest-pose joint positions with the given skeleton scales, root at origin.
template <typename T>
Mat3X<T> scaled_rest_positions(const KinematicRig& rig, const VecX<T>& skeleton) {
  Mat3X<T> out(3, rig.num_joints());
  for (int j = 0; j < rig.num_joints(); ++j) {
    const int parent = rig.joints[j].parent;
    if (parent < 0) {
      out.col(j).setZero();
    } else {
      out.col(j) = out.col(parent) + rig.joints[j].rest_offset.template cast<T>() * skeleton[j - 1];
    }
  }
  return out;
}

/// Linear blend skinning of the listed vertices (all vertices when empty).
template <typename T>
Mat3X<T> skin_vertices(const KinematicRig& rig, const RigParamsT<T>& p,
                       const SkeletonState<T>& state, std::span<const int> subset = {}) {
  detail::check_dims(rig, p);
  const Eigen::Matrix3Xd rest_unit = rig.rest_positions();
  const Mat3X<T> rest = scaled_rest_positions<T>(rig, p.skeleton);
  const int count = subset.empty() ? rig.num_vertices() : static_cast<int>(subset.size());
  Mat3X<T> out(3, count);
  for (int i = 0; i < count; ++i) {
    const int v = subset.empty() ? i : subset[i];
    if (v < 0 || v >= rig.num_vertices()) throw DimensionError("vertex index out of range");
    const VertexAnchor& an = rig.anchors[v];
    const int parent = rig.joints[an.joint].parent;
    Vec3<T> base;
    Eigen::Vector3d base_unit;
    if (parent < 0) {
      base = rest.col(an.joint);
      base_unit = rest_unit.col(an.joint);
    } else {
      base = rest.col(parent) + (rest.col(an.joint) - rest.col(parent)) * an.t;
      base_unit = rest_unit.col(parent) + (rest_unit.col(an.joint) - rest_unit.col(parent)) * an.t;
    }
    Vec3<T> local = base + (rig.template_vertices.col(v) - base_unit).template cast<T>();
    for (int b = 0; b < rig.num_shapes(); ++b) {
      local += rig.shape_basis[b].col(v).template cast<T>() * p.shape[b];
    }
    Vec3<T> acc = Vec3<T>::Zero();
    for (const SkinWeight& w : rig.skinning[v]) {
      acc += (state.rotations[w.joint] * (local - rest.col(w.joint)) + state.positions.col(w.joint)) *
             w.weight;
    }
    out.col(i) = acc;
  }
  return out;
}

template <typename T>
Mat3X<T> skin_vertices(const KinematicRig& rig, const RigParamsT<T>& p) {
  return skin_vertices<T>(rig, p, forward_kinematics<T>(rig, p));
}

/// 3D positions of arbitrary keypoint ids (joints and/or surface vertices).
template <typename T>
Mat3X<T> keypoint_positions(const KinematicRig& rig, const RigParamsT<T>& p,
                            const SkeletonState<T>& state, std::span<const int> ids) {
  const int nj = rig.num_joints();
  std::vector<int> verts;
  for (int id : ids) {
    if (id < 0 || id >= rig.num_keypoints()) throw DimensionError("keypoint id out of range");
    if (id >= nj) verts.push_back(id - nj);
  }
  Mat3X<T> skinned;
  if (!verts.empty()) skinned = skin_vertices<T>(rig, p, state, verts);
  Mat3X<T> out(3, static_cast<int>(ids.size()));
  int next_vertex = 0;
  for (int i = 0; i < static_cast<int>(ids.size()); ++i) {
    if (ids[i] < nj) {
      out.col(i) = state.positions.col(ids[i]);
    } else {
      out.col(i) = skinned.col(next_vertex++);
    }
  }
  return out;
}

// Hand subtree parameter exchange.
const HandSubtree& hand_subtree(const KinematicRig& rig, Side side);
/// Throws InvalidArgument unless `joints` equals a registered hand subtree.
Side registered_subtree(const KinematicRig& rig, std::span<const int> joints);
/// 3 x n local rotations of the subtree joints, in subtree order.
Eigen::Matrix3Xd extract_subtree_params(const KinematicRig& rig, const RigParams& params,
                                        std::span<const int> subtree);
RigParams write_subtree_params(const KinematicRig& rig, const RigParams& params,
                               std::span<const int> subtree, const Eigen::Matrix3Xd& local);

}  // namespace rigfit
