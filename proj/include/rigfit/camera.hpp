#pragma once

// Pinhole camera, world-to-camera extrinsics, no distortion.

#include "rigfit/rotation.hpp"
#include "rigfit/types.hpp"

#include <optional>
#include <vector>

namespace rigfit {

/// Points closer than this to the image plane are treated as behind the camera.
inline constexpr double kMinDepth = 1e-6;

template <typename T>
struct CameraT {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  Mat3<T> rotation = Mat3<T>::Identity();  ///< world -> camera
  Vec3<T> translation = Vec3<T>::Zero();   ///< world -> camera, meters

  template <typename U>
  CameraT<U> cast() const {
    return {fx, fy, cx, cy, width, height, rotation.template cast<U>(), translation.template cast<U>()};
  }

  Vec3<T> to_camera(const Vec3<T>& world) const { return rotation * world + translation; }
  /// Camera center in world coordinates.
  Vec3<T> center() const { return -(rotation.transpose() * translation); }
};
using Camera = CameraT<double>;

/// Projection of a camera-frame point, without the depth check.
template <typename T>
Vec2<T> project_camera_frame(const CameraT<T>& cam, const Vec3<T>& pc) {
  return Vec2<T>(pc.x() / pc.z() * cam.fx + cam.cx, pc.y() / pc.z() * cam.fy + cam.cy);
}

template <typename T>
std::optional<Vec2<T>> try_project(const CameraT<T>& cam, const Vec3<T>& world) {
  const Vec3<T> pc = cam.to_camera(world);
  if (!(value_of(pc.z()) > kMinDepth)) return std::nullopt;
  return project_camera_frame(cam, pc);
}

/// Throws GeometryError for points at or behind depth kMinDepth.
template <typename T>
Vec2<T> project(const CameraT<T>& cam, const Vec3<T>& world) {
  auto uv = try_project(cam, world);
  if (!uv) throw GeometryError("point is behind the camera");
  return *uv;
}

/// Camera with its extrinsics perturbed: R' = exp(rot_delta) R, t' = t + trans_delta.
template <typename T>
CameraT<T> perturb_extrinsics(const Camera& cam, const Vec3<T>& rot_delta, const Vec3<T>& trans_delta) {
  CameraT<T> out = cam.template cast<T>();
  out.rotation = rotation_from_axis_angle<T>(rot_delta) * out.rotation;
  out.translation = out.translation + trans_delta;
  return out;
}

/// fx = fy = (width/2) / tan(hfov/2), principal point at the image center,
/// identity extrinsics. Throws InvalidArgument unless 0 < hfov < 180.
Camera intrinsics_from_fov(double hfov_degrees, int width, int height);

/// `n` cameras evenly spaced in azimuth on a horizontal circle around `target`,
/// each looking at it with image "down" along world -y. Intrinsics are copied
/// from `intrinsics`.
std::vector<Camera> camera_ring(int n, double radius, const Eigen::Vector3d& target,
                                const Camera& intrinsics);

/// 3x4 matrix K [R | t].
Eigen::Matrix<double, 3, 4> projection_matrix(const Camera& cam);

/// Throws InvalidArgument if focal lengths or the rotation are invalid.
void check_camera(const Camera& cam);

}  // namespace rigfit
