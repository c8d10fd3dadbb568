#include "rigfit/camera.hpp"

#include <cmath>
#include <numbers>

namespace rigfit {

Camera intrinsics_from_fov(double hfov_degrees, int width, int height) {
  if (!(hfov_degrees > 0.0 && hfov_degrees < 180.0)) {
    throw InvalidArgument("horizontal FOV must lie in (0, 180) degrees");
  }
  if (width <= 0 || height <= 0) throw InvalidArgument("image size must be positive");
  const double half = hfov_degrees * std::numbers::pi / 360.0;
  Camera cam;
  cam.fx = cam.fy = (0.5 * width) / std::tan(half);
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.width = width;
  cam.height = height;
  return cam;
}

std::vector<Camera> camera_ring(int n, double radius, const Eigen::Vector3d& target,
                                const Camera& intrinsics) {
  if (n < 1) throw InvalidArgument("camera ring needs at least one camera");
  if (!(radius > 0.0)) throw InvalidArgument("camera ring radius must be positive");
  std::vector<Camera> out;
  out.reserve(n);
  const Eigen::Vector3d down(0.0, -1.0, 0.0);
  for (int i = 0; i < n; ++i) {
    const double az = 2.0 * std::numbers::pi * i / n;
    const Eigen::Vector3d center = target + radius * Eigen::Vector3d(std::sin(az), 0.0, std::cos(az));
    const Eigen::Vector3d z = (target - center).normalized();
    const Eigen::Vector3d y = (down - down.dot(z) * z).normalized();
    const Eigen::Vector3d x = y.cross(z);
    Camera cam = intrinsics;
    cam.rotation.row(0) = x.transpose();
    cam.rotation.row(1) = y.transpose();
    cam.rotation.row(2) = z.transpose();
    cam.translation = -cam.rotation * center;
    out.push_back(cam);
  }
  return out;
}

Eigen::Matrix<double, 3, 4> projection_matrix(const Camera& cam) {
  Eigen::Matrix3d k;
  k << cam.fx, 0.0, cam.cx, 0.0, cam.fy, cam.cy, 0.0, 0.0, 1.0;
  Eigen::Matrix<double, 3, 4> rt;
  rt << cam.rotation, cam.translation;
  return k * rt;
}

void check_camera(const Camera& cam) {
  if (!(cam.fx > 0.0 && cam.fy > 0.0)) throw InvalidArgument("focal lengths must be positive");
  const double orth = (cam.rotation.transpose() * cam.rotation - Eigen::Matrix3d::Identity()).norm();
  if (!(orth < 1e-9) || std::abs(cam.rotation.determinant() - 1.0) > 1e-9) {
    throw InvalidArgument("camera rotation is not a proper rotation");
  }
  if (!cam.translation.allFinite()) throw InvalidArgument("camera translation is not finite");
}

}  // namespace rigfit
