#pragma once

#include "rigfit/dual.hpp"
#include "rigfit/types.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

namespace rigfit {

template <typename T>
Mat3<T> skew(const Vec3<T>& w) {
  Mat3<T> k;
  k << T(0.0), -w.z(), w.y(),  //
      w.z(), T(0.0), -w.x(),   //
      -w.y(), w.x(), T(0.0);
  return k;
}

/// Rodrigues formula written with coefficients that are smooth in |w|^2, so
/// derivatives stay exact through the identity.
template <typename T>
Mat3<T> rotation_from_axis_angle(const Vec3<T>& w) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const T theta2 = w.squaredNorm();
  T a;  // sin(t)/t
  T b;  // (1-cos(t))/t^2
  if (value_of(theta2) < 1e-6) {
    a = 1.0 - theta2 * (1.0 / 6.0) + theta2 * theta2 * (1.0 / 120.0);
    b = 0.5 - theta2 * (1.0 / 24.0) + theta2 * theta2 * (1.0 / 720.0);
  } else {
    const T theta = sqrt(theta2);
    a = sin(theta) / theta;
    b = (1.0 - cos(theta)) / theta2;
  }
  const Mat3<T> k = skew(w);
  return Mat3<T>::Identity() + a * k + b * (k * k);
}

inline Eigen::Vector3d axis_angle_from_rotation(const Eigen::Matrix3d& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

/// Angle of the relative rotation between two rotation matrices, radians.
inline double geodesic_distance(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const double c = std::clamp(((a.transpose() * b).trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

}  // namespace rigfit
