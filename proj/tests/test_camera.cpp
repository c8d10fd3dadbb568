#include <doctest.h>

#include "helpers.hpp"
#include "rigfit/fit_single.hpp"
#include "rigfit/random.hpp"

using namespace rigfit;

TEST_CASE("pinhole projection matches the homogeneous projection matrix") {
  const std::vector<Camera> cams = default_camera_ring(5);
  CounterRng rng(2);
  for (const Camera& cam : cams) {
    const Eigen::Matrix<double, 3, 4> p = projection_matrix(cam);
    for (int i = 0; i < 20; ++i) {
      const Eigen::Vector3d x(rng.uniform(-0.5, 0.5), rng.uniform(0.0, 1.8), rng.uniform(-0.5, 0.5));
      const Eigen::Vector3d h = p * x.homogeneous();
      CHECK((project<double>(cam, x) - h.hnormalized()).norm() < 1e-9);
    }
  }
}

TEST_CASE("projection of a hand-placed point") {
  Camera cam = intrinsics_from_fov(90.0, 200, 100);
  CHECK(cam.fx == doctest::Approx(100.0));
  CHECK(cam.cx == 100.0);
  CHECK(cam.cy == 50.0);
  // Point at 45 degrees to the right lands on the image edge.
  CHECK((project<double>(cam, Eigen::Vector3d(2, 0, 2)) - Eigen::Vector2d(200, 50)).norm() < 1e-12);
  CHECK_THROWS_AS(project<double>(cam, Eigen::Vector3d(0, 0, -1)), GeometryError);
  CHECK_FALSE(try_project<double>(cam, Eigen::Vector3d(0, 0, 0)).has_value());
  CHECK_THROWS_AS(intrinsics_from_fov(180.0, 10, 10), InvalidArgument);
  CHECK_THROWS_AS(intrinsics_from_fov(60.0, 0, 10), InvalidArgument);
}

TEST_CASE("camera ring looks at its target from the requested radius") {
  const Eigen::Vector3d target(0.2, 0.9, -0.1);
  const std::vector<Camera> cams = camera_ring(7, 2.5, target, intrinsics_from_fov(60.0, 640, 480));
  for (const Camera& cam : cams) {
    CHECK_NOTHROW(check_camera(cam));
    CHECK((cam.center() - target).norm() == doctest::Approx(2.5));
    CHECK((project<double>(cam, target) - Eigen::Vector2d(320, 240)).norm() < 1e-9);
    // Image "down" is world -y: a point above the target projects higher (smaller v).
    CHECK(project<double>(cam, target + Eigen::Vector3d(0, 0.1, 0)).y() < 240.0);
  }
}

TEST_CASE("extrinsic perturbation composes on the left") {
  const Camera cam = default_camera_ring(3)[1];
  const Eigen::Vector3d dr(0.01, -0.02, 0.03);
  const Eigen::Vector3d dt(0.1, 0.0, -0.05);
  const Camera moved = perturb_extrinsics<double>(cam, dr, dt);
  CHECK((moved.rotation - rotation_from_axis_angle<double>(dr) * cam.rotation).norm() < 1e-15);
  CHECK((moved.translation - (cam.translation + dt)).norm() < 1e-15);
  const Eigen::Matrix<double, 6, 1> delta = (Eigen::Matrix<double, 6, 1>() << dr, dt).finished();
  const Camera applied = apply_camera_delta(cam, delta);
  CHECK((applied.rotation - moved.rotation).norm() < 1e-15);
}

TEST_CASE("check_camera rejects invalid cameras") {
  Camera cam = default_intrinsics();
  cam.fx = 0.0;
  CHECK_THROWS_AS(check_camera(cam), InvalidArgument);
  cam = default_intrinsics();
  cam.rotation(0, 0) = -1.0;  // reflection
  CHECK_THROWS_AS(check_camera(cam), InvalidArgument);
}
