#include <doctest.h>

#include "helpers.hpp"

using namespace rigfit;
using rigfit::test::default_rig;

TEST_CASE("scene generation is a pure function of the seed") {
  const KinematicRig& rig = default_rig();
  const RigParams a = sample_params(rig, 17);
  const RigParams b = sample_params(rig, 17);
  CHECK(pack_params(a) == pack_params(b));
  CHECK(pack_params(a) != pack_params(sample_params(rig, 18)));
  const RenderConfig rc{1.0, 0.1, 0.1};
  const auto cams = default_camera_ring(3);
  const RenderedFrame fa = render_observations(rig, a, cams, rc, 5);
  const RenderedFrame fb = render_observations(rig, a, cams, rc, 5);
  for (size_t v = 0; v < cams.size(); ++v) {
    REQUIRE(fa.views[v].size() == fb.views[v].size());
    for (size_t i = 0; i < fa.views[v].size(); ++i) {
      CHECK(fa.views[v][i].uv == fb.views[v][i].uv);
      CHECK(fa.views[v][i].visible == fb.views[v][i].visible);
    }
  }
}

TEST_CASE("sampled parameters respect limits and ranges") {
  const KinematicRig& rig = default_rig();
  for (int i = 0; i < 1000; ++i) {
    const RigParams p = sample_params(rig, 1000 + i);
    CHECK(joint_limit_penalty(rig, p) == 0.0);
    CHECK(p.skeleton.minCoeff() >= 0.8);
    CHECK(p.skeleton.maxCoeff() <= 1.2);
    CHECK(p.shape.minCoeff() >= -2.0);
    CHECK(p.shape.maxCoeff() <= 2.0);
  }
  const RigParams q = sample_params(rig, test::default_prior(), 3);
  CHECK(joint_limit_penalty(rig, q) == 0.0);
}

TEST_CASE("noiseless rendering equals the exact projections") {
  const KinematicRig& rig = default_rig();
  const RigParams p = sample_params(rig, 2);
  const auto cams = default_camera_ring(4);
  const RenderedFrame f = render_observations(rig, p, cams, {}, 9);
  const auto ids = rig.observed_keypoints();
  const SkeletonState<double> s = forward_kinematics<double>(rig, p);
  const Eigen::Matrix3Xd pts = keypoint_positions<double>(rig, p, s, ids);
  CHECK(f.gt.keypoint_ids == ids);
  CHECK((f.gt.joints - s.positions).cwiseAbs().maxCoeff() == 0.0);
  for (size_t v = 0; v < cams.size(); ++v) {
    for (size_t i = 0; i < ids.size(); ++i) {
      const Observation2D& o = f.views[v][i];
      CHECK(o.id == ids[i]);
      CHECK(o.visible);
      CHECK((o.uv - project<double>(cams[v], Eigen::Vector3d(pts.col(i)))).norm() < 1e-12);
      CHECK(o.uv == f.gt.keypoints2d[v].col(i));
    }
  }
}

TEST_CASE("full occlusion hides everything and outliers stay in the image") {
  const KinematicRig& rig = default_rig();
  const RigParams p = sample_params(rig, 2);
  const auto cams = default_camera_ring(2);
  const RenderedFrame occ = render_observations(rig, p, cams, {0.0, 0.0, 1.0}, 1);
  for (const auto& view : occ.views) CHECK(count_visible(view) == 0);
  const RenderedFrame out = render_observations(rig, p, cams, {0.0, 1.0, 0.0}, 1);
  for (size_t v = 0; v < cams.size(); ++v) {
    for (const auto& o : out.views[v]) {
      CHECK(o.uv.x() >= 0.0);
      CHECK(o.uv.x() <= cams[v].width);
      CHECK(o.uv.y() >= 0.0);
      CHECK(o.uv.y() <= cams[v].height);
    }
  }
}

TEST_CASE("pixel noise has the requested standard deviation") {
  const KinematicRig& rig = default_rig();
  const auto cams = default_camera_ring(8);
  double sum = 0.0;
  double sum2 = 0.0;
  int n = 0;
  for (int t = 0; t < 3 && n < 20000; ++t) {
    const RigParams p = sample_params(rig, 50 + t);
    const RenderedFrame f = render_observations(rig, p, cams, {1.0, 0.0, 0.0}, 70 + t);
    for (size_t v = 0; v < cams.size(); ++v) {
      for (size_t i = 0; i < f.views[v].size(); ++i) {
        if (!f.views[v][i].visible) continue;
        const Eigen::Vector2d e = f.views[v][i].uv - f.gt.keypoints2d[v].col(i);
        sum += e.sum();
        sum2 += e.squaredNorm();
        n += 2;
      }
    }
  }
  REQUIRE(n >= 10000);
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  CHECK(sd >= 0.95);
  CHECK(sd <= 1.05);
}

TEST_CASE("keypoints behind a camera are flagged invisible") {
  const KinematicRig& rig = default_rig();
  RigParams p = rest_params(rig);
  p.root_translation = Eigen::Vector3d(0, 0.95, 0);
  // Camera at the pelvis looking along +z: the back half of the body is behind it.
  Camera cam = default_intrinsics();
  cam.translation = -Eigen::Vector3d(0, 0.95, 0);
  const RenderedFrame f = render_observations(rig, p, {cam}, {}, 0);
  const auto ids = rig.observed_keypoints();
  const Eigen::Matrix3Xd pts = keypoint_positions<double>(rig, p, forward_kinematics<double>(rig, p), ids);
  int behind = 0;
  for (size_t i = 0; i < ids.size(); ++i) {
    const bool in_front = pts(2, i) > kMinDepth;
    CHECK(f.views[0][i].visible == in_front);
    CHECK(f.gt.in_front[0][i] == in_front);
    behind += in_front ? 0 : 1;
  }
  CHECK(behind > 0);
}

TEST_CASE("sequences share skeleton and shape and move at constant velocity") {
  const KinematicRig& rig = default_rig();
  const auto seq = sample_sequence(rig, 6, 3);
  REQUIRE(seq.size() == 6);
  for (const auto& p : seq) {
    CHECK(p.skeleton == seq[0].skeleton);
    CHECK(p.shape == seq[0].shape);
    CHECK(joint_limit_penalty(rig, p) == 0.0);
  }
  const Eigen::Vector3d d1 = seq[1].root_translation - seq[0].root_translation;
  const Eigen::Vector3d d5 = seq[5].root_translation - seq[4].root_translation;
  CHECK((d1 - d5).norm() < 1e-12);
}
