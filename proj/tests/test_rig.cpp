#include <doctest.h>

#include "helpers.hpp"
#include "rigfit/random.hpp"

#include <cmath>
#include <numbers>
#include <set>

using namespace rigfit;
using rigfit::test::chain_rig;
using rigfit::test::default_rig;

namespace {

Eigen::Vector3d random_vector(CounterRng& rng, double scale) {
  return Eigen::Vector3d(rng.uniform(-scale, scale), rng.uniform(-scale, scale), rng.uniform(-scale, scale));
}

RigParams random_chain_params(const KinematicRig& rig, std::uint64_t seed) {
  CounterRng rng(seed);
  RigParams p = rest_params(rig);
  for (int j = 0; j < rig.num_joints(); ++j) p.pose.col(j) = random_vector(rng, 1.0);
  p.root_translation = random_vector(rng, 2.0);
  for (int b = 0; b < rig.num_bones(); ++b) p.skeleton[b] = rng.uniform(0.7, 1.3);
  for (int s = 0; s < rig.num_shapes(); ++s) p.shape[s] = rng.uniform(-2.0, 2.0);
  return p;
}

}  // namespace

TEST_CASE("dual numbers match analytic derivatives") {
  using D = Dual<2>;
  const double x0 = 0.7;
  const double y0 = -1.3;
  const D x = D::variable(x0, 0);
  const D y = D::variable(y0, 1);

  const D f = sin(x) * exp(y) / sqrt(x);
  CHECK(f.a == doctest::Approx(std::sin(x0) * std::exp(y0) / std::sqrt(x0)));
  const double dfdx = std::exp(y0) * (std::cos(x0) / std::sqrt(x0) - 0.5 * std::sin(x0) * std::pow(x0, -1.5));
  CHECK(f.v[0] == doctest::Approx(dfdx).epsilon(1e-14));
  CHECK(f.v[1] == doctest::Approx(f.a).epsilon(1e-14));

  const D g = atan2(y, x);
  CHECK(g.v[0] == doctest::Approx(-y0 / (x0 * x0 + y0 * y0)).epsilon(1e-14));
  CHECK(g.v[1] == doctest::Approx(x0 / (x0 * x0 + y0 * y0)).epsilon(1e-14));

  const D h = pow(x, 2.5) + log(x) - 3.0 / x;
  CHECK(h.v[0] == doctest::Approx(2.5 * std::pow(x0, 1.5) + 1.0 / x0 + 3.0 / (x0 * x0)).epsilon(1e-14));
  CHECK(h.v[1] == 0.0);
}

TEST_CASE("axis-angle rotation matches Eigen and is a proper rotation") {
  CounterRng rng(11);
  for (int i = 0; i < 200; ++i) {
    // Cover the series branch near zero as well as large angles.
    const double scale = i % 4 == 0 ? 1e-4 : 3.0;
    const Eigen::Vector3d w = random_vector(rng, scale);
    const Eigen::Matrix3d r = rotation_from_axis_angle<double>(w);
    const Eigen::Matrix3d ref = Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix();
    CHECK((r - ref).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-13));
    if (w.norm() < std::numbers::pi) {
      CHECK((axis_angle_from_rotation(r) - w).norm() < 1e-9);
    }
  }
  CHECK(rotation_from_axis_angle<double>(Eigen::Vector3d::Zero()) == Eigen::Matrix3d::Identity());
}

TEST_CASE("rotation derivative at the identity is the cross product") {
  // d/dw (R(w) v) at w = 0 is -[v]x.
  using D = Dual<3>;
  const Eigen::Vector3d v(0.3, -1.2, 2.0);
  Vec3<D> w;
  for (int a = 0; a < 3; ++a) w[a] = D::variable(0.0, a);
  const Vec3<D> rv = rotation_from_axis_angle<D>(w) * v.cast<D>();
  Eigen::Matrix3d jac;
  for (int r = 0; r < 3; ++r) jac.row(r) = rv[r].v.transpose();
  CHECK((jac + skew<double>(v)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("forward kinematics of the chain rig matches hand computation") {
  const KinematicRig rig = chain_rig();
  RigParams p = rest_params(rig);
  p.root_translation = Eigen::Vector3d(1, 2, 3);
  p.pose.col(1) = Eigen::Vector3d(0, 0, std::numbers::pi / 2);  // spine: 90 deg about z
  p.skeleton << 1.0, 2.0, 1.0, 1.0;                             // bone to l_wrist doubled
  const SkeletonState<double> s = forward_kinematics<double>(rig, p);
  CHECK((s.positions.col(0) - Eigen::Vector3d(1, 2, 3)).norm() < 1e-15);
  CHECK((s.positions.col(1) - Eigen::Vector3d(1, 3, 3)).norm() < 1e-15);
  CHECK((s.positions.col(2) - Eigen::Vector3d(1, 4, 3)).norm() < 1e-15);
  CHECK((s.positions.col(3) - Eigen::Vector3d(1, 4.2, 3)).norm() < 1e-15);
  CHECK((s.positions.col(4) - Eigen::Vector3d(1, 2.5, 3)).norm() < 1e-15);
}

TEST_CASE("rest parameters reproduce the template mesh") {
  const KinematicRig chain = chain_rig();
  for (const KinematicRig* rig : {&default_rig(), &chain}) {
    const RigParams rest = rest_params(*rig);
    CHECK((skin_vertices<double>(*rig, rest) - rig->template_vertices).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((forward_kinematics<double>(*rig, rest).positions - rig->rest_positions()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("shape moves the surface but never the joints") {
  const KinematicRig& rig = default_rig();
  const RigParams p = sample_params(rig, 3);
  RigParams q = p;
  q.shape.setConstant(1.5);
  const auto jp = forward_kinematics<double>(rig, p).positions;
  const auto jq = forward_kinematics<double>(rig, q).positions;
  CHECK(jp == jq);
  CHECK((skin_vertices<double>(rig, p) - skin_vertices<double>(rig, q)).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("global rigid motion moves every joint and vertex rigidly") {
  const KinematicRig rig = chain_rig();
  CounterRng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const RigParams p = random_chain_params(rig, 100 + trial);
    // Compose an extra rotation G and translation t onto the root.
    const Eigen::Matrix3d g = rotation_from_axis_angle<double>(random_vector(rng, 2.0));
    const Eigen::Vector3d t = random_vector(rng, 1.0);
    RigParams q = p;
    q.pose.col(0) = axis_angle_from_rotation(g * rotation_from_axis_angle<double>(Eigen::Vector3d(p.pose.col(0))));
    q.root_translation = g * p.root_translation + t;
    const Eigen::Matrix3Xd vp = skin_vertices<double>(rig, p);
    const Eigen::Matrix3Xd vq = skin_vertices<double>(rig, q);
    CHECK((((g * vp).colwise() + t) - vq).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("skeleton scale stretches anchored vertices along their bone") {
  const KinematicRig rig = chain_rig();
  RigParams p = rest_params(rig);
  p.skeleton[0] = 2.0;  // root -> spine
  const Eigen::Matrix3Xd v = skin_vertices<double>(rig, p);
  // Vertex 0 sits halfway up the spine bone, offset 0.1 in x.
  CHECK((v.col(0) - Eigen::Vector3d(0.1, 1.0, 0.0)).norm() < 1e-12);
}

TEST_CASE("parameter packing round trips and matches the layout") {
  const KinematicRig& rig = default_rig();
  const RigParams p = sample_params(rig, 9);
  const Eigen::VectorXd x = pack_params(p);
  CHECK(x.size() == param_count(rig));
  const RigParams q = unpack_params<double>(rig, std::span<const double>(x.data(), x.size()));
  CHECK(q.pose == p.pose);
  CHECK(q.root_translation == p.root_translation);
  CHECK(q.skeleton == p.skeleton);
  CHECK(q.shape == p.shape);
  const ParamLayout layout = rig_param_layout(rig);
  CHECK(layout.size() == x.size());
  CHECK(layout.block(layout.find("skeleton")).length == rig.num_bones());
  CHECK(layout.block(layout.find("shape")).length == rig.num_shapes());
  CHECK(layout.block(layout.find("pose:l_elbow")).length == 3);
}

TEST_CASE("check_params rejects bad parameters") {
  const KinematicRig rig = chain_rig();
  RigParams p = rest_params(rig);
  p.skeleton[1] = 0.0;
  CHECK_THROWS_AS(check_params(rig, p), InvalidArgument);
  p = rest_params(rig);
  p.shape.resize(3);
  CHECK_THROWS_AS(check_params(rig, p), DimensionError);
  p = rest_params(rig);
  p.pose(0, 0) = std::nan("");
  CHECK_THROWS_AS(check_params(rig, p), InvalidArgument);
}

TEST_CASE("rig validation catches structural errors") {
  KinematicRig rig = chain_rig();
  rig.joints[1].parent = 3;
  CHECK_THROWS_AS(rig.validate(), InvalidArgument);
  rig = chain_rig();
  rig.skinning[0][0].weight = 0.9;
  CHECK_THROWS_AS(rig.validate(), InvalidArgument);
  rig = chain_rig();
  rig.hands[1] = {4, {3, 4}};
  CHECK_THROWS_AS(rig.validate(), InvalidArgument);
}

TEST_CASE("hand subtree exchange touches only the subtree") {
  const KinematicRig& rig = default_rig();
  const RigParams p = sample_params(rig, 4);
  const HandSubtree& hand = hand_subtree(rig, Side::right);
  CHECK(hand.joints.size() == 17);
  CHECK(registered_subtree(rig, hand.joints) == Side::right);
  const Eigen::Matrix3Xd local = Eigen::Matrix3Xd::Constant(3, hand.joints.size(), 0.1);
  const RigParams q = write_subtree_params(rig, p, hand.joints, local);
  CHECK(extract_subtree_params(rig, q, hand.joints) == local);
  std::set<int> members(hand.joints.begin(), hand.joints.end());
  for (int j = 0; j < rig.num_joints(); ++j) {
    if (!members.count(j)) CHECK(q.pose.col(j) == p.pose.col(j));
  }
  const std::vector<int> partial(hand.joints.begin(), hand.joints.begin() + 3);
  CHECK_THROWS_AS(registered_subtree(rig, partial), InvalidArgument);
}

TEST_CASE("default rig is deterministic and human sized") {
  const KinematicRig a = make_default_rig(21);
  const KinematicRig b = make_default_rig(21);
  CHECK(a.template_vertices == b.template_vertices);
  CHECK(a.rest_positions() == b.rest_positions());
  CHECK(a.num_joints() == 24 + 2 * 15);
  CHECK(a.num_shapes() == 10);
  CHECK_NOTHROW(a.validate());
  CHECK(a.keypoints.body17.size() == 17);
  CHECK(a.keypoints.feet6.size() == 6);
  CHECK(a.keypoints.eval24.size() == 24);

  // Stature: leg chain plus torso and head chain, vertical offsets.
  double stature = 0.0;
  for (const char* name : {"l_hip", "l_knee", "l_ankle", "l_foot", "spine1", "spine2", "spine3", "neck", "head"}) {
    stature += std::abs(a.joints[a.find_joint(name)].rest_offset.y());
  }
  CHECK(stature == doctest::Approx(1.7).epsilon(0.1 / 1.7));
}
