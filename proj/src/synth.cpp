#include "rigfit/synth.hpp"

#include "rigfit/random.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace rigfit {

namespace {

enum class Region { torso, neck, head, arm, hand, finger, leg, foot };

struct JointSpec {
  const char* name;
  int parent;
  double x, y, z;
  double radius;  // capsule radius of the bone ending at this joint
  Region region;
};

// Left is +x, up is +y, the subject faces +z. T-pose with arms along x.
constexpr JointSpec kBody[24] = {
    {"pelvis", -1, 0.0, 0.0, 0.0, 0.0, Region::torso},
    {"l_hip", 0, 0.09, -0.08, 0.0, 0.12, Region::torso},
    {"r_hip", 0, -0.09, -0.08, 0.0, 0.12, Region::torso},
    {"spine1", 0, 0.0, 0.12, -0.01, 0.13, Region::torso},
    {"l_knee", 1, 0.01, -0.42, 0.0, 0.07, Region::leg},
    {"r_knee", 2, -0.01, -0.42, 0.0, 0.07, Region::leg},
    {"spine2", 3, 0.0, 0.14, 0.0, 0.13, Region::torso},
    {"l_ankle", 4, 0.0, -0.42, -0.01, 0.05, Region::leg},
    {"r_ankle", 5, 0.0, -0.42, -0.01, 0.05, Region::leg},
    {"spine3", 6, 0.0, 0.06, 0.02, 0.14, Region::torso},
    {"l_foot", 7, 0.02, -0.06, 0.13, 0.04, Region::foot},
    {"r_foot", 8, -0.02, -0.06, 0.13, 0.04, Region::foot},
    {"neck", 9, 0.0, 0.22, -0.02, 0.12, Region::torso},
    {"l_collar", 9, 0.08, 0.12, -0.01, 0.06, Region::torso},
    {"r_collar", 9, -0.08, 0.12, -0.01, 0.06, Region::torso},
    {"head", 12, 0.0, 0.12, 0.03, 0.05, Region::neck},
    {"l_shoulder", 13, 0.11, 0.03, 0.0, 0.06, Region::arm},
    {"r_shoulder", 14, -0.11, 0.03, 0.0, 0.06, Region::arm},
    {"l_elbow", 16, 0.26, 0.0, 0.0, 0.045, Region::arm},
    {"r_elbow", 17, -0.26, 0.0, 0.0, 0.045, Region::arm},
    {"l_wrist", 18, 0.25, 0.0, 0.0, 0.035, Region::arm},
    {"r_wrist", 19, -0.25, 0.0, 0.0, 0.035, Region::arm},
    {"l_hand", 20, 0.08, 0.0, 0.0, 0.03, Region::hand},
    {"r_hand", 21, -0.08, 0.0, 0.0, 0.03, Region::hand},
};

struct FingerSpec {
  const char* name;
  Eigen::Vector3d root;  // from the wrist, left hand
  Eigen::Vector3d dir;
  double len1, len2;
};

const FingerSpec kFingers[5] = {
    {"thumb", {0.03, -0.01, 0.03}, Eigen::Vector3d(1.0, 0.0, 1.0).normalized(), 0.035, 0.03},
    {"index", {0.09, 0.0, 0.025}, Eigen::Vector3d::UnitX(), 0.04, 0.025},
    {"middle", {0.095, 0.0, 0.005}, Eigen::Vector3d::UnitX(), 0.045, 0.028},
    {"ring", {0.09, 0.0, -0.015}, Eigen::Vector3d::UnitX(), 0.04, 0.026},
    {"pinky", {0.08, 0.0, -0.033}, Eigen::Vector3d::UnitX(), 0.03, 0.02},
};

constexpr int kRingSize = 8;
constexpr double kBodyLimit = 2.8;
constexpr double kFingerLimit = 1.6;

struct Builder {
  KinematicRig rig;
  std::vector<Region> joint_region;
  std::vector<double> joint_radius;
  std::vector<Eigen::Vector3d> positions;  // template vertices
  std::vector<Eigen::Vector3d> radial;     // unit radial direction per vertex
  std::vector<Region> vertex_region;
  std::vector<int> vertex_joint;  // joint whose bone hosts the vertex

  int add_joint(const std::string& name, int parent, const Eigen::Vector3d& offset, double radius, Region r) {
    rig.joints.push_back(Joint{name, parent, offset});
    joint_region.push_back(r);
    joint_radius.push_back(radius);
    return static_cast<int>(rig.joints.size()) - 1;
  }

  // Ring of vertices around the bone ending at `joint`, at fraction t.
  std::vector<int> add_ring(const Eigen::Matrix3Xd& rest, int joint, double t, double radius,
                            std::vector<SkinWeight> weights) {
    const int parent = rig.joints[joint].parent;
    const Eigen::Vector3d d = rig.joints[joint].rest_offset.normalized();
    const Eigen::Vector3d ref = std::abs(d.x()) > 0.9 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitX();
    const Eigen::Vector3d u = (ref - ref.dot(d) * d).normalized();
    const Eigen::Vector3d w = d.cross(u);
    const Eigen::Vector3d base = rest.col(parent) + t * (rest.col(joint) - rest.col(parent));
    std::vector<int> ids;
    for (int k = 0; k < kRingSize; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / kRingSize;
      const Eigen::Vector3d dir = std::cos(phi) * u + std::sin(phi) * w;
      positions.push_back(base + radius * dir);
      radial.push_back(dir);
      vertex_region.push_back(joint_region[joint]);
      vertex_joint.push_back(joint);
      rig.skinning.push_back(weights);
      rig.anchors.push_back(VertexAnchor{joint, t});
      ids.push_back(static_cast<int>(positions.size()) - 1);
    }
    return ids;
  }

  int best_in(const std::vector<int>& ids, const Eigen::Vector3d& dir) const {
    int best = ids.front();
    for (int v : ids) {
      if (radial[v].dot(dir) > radial[best].dot(dir)) best = v;
    }
    return best;
  }
};

}  // namespace

KinematicRig make_default_rig(std::uint64_t seed) {
  CounterRng rng(seed, 0x5249);
  Builder b;
  auto jitter = [&]() { return 1.0 + 0.02 * rng.uniform(-1.0, 1.0); };

  for (const JointSpec& s : kBody) {
    b.add_joint(s.name, s.parent, Eigen::Vector3d(s.x, s.y, s.z) * (s.parent < 0 ? 1.0 : jitter()), s.radius,
                s.region);
  }
  std::array<std::vector<int>, 2> hand_joints;
  for (int side = 0; side < 2; ++side) {
    const double mirror = side == 0 ? 1.0 : -1.0;
    const int wrist = side == 0 ? 20 : 21;
    const std::string prefix = side == 0 ? "l_" : "r_";
    hand_joints[side] = {wrist, wrist + 2};
    for (const FingerSpec& f : kFingers) {
      Eigen::Vector3d root = f.root;
      Eigen::Vector3d dir = f.dir;
      root.x() *= mirror;
      dir.x() *= mirror;
      const double s = jitter();
      int j = b.add_joint(prefix + f.name + "1", wrist, root * s, 0.01, Region::finger);
      hand_joints[side].push_back(j);
      j = b.add_joint(prefix + f.name + "2", j, dir * f.len1 * s, 0.009, Region::finger);
      hand_joints[side].push_back(j);
      j = b.add_joint(prefix + f.name + "3", j, dir * f.len2 * s, 0.008, Region::finger);
      hand_joints[side].push_back(j);
    }
  }
  KinematicRig& rig = b.rig;
  const int nj = rig.num_joints();
  // Surface rings need unit-scale rest positions of the joints.
  Eigen::Matrix3Xd rest(3, nj);
  for (int j = 0; j < nj; ++j) {
    const int p = rig.joints[j].parent;
    rest.col(j) = p < 0 ? Eigen::Vector3d::Zero() : Eigen::Vector3d(rest.col(p) + rig.joints[j].rest_offset);
  }
  const auto kids = rig.children();

  std::vector<int> head_low, head_high, left_toes, right_toes, left_heel_ring, right_heel_ring;
  for (int j = 1; j < nj; ++j) {
    const int p = rig.joints[j].parent;
    const int pp = rig.joints[p].parent;
    const double r = b.joint_radius[j];
    std::vector<SkinWeight> near_parent =
        pp < 0 ? std::vector<SkinWeight>{{p, 1.0}} : std::vector<SkinWeight>{{p, 0.75}, {pp, 0.25}};
    auto ring = b.add_ring(rest, j, 0.25, r, near_parent);
    b.add_ring(rest, j, 0.75, r, {{p, 1.0}});
    if (j == 10) left_heel_ring = ring;
    if (j == 11) right_heel_ring = ring;
    if (!kids[j].empty()) continue;
    // Caps beyond leaf joints move with the leaf.
    if (j == 15) {
      head_low = b.add_ring(rest, j, 1.6, 0.09, {{j, 1.0}});
      head_high = b.add_ring(rest, j, 2.2, 0.08, {{j, 1.0}});
    } else if (j == 10 || j == 11) {
      (j == 10 ? left_toes : right_toes) = b.add_ring(rest, j, 1.6, 0.035, {{j, 1.0}});
    } else if (j == 22 || j == 23) {
      b.add_ring(rest, j, 1.5, 0.025, {{j, 1.0}});
    } else {
      b.add_ring(rest, j, 1.7, 0.007, {{j, 1.0}});
    }
  }
  for (int v = 0; v < static_cast<int>(b.vertex_region.size()); ++v) {
    if (b.vertex_joint[v] == 15 && b.vertex_region[v] == Region::neck && rig.anchors[v].t > 1.0) {
      b.vertex_region[v] = Region::head;
    }
  }

  const int nv = static_cast<int>(b.positions.size());
  rig.template_vertices.resize(3, nv);
  for (int v = 0; v < nv; ++v) rig.template_vertices.col(v) = b.positions[v];

  // Smooth procedural shape fields; each maps a coefficient to meters of offset.
  auto field = [&](auto fn) {
    Eigen::Matrix3Xd f = Eigen::Matrix3Xd::Zero(3, nv);
    for (int v = 0; v < nv; ++v) f.col(v) = fn(v, b.radial[v], b.vertex_region[v]);
    return f * (1.0 + 0.1 * rng.uniform(-1.0, 1.0));
  };
  using V3 = Eigen::Vector3d;
  auto is = [](Region r, std::initializer_list<Region> set) {
    return std::find(set.begin(), set.end(), r) != set.end();
  };
  rig.shape_basis.push_back(field([&](int, const V3& n, Region r) -> V3 {  // overall inflate
    return n * (is(r, {Region::finger, Region::hand}) ? 0.001 : 0.006);
  }));
  rig.shape_basis.push_back(field([&](int, const V3& n, Region r) -> V3 {  // torso width
    return is(r, {Region::torso}) ? V3(0.015 * n.x(), 0.0, 0.0) : V3::Zero();
  }));
  rig.shape_basis.push_back(field([&](int, const V3& n, Region r) -> V3 {  // arm thickness
    return is(r, {Region::arm}) ? V3(0.008 * n) : V3::Zero();
  }));
  rig.shape_basis.push_back(field([&](int, const V3& n, Region r) -> V3 {  // leg thickness
    return is(r, {Region::leg}) ? V3(0.012 * n) : V3::Zero();
  }));
  rig.shape_basis.push_back(field([&](int v, const V3& n, Region r) -> V3 {  // belly
    const bool lower = b.vertex_joint[v] == 3 || b.vertex_joint[v] == 6;
    return is(r, {Region::torso}) && lower ? V3(0.0, 0.0, 0.02 * std::max(0.0, n.z())) : V3::Zero();
  }));
  rig.shape_basis.push_back(field([&](int v, const V3& n, Region r) -> V3 {  // chest depth
    return is(r, {Region::torso}) && b.vertex_joint[v] == 9 ? V3(0.0, 0.0, 0.015 * n.z()) : V3::Zero();
  }));
  rig.shape_basis.push_back(field([&](int v, const V3& n, Region) -> V3 {  // hip width
    const int j = b.vertex_joint[v];
    return j == 1 || j == 2 || j == 4 || j == 5 ? V3(0.012 * n.x(), 0.0, 0.0) : V3::Zero();
  }));
  rig.shape_basis.push_back(field([&](int, const V3& n, Region r) -> V3 {  // head size
    return is(r, {Region::head}) ? V3(0.01 * n) : V3::Zero();
  }));
  rig.shape_basis.push_back(field([&](int, const V3& n, Region r) -> V3 {  // hand thickness
    return is(r, {Region::hand, Region::finger}) ? V3(0.002 * n) : V3::Zero();
  }));
  rig.shape_basis.push_back(field([&](int v, const V3& n, Region) -> V3 {  // shoulder bulk
    const int j = b.vertex_joint[v];
    return j == 13 || j == 14 || j == 16 || j == 17 ? V3(0.01 * n) : V3::Zero();
  }));

  rig.limits_lo.resize(3, nj);
  rig.limits_hi.resize(3, nj);
  for (int j = 0; j < nj; ++j) {
    const double lim = j == 0 ? std::numbers::pi : (b.joint_region[j] == Region::finger ? kFingerLimit : kBodyLimit);
    rig.limits_lo.col(j).setConstant(-lim);
    rig.limits_hi.col(j).setConstant(lim);
  }

  for (int side = 0; side < 2; ++side) {
    std::sort(hand_joints[side].begin(), hand_joints[side].end());
    rig.hands[side] = HandSubtree{side == 0 ? 20 : 21, hand_joints[side]};
  }

  // Keypoint maps. Face and feet landmarks are surface vertices.
  auto kp = [&](int vertex) { return nj + vertex; };
  for (int j = 0; j < 24; ++j) rig.keypoints.eval24.push_back(j);
  const V3 front = V3::UnitZ();
  rig.keypoints.body17 = {kp(b.best_in(head_low, front)),
                          kp(b.best_in(head_high, V3(1.0, 0.0, 1.0).normalized())),
                          kp(b.best_in(head_high, V3(-1.0, 0.0, 1.0).normalized())),
                          kp(b.best_in(head_low, V3::UnitX())),
                          kp(b.best_in(head_low, -V3::UnitX())),
                          16, 17, 18, 19, 20, 21, 1, 2, 4, 5, 7, 8};
  const V3 heel_dir = V3(0.0, -0.3, -1.0).normalized();
  rig.keypoints.feet6 = {kp(b.best_in(left_toes, -V3::UnitX())),  kp(b.best_in(left_toes, V3::UnitX())),
                         kp(b.best_in(left_heel_ring, heel_dir)), kp(b.best_in(right_toes, V3::UnitX())),
                         kp(b.best_in(right_toes, -V3::UnitX())), kp(b.best_in(right_heel_ring, heel_dir))};
  std::set<int> dense;
  for (int v = 0; v < nv; v += 6) dense.insert(v);
  for (int id : rig.keypoints.body17) {
    if (id >= nj) dense.insert(id - nj);
  }
  for (int id : rig.keypoints.feet6) dense.insert(id - nj);
  rig.keypoints.dense.assign(dense.begin(), dense.end());

  rig.validate();
  return rig;
}

RigParams sample_params(const KinematicRig& rig, std::uint64_t seed, const SampleConfig& config) {
  CounterRng rng(seed, 0x5041);
  RigParams p = rest_params(rig);
  for (int j = 0; j < rig.num_joints(); ++j) {
    for (int a = 0; a < 3; ++a) {
      if (j == 0) {
        p.pose(a, j) = rng.uniform(-config.root_rotation_spread, config.root_rotation_spread);
        continue;
      }
      const double c = 0.5 * (rig.limits_lo(a, j) + rig.limits_hi(a, j));
      const double h = 0.5 * (rig.limits_hi(a, j) - rig.limits_lo(a, j)) * config.pose_spread;
      p.pose(a, j) = rng.uniform(c - h, c + h);
    }
  }
  for (int a = 0; a < 3; ++a) {
    p.root_translation[a] = config.root_center[a] + rng.uniform(-config.root_jitter, config.root_jitter);
  }
  for (int i = 0; i < rig.num_bones(); ++i) p.skeleton[i] = rng.uniform(config.scale_lo, config.scale_hi);
  for (int i = 0; i < rig.num_shapes(); ++i) p.shape[i] = rng.uniform(config.shape_lo, config.shape_hi);
  return p;
}

RigParams sample_params(const KinematicRig& rig, const GmmPrior& prior, std::uint64_t seed,
                        const SampleConfig& config) {
  RigParams p = sample_params(rig, seed, config);
  if (prior.dim() != 3 * (rig.num_joints() - 1)) throw DimensionError("prior does not match rig pose dimension");
  CounterRng rng(seed, 0x474d);
  double u = rng.uniform();
  int k = 0;
  while (k + 1 < prior.num_components() && u >= prior.weights()[k]) u -= prior.weights()[k++];
  Eigen::VectorXd z(prior.dim());
  for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
  const Eigen::MatrixXd lower = Eigen::LLT<Eigen::MatrixXd>(prior.covariances()[k]).matrixL();
  const Eigen::VectorXd x = prior.means()[k] + lower * z;
  for (int j = 1; j < rig.num_joints(); ++j) {
    for (int a = 0; a < 3; ++a) {
      p.pose(a, j) = std::clamp(x[3 * (j - 1) + a], rig.limits_lo(a, j), rig.limits_hi(a, j));
    }
  }
  return p;
}

std::vector<RigParams> sample_sequence(const KinematicRig& rig, int frames, std::uint64_t seed,
                                       const SampleConfig& sample, const MotionConfig& motion) {
  if (frames < 1) throw InvalidArgument("sequence needs at least one frame");
  const RigParams base = sample_params(rig, seed, sample);
  CounterRng rng(seed, 0x4d4f);
  Eigen::Matrix3Xd velocity(3, rig.num_joints());
  for (int j = 0; j < rig.num_joints(); ++j) {
    for (int a = 0; a < 3; ++a) velocity(a, j) = rng.uniform(-motion.pose_velocity, motion.pose_velocity);
  }
  Eigen::Vector3d root_velocity;
  for (int a = 0; a < 3; ++a) root_velocity[a] = rng.uniform(-motion.root_velocity, motion.root_velocity);
  std::vector<RigParams> out;
  const double mid = 0.5 * (frames - 1);
  for (int t = 0; t < frames; ++t) {
    RigParams p = base;
    p.pose += (t - mid) * velocity;
    p.pose = p.pose.cwiseMax(rig.limits_lo).cwiseMin(rig.limits_hi);
    p.root_translation += (t - mid) * root_velocity;
    out.push_back(p);
  }
  return out;
}

RigParams perturb_pose(const RigParams& params, double sigma, std::uint64_t seed) {
  CounterRng rng(seed, 0x4e50);
  RigParams out = params;
  for (int j = 0; j < out.pose.cols(); ++j) {
    for (int a = 0; a < 3; ++a) out.pose(a, j) += sigma * rng.normal();
  }
  return out;
}

RenderedFrame render_observations(const KinematicRig& rig, const RigParams& params,
                                  const std::vector<Camera>& cameras, const RenderConfig& config,
                                  std::uint64_t seed) {
  auto in_unit = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!in_unit(config.outlier_rate) || !in_unit(config.occlusion_rate) || !(config.noise_px >= 0.0)) {
    throw InvalidArgument("render rates must lie in [0, 1] and noise must be non-negative");
  }
  check_params(rig, params);
  RenderedFrame frame;
  GroundTruth& gt = frame.gt;
  gt.params = params;
  const auto state = forward_kinematics<double>(rig, params);
  gt.joints = state.positions;
  gt.vertices = skin_vertices<double>(rig, params, state);
  gt.keypoint_ids = rig.observed_keypoints();
  const Eigen::Matrix3Xd points = keypoint_positions<double>(rig, params, state, gt.keypoint_ids);
  const int n = static_cast<int>(gt.keypoint_ids.size());

  for (size_t v = 0; v < cameras.size(); ++v) {
    const Camera& cam = cameras[v];
    CounterRng rng(seed, 0x1000 + v);
    ObservationSet obs;
    Eigen::Matrix2Xd exact = Eigen::Matrix2Xd::Zero(2, n);
    std::vector<bool> front(n, false);
    for (int i = 0; i < n; ++i) {
      const double occ = rng.uniform();
      const double out = rng.uniform();
      const double nx = rng.normal();
      const double ny = rng.normal();
      const double ox = rng.uniform();
      const double oy = rng.uniform();
      Observation2D o;
      o.id = gt.keypoint_ids[i];
      const auto uv = try_project<double>(cam, points.col(i));
      if (!uv) {
        o.visible = false;
        obs.push_back(o);
        continue;
      }
      front[i] = true;
      exact.col(i) = *uv;
      o.uv = *uv + config.noise_px * Eigen::Vector2d(nx, ny);
      if (occ < config.occlusion_rate) {
        o.visible = false;
      } else if (out < config.outlier_rate) {
        o.uv = Eigen::Vector2d(ox * cam.width, oy * cam.height);
      }
      obs.push_back(o);
    }
    frame.views.push_back(std::move(obs));
    gt.keypoints2d.push_back(exact);
    gt.in_front.push_back(front);
  }
  return frame;
}

Camera default_intrinsics() { return intrinsics_from_fov(60.0, 1000, 1000); }

std::vector<Camera> default_camera_ring(int n) {
  return camera_ring(n, 3.0, Eigen::Vector3d(0.0, 0.85, 0.0), default_intrinsics());
}

GmmPrior default_pose_prior(const KinematicRig& rig, std::uint64_t seed, int components, int samples,
                            int max_iters) {
  Eigen::MatrixXd x(samples, 3 * (rig.num_joints() - 1));
  for (int i = 0; i < samples; ++i) {
    const RigParams p = sample_params(rig, seed * 1000003ULL + i);
    x.row(i) = prior_subvector<double>(p.pose).transpose();
  }
  GmmFitOptions options;
  options.max_iters = max_iters;
  return fit_gmm(x, components, seed, options).prior;
}

}  // namespace rigfit
