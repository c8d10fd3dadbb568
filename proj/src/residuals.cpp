#include "rigfit/residuals.hpp"

#include <cmath>
#include <type_traits>

namespace rigfit {

namespace {

template <typename Span>
using elem_t = std::remove_const_t<typename Span::element_type>;

void check_slots(const KinematicRig& rig, const std::vector<int>& rig_slots) {
  if (static_cast<int>(rig_slots.size()) != param_count(rig)) {
    throw DimensionError("rig slot count does not match the rig parameter count");
  }
}

std::vector<int> concat(std::vector<int> a, const std::vector<int>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

std::vector<int> pose_slots(const KinematicRig& rig, const std::vector<int>& rig_slots) {
  check_slots(rig, rig_slots);
  return {rig_slots.begin(), rig_slots.begin() + 3 * rig.num_joints()};
}

std::vector<int> shape_slots(const KinematicRig& rig, const std::vector<int>& rig_slots) {
  check_slots(rig, rig_slots);
  return {rig_slots.end() - rig.num_shapes(), rig_slots.end()};
}

int add_kp2d_block(ResidualProblem& problem, const KinematicRig& rig, const Camera& camera,
                   const ObservationSet& observations, const std::vector<int>& rig_slots,
                   const std::vector<int>& camera_slots, const RigParams& at, const Kp2dWeights& weights,
                   const std::string& term) {
  check_slots(rig, rig_slots);
  if (!camera_slots.empty() && camera_slots.size() != 6) throw DimensionError("camera slots must be 6");
  if (weights.lambda < 0.0 || weights.prompt_upweight < 1.0) throw InvalidArgument("invalid kp2d weights");

  std::vector<int> ids;
  for (const auto& o : observations) {
    if (o.id < 0 || o.id >= rig.num_keypoints()) throw DimensionError("observation keypoint id out of range");
    if (!(o.confidence >= 0.0 && o.confidence <= 1.0)) throw InvalidArgument("confidence outside [0, 1]");
    if (o.visible) ids.push_back(o.id);
  }
  const auto state = forward_kinematics<double>(rig, at);
  const Eigen::Matrix3Xd pts = keypoint_positions<double>(rig, at, state, ids);

  std::vector<int> kept_ids;
  std::vector<double> group_w;
  std::vector<Eigen::Vector2d> targets;
  int dropped = 0;
  int k = 0;
  for (const auto& o : observations) {
    if (!o.visible) continue;
    const bool front = try_project<double>(camera, pts.col(k++)).has_value();
    if (!front) {
      ++dropped;
      continue;
    }
    kept_ids.push_back(o.id);
    targets.push_back(o.uv);
    group_w.push_back(std::sqrt(weights.lambda) * o.confidence * (o.prompt ? std::sqrt(weights.prompt_upweight) : 1.0));
  }
  if (kept_ids.empty()) return dropped;

  const KinematicRig* rp = &rig;
  const int np = param_count(rig);
  const bool with_camera = !camera_slots.empty();
  auto f = [rp, camera, kept_ids, targets, np, with_camera](auto x, auto r) {
    using T = elem_t<decltype(x)>;
    const RigParamsT<T> p = unpack_params<T>(*rp, x.first(np));
    const SkeletonState<T> state = forward_kinematics<T>(*rp, p);
    const Mat3X<T> pts = keypoint_positions<T>(*rp, p, state, kept_ids);
    const CameraT<T> cam = with_camera ? perturb_extrinsics<T>(camera, Vec3<T>(x[np], x[np + 1], x[np + 2]),
                                                               Vec3<T>(x[np + 3], x[np + 4], x[np + 5]))
                                       : camera.template cast<T>();
    for (size_t i = 0; i < kept_ids.size(); ++i) {
      const Vec2<T> uv = project<T>(cam, pts.col(i));
      r[2 * i] = uv.x() - targets[i].x();
      r[2 * i + 1] = uv.y() - targets[i].y();
    }
  };
  ResidualBlock b = make_block(term, concat(rig_slots, camera_slots), 2 * static_cast<int>(kept_ids.size()), f);
  b.group_size = 2;
  b.huber_delta = weights.huber_px;
  b.weights = group_w;
  problem.add(std::move(b));
  return dropped;
}

void add_param_anchor(ResidualProblem& problem, const std::vector<int>& slots, const Eigen::VectorXd& target,
                      double lambda, const std::string& term) {
  if (static_cast<int>(slots.size()) != target.size()) throw DimensionError("anchor target size mismatch");
  if (lambda < 0.0) throw InvalidArgument("negative anchor weight");
  const double w = std::sqrt(lambda);
  auto f = [target, w](auto x, auto r) {
    for (size_t i = 0; i < x.size(); ++i) r[i] = (x[i] - target[i]) * w;
  };
  problem.add(make_block(term, slots, static_cast<int>(slots.size()), f));
}

void add_point_anchor(ResidualProblem& problem, const KinematicRig& rig, const std::vector<int>& rig_slots,
                      const std::vector<int>& ids, const Eigen::Matrix3Xd& targets, double lambda,
                      const std::string& term, const std::vector<double>& point_weights) {
  check_slots(rig, rig_slots);
  if (static_cast<int>(ids.size()) != targets.cols()) throw DimensionError("point anchor target count mismatch");
  if (!point_weights.empty() && point_weights.size() != ids.size()) {
    throw DimensionError("point anchor weight count mismatch");
  }
  if (lambda < 0.0) throw InvalidArgument("negative anchor weight");
  if (ids.empty()) return;
  const KinematicRig* rp = &rig;
  const int np = param_count(rig);
  auto f = [rp, ids, targets, np](auto x, auto r) {
    using T = elem_t<decltype(x)>;
    const RigParamsT<T> p = unpack_params<T>(*rp, x.first(np));
    const Mat3X<T> pts = keypoint_positions<T>(*rp, p, forward_kinematics<T>(*rp, p), ids);
    for (size_t i = 0; i < ids.size(); ++i) {
      for (int a = 0; a < 3; ++a) r[3 * i + a] = pts(a, i) - targets(a, i);
    }
  };
  ResidualBlock b = make_block(term, rig_slots, 3 * static_cast<int>(ids.size()), f);
  b.group_size = 3;
  b.weights.assign(ids.size(), std::sqrt(lambda));
  for (size_t i = 0; i < point_weights.size(); ++i) b.weights[i] *= point_weights[i];
  problem.add(std::move(b));
}

void add_gmm_term(ResidualProblem& problem, const KinematicRig& rig, const std::vector<int>& rig_slots,
                  const GmmPrior& prior, double lambda, const std::string& term) {
  if (prior.dim() != 3 * rig.num_bones()) throw DimensionError("prior does not match rig pose dimension");
  if (lambda < 0.0) throw InvalidArgument("negative prior weight");
  const std::vector<int> pose = pose_slots(rig, rig_slots);
  const GmmPrior* pp = &prior;
  const double bound = prior.nll_lower_bound();
  const double w = std::sqrt(lambda);
  auto f = [pp, bound, w](auto x, auto r) {
    using T = elem_t<decltype(x)>;
    using std::sqrt;
    VecX<T> v(static_cast<int>(x.size()));
    for (size_t i = 0; i < x.size(); ++i) v[i] = x[i];
    const T excess = gmm_nll<T>(*pp, v) - bound;
    r[0] = sqrt(2.0 * excess + 1e-12) * w;
  };
  problem.add(make_block(term, std::vector<int>(pose.begin() + 3, pose.end()), 1, f));
}

void add_shape_l2(ResidualProblem& problem, const KinematicRig& rig, const std::vector<int>& rig_slots,
                  double lambda, const std::string& term) {
  const std::vector<int> s = shape_slots(rig, rig_slots);
  if (s.empty()) return;
  add_param_anchor(problem, s, Eigen::VectorXd::Zero(static_cast<int>(s.size())), lambda, term);
}

void add_limit_hinges(ResidualProblem& problem, const KinematicRig& rig, const std::vector<int>& rig_slots,
                      double lambda, const std::string& term) {
  if (lambda < 0.0) throw InvalidArgument("negative limit weight");
  const std::vector<int> pose = pose_slots(rig, rig_slots);
  const KinematicRig* rp = &rig;
  const double w = std::sqrt(lambda);
  auto f = [rp, w](auto x, auto r) {
    using T = elem_t<decltype(x)>;
    Mat3X<T> p(3, rp->num_joints());
    for (int j = 0; j < p.cols(); ++j) {
      for (int a = 0; a < 3; ++a) p(a, j) = x[3 * j + a];
    }
    const VecX<T> h = joint_limit_hinges<T>(*rp, p);
    for (int i = 0; i < h.size(); ++i) r[i] = h[i] * w;
  };
  problem.add(make_block(term, pose, static_cast<int>(pose.size()), f));
}

}  // namespace rigfit
