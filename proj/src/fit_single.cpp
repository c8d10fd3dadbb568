#include "rigfit/fit_single.hpp"

#include "rigfit/residuals.hpp"

#include <cmath>

namespace rigfit {

void FitConfig::validate() const {
  const FitWeights& w = weights;
  for (double v : {w.kp2d, w.anchor_param, w.anchor_3d, w.gmm, w.shape_l2, w.limits}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("fit weights must be finite and non-negative");
  }
  if (!(w.prompt_upweight >= 1.0) || !std::isfinite(w.prompt_upweight)) {
    throw InvalidArgument("prompt_upweight must be >= 1");
  }
  if (std::isnan(huber_px)) throw InvalidArgument("huber_px is NaN");
}

Camera apply_camera_delta(const Camera& camera, const Eigen::Matrix<double, 6, 1>& delta) {
  return perturb_extrinsics<double>(camera, delta.head<3>(), delta.tail<3>());
}

SingleViewProblem build_single_view_problem(const KinematicRig& rig, const RigParams& at, const RigParams& anchor,
                                            const Camera& camera, const ObservationSet& observations,
                                            const GmmPrior* prior, const FitConfig& config) {
  config.validate();
  check_params(rig, at);
  check_params(rig, anchor);
  check_camera(camera);
  ParamLayout layout = rig_param_layout(rig);
  const int np = layout.size();
  layout.add_block("camera", 6);
  layout.set_frozen("camera", !config.refine_camera);
  for (const auto& name : config.frozen_blocks) layout.set_frozen(name, true);

  SingleViewProblem out{ResidualProblem(std::move(layout)), Eigen::VectorXd::Zero(np + 6), 0};
  out.x0.head(np) = pack_params(at);
  const std::vector<int> rig_slots = index_range(0, np);
  const std::vector<int> cam_slots = index_range(np, 6);
  const FitWeights& w = config.weights;
  ResidualProblem& p = out.problem;

  out.dropped = add_kp2d_block(p, rig, camera, observations, rig_slots, cam_slots, at,
                               Kp2dWeights{w.kp2d, w.prompt_upweight, config.huber_px});
  add_param_anchor(p, rig_slots, pack_params(anchor), w.anchor_param, "anchor_param");
  std::vector<int> joints = index_range(0, rig.num_joints());
  add_point_anchor(p, rig, rig_slots, joints, forward_kinematics<double>(rig, anchor).positions, w.anchor_3d,
                   "anchor_3d");
  if (prior != nullptr && !prior->empty()) add_gmm_term(p, rig, rig_slots, *prior, w.gmm);
  add_shape_l2(p, rig, rig_slots, w.shape_l2);
  add_limit_hinges(p, rig, rig_slots, w.limits);
  return out;
}

Eigen::VectorXd single_view_residuals(const KinematicRig& rig, const RigParams& params,
                                      const RigParams& init_params, const Camera& camera,
                                      const ObservationSet& observations, const GmmPrior* prior,
                                      const FitConfig& config) {
  SingleViewProblem svp =
      build_single_view_problem(rig, init_params, init_params, camera, observations, prior, config);
  check_params(rig, params);
  Eigen::VectorXd x = svp.x0;
  x.head(param_count(rig)) = pack_params(params);
  return svp.problem.residuals(x);
}

double mean_reprojection_error(const KinematicRig& rig, const RigParams& params, const Camera& camera,
                               const ObservationSet& observations) {
  std::vector<int> ids;
  for (const auto& o : observations) {
    if (o.visible) ids.push_back(o.id);
  }
  if (ids.empty()) return 0.0;
  const auto state = forward_kinematics<double>(rig, params);
  const Eigen::Matrix3Xd pts = keypoint_positions<double>(rig, params, state, ids);
  double sum = 0.0;
  int n = 0;
  int k = 0;
  for (const auto& o : observations) {
    if (!o.visible) continue;
    const auto uv = try_project<double>(camera, pts.col(k++));
    if (!uv) continue;
    sum += (*uv - o.uv).norm();
    ++n;
  }
  return n > 0 ? sum / n : 0.0;
}

namespace {

FitResult run_fit(const KinematicRig& rig, const RigParams& start, const RigParams& anchor, const Camera& camera,
                  const ObservationSet& observations, const GmmPrior* prior, const FitConfig& config) {
  SingleViewProblem svp = build_single_view_problem(rig, start, anchor, camera, observations, prior, config);
  const SolveResult sr = config.solver == SolverKind::lm ? solve_lm(svp.problem, svp.x0, config.lm)
                                                         : solve_first_order(svp.problem, svp.x0, config.first_order);
  const int np = param_count(rig);
  FitResult res;
  res.params = unpack_params<double>(rig, std::span<const double>(sr.x.data(), np));
  res.camera = apply_camera_delta(camera, sr.x.tail<6>());
  res.breakdown = svp.problem.cost_breakdown(sr.x);
  res.cost_trace = sr.cost_trace;
  res.initial_cost = sr.cost_trace.front();
  res.final_cost = svp.problem.cost(sr.x);
  res.status = sr.status;
  res.converged = sr.converged();
  res.iterations = sr.iterations;
  res.dropped = svp.dropped;
  res.mean_reprojection_px = mean_reprojection_error(rig, res.params, res.camera, observations);
  for (const auto& [term, c] : res.breakdown) {
    if (!std::isfinite(c)) throw NumericError("non-finite loss in term " + term);
  }
  return res;
}

}  // namespace

FitResult fit_single_view(const KinematicRig& rig, const RigParams& init_params, const Camera& camera,
                          const ObservationSet& observations, const GmmPrior* prior, const FitConfig& config) {
  if (count_visible(observations) < 4) throw UnderConstrainedError("fewer than 4 visible keypoints");
  return run_fit(rig, init_params, init_params, camera, observations, prior, config);
}

FitResult prompted_refine(const KinematicRig& rig, const RigParams& params, const Camera& camera,
                          const std::vector<Prompt>& prompts, const FitConfig& config, const ObservationSet& context,
                          const GmmPrior* prior) {
  if (prompts.empty()) throw UnderConstrainedError("prompted refinement needs at least one prompt");
  if (!(config.weights.anchor_param > 0.0)) {
    throw UnderConstrainedError("prompted refinement needs a positive parameter anchor");
  }
  ObservationSet obs;
  for (const auto& o : context) {
    bool prompted = false;
    for (const auto& p : prompts) prompted = prompted || p.id == o.id;
    if (!prompted) obs.push_back(o);
  }
  for (const auto& p : prompts) {
    if (p.id < 0 || p.id >= rig.num_keypoints()) throw DimensionError("prompt keypoint id out of range");
    Observation2D o;
    o.id = p.id;
    o.uv = p.uv;
    o.prompt = true;
    obs.push_back(o);
  }
  return run_fit(rig, params, params, camera, obs, prior, config);
}

}  // namespace rigfit
