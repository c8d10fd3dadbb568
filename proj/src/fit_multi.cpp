#include "rigfit/fit_multi.hpp"

#include "rigfit/residuals.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <map>

namespace rigfit {

void MultiViewSequence::validate() const {
  if (cameras.empty()) throw InvalidArgument("sequence has no cameras");
  if (frames.empty()) throw InvalidArgument("sequence has no frames");
  if (!(fps > 0.0) || !std::isfinite(fps)) throw InvalidArgument("frame rate must be positive");
  for (const auto& f : frames) {
    if (f.size() != cameras.size()) throw DimensionError("every frame needs one observation set per camera");
  }
  for (const auto& c : cameras) check_camera(c);
}

double default_lambda_smooth(double fps) { return 10.0 * fps / 30.0; }

void MultiFitConfig::validate() const {
  single.validate();
  if (!(lambda_kp3d >= 0.0) || !(lambda_accel >= 0.0)) throw InvalidArgument("negative multi-view weight");
  if (lambda_smooth && !(*lambda_smooth >= 0.0)) throw InvalidArgument("negative smoothness weight");
  if (smooth_window < 1 || smooth_window % 2 == 0) throw InvalidArgument("smoothing window must be odd");
  if (max_rounds < 1) throw InvalidArgument("max_rounds must be positive");
}

namespace {

Eigen::VectorXd motion_vector(const RigParams& p) {
  Eigen::VectorXd v(p.pose.size() + 3);
  v.head(p.pose.size()) = Eigen::Map<const Eigen::VectorXd>(p.pose.data(), p.pose.size());
  v.tail<3>() = p.root_translation;
  return v;
}

Eigen::Matrix3d kabsch(const std::vector<Eigen::Vector3d>& from, const std::vector<Eigen::Vector3d>& to) {
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (size_t i = 0; i < from.size(); ++i) h += from[i] * to[i].transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return svd.matrixV() * d * svd.matrixU().transpose();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Eigen::VectorXd temporal_smoothness_residuals(const std::vector<RigParams>& frames, double lambda, double fps) {
  if (frames.size() < 2) throw InvalidArgument("smoothness needs at least two frames");
  if (!(lambda >= 0.0) || !(fps > 0.0)) throw InvalidArgument("invalid smoothness weight or frame rate");
  const double w = std::sqrt(lambda) * fps;
  const Eigen::Index n = motion_vector(frames[0]).size();
  Eigen::VectorXd out((frames.size() - 1) * n);
  for (size_t t = 1; t < frames.size(); ++t) {
    out.segment((t - 1) * n, n) = w * (motion_vector(frames[t]) - motion_vector(frames[t - 1]));
  }
  return out;
}

std::vector<RigParams> init_from_triangulation(const KinematicRig& rig,
                                               const std::vector<FrameTriangulation>& frames) {
  if (frames.empty()) throw InvalidArgument("no triangulated frames");
  const int nj = rig.num_joints();
  std::vector<std::map<int, Eigen::Vector3d>> pts(frames.size());
  for (size_t t = 0; t < frames.size(); ++t) {
    for (const auto& p : frames[t].points) {
      if (p.id >= 0 && p.id < nj) pts[t][p.id] = p.point;
    }
    if (!pts[t].count(0)) throw UnderConstrainedError("root joint not triangulated in frame " + std::to_string(t));
  }

  RigParams base = rest_params(rig);
  for (int j = 1; j < nj; ++j) {
    const int p = rig.joints[j].parent;
    std::vector<double> lengths;
    for (const auto& f : pts) {
      if (f.count(j) && f.count(p)) lengths.push_back((f.at(j) - f.at(p)).norm());
    }
    const double rest = rig.joints[j].rest_offset.norm();
    if (!lengths.empty() && rest > 0.0 && median(lengths) > 0.0) base.skeleton[j - 1] = median(lengths) / rest;
  }

  const auto kids = rig.children();
  std::vector<RigParams> out;
  for (const auto& f : pts) {
    RigParams p = base;
    p.root_translation = f.at(0);
    std::vector<Eigen::Matrix3d> global(nj, Eigen::Matrix3d::Identity());
    for (int j = 0; j < nj; ++j) {
      const int parent = rig.joints[j].parent;
      const Eigen::Matrix3d g_parent = parent < 0 ? Eigen::Matrix3d::Identity() : global[parent];
      std::vector<Eigen::Vector3d> from;
      std::vector<Eigen::Vector3d> to;
      if (f.count(j)) {
        for (int c : kids[j]) {
          if (!f.count(c)) continue;
          from.push_back(rig.joints[c].rest_offset * base.skeleton[c - 1]);
          to.push_back(g_parent.transpose() * (f.at(c) - f.at(j)));
        }
      }
      Eigen::Matrix3d local = Eigen::Matrix3d::Identity();
      if (from.size() == 1) {
        local = Eigen::Quaterniond::FromTwoVectors(from[0], to[0]).toRotationMatrix();
      } else if (from.size() > 1) {
        local = kabsch(from, to);
      }
      p.pose.col(j) = axis_angle_from_rotation(local);
      global[j] = g_parent * local;
    }
    out.push_back(p);
  }
  return out;
}

MultiViewProblem build_multi_view_problem(const KinematicRig& rig, const MultiViewSequence& seq,
                                          const std::vector<RigParams>& init,
                                          const std::vector<FrameTriangulation>& targets, const GmmPrior* prior,
                                          const MultiFitConfig& config) {
  seq.validate();
  config.validate();
  const int nt = static_cast<int>(seq.frames.size());
  const int nv = static_cast<int>(seq.cameras.size());
  if (static_cast<int>(init.size()) != nt) throw DimensionError("one initial parameter set per frame expected");
  if (!targets.empty() && static_cast<int>(targets.size()) != nt) throw DimensionError("one target set per frame");
  for (const auto& p : init) check_params(rig, p);
  const int nj = rig.num_joints();

  ParamLayout layout;
  for (int v = 0; v < nv; ++v) layout.add_block("camera:" + std::to_string(v), 6);
  const int skel = layout.size();
  layout.add_block("skeleton", rig.num_bones());
  const int shape = layout.size();
  layout.add_block("shape", rig.num_shapes());
  std::vector<int> frame_offset;
  for (int t = 0; t < nt; ++t) {
    frame_offset.push_back(layout.size());
    layout.add_block("pose:" + std::to_string(t), 3 * nj);
    layout.add_block("root:" + std::to_string(t), 3);
  }

  MultiViewProblem out{ResidualProblem(std::move(layout)), {}, {}, {}, 0};
  ResidualProblem& prob = out.problem;
  out.x0 = Eigen::VectorXd::Zero(prob.num_parameters());
  out.x0.segment(skel, rig.num_bones()) = init[0].skeleton;
  out.x0.segment(shape, rig.num_shapes()) = init[0].shape;
  for (int t = 0; t < nt; ++t) {
    std::vector<int> slots = index_range(frame_offset[t], 3 * nj + 3);
    const auto s1 = index_range(skel, rig.num_bones());
    const auto s2 = index_range(shape, rig.num_shapes());
    slots.insert(slots.end(), s1.begin(), s1.end());
    slots.insert(slots.end(), s2.begin(), s2.end());
    out.rig_slots.push_back(slots);
    out.x0.segment(frame_offset[t], 3 * nj) = Eigen::Map<const Eigen::VectorXd>(init[t].pose.data(), 3 * nj);
    out.x0.segment<3>(frame_offset[t] + 3 * nj) = init[t].root_translation;
  }

  auto tag = [&](int t) { out.block_frame.resize(prob.blocks().size(), t); };
  const FitWeights& w = config.single.weights;
  const double lambda_smooth = config.lambda_smooth.value_or(default_lambda_smooth(seq.fps));
  for (int t = 0; t < nt; ++t) {
    // Frame params as the solver sees them: shared blocks come from frame 0.
    RigParams at = init[t];
    at.skeleton = init[0].skeleton;
    at.shape = init[0].shape;
    const auto& slots = out.rig_slots[t];
    for (int v = 0; v < nv; ++v) {
      out.dropped += add_kp2d_block(prob, rig, seq.cameras[v], seq.frames[t][v], slots, index_range(6 * v, 6), at,
                                    Kp2dWeights{w.kp2d, w.prompt_upweight, config.single.huber_px});
    }
    if (config.lambda_kp3d > 0.0 && !targets.empty() && !targets[t].points.empty()) {
      std::vector<int> ids;
      Eigen::Matrix3Xd pts(3, static_cast<int>(targets[t].points.size()));
      for (const auto& tp : targets[t].points) {
        pts.col(static_cast<int>(ids.size())) = tp.point;
        ids.push_back(tp.id);
      }
      add_point_anchor(prob, rig, slots, ids, pts, config.lambda_kp3d, "kp3d");
    }
    add_param_anchor(prob, slots, pack_params(at), w.anchor_param, "anchor_param");
    add_point_anchor(prob, rig, slots, index_range(0, nj), forward_kinematics<double>(rig, at).positions, w.anchor_3d,
                     "anchor_3d");
    if (prior != nullptr && !prior->empty()) add_gmm_term(prob, rig, slots, *prior, w.gmm);
    add_shape_l2(prob, rig, slots, w.shape_l2);
    add_limit_hinges(prob, rig, slots, w.limits);
    tag(t);

    const int m = 3 * nj + 3;
    if (t >= 1 && lambda_smooth > 0.0) {
      const double k = std::sqrt(lambda_smooth) * seq.fps;
      std::vector<int> in = index_range(frame_offset[t - 1], m);
      const auto cur = index_range(frame_offset[t], m);
      in.insert(in.end(), cur.begin(), cur.end());
      prob.add(make_block("smooth", in, m, [m, k](auto x, auto r) {
        for (int i = 0; i < m; ++i) r[i] = (x[m + i] - x[i]) * k;
      }));
      tag(t);
    }
    if (t >= 2 && config.lambda_accel > 0.0) {
      const double k = std::sqrt(config.lambda_accel) * seq.fps * seq.fps;
      std::vector<int> in;
      for (int s = t - 2; s <= t; ++s) {
        const auto seg = index_range(frame_offset[s], m);
        in.insert(in.end(), seg.begin(), seg.end());
      }
      prob.add(make_block("accel", in, m, [m, k](auto x, auto r) {
        for (int i = 0; i < m; ++i) r[i] = (x[2 * m + i] - 2.0 * x[m + i] + x[i]) * k;
      }));
      tag(t);
    }
  }
  return out;
}

namespace {

void freeze_all_but(ParamLayout& layout, const std::string& prefix_a, const std::string& prefix_b = "") {
  for (int b = 0; b < layout.num_blocks(); ++b) {
    const std::string& name = layout.block(b).name;
    const bool keep = name.rfind(prefix_a, 0) == 0 || (!prefix_b.empty() && name.rfind(prefix_b, 0) == 0);
    layout.set_frozen(b, !keep);
  }
}

}  // namespace

MultiFitResult fit_multi_view(const KinematicRig& rig, const MultiViewSequence& seq, const GmmPrior* prior,
                              const MultiFitConfig& config, const std::vector<RigParams>* init) {
  seq.validate();
  config.validate();
  const int nt = static_cast<int>(seq.frames.size());
  const int nv = static_cast<int>(seq.cameras.size());
  if (init == nullptr && nv < 2) throw UnderConstrainedError("multi-view fitting needs at least two cameras");

  MultiFitResult res;
  if (nv >= 2 && (init == nullptr || config.lambda_kp3d > 0.0)) {
    for (int t = 0; t < nt; ++t) {
      RansacConfig rc = config.ransac;
      rc.seed = config.ransac.seed + static_cast<std::uint64_t>(t) * 7919ULL;
      res.triangulations.push_back(triangulate_frame(seq.cameras, seq.frames[t], rc));
      for (int id : res.triangulations.back().failed) {
        res.warnings.push_back("frame " + std::to_string(t) + ": keypoint " + std::to_string(id) +
                               " did not triangulate; its 3D loss is disabled");
      }
    }
    if (config.smooth_tracks && nt > 1) {
      std::map<int, std::vector<int>> where;  // id -> index into points per frame, -1 when absent
      for (int t = 0; t < nt; ++t) {
        for (size_t i = 0; i < res.triangulations[t].points.size(); ++i) {
          auto& w = where[res.triangulations[t].points[i].id];
          w.resize(nt, -1);
          w[t] = static_cast<int>(i);
        }
      }
      for (auto& [id, idx] : where) {
        Eigen::Matrix3Xd track = Eigen::Matrix3Xd::Zero(3, nt);
        std::vector<bool> valid(nt, false);
        for (int t = 0; t < nt; ++t) {
          if (idx[t] < 0) continue;
          track.col(t) = res.triangulations[t].points[idx[t]].point;
          valid[t] = true;
        }
        const Eigen::Matrix3Xd sm = smooth_track(track, valid, config.smooth_window);
        for (int t = 0; t < nt; ++t) {
          if (idx[t] >= 0) res.triangulations[t].points[idx[t]].point = sm.col(t);
        }
      }
    }
  }
  const std::vector<RigParams> start = init != nullptr ? *init : init_from_triangulation(rig, res.triangulations);

  MultiViewSequence gated = seq;
  if (config.gate_outliers && !res.triangulations.empty()) {
    for (int t = 0; t < nt; ++t) {
      std::map<int, const TriangulatedPoint*> by_id;
      for (const auto& tp : res.triangulations[t].points) by_id[tp.id] = &tp;
      for (int v = 0; v < nv; ++v) {
        for (auto& o : gated.frames[t][v]) {
          const auto it = by_id.find(o.id);
          if (!o.visible || it == by_id.end()) continue;
          const auto& in = it->second->inliers;
          if (!std::binary_search(in.begin(), in.end(), v)) o.visible = false;
        }
      }
    }
  }

  MultiViewProblem mvp = build_multi_view_problem(rig, gated, start, res.triangulations, prior, config);
  res.dropped = mvp.dropped;
  ResidualProblem& prob = mvp.problem;
  Eigen::VectorXd x = mvp.x0;
  double cost = prob.cost(x);
  res.initial_cost = cost;
  res.cost_trace.push_back(cost);

  auto run = [&](const std::string& a, const std::string& b) {
    freeze_all_but(prob.layout(), a, b);
    if (prob.layout().active_indices().empty()) return;
    const SolveResult sr = solve_lm(prob, x, config.single.lm);
    x = sr.x;
    cost = sr.final_cost;
    res.cost_trace.push_back(cost);
  };
  // Body blocks go first so the cameras are never fit to the rough initial body.
  for (int round = 0; round < config.max_rounds; ++round) {
    res.rounds = round + 1;
    const double before = cost;
    run("pose:", "root:");
    run("skeleton", "shape");
    if (config.refine_cameras) run("camera:", "");
    if (before - cost <= config.tol * std::max(before, 1e-300)) break;
  }
  if (config.joint_polish) {
    // Alternation zig-zags along the skeleton/pose coupling; one joint solve finishes it.
    for (int b = 0; b < prob.layout().num_blocks(); ++b) {
      prob.layout().set_frozen(b, prob.layout().block(b).name.rfind("camera:", 0) == 0);
    }
    LmConfig lm = config.single.lm;
    lm.max_iters = std::max(lm.max_iters, 200);
    const SolveResult sr = solve_lm(prob, x, lm);
    x = sr.x;
    cost = sr.final_cost;
    res.cost_trace.push_back(cost);
    res.converged = sr.converged();
  } else {
    const size_t n = res.cost_trace.size();
    res.converged = n >= 2 && res.cost_trace[n - 2] - cost <= config.tol * std::max(res.cost_trace[n - 2], 1e-300);
  }
  for (int b = 0; b < prob.layout().num_blocks(); ++b) prob.layout().set_frozen(b, false);

  res.final_cost = prob.cost(x);
  res.breakdown = prob.cost_breakdown(x);
  for (const auto& [term, c] : res.breakdown) {
    if (!std::isfinite(c)) throw NumericError("non-finite loss in term " + term);
  }
  for (int v = 0; v < nv; ++v) {
    res.cameras.push_back(apply_camera_delta(seq.cameras[v], x.segment<6>(6 * v)));
  }
  const std::vector<double> bc = prob.block_costs(x);
  res.frames.resize(nt);
  for (size_t i = 0; i < bc.size(); ++i) res.frames[mvp.block_frame[i]].breakdown[prob.blocks()[i].term] += bc[i];
  for (int t = 0; t < nt; ++t) {
    std::vector<double> xs(mvp.rig_slots[t].size());
    for (size_t i = 0; i < xs.size(); ++i) xs[i] = x[mvp.rig_slots[t][i]];
    res.frames[t].params = unpack_params<double>(rig, std::span<const double>(xs));
    double sum = 0.0;
    int n = 0;
    for (int v = 0; v < nv; ++v) {
      const ObservationSet& obs = seq.frames[t][v];
      const int k = count_visible(obs);
      sum += mean_reprojection_error(rig, res.frames[t].params, res.cameras[v], obs) * k;
      n += k;
    }
    res.frames[t].mean_reprojection_px = n > 0 ? sum / n : 0.0;
  }
  res.skeleton = res.frames[0].params.skeleton;
  res.shape = res.frames[0].params.shape;
  return res;
}

}  // namespace rigfit
