#include "rigfit/report.hpp"

#include "rigfit/metrics.hpp"

#include <algorithm>
#include <sstream>

namespace rigfit {

const std::set<std::string>& known_metrics() {
  static const std::set<std::string> names = {"mpjpe", "pa_mpjpe", "pve", "pck", "fscore", "jitter"};
  return names;
}

std::set<std::string> parse_metric_list(const std::string& list) {
  if (list.empty()) return known_metrics();
  std::set<std::string> out;
  std::stringstream ss(list);
  std::string name;
  while (std::getline(ss, name, ',')) {
    const auto b = name.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    name = name.substr(b, name.find_last_not_of(" \t") - b + 1);
    if (!known_metrics().count(name)) throw InvalidArgument("unknown metric '" + name + "'");
    out.insert(name);
  }
  if (out.empty()) throw InvalidArgument("empty metric list");
  return out;
}

namespace {

Eigen::Matrix3Xd select_columns(const Eigen::Matrix3Xd& m, const std::vector<int>& cols) {
  Eigen::Matrix3Xd out(3, cols.size());
  for (size_t i = 0; i < cols.size(); ++i) out.col(i) = m.col(cols[i]);
  return out;
}

int root_column(const KinematicRig& rig) {
  const auto& ids = rig.keypoints.eval24;
  const auto it = std::find(ids.begin(), ids.end(), 0);
  return it == ids.end() ? 0 : static_cast<int>(it - ids.begin());
}

// Mean of each numeric field over a list of objects; fields absent from an
// object are skipped for it. Nested objects are averaged recursively.
Json mean_fields(const std::vector<const Json*>& items) {
  Json out = Json::object();
  std::set<std::string> keys;
  for (const Json* j : items) {
    for (auto it = j->begin(); it != j->end(); ++it) keys.insert(it.key());
  }
  for (const auto& k : keys) {
    std::vector<const Json*> objects;
    double sum = 0.0;
    int n = 0;
    for (const Json* j : items) {
      if (!j->contains(k)) continue;
      const Json& v = (*j)[k];
      if (v.is_object()) {
        objects.push_back(&v);
      } else if (v.is_number()) {
        sum += v.get<double>();
        ++n;
      }
    }
    if (!objects.empty()) {
      Json sub = mean_fields(objects);
      if (!sub.empty()) out[k] = sub;
    } else if (n > 0) {
      out[k] = sum / n;
    }
  }
  return out;
}

}  // namespace

Json frame_metrics_3d(const KinematicRig& rig, const RigParams& pred, const GroundTruthFile::Frame& gt,
                      const std::set<std::string>& metrics) {
  Json out = Json::object();
  const SkeletonState<double> state = forward_kinematics<double>(rig, pred);
  const Eigen::Matrix3Xd pj = select_columns(state.positions, rig.keypoints.eval24);
  const Eigen::Matrix3Xd gj = select_columns(gt.joints, rig.keypoints.eval24);
  if (metrics.count("mpjpe")) out["mpjpe"] = mpjpe(pj, gj, Alignment::root, root_column(rig));
  if (metrics.count("pa_mpjpe")) out["pa_mpjpe"] = pa_mpjpe(pj, gj);
  if (metrics.count("pve") || metrics.count("fscore")) {
    const Eigen::Matrix3Xd pv = skin_vertices<double>(rig, pred, state);
    if (metrics.count("pve")) out["pve"] = pve(pv, gt.vertices, state.positions.col(0), gt.joints.col(0));
    if (metrics.count("fscore")) {
      out["f5"] = fscore(pv, gt.vertices, 5.0);
      out["f15"] = fscore(pv, gt.vertices, 15.0);
    }
  }
  return out;
}

Json frame_metrics_2d(const KinematicRig& rig, const RigParams& pred, const std::vector<Camera>& cameras,
                      const std::vector<int>& keypoint_ids, const GroundTruthFile::Frame& gt) {
  if (gt.uv.size() != cameras.size()) throw DimensionError("ground truth and camera counts differ");
  const SkeletonState<double> state = forward_kinematics<double>(rig, pred);
  const Eigen::Matrix3Xd points = keypoint_positions<double>(rig, pred, state, keypoint_ids);
  const struct {
    const char* name;
    const std::vector<int>* ids;
  } splits[] = {{"body17", &rig.keypoints.body17}, {"feet6", &rig.keypoints.feet6}};

  std::vector<Json> views;
  for (size_t v = 0; v < cameras.size(); ++v) {
    Eigen::Matrix2Xd uv(2, keypoint_ids.size());
    for (size_t i = 0; i < keypoint_ids.size(); ++i) {
      // A prediction behind the camera can never be within threshold.
      const auto p = try_project<double>(cameras[v], points.col(i));
      uv.col(i) = p ? *p : Eigen::Vector2d::Constant(std::numeric_limits<double>::max());
    }
    const double side = bbox_side(gt.uv[v], gt.visible[v]);
    if (!(side > 0.0)) continue;
    Json vj = Json::object();
    for (const auto& split : splits) {
      std::vector<int> cols;
      for (int id : *split.ids) {
        const auto it = std::find(keypoint_ids.begin(), keypoint_ids.end(), id);
        if (it != keypoint_ids.end()) cols.push_back(static_cast<int>(it - keypoint_ids.begin()));
      }
      Eigen::Matrix2Xd ps(2, cols.size()), gs(2, cols.size());
      std::vector<bool> vis;
      for (size_t i = 0; i < cols.size(); ++i) {
        ps.col(i) = uv.col(cols[i]);
        gs.col(i) = gt.uv[v].col(cols[i]);
        vis.push_back(gt.visible[v][cols[i]]);
      }
      const auto avg = avg_pck(ps, gs, vis, side);
      if (!avg) continue;
      Json sj = {{"avg", *avg}};
      for (double a : kPckThresholds) {
        std::ostringstream key;
        key << a;
        sj["at_" + key.str()] = *pck(ps, gs, vis, side, a);
      }
      vj[split.name] = sj;
    }
    views.push_back(vj);
  }
  std::vector<const Json*> ptrs;
  for (const auto& v : views) ptrs.push_back(&v);
  return mean_fields(ptrs);
}

Json evaluate(const KinematicRig& rig, const std::vector<RigParams>& pred, const std::vector<Camera>& cameras,
              const GroundTruthFile& gt, const std::set<std::string>& metrics, const Categories& categories,
              const std::vector<int>& frame_ids) {
  std::vector<int> ids = frame_ids;
  if (ids.empty()) {
    if (pred.size() != gt.frames.size()) throw DimensionError("prediction and ground-truth frame counts differ");
    for (size_t t = 0; t < pred.size(); ++t) ids.push_back(static_cast<int>(t));
  }
  if (ids.size() != pred.size()) throw DimensionError("one frame id per prediction expected");
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= static_cast<int>(gt.frames.size())) throw DimensionError("frame id out of range");
    if (i > 0 && ids[i] <= ids[i - 1]) throw InvalidArgument("prediction frame ids must be increasing");
  }
  Json samples = Json::array();
  std::vector<Json> per_frame;
  std::map<int, size_t> index_of;
  for (size_t i = 0; i < pred.size(); ++i) {
    const GroundTruthFile::Frame& g = gt.frames[ids[i]];
    check_params(rig, pred[i]);
    Json m = frame_metrics_3d(rig, pred[i], g, metrics);
    if (metrics.count("pck")) {
      Json p = frame_metrics_2d(rig, pred[i], cameras, gt.keypoint_ids, g);
      if (!p.empty()) m["pck"] = p;
    }
    per_frame.push_back(m);
    index_of[ids[i]] = i;
    Json s = {{"frame", ids[i]}, {"metrics", m}};
    if (const auto it = categories.find(ids[i]); it != categories.end()) s["categories"] = it->second;
    samples.push_back(s);
  }
  std::vector<const Json*> all;
  for (const auto& m : per_frame) all.push_back(&m);
  Json aggregate = mean_fields(all);
  if (metrics.count("jitter") && pred.size() >= 3) {
    std::vector<Eigen::Matrix3Xd> pj, gj;
    for (size_t i = 0; i < pred.size(); ++i) {
      pj.push_back(select_columns(forward_kinematics<double>(rig, pred[i]).positions, rig.keypoints.eval24));
      gj.push_back(select_columns(gt.frames[ids[i]].joints, rig.keypoints.eval24));
    }
    aggregate["jitter"] = jitter(pj);
    aggregate["jitter_gt"] = jitter(gj);
  }
  Json by_category = Json::object();
  std::map<std::string, std::vector<const Json*>> groups;
  for (const auto& [t, labels] : categories) {
    const auto it = index_of.find(t);
    if (it == index_of.end()) continue;
    for (const auto& l : labels) groups[l].push_back(&per_frame[it->second]);
  }
  for (const auto& [label, items] : groups) {
    by_category[label] = {{"count", items.size()}, {"metrics", mean_fields(items)}};
  }
  std::vector<std::string> names(metrics.begin(), metrics.end());
  Json out = {{"schema", schema_id("eval_report")},
              {"version", tool_version()},
              {"metrics", names},
              {"units", {{"3d", "mm"}, {"jitter", "mm^2"}, {"pck", "fraction"}, {"fscore", "fraction"}}},
              {"pck_thresholds", kPckThresholds},
              {"frames", pred.size()},
              {"samples", samples},
              {"aggregate", aggregate}};
  if (!categories.empty()) out["categories"] = by_category;
  return out;
}

Predictions predictions_from_json(const Json& j, const KinematicRig& rig) {
  Predictions out;
  if (j.is_object() && j.contains("schema") && j["schema"].is_string() &&
      j["schema"].get<std::string>().rfind("rigfit/params/", 0) == 0) {
    out.frames.push_back(0);
    out.params.push_back(params_from_json(j, &rig));
    return out;
  }
  check_schema(j, "fit_report");
  if (!j.contains("frames") || !j["frames"].is_array()) throw SchemaError("/frames", "missing frame list");
  for (size_t i = 0; i < j["frames"].size(); ++i) {
    const Json& f = j["frames"][i];
    const std::string p = "/frames/" + std::to_string(i);
    if (!f.is_object() || !f.contains("frame") || !f["frame"].is_number_integer()) {
      throw SchemaError(p + "/frame", "expected an integer");
    }
    if (!f.contains("params")) throw SchemaError(p + "/params", "missing field");
    out.frames.push_back(f["frame"].get<int>());
    RigParams params = params_from_body(f["params"], p + "/params");
    try {
      check_params(rig, params);
    } catch (const Error& e) {
      throw SchemaError(p + "/params", e.what());
    }
    out.params.push_back(std::move(params));
  }
  if (j.contains("cameras")) {
    const Json& cams = j["cameras"];
    if (!cams.is_array()) throw SchemaError("/cameras", "expected an array");
    for (size_t v = 0; v < cams.size(); ++v) out.cameras.push_back(camera_from_json(cams[v], "/cameras/" + std::to_string(v)));
  }
  return out;
}

Json report_header(const std::string& command, const Json& config) {
  return Json{{"schema", schema_id("fit_report")},
              {"version", tool_version()},
              {"command", command},
              {"config_hash", content_hash(config)}};
}

namespace {

Json breakdown_json(const std::map<std::string, double>& b) {
  Json out = Json::object();
  for (const auto& [k, v] : b) out[k] = v;
  return out;
}

}  // namespace

Json single_fit_report(const FitResult& fit, int frame, const Json& config) {
  Json r = report_header("fit-single", config);
  r["status"] = to_string(fit.status);
  r["converged"] = fit.converged;
  r["iterations"] = fit.iterations;
  r["initial_cost"] = fit.initial_cost;
  r["final_cost"] = fit.final_cost;
  r["cost_trace"] = fit.cost_trace;
  r["breakdown"] = breakdown_json(fit.breakdown);
  r["dropped"] = fit.dropped;
  r["mean_reprojection_px"] = fit.mean_reprojection_px;
  r["frames"] = Json::array({{{"frame", frame},
                              {"params", params_body(fit.params)},
                              {"mean_reprojection_px", fit.mean_reprojection_px},
                              {"breakdown", breakdown_json(fit.breakdown)}}});
  r["cameras"] = Json::array({to_json(fit.camera)});
  return r;
}

Json multi_fit_report(const MultiFitResult& fit, const Json& config) {
  Json r = report_header("fit-multi", config);
  r["status"] = fit.converged ? "converged" : "max_rounds";
  r["converged"] = fit.converged;
  r["rounds"] = fit.rounds;
  r["initial_cost"] = fit.initial_cost;
  r["final_cost"] = fit.final_cost;
  r["cost_trace"] = fit.cost_trace;
  r["breakdown"] = breakdown_json(fit.breakdown);
  r["dropped"] = fit.dropped;
  r["warnings"] = fit.warnings;
  r["skeleton"] = std::vector<double>(fit.skeleton.data(), fit.skeleton.data() + fit.skeleton.size());
  r["shape"] = std::vector<double>(fit.shape.data(), fit.shape.data() + fit.shape.size());
  double reproj = 0.0;
  Json frames = Json::array();
  for (size_t t = 0; t < fit.frames.size(); ++t) {
    const FrameFit& f = fit.frames[t];
    reproj += f.mean_reprojection_px;
    frames.push_back({{"frame", t},
                      {"params", params_body(f.params)},
                      {"mean_reprojection_px", f.mean_reprojection_px},
                      {"breakdown", breakdown_json(f.breakdown)}});
  }
  r["mean_reprojection_px"] = fit.frames.empty() ? 0.0 : reproj / fit.frames.size();
  r["frames"] = frames;
  Json cams = Json::array();
  for (const auto& c : fit.cameras) cams.push_back(to_json(c));
  r["cameras"] = cams;
  Json tri = Json::array();
  for (const auto& ft : fit.triangulations) tri.push_back({{"points", ft.points.size()}, {"failed", ft.failed}});
  r["triangulation"] = tri;
  return r;
}

Json error_report(const std::string& command, const Json& config, const std::string& kind,
                  const std::string& message) {
  Json r = report_header(command, config);
  r["status"] = "error";
  r["error"] = {{"kind", kind}, {"message", message}};
  return r;
}

}  // namespace rigfit
