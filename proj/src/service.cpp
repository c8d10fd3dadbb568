#include "rigfit/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace rigfit {

namespace fs = std::filesystem;

struct Service::Session {
  std::mutex mutex;
  std::string id;
  std::string image_ref;
  int width = 0;
  int height = 0;
  std::string rig_id = "default";
  Camera camera;
  RigParams params;
  ObservationSet keypoints;
  std::vector<Json> history;
  bool dirty = false;
  bool fitting = false;

  Json state() const {
    return Json{{"schema", schema_id("session")},
                {"id", id},
                {"image_ref", image_ref},
                {"width", width},
                {"height", height},
                {"rig_id", rig_id},
                {"camera", to_json(camera)},
                {"params", params_body(params)},
                {"keypoints", keypoints_body(keypoints)},
                {"history", history},
                {"dirty", dirty},
                {"fitting", fitting}};
  }
};

namespace {

// Maps library errors onto HTTP statuses.
struct HttpError : Error {
  HttpError(int status, const std::string& message) : Error(message), status(status) {}
  int status;
};

void send(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send(res, status, Json{{"error", {{"status", status}, {"message", message}}}});
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const HttpError& e) {
    send_error(res, e.status, e.what());
  } catch (const UnderConstrainedError& e) {
    send_error(res, 422, e.what());
  } catch (const SchemaError& e) {
    send_error(res, 400, e.what());
  } catch (const InvalidArgument& e) {
    send_error(res, 400, e.what());
  } catch (const DimensionError& e) {
    send_error(res, 400, e.what());
  } catch (const Json::exception& e) {
    send_error(res, 400, e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

Json body_json(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  Json j = parse_json(req.body, "body");
  if (!j.is_object()) throw SchemaError("body", "expected a JSON object");
  return j;
}

Camera default_session_camera(int width, int height) {
  return camera_ring(1, 3.0, Eigen::Vector3d(0.0, 0.85, 0.0), intrinsics_from_fov(60.0, width, height))[0];
}

RigParams default_session_params(const KinematicRig& rig) {
  RigParams p = rest_params(rig);
  p.root_translation = Eigen::Vector3d(0.0, 0.95, 0.0);
  return p;
}

void check_keypoint_ids(const KinematicRig& rig, const ObservationSet& obs) {
  for (size_t i = 0; i < obs.size(); ++i) {
    if (obs[i].id < 0 || obs[i].id >= rig.num_keypoints()) {
      throw SchemaError("/keypoints/" + std::to_string(i) + "/id", "keypoint id out of range");
    }
  }
}

// Entries of `update` replace same-id entries of `base`; the result is sorted by id.
ObservationSet merge_keypoints(const ObservationSet& base, const ObservationSet& update) {
  std::map<int, Observation2D> by_id;
  for (const auto& o : base) by_id[o.id] = o;
  for (const auto& o : update) by_id[o.id] = o;
  ObservationSet out;
  for (const auto& [id, o] : by_id) out.push_back(o);
  return out;
}

Json fit_json(const FitResult& fit, const std::string& mode, int pairs) {
  Json b = Json::object();
  for (const auto& [k, v] : fit.breakdown) b[k] = v;
  return Json{{"mode", mode},
              {"status", to_string(fit.status)},
              {"converged", fit.converged},
              {"iterations", fit.iterations},
              {"initial_cost", fit.initial_cost},
              {"final_cost", fit.final_cost},
              {"cost_trace", fit.cost_trace},
              {"breakdown", b},
              {"mean_reprojection_px", fit.mean_reprojection_px},
              {"dropped", fit.dropped},
              {"kp2d_pairs", pairs},
              {"params", params_body(fit.params)}};
}

}  // namespace

Service::Service(ServiceOptions options) : options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  if (options_.data_dir.empty()) throw InvalidArgument("service needs a data directory");
  fs::create_directories(options_.data_dir / "sessions");
  rigs_.emplace("default", make_default_rig(0));
  load_journal();
  routes();
}

Service::~Service() { stop(); }

void Service::add_rig(const std::string& id, KinematicRig rig) {
  rig.validate();
  std::lock_guard lock(mutex_);
  rigs_[id] = std::move(rig);
}

void Service::set_prior(std::shared_ptr<const GmmPrior> prior) { prior_ = std::move(prior); }

bool Service::listen(const std::string& host, int port) { return server_->listen(host, port); }
int Service::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }
bool Service::listen_after_bind() { return server_->listen_after_bind(); }
void Service::stop() {
  if (server_) server_->stop();
}
void Service::wait_until_ready() const { server_->wait_until_ready(); }

int Service::session_count() const {
  std::lock_guard lock(mutex_);
  return static_cast<int>(sessions_.size());
}

std::shared_ptr<Service::Session> Service::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw HttpError(404, "unknown session '" + id + "'");
  return it->second;
}

const KinematicRig& Service::rig(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = rigs_.find(id);
  if (it == rigs_.end()) throw SchemaError("/rig_id", "unknown rig '" + id + "'");
  return it->second;
}

void Service::journal(const Session& s) const {
  const fs::path path = options_.data_dir / "sessions" / (s.id + ".json");
  const fs::path tmp = path.string() + ".tmp";
  Json state = s.state();
  state["fitting"] = false;
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write journal " + tmp.string());
    out << state.dump(1) << "\n";
  }
  fs::rename(tmp, path);
}

void Service::load_journal() {
  const fs::path dir = options_.data_dir / "sessions";
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const Json j = read_json_file(f);
    check_schema(j, "session");
    auto s = std::make_shared<Session>();
    s->id = j.at("id").get<std::string>();
    s->image_ref = j.at("image_ref").get<std::string>();
    s->width = j.at("width").get<int>();
    s->height = j.at("height").get<int>();
    s->rig_id = j.at("rig_id").get<std::string>();
    s->camera = camera_from_json(j.at("camera"), "/camera");
    s->params = params_from_body(j.at("params"), "/params");
    s->keypoints = keypoints_from_body(j.at("keypoints"), "/keypoints");
    for (const auto& h : j.at("history")) s->history.push_back(h);
    s->dirty = j.at("dirty").get<bool>();
    int n = 0;
    if (std::sscanf(s->id.c_str(), "s%d", &n) == 1) next_id_ = std::max(next_id_, n + 1);
    sessions_[s->id] = s;
  }
}

void Service::routes() {
  httplib::Server& srv = *server_;
  srv.set_default_headers({{"Access-Control-Allow-Origin", options_.cors_origin},
                           {"Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  srv.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  if (!options_.static_dir.empty()) srv.set_mount_point("/", options_.static_dir.string());

  srv.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
    send(res, 200, Json{{"status", "ok"}, {"version", tool_version()}});
  });

  srv.Get("/v1/rigs", [this](const httplib::Request&, httplib::Response& res) {
    Json rigs = Json::array();
    std::lock_guard lock(mutex_);
    for (const auto& [id, r] : rigs_) {
      std::vector<std::string> names;
      Json bones = Json::array();
      for (int j = 0; j < r.num_joints(); ++j) {
        names.push_back(r.joints[j].name);
        if (r.joints[j].parent >= 0) bones.push_back({r.joints[j].parent, j});
      }
      rigs.push_back({{"id", id},
                      {"joints", r.num_joints()},
                      {"vertices", r.num_vertices()},
                      {"shapes", r.num_shapes()},
                      {"joint_names", names},
                      {"bones", bones},
                      {"body17", r.keypoints.body17},
                      {"feet6", r.keypoints.feet6}});
    }
    send(res, 200, Json{{"rigs", rigs}});
  });

  srv.Get("/v1/sessions", [this](const httplib::Request&, httplib::Response& res) {
    Json ids = Json::array();
    std::lock_guard lock(mutex_);
    for (const auto& [id, s] : sessions_) ids.push_back(id);
    send(res, 200, Json{{"sessions", ids}});
  });

  srv.Post("/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const Json body = body_json(req);
      for (auto it = body.begin(); it != body.end(); ++it) {
        static const std::set<std::string> allowed = {"image_ref", "width",       "height",   "rig_id",
                                                      "camera",    "init_params", "keypoints"};
        if (!allowed.count(it.key())) throw SchemaError("/" + it.key(), "unknown field");
      }
      auto s = std::make_shared<Session>();
      if (!body.contains("image_ref") || !body["image_ref"].is_string()) {
        throw SchemaError("/image_ref", "expected a string");
      }
      s->image_ref = body["image_ref"].get<std::string>();
      for (const char* k : {"width", "height"}) {
        if (!body.contains(k) || !body[k].is_number_integer() || body[k].get<int>() <= 0) {
          throw SchemaError(std::string("/") + k, "expected a positive integer");
        }
      }
      s->width = body["width"].get<int>();
      s->height = body["height"].get<int>();
      if (body.contains("rig_id")) {
        if (!body["rig_id"].is_string()) throw SchemaError("/rig_id", "expected a string");
        s->rig_id = body["rig_id"].get<std::string>();
      }
      const KinematicRig& r = rig(s->rig_id);
      s->camera = body.contains("camera") ? camera_from_json(body["camera"], "/camera")
                                          : default_session_camera(s->width, s->height);
      if (body.contains("init_params")) {
        s->params = params_from_body(body["init_params"], "/init_params");
        try {
          check_params(r, s->params);
        } catch (const Error& e) {
          throw SchemaError("/init_params", e.what());
        }
      } else {
        s->params = default_session_params(r);
      }
      if (body.contains("keypoints")) {
        s->keypoints = merge_keypoints({}, keypoints_from_body(body["keypoints"], "/keypoints"));
        check_keypoint_ids(r, s->keypoints);
      }
      {
        std::lock_guard lock(mutex_);
        char buf[32];
        std::snprintf(buf, sizeof buf, "s%06d", next_id_++);
        s->id = buf;
        sessions_[s->id] = s;
      }
      std::lock_guard lock(s->mutex);
      journal(*s);
      send(res, 201, Json{{"session_id", s->id}});
    });
  });

  srv.Get(R"(/v1/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto s = find(req.matches[1]);
      std::lock_guard lock(s->mutex);
      send(res, 200, s->state());
    });
  });

  srv.Put(R"(/v1/sessions/([^/]+)/keypoints)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto s = find(req.matches[1]);
      const Json body = body_json(req);
      for (auto it = body.begin(); it != body.end(); ++it) {
        if (it.key() != "keypoints") throw SchemaError("/" + it.key(), "unknown field");
      }
      if (!body.contains("keypoints")) throw SchemaError("/keypoints", "missing field");
      const ObservationSet update = keypoints_from_body(body["keypoints"], "/keypoints");
      check_keypoint_ids(rig(s->rig_id), update);
      std::lock_guard lock(s->mutex);
      s->keypoints = merge_keypoints(s->keypoints, update);
      s->dirty = true;
      journal(*s);
      send(res, 200, s->state());
    });
  });

  srv.Post(R"(/v1/sessions/([^/]+)/fit)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto s = find(req.matches[1]);
      const Json body = body_json(req);
      for (auto it = body.begin(); it != body.end(); ++it) {
        if (it.key() != "config" && it.key() != "mode") throw SchemaError("/" + it.key(), "unknown field");
      }
      std::string mode = "full";
      if (body.contains("mode")) {
        if (!body["mode"].is_string()) throw SchemaError("/mode", "expected a string");
        mode = body["mode"].get<std::string>();
        if (mode != "full" && mode != "prompted") throw SchemaError("/mode", "expected \"full\" or \"prompted\"");
      }
      FitConfig config = options_.config.fit.single;
      if (body.contains("config")) {
        Json cj = body["config"];
        if (!cj.is_object()) throw SchemaError("/config", "expected an object");
        if (!cj.contains("schema")) cj["schema"] = schema_id("fit_config");
        config = config_from_json(cj).fit.single;
      }
      const KinematicRig& r = rig(s->rig_id);

      Camera camera;
      RigParams params;
      ObservationSet keypoints;
      {
        std::lock_guard lock(s->mutex);
        if (s->fitting) throw HttpError(409, "a fit is already running for this session");
        s->fitting = true;
        camera = s->camera;
        params = s->params;
        keypoints = s->keypoints;
      }
      struct Release {
        Session& s;
        ~Release() {
          std::lock_guard lock(s.mutex);
          s.fitting = false;
        }
      } release{*s};

      FitResult fit;
      int pairs = 0;
      if (mode == "full") {
        fit = fit_single_view(r, params, camera, keypoints, prior_.get(), config);
        pairs = count_visible(keypoints) - fit.dropped;
      } else {
        std::vector<Prompt> prompts;
        ObservationSet context;
        for (const auto& o : keypoints) {
          if (!o.visible) continue;
          if (o.prompt) {
            prompts.push_back({o.id, o.uv});
          } else {
            context.push_back(o);
          }
        }
        if (prompts.empty()) throw UnderConstrainedError("prompted fit needs at least one visible prompt keypoint");
        fit = prompted_refine(r, params, camera, prompts, config, context, prior_.get());
        pairs = static_cast<int>(prompts.size() + context.size()) - fit.dropped;
      }
      const Json result = fit_json(fit, mode, pairs);
      std::lock_guard lock(s->mutex);
      s->params = fit.params;
      if (config.refine_camera) s->camera = fit.camera;
      s->history.push_back(result);
      s->dirty = false;
      journal(*s);
      send(res, 200, result);
    });
  });

  srv.Get(R"(/v1/sessions/([^/]+)/overlay)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto s = find(req.matches[1]);
      const KinematicRig& r = rig(s->rig_id);
      std::lock_guard lock(s->mutex);
      const SkeletonState<double> state = forward_kinematics<double>(r, s->params);
      Json joints = Json::array();
      Json bones = Json::array();
      for (int j = 0; j < r.num_joints(); ++j) {
        if (r.joints[j].parent >= 0) bones.push_back({r.joints[j].parent, j});
        const auto uv = try_project<double>(s->camera, Eigen::Vector3d(state.positions.col(j)));
        if (uv) joints.push_back({{"id", j}, {"u", uv->x()}, {"v", uv->y()}});
      }
      const Eigen::Matrix3Xd verts = skin_vertices<double>(r, s->params, state, r.keypoints.dense);
      Json sample = Json::array();
      for (size_t i = 0; i < r.keypoints.dense.size(); ++i) {
        const auto uv = try_project<double>(s->camera, Eigen::Vector3d(verts.col(i)));
        if (uv) sample.push_back({{"id", r.num_joints() + r.keypoints.dense[i]}, {"u", uv->x()}, {"v", uv->y()}});
      }
      send(res, 200, Json{{"joints2d", joints}, {"bones", bones}, {"vertices2d_sample", sample}});
    });
  });
}

}  // namespace rigfit
