#include "rigfit/io.hpp"

#include "rigfit/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace rigfit {

namespace fs = std::filesystem;

const char* tool_version() { return "0.1.0"; }

std::string schema_id(const std::string& kind) { return "rigfit/" + kind + "/v" + std::to_string(kSchemaMajor); }

void check_schema(const Json& j, const std::string& kind) {
  if (!j.is_object()) throw SchemaError("", "document must be a JSON object");
  if (!j.contains("schema") || !j["schema"].is_string()) throw SchemaError("schema", "missing schema identifier");
  const std::string s = j["schema"].get<std::string>();
  const std::string prefix = "rigfit/" + kind + "/v";
  if (s.rfind(prefix, 0) != 0) throw SchemaError("schema", "expected " + schema_id(kind) + ", got '" + s + "'");
  const std::string ver = s.substr(prefix.size());
  const std::string major = ver.substr(0, ver.find('.'));
  if (major != std::to_string(kSchemaMajor)) throw SchemaError("schema", "unsupported major version in '" + s + "'");
}

Json parse_json(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    // Byte offset to line and column.
    const size_t at = std::min<size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const size_t line = 1 + std::count(text.begin(), text.begin() + at, '\n');
    const size_t nl = text.rfind('\n', at == 0 ? 0 : at - 1);
    const size_t col = nl == std::string::npos || at == 0 ? at + 1 : at - nl;
    throw SchemaError(source + ":" + std::to_string(line) + ":" + std::to_string(col), "invalid JSON");
  }
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError(path.string(), "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str(), path.string());
}

namespace {

void check_finite(const Json& j, const std::string& path) {
  if (j.is_number_float() && !std::isfinite(j.get<double>())) throw NumericError(path + ": non-finite number");
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) check_finite(it.value(), path + "/" + it.key());
  } else if (j.is_array()) {
    for (size_t i = 0; i < j.size(); ++i) check_finite(j[i], path + "/" + std::to_string(i));
  }
}

}  // namespace

std::string dump_json(const Json& j) {
  check_finite(j, "");
  return j.dump(2) + "\n";
}

void write_json_file(const fs::path& path, const Json& j) {
  const std::string text = dump_json(j);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError(path.string(), "cannot write file");
  out << text;
}

std::string content_hash(const Json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

// Field access with JSON-path diagnostics.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError(path_, "expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!ok.count(it.key())) throw SchemaError(at(it.key()), "unknown field");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  std::string at(const std::string& key) const { return path_ + "/" + key; }

  const Json& get(const char* key) const {
    if (!j_.contains(key)) throw SchemaError(at(key), "missing field");
    return j_[key];
  }

  double number(const char* key) const { return as_number(get(key), at(key)); }
  double number(const char* key, double def) const { return has(key) ? number(key) : def; }
  int integer(const char* key) const { return as_int(get(key), at(key)); }
  int integer(const char* key, int def) const { return has(key) ? integer(key) : def; }
  bool boolean(const char* key, bool def) const {
    if (!has(key)) return def;
    if (!get(key).is_boolean()) throw SchemaError(at(key), "expected a boolean");
    return get(key).get<bool>();
  }
  std::string string(const char* key) const {
    if (!get(key).is_string()) throw SchemaError(at(key), "expected a string");
    return get(key).get<std::string>();
  }
  Reader object(const char* key) const { return Reader(get(key), at(key)); }

  static double as_number(const Json& v, const std::string& path) {
    if (!v.is_number()) throw SchemaError(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw SchemaError(path, "non-finite number");
    return d;
  }
  static int as_int(const Json& v, const std::string& path) {
    if (!v.is_number_integer()) throw SchemaError(path, "expected an integer");
    return v.get<int>();
  }

 private:
  const Json& j_;
  std::string path_;
};

const Json& array_at(const Json& j, const std::string& path, std::optional<size_t> size = std::nullopt) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
  if (size && j.size() != *size) {
    throw SchemaError(path, "expected " + std::to_string(*size) + " entries, got " + std::to_string(j.size()));
  }
  return j;
}

Eigen::VectorXd vector_from(const Json& j, const std::string& path, std::optional<size_t> size = std::nullopt) {
  array_at(j, path, size);
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[i] = Reader::as_number(j[i], path + "/" + std::to_string(i));
  return v;
}

std::vector<int> ints_from(const Json& j, const std::string& path) {
  array_at(j, path);
  std::vector<int> v;
  for (size_t i = 0; i < j.size(); ++i) v.push_back(Reader::as_int(j[i], path + "/" + std::to_string(i)));
  return v;
}

template <int Rows>
Eigen::Matrix<double, Rows, Eigen::Dynamic> columns_from(const Json& j, const std::string& path) {
  array_at(j, path);
  Eigen::Matrix<double, Rows, Eigen::Dynamic> m(Rows, j.size());
  for (size_t i = 0; i < j.size(); ++i) m.col(i) = vector_from(j[i], path + "/" + std::to_string(i), Rows);
  return m;
}

Json vector_json(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

template <typename Derived>
Json columns_json(const Eigen::MatrixBase<Derived>& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.cols(); ++i) out.push_back(vector_json(m.col(i)));
  return out;
}

Json matrix_rows_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_json(m.row(r).transpose()));
  return out;
}

Eigen::MatrixXd matrix_rows_from(const Json& j, const std::string& path, size_t rows, size_t cols) {
  array_at(j, path, rows);
  Eigen::MatrixXd m(rows, cols);
  for (size_t r = 0; r < rows; ++r) m.row(r) = vector_from(j[r], path + "/" + std::to_string(r), cols).transpose();
  return m;
}

// Rethrows domain validation failures as schema errors on `path`.
template <typename F>
auto validated(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(path, e.what());
  }
}

Json header(const std::string& kind) { return Json{{"schema", schema_id(kind)}}; }

}  // namespace

// Cameras

Json to_json(const Camera& c) {
  return Json{{"fx", c.fx},
              {"fy", c.fy},
              {"cx", c.cx},
              {"cy", c.cy},
              {"width", c.width},
              {"height", c.height},
              {"rotation", matrix_rows_json(c.rotation)},
              {"translation", vector_json(c.translation)}};
}

Camera camera_from_json(const Json& j, const std::string& path) {
  Reader r(j, path);
  r.allow({"fx", "fy", "cx", "cy", "width", "height", "rotation", "translation"});
  Camera c;
  c.fx = r.number("fx");
  c.fy = r.number("fy");
  c.cx = r.number("cx");
  c.cy = r.number("cy");
  c.width = r.integer("width");
  c.height = r.integer("height");
  c.rotation = matrix_rows_from(r.get("rotation"), r.at("rotation"), 3, 3);
  c.translation = vector_from(r.get("translation"), r.at("translation"), 3);
  validated(path, [&] {
    check_camera(c);
    return 0;
  });
  return c;
}

Json cameras_to_json(const std::vector<Camera>& cameras) {
  Json j = header("cameras");
  j["cameras"] = Json::array();
  for (const auto& c : cameras) j["cameras"].push_back(to_json(c));
  return j;
}

std::vector<Camera> cameras_from_json(const Json& j) {
  check_schema(j, "cameras");
  Reader r(j, "");
  r.allow({"schema", "cameras"});
  const Json& arr = array_at(r.get("cameras"), "/cameras");
  if (arr.empty()) throw SchemaError("/cameras", "no cameras");
  std::vector<Camera> out;
  for (size_t i = 0; i < arr.size(); ++i) out.push_back(camera_from_json(arr[i], "/cameras/" + std::to_string(i)));
  return out;
}

// Rig

Json rig_to_json(const KinematicRig& rig) {
  Json j = header("rig");
  Json joints = Json::array();
  for (const auto& jt : rig.joints) {
    joints.push_back({{"name", jt.name}, {"parent", jt.parent}, {"rest_offset", vector_json(jt.rest_offset)}});
  }
  j["joints"] = joints;
  j["template_vertices"] = columns_json(rig.template_vertices);
  Json skin = Json::array();
  for (const auto& ws : rig.skinning) {
    Json row = Json::array();
    for (const auto& w : ws) row.push_back({{"joint", w.joint}, {"weight", w.weight}});
    skin.push_back(row);
  }
  j["skinning"] = skin;
  Json anchors = Json::array();
  for (const auto& a : rig.anchors) anchors.push_back({{"joint", a.joint}, {"t", a.t}});
  j["anchors"] = anchors;
  Json basis = Json::array();
  for (const auto& b : rig.shape_basis) basis.push_back(columns_json(b));
  j["shape_basis"] = basis;
  j["limits"] = {{"lo", columns_json(rig.limits_lo)}, {"hi", columns_json(rig.limits_hi)}};
  for (Side s : {Side::left, Side::right}) {
    const auto& h = rig.hands[static_cast<int>(s)];
    j["hands"][s == Side::left ? "left" : "right"] = {{"wrist", h.wrist}, {"joints", h.joints}};
  }
  j["keypoints"] = {{"eval24", rig.keypoints.eval24},
                    {"body17", rig.keypoints.body17},
                    {"feet6", rig.keypoints.feet6},
                    {"dense", rig.keypoints.dense}};
  return j;
}

KinematicRig rig_from_json(const Json& j) {
  check_schema(j, "rig");
  Reader r(j, "");
  r.allow({"schema", "joints", "template_vertices", "skinning", "anchors", "shape_basis", "limits", "hands",
           "keypoints"});
  KinematicRig rig;
  const Json& joints = array_at(r.get("joints"), "/joints");
  for (size_t i = 0; i < joints.size(); ++i) {
    Reader jr(joints[i], "/joints/" + std::to_string(i));
    jr.allow({"name", "parent", "rest_offset"});
    rig.joints.push_back({jr.string("name"), jr.integer("parent"),
                          vector_from(jr.get("rest_offset"), jr.at("rest_offset"), 3)});
  }
  rig.template_vertices = columns_from<3>(r.get("template_vertices"), "/template_vertices");
  const Json& skin = array_at(r.get("skinning"), "/skinning");
  for (size_t v = 0; v < skin.size(); ++v) {
    const std::string p = "/skinning/" + std::to_string(v);
    std::vector<SkinWeight> ws;
    const Json& row = array_at(skin[v], p);
    for (size_t k = 0; k < row.size(); ++k) {
      Reader wr(row[k], p + "/" + std::to_string(k));
      wr.allow({"joint", "weight"});
      ws.push_back({wr.integer("joint"), wr.number("weight")});
    }
    rig.skinning.push_back(std::move(ws));
  }
  const Json& anchors = array_at(r.get("anchors"), "/anchors");
  for (size_t v = 0; v < anchors.size(); ++v) {
    Reader ar(anchors[v], "/anchors/" + std::to_string(v));
    ar.allow({"joint", "t"});
    rig.anchors.push_back({ar.integer("joint"), ar.number("t")});
  }
  const Json& basis = array_at(r.get("shape_basis"), "/shape_basis");
  for (size_t b = 0; b < basis.size(); ++b) {
    rig.shape_basis.push_back(columns_from<3>(basis[b], "/shape_basis/" + std::to_string(b)));
  }
  Reader lr = r.object("limits");
  lr.allow({"lo", "hi"});
  rig.limits_lo = columns_from<3>(lr.get("lo"), "/limits/lo");
  rig.limits_hi = columns_from<3>(lr.get("hi"), "/limits/hi");
  Reader hr = r.object("hands");
  hr.allow({"left", "right"});
  for (Side s : {Side::left, Side::right}) {
    const char* name = s == Side::left ? "left" : "right";
    Reader h = hr.object(name);
    h.allow({"wrist", "joints"});
    rig.hands[static_cast<int>(s)] = {h.integer("wrist"), ints_from(h.get("joints"), h.at("joints"))};
  }
  Reader kr = r.object("keypoints");
  kr.allow({"eval24", "body17", "feet6", "dense"});
  rig.keypoints.eval24 = ints_from(kr.get("eval24"), "/keypoints/eval24");
  rig.keypoints.body17 = ints_from(kr.get("body17"), "/keypoints/body17");
  rig.keypoints.feet6 = ints_from(kr.get("feet6"), "/keypoints/feet6");
  rig.keypoints.dense = ints_from(kr.get("dense"), "/keypoints/dense");
  validated("rig", [&] {
    rig.validate();
    return 0;
  });
  return rig;
}

// Parameters

Json params_body(const RigParams& p) {
  return Json{{"pose", columns_json(p.pose)},
              {"root_translation", vector_json(p.root_translation)},
              {"skeleton", vector_json(p.skeleton)},
              {"shape", vector_json(p.shape)}};
}

RigParams params_from_body(const Json& j, const std::string& path) {
  Reader r(j, path);
  r.allow({"schema", "pose", "root_translation", "skeleton", "shape"});
  RigParams p;
  p.pose = columns_from<3>(r.get("pose"), r.at("pose"));
  p.root_translation = vector_from(r.get("root_translation"), r.at("root_translation"), 3);
  p.skeleton = vector_from(r.get("skeleton"), r.at("skeleton"));
  p.shape = vector_from(r.get("shape"), r.at("shape"));
  return p;
}

Json params_to_json(const RigParams& params) {
  Json j = params_body(params);
  j["schema"] = schema_id("params");
  return j;
}

RigParams params_from_json(const Json& j, const KinematicRig* rig) {
  check_schema(j, "params");
  RigParams p = params_from_body(j, "");
  if (rig) {
    validated("params", [&] {
      check_params(*rig, p);
      return 0;
    });
  }
  return p;
}

// Observations

Json keypoints_body(const ObservationSet& obs) {
  Json arr = Json::array();
  for (const auto& o : obs) {
    arr.push_back({{"id", o.id},
                   {"u", o.uv.x()},
                   {"v", o.uv.y()},
                   {"conf", o.confidence},
                   {"visible", o.visible},
                   {"prompt", o.prompt}});
  }
  return arr;
}

ObservationSet keypoints_from_body(const Json& j, const std::string& path) {
  array_at(j, path);
  ObservationSet out;
  for (size_t i = 0; i < j.size(); ++i) {
    Reader r(j[i], path + "/" + std::to_string(i));
    r.allow({"id", "u", "v", "conf", "visible", "prompt"});
    Observation2D o;
    o.id = r.integer("id");
    o.uv = Eigen::Vector2d(r.number("u"), r.number("v"));
    o.confidence = r.number("conf", 1.0);
    if (o.confidence < 0.0) throw SchemaError(r.at("conf"), "confidence must be non-negative");
    o.visible = r.boolean("visible", true);
    o.prompt = r.boolean("prompt", false);
    out.push_back(o);
  }
  return out;
}

Json obs2d_to_json(const ObservationFile& f) {
  Json j = header("obs2d");
  j["image"] = {{"width", f.width}, {"height", f.height}};
  if (f.frame) j["frame"] = *f.frame;
  if (f.view) j["view"] = *f.view;
  j["keypoints"] = keypoints_body(f.keypoints);
  return j;
}

ObservationFile obs2d_from_json(const Json& j) {
  check_schema(j, "obs2d");
  Reader r(j, "");
  r.allow({"schema", "image", "frame", "view", "keypoints"});
  ObservationFile f;
  Reader ir = r.object("image");
  ir.allow({"width", "height"});
  f.width = ir.integer("width");
  f.height = ir.integer("height");
  if (f.width <= 0 || f.height <= 0) throw SchemaError("/image", "image size must be positive");
  if (r.has("frame")) f.frame = r.integer("frame");
  if (r.has("view")) f.view = r.integer("view");
  f.keypoints = keypoints_from_body(r.get("keypoints"), "/keypoints");
  return f;
}

// GMM

Json gmm_to_json(const GmmPrior& prior) {
  Json j = header("gmm");
  j["weights"] = vector_json(prior.weights());
  j["means"] = Json::array();
  j["covariances"] = Json::array();
  for (int k = 0; k < prior.num_components(); ++k) {
    j["means"].push_back(vector_json(prior.means()[k]));
    j["covariances"].push_back(matrix_rows_json(prior.covariances()[k]));
  }
  return j;
}

GmmPrior gmm_from_json(const Json& j) {
  check_schema(j, "gmm");
  Reader r(j, "");
  r.allow({"schema", "weights", "means", "covariances"});
  const Eigen::VectorXd w = vector_from(r.get("weights"), "/weights");
  const size_t k = w.size();
  const Json& means = array_at(r.get("means"), "/means", k);
  const Json& covs = array_at(r.get("covariances"), "/covariances", k);
  if (k == 0) throw SchemaError("/weights", "no components");
  std::vector<Eigen::VectorXd> mu;
  std::vector<Eigen::MatrixXd> sigma;
  for (size_t i = 0; i < k; ++i) {
    mu.push_back(vector_from(means[i], "/means/" + std::to_string(i)));
    const size_t d = mu.back().size();
    sigma.push_back(matrix_rows_from(covs[i], "/covariances/" + std::to_string(i), d, d));
  }
  return validated("gmm", [&] { return GmmPrior(w, mu, sigma); });
}

// Fit configuration

Json config_to_json(const RunConfig& rc) {
  const FitConfig& c = rc.fit.single;
  const MultiFitConfig& m = rc.fit;
  Json j = header("fit_config");
  j["weights"] = {{"kp2d", c.weights.kp2d},
                  {"anchor_param", c.weights.anchor_param},
                  {"anchor_3d", c.weights.anchor_3d},
                  {"gmm", c.weights.gmm},
                  {"shape_l2", c.weights.shape_l2},
                  {"limits", c.weights.limits},
                  {"prompt_upweight", c.weights.prompt_upweight}};
  j["huber_px"] = c.huber_px;
  j["solver"] = c.solver == SolverKind::lm ? "lm" : "first_order";
  j["lm"] = {{"max_iters", c.lm.max_iters},     {"lambda_init", c.lm.lambda_init}, {"lambda_up", c.lm.lambda_up},
             {"lambda_down", c.lm.lambda_down}, {"tol", c.lm.tol},                 {"gradient_tol", c.lm.gradient_tol}};
  j["first_order"] = {{"step", c.first_order.step},   {"iters", c.first_order.iters},
                      {"tol", c.first_order.tol},     {"beta1", c.first_order.beta1},
                      {"beta2", c.first_order.beta2}, {"epsilon", c.first_order.epsilon}};
  j["refine_camera"] = c.refine_camera;
  j["frozen_blocks"] = c.frozen_blocks;
  Json mj = {{"lambda_kp3d", m.lambda_kp3d},
             {"lambda_accel", m.lambda_accel},
             {"refine_cameras", m.refine_cameras},
             {"smooth_tracks", m.smooth_tracks},
             {"smooth_window", m.smooth_window},
             {"ransac",
              {{"threshold_px", m.ransac.threshold_px},
               {"iterations", m.ransac.iterations},
               {"seed", m.ransac.seed}}},
             {"max_rounds", m.max_rounds},
             {"tol", m.tol},
             {"joint_polish", m.joint_polish},
             {"gate_outliers", m.gate_outliers}};
  if (m.lambda_smooth) mj["lambda_smooth"] = *m.lambda_smooth;
  j["multi"] = mj;
  if (rc.prior) j["prior"] = *rc.prior;
  return j;
}

RunConfig config_from_json(const Json& j) {
  check_schema(j, "fit_config");
  Reader r(j, "");
  r.allow({"schema", "weights", "huber_px", "solver", "lm", "first_order", "refine_camera", "frozen_blocks",
           "multi", "prior"});
  RunConfig rc;
  FitConfig& c = rc.fit.single;
  if (r.has("weights")) {
    Reader w = r.object("weights");
    w.allow({"kp2d", "anchor_param", "anchor_3d", "gmm", "shape_l2", "limits", "prompt_upweight"});
    c.weights.kp2d = w.number("kp2d", c.weights.kp2d);
    c.weights.anchor_param = w.number("anchor_param", c.weights.anchor_param);
    c.weights.anchor_3d = w.number("anchor_3d", c.weights.anchor_3d);
    c.weights.gmm = w.number("gmm", c.weights.gmm);
    c.weights.shape_l2 = w.number("shape_l2", c.weights.shape_l2);
    c.weights.limits = w.number("limits", c.weights.limits);
    c.weights.prompt_upweight = w.number("prompt_upweight", c.weights.prompt_upweight);
  }
  c.huber_px = r.number("huber_px", c.huber_px);
  if (r.has("solver")) {
    const std::string s = r.string("solver");
    if (s == "lm") {
      c.solver = SolverKind::lm;
    } else if (s == "first_order") {
      c.solver = SolverKind::first_order;
    } else {
      throw SchemaError("/solver", "expected \"lm\" or \"first_order\"");
    }
  }
  if (r.has("lm")) {
    Reader l = r.object("lm");
    l.allow({"max_iters", "lambda_init", "lambda_up", "lambda_down", "tol", "gradient_tol"});
    c.lm.max_iters = l.integer("max_iters", c.lm.max_iters);
    c.lm.lambda_init = l.number("lambda_init", c.lm.lambda_init);
    c.lm.lambda_up = l.number("lambda_up", c.lm.lambda_up);
    c.lm.lambda_down = l.number("lambda_down", c.lm.lambda_down);
    c.lm.tol = l.number("tol", c.lm.tol);
    c.lm.gradient_tol = l.number("gradient_tol", c.lm.gradient_tol);
  }
  if (r.has("first_order")) {
    Reader f = r.object("first_order");
    f.allow({"step", "iters", "tol", "beta1", "beta2", "epsilon"});
    c.first_order.step = f.number("step", c.first_order.step);
    c.first_order.iters = f.integer("iters", c.first_order.iters);
    c.first_order.tol = f.number("tol", c.first_order.tol);
    c.first_order.beta1 = f.number("beta1", c.first_order.beta1);
    c.first_order.beta2 = f.number("beta2", c.first_order.beta2);
    c.first_order.epsilon = f.number("epsilon", c.first_order.epsilon);
  }
  c.refine_camera = r.boolean("refine_camera", c.refine_camera);
  if (r.has("frozen_blocks")) {
    const Json& fb = array_at(r.get("frozen_blocks"), "/frozen_blocks");
    for (size_t i = 0; i < fb.size(); ++i) {
      if (!fb[i].is_string()) throw SchemaError("/frozen_blocks/" + std::to_string(i), "expected a string");
      c.frozen_blocks.push_back(fb[i].get<std::string>());
    }
  }
  if (r.has("multi")) {
    MultiFitConfig& m = rc.fit;
    Reader mr = r.object("multi");
    mr.allow({"lambda_kp3d", "lambda_smooth", "lambda_accel", "refine_cameras", "smooth_tracks", "smooth_window",
              "ransac", "max_rounds", "tol", "joint_polish", "gate_outliers"});
    m.lambda_kp3d = mr.number("lambda_kp3d", m.lambda_kp3d);
    if (mr.has("lambda_smooth")) m.lambda_smooth = mr.number("lambda_smooth");
    m.lambda_accel = mr.number("lambda_accel", m.lambda_accel);
    m.refine_cameras = mr.boolean("refine_cameras", m.refine_cameras);
    m.smooth_tracks = mr.boolean("smooth_tracks", m.smooth_tracks);
    m.smooth_window = mr.integer("smooth_window", m.smooth_window);
    if (mr.has("ransac")) {
      Reader rr = mr.object("ransac");
      rr.allow({"threshold_px", "iterations", "seed"});
      m.ransac.threshold_px = rr.number("threshold_px", m.ransac.threshold_px);
      m.ransac.iterations = rr.integer("iterations", m.ransac.iterations);
      if (rr.has("seed")) {
        if (!rr.get("seed").is_number_unsigned()) throw SchemaError("/multi/ransac/seed", "expected an unsigned integer");
        m.ransac.seed = rr.get("seed").get<std::uint64_t>();
      }
    }
    m.max_rounds = mr.integer("max_rounds", m.max_rounds);
    m.tol = mr.number("tol", m.tol);
    m.joint_polish = mr.boolean("joint_polish", m.joint_polish);
    m.gate_outliers = mr.boolean("gate_outliers", m.gate_outliers);
  }
  if (r.has("prior")) rc.prior = r.string("prior");
  validated("config", [&] {
    rc.fit.validate();
    return 0;
  });
  return rc;
}

// Ground truth

Json gt_to_json(const GroundTruthFile& gt) {
  Json j = header("gt");
  j["fps"] = gt.fps;
  j["keypoint_ids"] = gt.keypoint_ids;
  j["frames"] = Json::array();
  for (const auto& f : gt.frames) {
    Json fj = {{"params", params_body(f.params)}, {"joints", columns_json(f.joints)},
               {"vertices", columns_json(f.vertices)}};
    fj["views"] = Json::array();
    for (size_t v = 0; v < f.uv.size(); ++v) {
      fj["views"].push_back({{"uv", columns_json(f.uv[v])}, {"visible", f.visible[v]}});
    }
    j["frames"].push_back(fj);
  }
  return j;
}

GroundTruthFile gt_from_json(const Json& j) {
  check_schema(j, "gt");
  Reader r(j, "");
  r.allow({"schema", "fps", "keypoint_ids", "frames"});
  GroundTruthFile gt;
  gt.fps = r.number("fps");
  gt.keypoint_ids = ints_from(r.get("keypoint_ids"), "/keypoint_ids");
  const Json& frames = array_at(r.get("frames"), "/frames");
  for (size_t t = 0; t < frames.size(); ++t) {
    const std::string p = "/frames/" + std::to_string(t);
    Reader fr(frames[t], p);
    fr.allow({"params", "joints", "vertices", "views"});
    GroundTruthFile::Frame f;
    f.params = params_from_body(fr.get("params"), fr.at("params"));
    f.joints = columns_from<3>(fr.get("joints"), fr.at("joints"));
    f.vertices = columns_from<3>(fr.get("vertices"), fr.at("vertices"));
    const Json& views = array_at(fr.get("views"), fr.at("views"));
    for (size_t v = 0; v < views.size(); ++v) {
      const std::string vp = p + "/views/" + std::to_string(v);
      Reader vr(views[v], vp);
      vr.allow({"uv", "visible"});
      f.uv.push_back(columns_from<2>(vr.get("uv"), vr.at("uv")));
      const Json& vis = array_at(vr.get("visible"), vr.at("visible"), gt.keypoint_ids.size());
      std::vector<bool> flags;
      for (size_t i = 0; i < vis.size(); ++i) {
        if (!vis[i].is_boolean()) throw SchemaError(vp + "/visible/" + std::to_string(i), "expected a boolean");
        flags.push_back(vis[i].get<bool>());
      }
      if (static_cast<size_t>(f.uv.back().cols()) != gt.keypoint_ids.size()) {
        throw SchemaError(vr.at("uv"), "one entry per keypoint id expected");
      }
      f.visible.push_back(std::move(flags));
    }
    gt.frames.push_back(std::move(f));
  }
  return gt;
}

// Scenes

void SceneSettings::validate() const {
  if (cameras < 1) throw InvalidArgument("--cameras must be at least 1");
  if (frames < 1) throw InvalidArgument("--frames must be at least 1");
  if (!(noise_px >= 0.0)) throw InvalidArgument("--noise must be non-negative");
  for (double rate : {outlier_rate, occlusion_rate}) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw InvalidArgument("rates must lie in [0, 1]");
  }
  if (!(init_noise >= 0.0)) throw InvalidArgument("init noise must be non-negative");
  if (!(fps > 0.0) || !std::isfinite(fps)) throw InvalidArgument("fps must be positive");
}

namespace {

Json settings_to_json(const SceneSettings& s) {
  Json j = header("scene");
  j["seed"] = s.seed;
  j["cameras"] = s.cameras;
  j["frames"] = s.frames;
  j["noise_px"] = s.noise_px;
  j["outlier_rate"] = s.outlier_rate;
  j["occlusion_rate"] = s.occlusion_rate;
  j["init_noise"] = s.init_noise;
  j["fps"] = s.fps;
  j["version"] = tool_version();
  return j;
}

SceneSettings settings_from_json(const Json& j) {
  check_schema(j, "scene");
  Reader r(j, "");
  r.allow({"schema", "seed", "cameras", "frames", "noise_px", "outlier_rate", "occlusion_rate", "init_noise", "fps",
           "version"});
  SceneSettings s;
  if (!r.get("seed").is_number_unsigned()) throw SchemaError("/seed", "expected an unsigned integer");
  s.seed = r.get("seed").get<std::uint64_t>();
  s.cameras = r.integer("cameras");
  s.frames = r.integer("frames");
  s.noise_px = r.number("noise_px");
  s.outlier_rate = r.number("outlier_rate");
  s.occlusion_rate = r.number("occlusion_rate");
  s.init_noise = r.number("init_noise");
  s.fps = r.number("fps");
  validated("scene", [&] {
    s.validate();
    return 0;
  });
  return s;
}

std::string frame_name(int t, int v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "t%04d_v%02d.obs2d.json", t, v);
  return buf;
}

std::string init_name(int t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "t%04d.params.json", t);
  return buf;
}

}  // namespace

SceneBundle generate_scene(const SceneSettings& settings) {
  settings.validate();
  SceneBundle scene;
  scene.settings = settings;
  scene.rig = make_default_rig(settings.seed);
  scene.cameras = default_camera_ring(settings.cameras);
  const std::vector<RigParams> seq = sample_sequence(scene.rig, settings.frames, settings.seed);
  const RenderConfig rc{settings.noise_px, settings.outlier_rate, settings.occlusion_rate};
  scene.gt.fps = settings.fps;
  for (int t = 0; t < settings.frames; ++t) {
    const std::uint64_t key = CounterRng::mix(settings.seed) + static_cast<std::uint64_t>(t);
    const RenderedFrame frame = render_observations(scene.rig, seq[t], scene.cameras, rc, key);
    if (t == 0) scene.gt.keypoint_ids = frame.gt.keypoint_ids;
    GroundTruthFile::Frame f;
    f.params = frame.gt.params;
    f.joints = frame.gt.joints;
    f.vertices = frame.gt.vertices;
    std::vector<ObservationFile> views;
    for (int v = 0; v < settings.cameras; ++v) {
      f.uv.push_back(frame.gt.keypoints2d[v]);
      std::vector<bool> vis;
      for (const auto& o : frame.views[v]) vis.push_back(o.visible);
      f.visible.push_back(std::move(vis));
      views.push_back({scene.cameras[v].width, scene.cameras[v].height, t, v, frame.views[v]});
    }
    scene.gt.frames.push_back(std::move(f));
    scene.observations.push_back(std::move(views));
    scene.init.push_back(perturb_pose(seq[t], settings.init_noise, key ^ 0x696e6974ULL));
  }
  return scene;
}

void write_scene(const SceneBundle& scene, const fs::path& dir) {
  fs::create_directories(dir / "frames");
  fs::create_directories(dir / "init");
  write_json_file(dir / "scene.json", settings_to_json(scene.settings));
  write_json_file(dir / "rig.json", rig_to_json(scene.rig));
  write_json_file(dir / "cameras.json", cameras_to_json(scene.cameras));
  write_json_file(dir / "gt.json", gt_to_json(scene.gt));
  for (size_t t = 0; t < scene.observations.size(); ++t) {
    for (size_t v = 0; v < scene.observations[t].size(); ++v) {
      write_json_file(dir / "frames" / frame_name(t, v), obs2d_to_json(scene.observations[t][v]));
    }
  }
  for (size_t t = 0; t < scene.init.size(); ++t) {
    write_json_file(dir / "init" / init_name(t), params_to_json(scene.init[t]));
  }
}

SceneBundle read_scene(const fs::path& dir) {
  SceneBundle scene;
  scene.settings = settings_from_json(read_json_file(dir / "scene.json"));
  scene.rig = rig_from_json(read_json_file(dir / "rig.json"));
  scene.cameras = cameras_from_json(read_json_file(dir / "cameras.json"));
  if (static_cast<int>(scene.cameras.size()) != scene.settings.cameras) {
    throw SchemaError((dir / "cameras.json").string(), "camera count does not match scene.json");
  }
  if (fs::exists(dir / "gt.json")) scene.gt = gt_from_json(read_json_file(dir / "gt.json"));
  for (int t = 0; t < scene.settings.frames; ++t) {
    std::vector<ObservationFile> views;
    for (int v = 0; v < scene.settings.cameras; ++v) {
      views.push_back(obs2d_from_json(read_json_file(dir / "frames" / frame_name(t, v))));
    }
    scene.observations.push_back(std::move(views));
    const fs::path init = dir / "init" / init_name(t);
    if (fs::exists(init)) scene.init.push_back(params_from_json(read_json_file(init), &scene.rig));
  }
  if (!scene.init.empty() && static_cast<int>(scene.init.size()) != scene.settings.frames) {
    throw SchemaError((dir / "init").string(), "initialization missing for some frames");
  }
  return scene;
}

MultiViewSequence scene_sequence(const SceneBundle& scene) {
  MultiViewSequence seq;
  seq.cameras = scene.cameras;
  seq.fps = scene.settings.fps;
  for (const auto& views : scene.observations) {
    std::vector<ObservationSet> frame;
    for (const auto& v : views) frame.push_back(v.keypoints);
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

Categories categories_from_json(const Json& j) {
  check_schema(j, "categories");
  Reader r(j, "");
  r.allow({"schema", "frames"});
  const Json& frames = array_at(r.get("frames"), "/frames");
  Categories out;
  for (size_t i = 0; i < frames.size(); ++i) {
    const std::string p = "/frames/" + std::to_string(i);
    Reader fr(frames[i], p);
    fr.allow({"frame", "labels"});
    const int t = fr.integer("frame");
    const Json& labels = array_at(fr.get("labels"), fr.at("labels"));
    for (size_t k = 0; k < labels.size(); ++k) {
      if (!labels[k].is_string()) throw SchemaError(p + "/labels/" + std::to_string(k), "expected a string");
      out[t].push_back(labels[k].get<std::string>());
    }
  }
  return out;
}

}  // namespace rigfit
