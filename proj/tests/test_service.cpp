#include <doctest.h>

#include "helpers.hpp"
#include "rigfit/service.hpp"

#include <httplib.h>

#include <chrono>
#include <filesystem>
#include <thread>
#include <unistd.h>

using namespace rigfit;

namespace fs = std::filesystem;

namespace {

// A service on a free local port, served from a background thread.
class Running {
 public:
  explicit Running(const fs::path& dir) : service_(ServiceOptions{dir}) {
    port_ = service_.bind_any_port("127.0.0.1");
    REQUIRE(port_ > 0);
    thread_ = std::thread([this] { service_.listen_after_bind(); });
    service_.wait_until_ready();
  }
  ~Running() {
    service_.stop();
    thread_.join();
  }

  Service& service() { return service_; }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(60);
    return c;
  }

 private:
  Service service_;
  int port_ = -1;
  std::thread thread_;
};

Json body_of(const httplib::Result& r) {
  REQUIRE(r);
  return Json::parse(r->body);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rigfit_service_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

std::string create_session(httplib::Client& c) {
  const auto r = c.Post("/v1/sessions", R"({"image_ref": "img/0001.png", "width": 640, "height": 480})",
                        "application/json");
  REQUIRE(r);
  REQUIRE(r->status == 201);
  return body_of(r)["session_id"].get<std::string>();
}

Json overlay_joint(httplib::Client& c, const std::string& id, int joint) {
  const Json o = body_of(c.Get("/v1/sessions/" + id + "/overlay"));
  for (const auto& j : o["joints2d"]) {
    if (j["id"] == joint) return j;
  }
  FAIL("joint not in overlay");
  return {};
}

// Every joint at its current overlay position plus a shift.
Json all_joint_keypoints(httplib::Client& c, const std::string& id, double du) {
  Json kps = Json::array();
  const Json overlay = body_of(c.Get("/v1/sessions/" + id + "/overlay"));
  for (const auto& j : overlay["joints2d"]) {
    kps.push_back({{"id", j["id"]}, {"u", j["u"].get<double>() + du}, {"v", j["v"]}});
  }
  return kps;
}

httplib::Result put_keypoints(httplib::Client& c, const std::string& id, const Json& kps) {
  return c.Put("/v1/sessions/" + id + "/keypoints", Json{{"keypoints", kps}}.dump(), "application/json");
}

}  // namespace

TEST_CASE("health, rigs and CORS") {
  const fs::path dir = fresh_dir("health");
  Running run(dir);
  auto c = run.client();
  const auto h = c.Get("/v1/health");
  REQUIRE(h);
  CHECK(h->status == 200);
  CHECK(h->get_header_value("Access-Control-Allow-Origin") == "*");
  const Json rigs = body_of(c.Get("/v1/rigs"));
  CHECK(rigs.dump().find("default") != std::string::npos);
  const auto o = c.Options("/v1/sessions");
  REQUIRE(o);
  CHECK(o->status == 204);
  fs::remove_all(dir);
}

TEST_CASE("session create, read and keypoint merge") {
  const fs::path dir = fresh_dir("crud");
  Running run(dir);
  auto c = run.client();
  const std::string id = create_session(c);
  CHECK(id == "s000001");
  Json s = body_of(c.Get("/v1/sessions/" + id));
  CHECK(s["schema"] == "rigfit/session/v1");
  CHECK(s["image_ref"] == "img/0001.png");
  CHECK(s["width"] == 640);
  CHECK(s["keypoints"].empty());

  REQUIRE(put_keypoints(c, id, {{{"id", 5}, {"u", 10}, {"v", 20}}, {{"id", 2}, {"u", 1}, {"v", 2}}})->status == 200);
  const auto r = put_keypoints(c, id, {{{"id", 5}, {"u", 11}, {"v", 21}, {"prompt", true}}});
  REQUIRE(r->status == 200);
  s = body_of(r);
  REQUIRE(s["keypoints"].size() == 2);
  CHECK(s["keypoints"][0]["id"] == 2);
  CHECK(s["keypoints"][1]["u"] == 11.0);
  CHECK(s["keypoints"][1]["prompt"] == true);
  CHECK(s["dirty"] == true);
  CHECK(body_of(c.Get("/v1/sessions"))["sessions"].size() == 1);
  fs::remove_all(dir);
}

TEST_CASE("malformed requests get client errors") {
  const fs::path dir = fresh_dir("errors");
  Running run(dir);
  auto c = run.client();
  const auto missing = c.Get("/v1/sessions/s999999");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(body_of(missing)["error"]["status"] == 404);
  CHECK(c.Post("/v1/sessions", "{not json", "application/json")->status == 400);
  CHECK(c.Post("/v1/sessions", R"({"width": 640, "height": 480})", "application/json")->status == 400);
  const std::string id = create_session(c);
  CHECK(put_keypoints(c, id, {{{"id", 100000}, {"u", 1}, {"v", 1}}})->status == 400);
  CHECK(c.Put("/v1/sessions/" + id + "/keypoints", R"({"points": []})", "application/json")->status == 400);
  CHECK(c.Post("/v1/sessions/" + id + "/fit", R"({"mode": "psychic"})", "application/json")->status == 400);
  fs::remove_all(dir);
}

TEST_CASE("under-constrained fits are rejected") {
  const fs::path dir = fresh_dir("underconstrained");
  Running run(dir);
  auto c = run.client();
  const std::string id = create_session(c);
  Json kps = all_joint_keypoints(c, id, 0.0);
  for (auto& k : kps) k["visible"] = false;
  put_keypoints(c, id, kps);
  CHECK(c.Post("/v1/sessions/" + id + "/fit", "{}", "application/json")->status == 422);
  CHECK(c.Post("/v1/sessions/" + id + "/fit", R"({"mode": "prompted"})", "application/json")->status == 422);
  fs::remove_all(dir);
}

TEST_CASE("a full fit follows the keypoints") {
  const fs::path dir = fresh_dir("full");
  Running run(dir);
  auto c = run.client();
  const std::string id = create_session(c);
  const auto put = put_keypoints(c, id, all_joint_keypoints(c, id, 6.0));
  REQUIRE(put->status == 200);
  const auto r = c.Post("/v1/sessions/" + id + "/fit", "{}", "application/json");
  REQUIRE(r->status == 200);
  const Json fit = body_of(r);
  CHECK(fit["kp2d_pairs"] == test::default_rig().num_joints());
  CHECK(fit["final_cost"].get<double>() < fit["initial_cost"].get<double>());
  CHECK(fit["mean_reprojection_px"].get<double>() < 1.0);
  const Json s = body_of(c.Get("/v1/sessions/" + id));
  CHECK(s["history"].size() == 1);
  CHECK(s["dirty"] == false);
  fs::remove_all(dir);
}

TEST_CASE("a prompted fit moves the prompted joint to its target") {
  const fs::path dir = fresh_dir("prompted");
  Running run(dir);
  auto c = run.client();
  const std::string id = create_session(c);
  const int wrist = test::default_rig().find_joint("r_wrist");
  const Json before = overlay_joint(c, id, wrist);
  const double u = before["u"].get<double>() + 30.0;
  const double v = before["v"].get<double>();
  put_keypoints(c, id, {{{"id", wrist}, {"u", u}, {"v", v}, {"prompt", true}}});
  const auto r = c.Post("/v1/sessions/" + id + "/fit", R"({"mode": "prompted"})", "application/json");
  REQUIRE(r->status == 200);
  CHECK(body_of(r)["mode"] == "prompted");
  const Json after = overlay_joint(c, id, wrist);
  CHECK(std::hypot(after["u"].get<double>() - u, after["v"].get<double>() - v) < 2.0);
  fs::remove_all(dir);
}

TEST_CASE("a second fit on a busy session conflicts") {
  const fs::path dir = fresh_dir("conflict");
  Running run(dir);
  auto c = run.client();
  const std::string id = create_session(c);
  put_keypoints(c, id, all_joint_keypoints(c, id, 6.0));
  // Slow on purpose: many first-order steps with the stopping test disabled.
  const std::string slow =
      R"({"config": {"solver": "first_order", "first_order": {"iters": 200, "tol": 0, "step": 1e-6}}})";
  int first_status = 0;
  std::thread first([&] {
    auto c1 = run.client();
    const auto r = c1.Post("/v1/sessions/" + id + "/fit", slow, "application/json");
    first_status = r ? r->status : -1;
  });
  bool busy = false;
  for (int i = 0; i < 2000 && !busy; ++i) {
    busy = body_of(c.Get("/v1/sessions/" + id))["fitting"] == true;
    if (!busy) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  CHECK(busy);
  const auto second = c.Post("/v1/sessions/" + id + "/fit", "{}", "application/json");
  REQUIRE(second);
  CHECK(second->status == 409);
  first.join();
  CHECK(first_status == 200);
  fs::remove_all(dir);
}

TEST_CASE("sessions survive a restart") {
  const fs::path dir = fresh_dir("journal");
  std::string id;
  {
    Running run(dir);
    auto c = run.client();
    id = create_session(c);
    put_keypoints(c, id, {{{"id", 3}, {"u", 100}, {"v", 200}, {"conf", 0.7}}});
  }
  CHECK(fs::exists(dir / "sessions" / (id + ".json")));
  Running run(dir);
  CHECK(run.service().session_count() == 1);
  auto c = run.client();
  const Json s = body_of(c.Get("/v1/sessions/" + id));
  REQUIRE(s["keypoints"].size() == 1);
  CHECK(s["keypoints"][0]["conf"] == 0.7);
  CHECK(create_session(c) == "s000002");
  fs::remove_all(dir);
}
