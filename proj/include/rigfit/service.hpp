#pragma once

// HTTP annotation service under /v1. Sessions hold an image reference, the
// current keypoints, parameters, camera and fit history; every mutation is
// journaled to <data-dir>/sessions/<id>.json so a restart resumes them.

#include "rigfit/io.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace httplib {
class Server;
}

namespace rigfit {

struct ServiceOptions {
  std::filesystem::path data_dir;
  std::string cors_origin = "*";
  /// Served at "/" when set (the browser client's build output).
  std::filesystem::path static_dir;
  /// Default fit configuration; a request's "config" overrides it.
  RunConfig config;
};

class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Rigs available to new sessions. "default" (make_default_rig(0)) is
  /// registered on construction.
  void add_rig(const std::string& id, KinematicRig rig);
  void set_prior(std::shared_ptr<const GmmPrior> prior);

  /// Binds and serves until stop(). Returns false if binding fails.
  bool listen(const std::string& host, int port);
  /// Binds to a free port and returns it (or -1); serve with listen_after_bind().
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

  int session_count() const;

 private:
  struct Session;

  void routes();
  void load_journal();
  void journal(const Session& s) const;
  std::shared_ptr<Session> find(const std::string& id) const;
  const KinematicRig& rig(const std::string& id) const;

  ServiceOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::map<std::string, KinematicRig> rigs_;
  std::shared_ptr<const GmmPrior> prior_;
  mutable std::mutex mutex_;  ///< guards sessions_ and next_id_
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  int next_id_ = 1;
};

}  // namespace rigfit
