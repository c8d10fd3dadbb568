// rigfit command-line tool. Reports go to --out (stdout with "-"); logs go to stderr.
//
// Exit codes: 0 success, 2 configuration or schema error, 3 numeric failure
// (a report stub with the error is still written).

#include "rigfit/report.hpp"
#include "rigfit/service.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <functional>
#include <iostream>

namespace {

using namespace rigfit;
namespace fs = std::filesystem;

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

void log(const std::string& msg) { std::cerr << "rigfit: " << msg << "\n"; }

void emit(const std::string& out, const Json& j) {
  if (out == "-") {
    std::cout << dump_json(j);
    std::cout.flush();
  } else {
    write_json_file(out, j);
  }
}

struct LoadedConfig {
  RunConfig config;
  Json json;  ///< resolved configuration; its hash goes into reports
  std::unique_ptr<GmmPrior> prior;
};

LoadedConfig load_config(const std::string& path) {
  LoadedConfig lc;
  if (!path.empty()) lc.config = config_from_json(read_json_file(path));
  lc.json = config_to_json(lc.config);
  if (lc.config.prior) {
    fs::path p = *lc.config.prior;
    if (p.is_relative() && !path.empty()) p = fs::path(path).parent_path() / p;
    lc.prior = std::make_unique<GmmPrior>(gmm_from_json(read_json_file(p)));
  }
  return lc;
}

// Runs a fitting command; numeric failures become a stub report and exit 3.
int with_stub(const std::string& command, const std::string& out, const Json& config, const std::function<Json()>& f) {
  std::string kind;
  std::string message;
  try {
    emit(out, f());
    return 0;
  } catch (const NumericError& e) {
    kind = "numeric";
    message = e.what();
  } catch (const GeometryError& e) {
    kind = "geometry";
    message = e.what();
  } catch (const UnderConstrainedError& e) {
    kind = "under_constrained";
    message = e.what();
  }
  log(command + " failed: " + message);
  try {
    emit(out, error_report(command, config, kind, message));
  } catch (const std::exception& e) {
    log(std::string("cannot write report stub: ") + e.what());
  }
  return kExitNumeric;
}

RigParams default_init(const KinematicRig& rig) {
  RigParams p = rest_params(rig);
  p.root_translation = Eigen::Vector3d(0.0, 0.95, 0.0);
  return p;
}

Service* g_service = nullptr;
void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinematic rig fitting, synthesis and evaluation"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);
  std::function<int()> action;

  // synth
  SceneSettings synth;
  std::string synth_out;
  auto* cmd_synth = app.add_subcommand("synth", "Generate a synthetic scene bundle");
  cmd_synth->add_option("--seed", synth.seed, "Scene seed");
  cmd_synth->add_option("--cameras", synth.cameras, "Number of cameras")->capture_default_str();
  cmd_synth->add_option("--frames", synth.frames, "Number of frames")->capture_default_str();
  cmd_synth->add_option("--noise", synth.noise_px, "Pixel noise sigma")->capture_default_str();
  cmd_synth->add_option("--outliers", synth.outlier_rate, "Outlier rate")->capture_default_str();
  cmd_synth->add_option("--occlusion", synth.occlusion_rate, "Occlusion rate")->capture_default_str();
  cmd_synth->add_option("--init-noise", synth.init_noise, "Pose noise of init/ params, rad")->capture_default_str();
  cmd_synth->add_option("--fps", synth.fps, "Frame rate")->capture_default_str();
  cmd_synth->add_option("--out", synth_out, "Output directory")->required();
  cmd_synth->callback([&] {
    action = [&] {
      const SceneBundle scene = generate_scene(synth);
      write_scene(scene, synth_out);
      log("wrote scene to " + synth_out);
      return 0;
    };
  });

  // fit-single
  std::string fs_rig, fs_obs, fs_camera, fs_init, fs_config, fs_gt, fs_out = "-";
  std::optional<int> fs_view, fs_frame;
  auto* cmd_fs = app.add_subcommand("fit-single", "Fit one view");
  cmd_fs->add_option("--rig", fs_rig, "rig.json")->required();
  cmd_fs->add_option("--obs", fs_obs, "obs2d file")->required();
  cmd_fs->add_option("--camera", fs_camera, "cameras file")->required();
  cmd_fs->add_option("--view", fs_view, "Camera index (default: the obs file's view)");
  cmd_fs->add_option("--init", fs_init, "Initial params (default: rest pose)");
  cmd_fs->add_option("--config", fs_config, "Fit configuration");
  cmd_fs->add_option("--gt", fs_gt, "gt.json; adds 3D metrics to the report");
  cmd_fs->add_option("--frame", fs_frame, "Ground-truth frame (default: the obs file's frame)");
  cmd_fs->add_option("--out", fs_out, "Report path or -")->capture_default_str();
  cmd_fs->callback([&] {
    action = [&] {
      LoadedConfig lc = load_config(fs_config);
      const KinematicRig rig = rig_from_json(read_json_file(fs_rig));
      const ObservationFile obs = obs2d_from_json(read_json_file(fs_obs));
      const std::vector<Camera> cams = cameras_from_json(read_json_file(fs_camera));
      const int view = fs_view ? *fs_view : (cams.size() == 1 ? 0 : obs.view.value_or(0));
      if (view < 0 || view >= static_cast<int>(cams.size())) throw InvalidArgument("--view out of range");
      if (cams[view].width != obs.width || cams[view].height != obs.height) {
        log("warning: observation image size differs from the camera's");
      }
      const RigParams init = fs_init.empty() ? default_init(rig) : params_from_json(read_json_file(fs_init), &rig);
      const int frame = fs_frame ? *fs_frame : obs.frame.value_or(0);
      std::optional<GroundTruthFile> gt;
      if (!fs_gt.empty()) {
        gt = gt_from_json(read_json_file(fs_gt));
        if (frame < 0 || frame >= static_cast<int>(gt->frames.size())) throw InvalidArgument("--frame out of range");
      }
      return with_stub("fit-single", fs_out, lc.json, [&] {
        const FitResult fit = fit_single_view(rig, init, cams[view], obs.keypoints, lc.prior.get(), lc.config.fit.single);
        log("fit-single: " + std::string(to_string(fit.status)) + ", " + std::to_string(fit.iterations) +
            " iterations, reprojection " + std::to_string(fit.mean_reprojection_px) + " px");
        Json report = single_fit_report(fit, frame, lc.json);
        if (gt) report["metrics"] = frame_metrics_3d(rig, fit.params, gt->frames[frame], {"mpjpe", "pa_mpjpe", "pve", "fscore"});
        return report;
      });
    };
  });

  // fit-multi
  std::string fm_scene, fm_config, fm_out = "-";
  bool fm_scene_init = false;
  auto* cmd_fm = app.add_subcommand("fit-multi", "Fit a multi-view sequence");
  cmd_fm->add_option("--scene", fm_scene, "Scene bundle directory")->required();
  cmd_fm->add_option("--config", fm_config, "Fit configuration");
  cmd_fm->add_flag("--scene-init", fm_scene_init, "Start from init/ instead of triangulation");
  cmd_fm->add_option("--out", fm_out, "Report path or -")->capture_default_str();
  cmd_fm->callback([&] {
    action = [&] {
      LoadedConfig lc = load_config(fm_config);
      const SceneBundle scene = read_scene(fm_scene);
      const MultiViewSequence seq = scene_sequence(scene);
      const bool use_init = fm_scene_init || seq.cameras.size() < 2;
      if (use_init && scene.init.empty()) throw InvalidArgument("scene has no init/ parameters");
      return with_stub("fit-multi", fm_out, lc.json, [&] {
        const MultiFitResult fit =
            fit_multi_view(scene.rig, seq, lc.prior.get(), lc.config.fit, use_init ? &scene.init : nullptr);
        for (const auto& w : fit.warnings) log("warning: " + w);
        log("fit-multi: " + std::to_string(fit.rounds) + " rounds, final cost " + std::to_string(fit.final_cost));
        return multi_fit_report(fit, lc.json);
      });
    };
  });

  // eval
  std::string ev_pred, ev_gt, ev_rig, ev_cameras, ev_metrics, ev_categories, ev_out = "-";
  auto* cmd_ev = app.add_subcommand("eval", "Evaluate predictions against ground truth");
  cmd_ev->add_option("--pred", ev_pred, "Fit report or params file")->required();
  cmd_ev->add_option("--gt", ev_gt, "gt.json")->required();
  cmd_ev->add_option("--rig", ev_rig, "rig.json (default: next to gt.json)");
  cmd_ev->add_option("--cameras", ev_cameras, "Cameras for 2D metrics (default: the report's, else next to gt.json)");
  cmd_ev->add_option("--metrics", ev_metrics, "Comma list of mpjpe,pa_mpjpe,pve,pck,fscore,jitter");
  cmd_ev->add_option("--categories", ev_categories, "Per-frame category labels");
  cmd_ev->add_option("--out", ev_out, "Report path or -")->capture_default_str();
  cmd_ev->callback([&] {
    action = [&] {
      const std::set<std::string> metrics = parse_metric_list(ev_metrics);
      const fs::path gt_dir = fs::path(ev_gt).parent_path();
      const KinematicRig rig = rig_from_json(read_json_file(ev_rig.empty() ? gt_dir / "rig.json" : fs::path(ev_rig)));
      const GroundTruthFile gt = gt_from_json(read_json_file(ev_gt));
      Predictions pred = predictions_from_json(read_json_file(ev_pred), rig);
      std::vector<Camera> cameras;
      if (!ev_cameras.empty()) {
        cameras = cameras_from_json(read_json_file(ev_cameras));
      } else if (!pred.cameras.empty() && pred.cameras.size() == gt.frames.at(0).uv.size()) {
        cameras = pred.cameras;
      } else if (metrics.count("pck")) {
        cameras = cameras_from_json(read_json_file(gt_dir / "cameras.json"));
      }
      Categories categories;
      Json config = {{"metrics", std::vector<std::string>(metrics.begin(), metrics.end())}};
      if (!ev_categories.empty()) {
        const Json cj = read_json_file(ev_categories);
        categories = categories_from_json(cj);
        config["categories"] = cj;
      }
      return with_stub("eval", ev_out, config, [&] {
        Json report = evaluate(rig, pred.params, cameras, gt, metrics, categories, pred.frames);
        report["config_hash"] = content_hash(config);
        return report;
      });
    };
  });

  // serve
  ServiceOptions serve;
  std::string sv_host = "127.0.0.1", sv_rig, sv_config, sv_static;
  int sv_port = 8080;
  auto* cmd_sv = app.add_subcommand("serve", "Run the HTTP annotation service");
  cmd_sv->add_option("--port", sv_port, "Port")->capture_default_str();
  cmd_sv->add_option("--host", sv_host, "Bind address")->capture_default_str();
  cmd_sv->add_option("--data-dir", serve.data_dir, "Session journal directory")->required();
  cmd_sv->add_option("--rig", sv_rig, "Extra rig file, registered under its file stem");
  cmd_sv->add_option("--config", sv_config, "Default fit configuration");
  cmd_sv->add_option("--static", sv_static, "Directory served at /");
  cmd_sv->add_option("--cors-origin", serve.cors_origin, "Allowed CORS origin")->capture_default_str();
  cmd_sv->callback([&] {
    action = [&] {
      LoadedConfig lc = load_config(sv_config);
      serve.config = lc.config;
      serve.static_dir = sv_static;
      Service service(serve);
      if (!sv_rig.empty()) service.add_rig(fs::path(sv_rig).stem().string(), rig_from_json(read_json_file(sv_rig)));
      if (lc.prior) service.set_prior(std::shared_ptr<const GmmPrior>(std::move(lc.prior)));
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      log("serving on http://" + sv_host + ":" + std::to_string(sv_port) + "/v1");
      const bool ok = service.listen(sv_host, sv_port);
      g_service = nullptr;
      if (!ok) {
        log("cannot bind " + sv_host + ":" + std::to_string(sv_port));
        return kExitConfig;
      }
      return 0;
    };
  });

  // prior
  std::string pr_rig, pr_out;
  std::uint64_t pr_seed = 0;
  int pr_components = 8, pr_samples = 2000, pr_iters = 30;
  auto* cmd_pr = app.add_subcommand("prior", "Fit a GMM pose prior to sampled poses");
  cmd_pr->add_option("--rig", pr_rig, "rig.json (default: the built-in rig)");
  cmd_pr->add_option("--seed", pr_seed, "Sampling seed");
  cmd_pr->add_option("--components", pr_components, "Mixture components")->capture_default_str();
  cmd_pr->add_option("--samples", pr_samples, "Training poses")->capture_default_str();
  cmd_pr->add_option("--iters", pr_iters, "EM iterations")->capture_default_str();
  cmd_pr->add_option("--out", pr_out, "gmm file or -")->required();
  cmd_pr->callback([&] {
    action = [&] {
      const KinematicRig rig = pr_rig.empty() ? make_default_rig(0) : rig_from_json(read_json_file(pr_rig));
      emit(pr_out, gmm_to_json(default_pose_prior(rig, pr_seed, pr_components, pr_samples, pr_iters)));
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    return action();
  } catch (const SchemaError& e) {
    log(std::string("schema error: ") + e.what());
  } catch (const NumericError& e) {
    log(std::string("numeric error: ") + e.what());
    return kExitNumeric;
  } catch (const Error& e) {
    log(std::string("error: ") + e.what());
  } catch (const fs::filesystem_error& e) {
    log(std::string("file error: ") + e.what());
  }
  return kExitConfig;
}
