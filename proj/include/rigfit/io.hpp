#pragma once

// JSON file formats. Every document carries "schema": "rigfit/<kind>/v<major>"
// and loaders reject other kinds and unknown major versions. Lengths are
// meters and angles radians throughout; NaN and infinity are never written.

#include "rigfit/fit_multi.hpp"
#include "rigfit/priors.hpp"
#include "rigfit/synth.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rigfit {

using Json = nlohmann::json;

const char* tool_version();

inline constexpr int kSchemaMajor = 1;
std::string schema_id(const std::string& kind);
/// Throws SchemaError unless j["schema"] is rigfit/<kind>/v1 or v1.<minor>.
void check_schema(const Json& j, const std::string& kind);

/// Parse errors become SchemaError("<source>:<line>:<column>", ...).
Json parse_json(const std::string& text, const std::string& source = "<input>");
Json read_json_file(const std::filesystem::path& path);
/// Two-space indented with a trailing newline. Throws NumericError on non-finite numbers.
std::string dump_json(const Json& j);
void write_json_file(const std::filesystem::path& path, const Json& j);
/// 16 hex digits of FNV-1a over the compact dump.
std::string content_hash(const Json& j);

Json to_json(const Camera& camera);
Camera camera_from_json(const Json& j, const std::string& path = "");
Json cameras_to_json(const std::vector<Camera>& cameras);
std::vector<Camera> cameras_from_json(const Json& j);

Json rig_to_json(const KinematicRig& rig);
KinematicRig rig_from_json(const Json& j);

Json params_body(const RigParams& params);
RigParams params_from_body(const Json& j, const std::string& path);
Json params_to_json(const RigParams& params);
/// Validated against `rig` when given.
RigParams params_from_json(const Json& j, const KinematicRig* rig = nullptr);

struct ObservationFile {
  int width = 0;
  int height = 0;
  std::optional<int> frame;
  std::optional<int> view;
  ObservationSet keypoints;
};
Json keypoints_body(const ObservationSet& obs);
ObservationSet keypoints_from_body(const Json& j, const std::string& path);
Json obs2d_to_json(const ObservationFile& file);
ObservationFile obs2d_from_json(const Json& j);

Json gmm_to_json(const GmmPrior& prior);
GmmPrior gmm_from_json(const Json& j);

/// Fit configuration for both pipelines. `prior` is a gmm file path resolved
/// against the config file's directory; without it the GMM term is off.
struct RunConfig {
  MultiFitConfig fit;
  std::optional<std::string> prior;
};
Json config_to_json(const RunConfig& config);
/// Missing fields keep their defaults; unknown fields are errors.
RunConfig config_from_json(const Json& j);

/// Ground truth of a sequence: per frame params, joints and vertices, and per
/// view the exact projections with their visibility.
struct GroundTruthFile {
  double fps = 30.0;
  std::vector<int> keypoint_ids;
  struct Frame {
    RigParams params;
    Eigen::Matrix3Xd joints;
    Eigen::Matrix3Xd vertices;
    std::vector<Eigen::Matrix2Xd> uv;         ///< per view
    std::vector<std::vector<bool>> visible;  ///< per view
  };
  std::vector<Frame> frames;
};
Json gt_to_json(const GroundTruthFile& gt);
GroundTruthFile gt_from_json(const Json& j);

struct SceneSettings {
  std::uint64_t seed = 0;
  int cameras = 4;
  int frames = 5;
  double noise_px = 0.0;
  double outlier_rate = 0.0;
  double occlusion_rate = 0.0;
  double init_noise = 0.1;
  double fps = 30.0;

  /// Throws InvalidArgument on counts < 1 or rates outside [0, 1].
  void validate() const;
};

/// Scene bundle layout: scene.json, rig.json, cameras.json, gt.json,
/// frames/t<T>_v<V>.obs2d.json, and init/t<T>.params.json (the ground truth
/// with pose noise of `init_noise` rad, for single-camera fits).
struct SceneBundle {
  SceneSettings settings;
  KinematicRig rig;
  std::vector<Camera> cameras;
  GroundTruthFile gt;
  std::vector<std::vector<ObservationFile>> observations;  ///< [t][v]
  std::vector<RigParams> init;
};

SceneBundle generate_scene(const SceneSettings& settings);
void write_scene(const SceneBundle& scene, const std::filesystem::path& dir);
SceneBundle read_scene(const std::filesystem::path& dir);
MultiViewSequence scene_sequence(const SceneBundle& scene);

/// Free-form labels per frame.
using Categories = std::map<int, std::vector<std::string>>;
Categories categories_from_json(const Json& j);

}  // namespace rigfit
