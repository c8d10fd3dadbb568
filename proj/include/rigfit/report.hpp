#pragma once

// Fit and evaluation reports. Reports are pure functions of their inputs, so
// rerunning a command on the same files reproduces them byte for byte.

#include "rigfit/io.hpp"

#include <set>
#include <string>
#include <vector>

namespace rigfit {

/// Metric names accepted by evaluate(): mpjpe, pa_mpjpe, pve, pck, fscore, jitter.
const std::set<std::string>& known_metrics();
/// Comma-separated list, spaces ignored; empty selects everything. Throws InvalidArgument on unknown names.
std::set<std::string> parse_metric_list(const std::string& list);

/// 3D metrics of one frame over the rig's eval24 joints (MPJPE root-aligned at
/// the pelvis) and its full vertex set.
Json frame_metrics_3d(const KinematicRig& rig, const RigParams& pred, const GroundTruthFile::Frame& gt,
                      const std::set<std::string>& metrics);

/// Avg-PCK with body17 / feet6 splits, averaged over the views where it is defined.
Json frame_metrics_2d(const KinematicRig& rig, const RigParams& pred, const std::vector<Camera>& cameras,
                      const std::vector<int>& keypoint_ids, const GroundTruthFile::Frame& gt);

/// Per-frame, aggregate and per-category metrics. `pred[i]` is compared with
/// ground-truth frame `frame_ids[i]` (all frames in order when empty).
Json evaluate(const KinematicRig& rig, const std::vector<RigParams>& pred, const std::vector<Camera>& cameras,
              const GroundTruthFile& gt, const std::set<std::string>& metrics, const Categories& categories = {},
              const std::vector<int>& frame_ids = {});

/// Predicted frames and, when present, refined cameras from a fit report or a
/// single params document.
struct Predictions {
  std::vector<int> frames;
  std::vector<RigParams> params;
  std::vector<Camera> cameras;
};
Predictions predictions_from_json(const Json& j, const KinematicRig& rig);

Json report_header(const std::string& command, const Json& config);
Json single_fit_report(const FitResult& fit, int frame, const Json& config);
Json multi_fit_report(const MultiFitResult& fit, const Json& config);
/// Stub written when a command fails numerically.
Json error_report(const std::string& command, const Json& config, const std::string& kind, const std::string& message);

}  // namespace rigfit
