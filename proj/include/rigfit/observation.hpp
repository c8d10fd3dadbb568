#pragma once

#include <Eigen/Core>

#include <vector>

namespace rigfit {

/// A 2D keypoint measurement. `id` is a rig keypoint id.
struct Observation2D {
  int id = 0;
  Eigen::Vector2d uv = Eigen::Vector2d::Zero();
  double confidence = 1.0;
  bool visible = true;
  bool prompt = false;
};

using ObservationSet = std::vector<Observation2D>;

inline int count_visible(const ObservationSet& obs) {
  int n = 0;
  for (const auto& o : obs) n += o.visible ? 1 : 0;
  return n;
}

}  // namespace rigfit
