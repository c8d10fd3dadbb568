#include "rigfit/triangulation.hpp"

#include "rigfit/random.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <map>

namespace rigfit {

namespace {

Eigen::Vector3d normalized_ray(const Camera& cam, const Eigen::Vector2d& uv) {
  return Eigen::Vector3d((uv.x() - cam.cx) / cam.fx, (uv.y() - cam.cy) / cam.fy, 1.0);
}

double reprojection(const Camera& cam, const Eigen::Vector3d& x, const Eigen::Vector2d& uv) {
  const auto p = try_project<double>(cam, x);
  return p ? (*p - uv).norm() : std::numeric_limits<double>::infinity();
}

}  // namespace

DltResult triangulate_dlt(const std::vector<Camera>& cameras, const std::vector<Eigen::Vector2d>& pixels) {
  const int n = static_cast<int>(cameras.size());
  if (n != static_cast<int>(pixels.size())) throw DimensionError("camera and pixel counts differ");
  if (n < 2) throw InvalidArgument("triangulation needs at least two views");

  std::vector<Eigen::Vector3d> dirs(n);
  for (int i = 0; i < n; ++i) dirs[i] = (cameras[i].rotation.transpose() * normalized_ray(cameras[i], pixels[i])).normalized();
  bool spread = false;
  for (int i = 0; i < n && !spread; ++i) {
    for (int j = i + 1; j < n && !spread; ++j) spread = dirs[i].cross(dirs[j]).norm() >= 1e-6;
  }
  if (!spread) throw GeometryError("degenerate triangulation: all rays are parallel");

  Eigen::MatrixXd a(2 * n, 4);
  for (int i = 0; i < n; ++i) {
    Eigen::Matrix<double, 3, 4> p;
    p << cameras[i].rotation, cameras[i].translation;
    const Eigen::Vector3d m = normalized_ray(cameras[i], pixels[i]);
    a.row(2 * i) = m.x() * p.row(2) - p.row(0);
    a.row(2 * i + 1) = m.y() * p.row(2) - p.row(1);
    a.middleRows(2 * i, 2) /= a.middleRows(2 * i, 2).norm();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d h = svd.matrixV().col(3);
  if (std::abs(h[3]) < 1e-12 * h.head<3>().norm()) throw GeometryError("triangulated point at infinity");
  DltResult out;
  out.point = h.head<3>() / h[3];
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = reprojection(cameras[i], out.point, pixels[i]);
    if (!std::isfinite(e)) throw GeometryError("triangulated point lies behind a camera");
    sum += e;
  }
  out.residual_px = sum / n;
  return out;
}

TriangulatedPoint triangulate_ransac(const std::vector<Camera>& cameras, const std::vector<Eigen::Vector2d>& pixels,
                                     const RansacConfig& config) {
  const int n = static_cast<int>(cameras.size());
  if (n != static_cast<int>(pixels.size())) throw DimensionError("camera and pixel counts differ");
  if (n < 2) throw InvalidArgument("triangulation needs at least two views");
  if (!(config.threshold_px > 0.0) || config.iterations < 1) throw InvalidArgument("invalid RANSAC config");

  std::vector<std::pair<int, int>> pairs;
  const long total = static_cast<long>(n) * (n - 1) / 2;
  if (total <= config.iterations) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    }
  } else {
    CounterRng rng(config.seed, 0x5241);
    for (int it = 0; it < config.iterations; ++it) {
      const int i = static_cast<int>(rng.index(n));
      int j = static_cast<int>(rng.index(n - 1));
      if (j >= i) ++j;
      pairs.emplace_back(std::min(i, j), std::max(i, j));
    }
  }

  std::vector<int> best;
  double best_err = std::numeric_limits<double>::infinity();
  for (const auto& [i, j] : pairs) {
    DltResult h;
    try {
      h = triangulate_dlt({cameras[i], cameras[j]}, {pixels[i], pixels[j]});
    } catch (const GeometryError&) {
      continue;
    }
    std::vector<int> inl;
    double sum = 0.0;
    for (int v = 0; v < n; ++v) {
      const double e = reprojection(cameras[v], h.point, pixels[v]);
      if (e < config.threshold_px) {
        inl.push_back(v);
        sum += e;
      }
    }
    if (inl.size() < 2) continue;
    const double mean = sum / static_cast<double>(inl.size());
    if (inl.size() > best.size() || (inl.size() == best.size() && mean < best_err)) {
      best = inl;
      best_err = mean;
    }
  }
  if (best.size() < 2) throw GeometryError("RANSAC found no consensus of two views");

  std::vector<Camera> cs;
  std::vector<Eigen::Vector2d> ps;
  for (int v : best) {
    cs.push_back(cameras[v]);
    ps.push_back(pixels[v]);
  }
  const DltResult fit = triangulate_dlt(cs, ps);
  return TriangulatedPoint{-1, fit.point, best, fit.residual_px};
}

FrameTriangulation triangulate_frame(const std::vector<Camera>& cameras, const std::vector<ObservationSet>& views,
                                     const RansacConfig& config) {
  if (cameras.size() != views.size()) throw DimensionError("one observation set per camera expected");
  std::map<int, std::vector<int>> seen;  // id -> view indices
  std::map<std::pair<int, int>, Eigen::Vector2d> pix;
  for (size_t v = 0; v < views.size(); ++v) {
    for (const auto& o : views[v]) {
      if (!o.visible || o.confidence <= 0.0) continue;
      seen[o.id].push_back(static_cast<int>(v));
      pix[{o.id, static_cast<int>(v)}] = o.uv;
    }
  }
  FrameTriangulation out;
  for (const auto& [id, vs] : seen) {
    if (vs.size() < 2) continue;
    std::vector<Camera> cs;
    std::vector<Eigen::Vector2d> ps;
    for (int v : vs) {
      cs.push_back(cameras[v]);
      ps.push_back(pix[{id, v}]);
    }
    try {
      RansacConfig c = config;
      c.seed = config.seed * 1000003ULL + static_cast<std::uint64_t>(id);
      TriangulatedPoint tp = triangulate_ransac(cs, ps, c);
      tp.id = id;
      for (int& k : tp.inliers) k = vs[k];
      out.points.push_back(tp);
    } catch (const GeometryError&) {
      out.failed.push_back(id);
    }
  }
  return out;
}

Eigen::Matrix3Xd smooth_track(const Eigen::Matrix3Xd& track, const std::vector<bool>& valid, int window) {
  if (window < 1 || window % 2 == 0) throw InvalidArgument("smoothing window must be odd and positive");
  if (static_cast<int>(valid.size()) != track.cols()) throw DimensionError("validity mask length mismatch");
  const int half = window / 2;
  Eigen::Matrix3Xd out = track;
  for (int t = 0; t < track.cols(); ++t) {
    if (!valid[t]) continue;
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    int n = 0;
    const int r = std::min({half, t, static_cast<int>(track.cols()) - 1 - t});
    for (int s = t - r; s <= t + r; ++s) {
      if (!valid[s]) continue;
      sum += track.col(s);
      ++n;
    }
    out.col(t) = sum / n;
  }
  return out;
}

}  // namespace rigfit
