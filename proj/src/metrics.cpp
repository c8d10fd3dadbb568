#include "rigfit/metrics.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <cmath>

namespace rigfit {

namespace {

constexpr double kMm = 1000.0;

void check_pair(const Eigen::Matrix3Xd& a, const Eigen::Matrix3Xd& b) {
  if (a.cols() != b.cols()) throw DimensionError("point counts differ");
  if (a.cols() == 0) throw InvalidArgument("empty point set");
}

// Fraction of the columns of `a` with a column of `b` closer than `d`.
double covered(const Eigen::Matrix3Xd& a, const Eigen::Matrix3Xd& b, double d) {
  int hit = 0;
  const double d2 = d * d;
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    const double best = (b.colwise() - a.col(i)).colwise().squaredNorm().minCoeff();
    hit += best < d2 ? 1 : 0;
  }
  return static_cast<double>(hit) / static_cast<double>(a.cols());
}

}  // namespace

double mpjpe(const Eigen::Matrix3Xd& pred, const Eigen::Matrix3Xd& gt, Alignment align, int root) {
  check_pair(pred, gt);
  if (align == Alignment::none) return kMm * (pred - gt).colwise().norm().mean();
  if (root < 0 || root >= pred.cols()) throw DimensionError("root index out of range");
  const Eigen::Matrix3Xd p = pred.colwise() - pred.col(root);
  const Eigen::Matrix3Xd g = gt.colwise() - gt.col(root);
  return kMm * (p - g).colwise().norm().mean();
}

Eigen::Matrix3Xd Similarity::apply(const Eigen::Matrix3Xd& points) const {
  return ((scale * rotation) * points).colwise() + translation;
}

Similarity procrustes_align(const Eigen::Matrix3Xd& pred, const Eigen::Matrix3Xd& gt) {
  check_pair(pred, gt);
  if (pred.cols() < 3) throw GeometryError("alignment needs at least 3 points");
  for (const Eigen::Matrix3Xd* m : {&pred, &gt}) {
    const Eigen::Matrix3Xd c = m->colwise() - m->rowwise().mean();
    const Eigen::Vector3d sv = Eigen::JacobiSVD<Eigen::Matrix3Xd>(c).singularValues();
    if (!(sv[1] > 1e-12 * std::max(sv[0], 1e-300))) throw GeometryError("collinear or coincident points");
  }
  const Eigen::Matrix4d t = Eigen::umeyama(pred, gt, true);
  Similarity s;
  s.scale = std::cbrt(t.topLeftCorner<3, 3>().determinant());
  s.rotation = t.topLeftCorner<3, 3>() / s.scale;
  s.translation = t.topRightCorner<3, 1>();
  return s;
}

double pa_mpjpe(const Eigen::Matrix3Xd& pred, const Eigen::Matrix3Xd& gt) {
  return mpjpe(procrustes_align(pred, gt).apply(pred), gt);
}

double pve(const Eigen::Matrix3Xd& pred_vertices, const Eigen::Matrix3Xd& gt_vertices,
           const Eigen::Vector3d& pred_root, const Eigen::Vector3d& gt_root) {
  check_pair(pred_vertices, gt_vertices);
  return kMm * ((pred_vertices.colwise() - pred_root) - (gt_vertices.colwise() - gt_root)).colwise().norm().mean();
}

double bbox_side(const Eigen::Matrix2Xd& gt2d, const std::vector<bool>& visible) {
  if (static_cast<Eigen::Index>(visible.size()) != gt2d.cols()) throw DimensionError("visibility mask mismatch");
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  bool any = false;
  for (Eigen::Index i = 0; i < gt2d.cols(); ++i) {
    if (!visible[i]) continue;
    lo = lo.cwiseMin(gt2d.col(i));
    hi = hi.cwiseMax(gt2d.col(i));
    any = true;
  }
  return any ? (hi - lo).maxCoeff() : 0.0;
}

std::optional<double> pck(const Eigen::Matrix2Xd& pred2d, const Eigen::Matrix2Xd& gt2d,
                          const std::vector<bool>& visible, double side, double alpha) {
  if (pred2d.cols() != gt2d.cols() || static_cast<Eigen::Index>(visible.size()) != gt2d.cols()) {
    throw DimensionError("keypoint counts differ");
  }
  if (!(alpha > 0.0) || !(side > 0.0)) throw InvalidArgument("PCK needs alpha > 0 and a positive box side");
  const double limit = alpha * side;
  int n = 0;
  int ok = 0;
  for (Eigen::Index i = 0; i < gt2d.cols(); ++i) {
    if (!visible[i]) continue;
    ++n;
    ok += (pred2d.col(i) - gt2d.col(i)).norm() < limit ? 1 : 0;
  }
  if (n == 0) return std::nullopt;
  return static_cast<double>(ok) / n;
}

std::optional<double> avg_pck(const Eigen::Matrix2Xd& pred2d, const Eigen::Matrix2Xd& gt2d,
                              const std::vector<bool>& visible, double side) {
  double sum = 0.0;
  for (double a : kPckThresholds) {
    const auto p = pck(pred2d, gt2d, visible, side, a);
    if (!p) return std::nullopt;
    sum += *p;
  }
  return sum / static_cast<double>(kPckThresholds.size());
}

double fscore(const Eigen::Matrix3Xd& pred, const Eigen::Matrix3Xd& gt, double threshold_mm, bool align) {
  if (pred.cols() == 0 || gt.cols() == 0) throw InvalidArgument("empty point cloud");
  if (!(threshold_mm > 0.0)) throw InvalidArgument("F-score threshold must be positive");
  const Eigen::Matrix3Xd p = align ? procrustes_align(pred, gt).apply(pred) : pred;
  const double d = threshold_mm / kMm;
  const double precision = covered(p, gt, d);
  const double recall = covered(gt, p, d);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double jitter(const std::vector<Eigen::Matrix3Xd>& joints_per_frame) {
  const size_t nt = joints_per_frame.size();
  if (nt < 3) throw InvalidArgument("jitter needs at least three frames");
  const Eigen::Index nj = joints_per_frame[0].cols();
  std::vector<Eigen::Matrix3Xd> d;
  for (size_t t = 1; t < nt; ++t) {
    if (joints_per_frame[t].cols() != nj) throw DimensionError("joint counts differ across frames");
    d.push_back(kMm * (joints_per_frame[t] - joints_per_frame[t - 1]));
  }
  Eigen::Matrix3Xd mean = Eigen::Matrix3Xd::Zero(3, nj);
  for (const auto& m : d) mean += m;
  mean /= static_cast<double>(d.size());
  double var = 0.0;
  for (const auto& m : d) var += (m - mean).colwise().squaredNorm().sum();
  return var / static_cast<double>(d.size() * nj);
}

}  // namespace rigfit
