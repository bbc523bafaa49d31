#include "pfpose/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pfpose/errors.hpp"

namespace pfpose {

void LossConfig::validate() const {
  if (num_points < 1) throw InvalidArgument("loss: num_points must be >= 1");
  if (!(seg_weight >= 0.0) || !(pose_weight >= 0.0)) {
    throw InvalidArgument("loss: weights must be nonnegative");
  }
  if (seg_weight == 0.0 && pose_weight == 0.0) {
    throw InvalidArgument("loss: seg_weight and pose_weight are both zero");
  }
}

bool LossConfig::use_symmetric(const ObjectModel& model) const {
  auto it = symmetric_variant.find(model.class_id);
  return it != symmetric_variant.end() ? it->second : model.symmetric;
}

Pose PoseParams::pose() const {
  return Pose::from_quaternion(Quaternion::from_vector(quaternion), translation);
}

Eigen::Vector4d quaternion_gradient(const Eigen::Vector4d& raw, const Eigen::Matrix3d& g) {
  const double n = raw.norm();
  if (!(n > 1e-12)) throw DegenerateInput("quaternion norm is zero");
  const Eigen::Vector4d u = raw / n;
  const double w = u[0], x = u[1], y = u[2], z = u[3];
  Eigen::Matrix3d dw, dx, dy, dz;
  dw << w, -z, y, z, w, -x, -y, x, w;
  dx << x, y, z, y, -x, -w, z, w, -x;
  dy << -y, x, w, x, y, z, -w, z, -y;
  dz << -z, -w, x, w, -z, y, x, y, z;
  const Eigen::Vector4d grad_u = 2.0 * Eigen::Vector4d((g.cwiseProduct(dw)).sum(),
                                                       (g.cwiseProduct(dx)).sum(),
                                                       (g.cwiseProduct(dy)).sum(),
                                                       (g.cwiseProduct(dz)).sum());
  // Chain through u = p / |p|.
  return (grad_u - u * u.dot(grad_u)) / n;
}

double pose_loss(const Pose& gt, const Pose& est, const Points& sampled) {
  if (sampled.rows() == 0) throw InvalidArgument("pose_loss: no sampled points");
  const Points a = transform_points(gt, sampled);
  const Points b = transform_points(est, sampled);
  return (a - b).rowwise().norm().mean();
}

PoseLossResult pose_loss_with_grad(const Pose& gt, const PoseParams& est, const Points& sampled) {
  if (sampled.rows() == 0) throw InvalidArgument("pose_loss: no sampled points");
  const Pose est_pose = est.pose();
  const Points a = transform_points(gt, sampled);
  const Points b = transform_points(est_pose, sampled);
  const double inv_m = 1.0 / static_cast<double>(sampled.rows());

  PoseLossResult out;
  Eigen::Matrix3d grad_r = Eigen::Matrix3d::Zero();
  for (Eigen::Index j = 0; j < sampled.rows(); ++j) {
    const Eigen::Vector3d d = (a.row(j) - b.row(j)).transpose();
    const double len = d.norm();
    out.value += len;
    if (len == 0.0) continue;  // subgradient 0 at the kink
    const Eigen::Vector3d n = d / len;
    out.grad_translation -= n;
    grad_r -= n * sampled.row(j);
  }
  out.value *= inv_m;
  out.grad_translation *= inv_m;
  grad_r *= inv_m;
  out.grad_quaternion = quaternion_gradient(est.quaternion, grad_r);
  return out;
}

namespace {

// Index of the estimate-posed point closest to each ground-truth-posed point.
std::vector<Eigen::Index> closest_indices(const Points& a, const Points& b,
                                          std::vector<double>& dist) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(a.rows()));
  dist.assign(idx.size(), 0.0);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index best_j = 0;
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const double d2 = (a.row(i) - b.row(j)).squaredNorm();
      if (d2 < best) {
        best = d2;
        best_j = j;
      }
    }
    idx[static_cast<std::size_t>(i)] = best_j;
    dist[static_cast<std::size_t>(i)] = std::sqrt(best);
  }
  return idx;
}

}  // namespace

double pose_loss_symmetric(const Pose& gt, const Pose& est, const Points& sampled) {
  if (sampled.rows() == 0) throw InvalidArgument("pose_loss_symmetric: no sampled points");
  std::vector<double> dist;
  closest_indices(transform_points(gt, sampled), transform_points(est, sampled), dist);
  double s = 0.0;
  for (double d : dist) s += d;
  return s / static_cast<double>(sampled.rows());
}

PoseLossResult pose_loss_symmetric_with_grad(const Pose& gt, const PoseParams& est,
                                             const Points& sampled) {
  if (sampled.rows() == 0) throw InvalidArgument("pose_loss_symmetric: no sampled points");
  const Points a = transform_points(gt, sampled);
  const Points b = transform_points(est.pose(), sampled);
  std::vector<double> dist;
  const auto idx = closest_indices(a, b, dist);
  const double inv_m = 1.0 / static_cast<double>(sampled.rows());

  PoseLossResult out;
  Eigen::Matrix3d grad_r = Eigen::Matrix3d::Zero();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    out.value += dist[k];
    if (dist[k] == 0.0) continue;
    const Eigen::Vector3d n = (a.row(i) - b.row(idx[k])).transpose() / dist[k];
    out.grad_translation -= n;
    grad_r -= n * sampled.row(idx[k]);
  }
  out.value *= inv_m;
  out.grad_translation *= inv_m;
  grad_r *= inv_m;
  out.grad_quaternion = quaternion_gradient(est.quaternion, grad_r);
  return out;
}

SegLossResult segmentation_loss_with_grad(const Image<double>& logits, const LabelImage& labels) {
  if (!logits.same_size(labels)) throw InvalidArgument("segmentation_loss: size mismatch");
  if (logits.pixel_count() == 0) throw InvalidArgument("segmentation_loss: empty image");
  const int classes = logits.channels();
  SegLossResult out;
  out.grad = Image<double>(logits.rows(), logits.cols(), classes);
  const double inv_n = 1.0 / static_cast<double>(logits.pixel_count());
  for (int r = 0; r < logits.rows(); ++r) {
    for (int c = 0; c < logits.cols(); ++c) {
      const int label = labels(r, c);
      if (label >= classes) throw InvalidLabel("segmentation_loss: label out of range");
      double mx = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < classes; ++k) mx = std::max(mx, logits(r, c, k));
      double sum = 0.0;
      for (int k = 0; k < classes; ++k) sum += std::exp(logits(r, c, k) - mx);
      const double log_z = mx + std::log(sum);
      out.value += log_z - logits(r, c, label);
      for (int k = 0; k < classes; ++k) {
        const double p = std::exp(logits(r, c, k) - log_z);
        out.grad(r, c, k) = (p - (k == label ? 1.0 : 0.0)) * inv_n;
      }
    }
  }
  out.value *= inv_n;
  return out;
}

double segmentation_loss(const Image<double>& logits, const LabelImage& labels) {
  return segmentation_loss_with_grad(logits, labels).value;
}

double total_loss(double seg, double pose, const LossConfig& cfg) {
  return cfg.seg_weight * seg + cfg.pose_weight * pose;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t step, std::uint64_t item) {
  // splitmix64 finalizer over a combined key.
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ step) ^ item);
}

}  // namespace pfpose
