#pragma once

#include <cstdint>
#include <map>

#include <Eigen/Core>

#include "pfpose/geometry.hpp"
#include "pfpose/image.hpp"

namespace pfpose {

struct LossConfig {
  std::size_t num_points = 500;              // model points sampled per step
  std::map<int, bool> symmetric_variant;     // class id -> closest-point loss; absent = model flag
  double seg_weight = 1.0;
  double pose_weight = 1.0;
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidArgument
  bool use_symmetric(const ObjectModel& model) const;
};

// Estimated pose as produced by the regression heads: an unnormalized
// quaternion (w, x, y, z) and a translation. The loss normalizes the
// quaternion, so gradients are tangent to the unit sphere.
struct PoseParams {
  Eigen::Vector4d quaternion{1.0, 0.0, 0.0, 0.0};
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Pose pose() const;
};

struct PoseLossResult {
  double value = 0.0;
  Eigen::Vector4d grad_quaternion = Eigen::Vector4d::Zero();
  Eigen::Vector3d grad_translation = Eigen::Vector3d::Zero();
};

// (1/M) sum_j |(R x_j + t) - (R_est x_j + t_est)|.
double pose_loss(const Pose& gt, const Pose& est, const Points& sampled);
PoseLossResult pose_loss_with_grad(const Pose& gt, const PoseParams& est, const Points& sampled);

// (1/M) sum_i min_j |(R x_i + t) - (R_est x_j + t_est)| over the sampled set.
double pose_loss_symmetric(const Pose& gt, const Pose& est, const Points& sampled);
PoseLossResult pose_loss_symmetric_with_grad(const Pose& gt, const PoseParams& est,
                                             const Points& sampled);

// Pixel-mean softmax cross-entropy. `logits` carries one channel per class.
// Throws InvalidLabel for labels outside [0, C).
double segmentation_loss(const Image<double>& logits, const LabelImage& labels);

struct SegLossResult {
  double value = 0.0;
  Image<double> grad;  // d loss / d logits, same layout as logits
};
SegLossResult segmentation_loss_with_grad(const Image<double>& logits, const LabelImage& labels);

double total_loss(double seg, double pose, const LossConfig& cfg);

// Independent per-(step, item) seed derived from the base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t step, std::uint64_t item);

// Derivative of quat_to_matrix(p / |p|) contracted with dL/dR.
Eigen::Vector4d quaternion_gradient(const Eigen::Vector4d& raw, const Eigen::Matrix3d& grad_rotation);

}  // namespace pfpose
