#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "pfpose/errors.hpp"
#include "pfpose/losses.hpp"
#include "pfpose/metrics.hpp"

using namespace pfpose;

namespace {

ObjectModel random_model(std::mt19937_64& rng, int m, bool symmetric = false) {
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  Points pts(m, 3);
  for (int i = 0; i < m; ++i) pts.row(i) << u(rng), u(rng), u(rng);
  return ObjectModel::from_points(1, pts, symmetric);
}

Quaternion random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  return Quaternion{g(rng), g(rng), g(rng), g(rng)}.normalized();
}

PoseParams random_params(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  PoseParams p;
  p.quaternion = {g(rng), g(rng), g(rng), g(rng)};
  p.translation = {0.05 * g(rng), 0.05 * g(rng), 0.5 + 0.05 * g(rng)};
  return p;
}

std::vector<double> flatten(const PoseParams& p) {
  return {p.quaternion[0], p.quaternion[1], p.quaternion[2], p.quaternion[3],
          p.translation[0], p.translation[1], p.translation[2]};
}

PoseParams unflatten(const std::vector<double>& x) {
  PoseParams p;
  p.quaternion = {x[0], x[1], x[2], x[3]};
  p.translation = {x[4], x[5], x[6]};
  return p;
}

std::vector<double> flatten(const PoseLossResult& r) {
  return {r.grad_quaternion[0], r.grad_quaternion[1], r.grad_quaternion[2], r.grad_quaternion[3],
          r.grad_translation[0], r.grad_translation[1], r.grad_translation[2]};
}

}  // namespace

TEST(PoseLoss, FullModelEqualsAdd) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto model = random_model(rng, 60);
    const auto gt = Pose::from_quaternion(random_quat(rng), {0.01, -0.02, 0.6});
    const auto est = random_params(rng).pose();
    EXPECT_NEAR(pose_loss(gt, est, model.points), add(gt, est, model), 1e-12);
    EXPECT_NEAR(pose_loss_symmetric(gt, est, model.points), adds(gt, est, model), 1e-12);
  }
}

TEST(PoseLoss, ZeroAtGroundTruthAndNonNegative) {
  std::mt19937_64 rng(2);
  const auto model = random_model(rng, 40);
  const auto gt = Pose::from_quaternion(random_quat(rng), {0, 0, 0.5});
  EXPECT_EQ(pose_loss(gt, gt, model.points), 0.0);
  EXPECT_EQ(pose_loss_symmetric(gt, gt, model.points), 0.0);
  for (int i = 0; i < 20; ++i) EXPECT_GE(pose_loss(gt, random_params(rng).pose(), model.points), 0.0);
}

TEST(PoseLoss, ValueMatchesWithGradVariants) {
  std::mt19937_64 rng(3);
  const auto model = random_model(rng, 30);
  const auto gt = Pose::from_quaternion(random_quat(rng), {0, 0, 0.5});
  const auto p = random_params(rng);
  EXPECT_NEAR(pose_loss_with_grad(gt, p, model.points).value, pose_loss(gt, p.pose(), model.points), 1e-15);
  EXPECT_NEAR(pose_loss_symmetric_with_grad(gt, p, model.points).value,
              pose_loss_symmetric(gt, p.pose(), model.points), 1e-15);
}

TEST(PoseLoss, GradientMatchesCentralDifference) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    const auto model = random_model(rng, 25);
    const auto gt = Pose::from_quaternion(random_quat(rng), {0.0, 0.01, 0.5});
    const auto p = random_params(rng);
    const auto analytic = flatten(pose_loss_with_grad(gt, p, model.points));
    const auto numeric = oracle::central_difference(
        [&](const std::vector<double>& x) { return pose_loss(gt, unflatten(x).pose(), model.points); }, flatten(p),
        1e-6);
    EXPECT_LT(oracle::relative_error(analytic, numeric), 1e-4);
  }
}

TEST(PoseLoss, SymmetricGradientMatchesCentralDifference) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto model = random_model(rng, 25, true);
    const auto gt = Pose::from_quaternion(random_quat(rng), {0.0, 0.01, 0.5});
    const auto p = random_params(rng);
    const auto analytic = flatten(pose_loss_symmetric_with_grad(gt, p, model.points));
    const auto numeric = oracle::central_difference(
        [&](const std::vector<double>& x) { return pose_loss_symmetric(gt, unflatten(x).pose(), model.points); },
        flatten(p), 1e-6);
    EXPECT_LT(oracle::relative_error(analytic, numeric), 1e-4);
  }
}

TEST(PoseLoss, QuaternionGradientIsTangent) {
  std::mt19937_64 rng(6);
  const auto model = random_model(rng, 25);
  const auto gt = Pose::from_quaternion(random_quat(rng), {0, 0, 0.5});
  const auto p = random_params(rng);
  const auto r = pose_loss_with_grad(gt, p, model.points);
  EXPECT_NEAR(r.grad_quaternion.dot(p.quaternion), 0.0, 1e-12);
}

TEST(SegmentationLoss, KnownValues) {
  Image<double> logits(1, 2, 2, 0.0);
  LabelImage labels(1, 2);
  labels(0, 1) = 1;
  EXPECT_NEAR(segmentation_loss(logits, labels), std::log(2.0), 1e-15);
  logits(0, 0, 0) = 1000.0;  // stable for large logits
  logits(0, 1, 1) = 1000.0;
  EXPECT_NEAR(segmentation_loss(logits, labels), 0.0, 1e-12);
}

TEST(SegmentationLoss, GradientMatchesCentralDifference) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> lab(0, 3);
  for (int i = 0; i < 20; ++i) {
    Image<double> logits(3, 4, 4);
    for (auto& v : logits.data()) v = 2.0 * g(rng);
    LabelImage labels(3, 4);
    for (auto& v : labels.data()) v = static_cast<std::uint8_t>(lab(rng));
    const auto res = segmentation_loss_with_grad(logits, labels);
    EXPECT_NEAR(res.value, segmentation_loss(logits, labels), 1e-15);
    std::vector<double> x(logits.data().begin(), logits.data().end());
    const auto numeric = oracle::central_difference(
        [&](const std::vector<double>& v) {
          Image<double> l(3, 4, 4);
          std::copy(v.begin(), v.end(), l.data().begin());
          return segmentation_loss(l, labels);
        },
        x, 1e-6);
    std::vector<double> analytic(res.grad.data().begin(), res.grad.data().end());
    EXPECT_LT(oracle::relative_error(analytic, numeric), 1e-4);
  }
}

TEST(SegmentationLoss, RejectsBadLabelsAndShapes) {
  Image<double> logits(2, 2, 3);
  LabelImage labels(2, 2);
  labels(1, 1) = 3;
  EXPECT_THROW(segmentation_loss(logits, labels), InvalidLabel);
  EXPECT_THROW(segmentation_loss(logits, LabelImage(2, 3)), InvalidArgument);
}

TEST(LossConfig, SymmetryOverrideAndValidation) {
  Points pts(2, 3);
  pts << 0, 0, 0, 1, 0, 0;
  const auto sym = ObjectModel::from_points(2, pts, true);
  const auto plain = ObjectModel::from_points(3, pts, false);
  LossConfig cfg;
  EXPECT_TRUE(cfg.use_symmetric(sym));
  EXPECT_FALSE(cfg.use_symmetric(plain));
  cfg.symmetric_variant[2] = false;
  cfg.symmetric_variant[3] = true;
  EXPECT_FALSE(cfg.use_symmetric(sym));
  EXPECT_TRUE(cfg.use_symmetric(plain));
  cfg.num_points = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(LossConfig, TotalLossAndSeeds) {
  LossConfig cfg;
  cfg.seg_weight = 0.5;
  cfg.pose_weight = 2.0;
  EXPECT_DOUBLE_EQ(total_loss(1.0, 3.0, cfg), 6.5);
  std::set<std::uint64_t> seeds;
  for (std::uint64_t step = 0; step < 50; ++step)
    for (std::uint64_t item = 0; item < 4; ++item) seeds.insert(derive_seed(7, step, item));
  EXPECT_EQ(seeds.size(), 200u);
  EXPECT_EQ(derive_seed(7, 3, 1), derive_seed(7, 3, 1));
}
