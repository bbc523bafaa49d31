#include <gtest/gtest.h>

#include "pfpose/data.hpp"
#include "pfpose/errors.hpp"
#include "pfpose/losses.hpp"
#include "pfpose/maskops.hpp"
#include "pfpose/network.hpp"

using namespace pfpose;

namespace {

NetworkConfig small_config(Ablation a = Ablation::none) {
  NetworkConfig cfg;
  cfg.ablation = a;
  return cfg;
}

// Synthetic object batch with a dense random cloud over part of the crop.
ObjectBatch random_batch(int side, int batch, int seed) {
  torch::manual_seed(seed);
  ObjectBatch b;
  b.side = side;
  b.rgb = torch::rand({batch, 3, side, side}) - 0.5;
  b.mask = (torch::rand({batch, 1, side, side}) > 0.5).to(torch::kFloat32);
  b.class_index = torch::randint(1, 4, {batch}, torch::kInt64);
  b.centroid = torch::tensor({0.0f, 0.0f, 0.5f}).repeat({batch, 1});
  for (int i = 0; i < batch; ++i) {
    const int n = side * side / 3 + i;
    auto idx = std::get<0>(torch::randperm(side * side, torch::kInt64).narrow(0, 0, n).sort());
    b.pixel_index.push_back(idx);
    b.points.push_back(torch::randn({n, 3}) * 0.03 + torch::tensor({0.0f, 0.0f, 0.5f}));
  }
  return b;
}

bool bitwise_equal(const torch::Tensor& a, const torch::Tensor& b) {
  return a.sizes() == b.sizes() && torch::equal(a, b);
}

}  // namespace

class ShapeContract : public ::testing::TestWithParam<std::tuple<int, Ablation>> {};

TEST_P(ShapeContract, EveryForwardPathKeepsCropSize) {
  const auto [side, ablation] = GetParam();
  torch::manual_seed(0);
  const auto cfg = small_config(ablation);
  PoseNetwork net(cfg);
  net->eval();
  torch::NoGradGuard guard;
  auto b = random_batch(side, 2, side);

  auto rgb = net->pyramid_backbone_forward(b.rgb, false);
  auto mask = net->pyramid_backbone_forward(b.mask, true);
  EXPECT_EQ(rgb.sizes(), (std::vector<std::int64_t>{2, cfg.extractor_channels(), side, side}));
  EXPECT_EQ(mask.sizes(), rgb.sizes());

  auto out = net->forward(b, 2);
  EXPECT_EQ(out.fused.sizes(), (std::vector<std::int64_t>{2, cfg.fusion_channels, side, side}));
  EXPECT_EQ(out.initial.translation.sizes(), (std::vector<std::int64_t>{2, 3}));
  EXPECT_EQ(out.initial.quaternion.sizes(), (std::vector<std::int64_t>{2, 4}));
  ASSERT_EQ(out.refined.size(), 2u);
  EXPECT_EQ(out.refined[1].quaternion.sizes(), (std::vector<std::int64_t>{2, 4}));
  EXPECT_TRUE(torch::isfinite(out.fused).all().item<bool>());
}

INSTANTIATE_TEST_SUITE_P(Crops, ShapeContract,
                         ::testing::Combine(::testing::Values(32, 64, 96),
                                            ::testing::Values(Ablation::none, Ablation::no_pyramid_backbone,
                                                              Ablation::shallow_fusion,
                                                              Ablation::no_pyramid_fusion)));

TEST(Network, SegmentationLogitsCoverFrame) {
  torch::manual_seed(0);
  PoseNetwork net(small_config());
  torch::NoGradGuard guard;
  for (auto [h, w] : std::vector<std::pair<int, int>>{{120, 160}, {37, 53}}) {
    auto logits = net->segment(torch::rand({1, 3, h, w}));
    EXPECT_EQ(logits.sizes(), (std::vector<std::int64_t>{1, 4, h, w}));
  }
}

TEST(Network, EvalModeIsDeterministic) {
  torch::manual_seed(1);
  PoseNetwork net(small_config());
  net->eval();
  torch::NoGradGuard guard;
  auto b = random_batch(64, 2, 3);
  auto a1 = net->forward(b, 2);
  auto a2 = net->forward(b, 2);
  EXPECT_TRUE(bitwise_equal(a1.fused, a2.fused));
  EXPECT_TRUE(bitwise_equal(a1.refined[1].quaternion, a2.refined[1].quaternion));
  EXPECT_TRUE(bitwise_equal(a1.refined[1].translation, a2.refined[1].translation));
  auto f = torch::rand({1, 3, 40, 56});
  EXPECT_TRUE(bitwise_equal(net->segment(f), net->segment(f)));
}

TEST(Network, SameSeedSameWeights) {
  torch::manual_seed(5);
  PoseNetwork a(small_config());
  torch::manual_seed(5);
  PoseNetwork b(small_config());
  auto pa = a->parameters(), pb = b->parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(torch::equal(pa[i], pb[i]));
}

TEST(Network, AblationParameterOrdering) {
  const auto full = PoseNetwork(small_config())->parameter_count();
  const auto shallow = PoseNetwork(small_config(Ablation::shallow_fusion))->parameter_count();
  const auto flat = PoseNetwork(small_config(Ablation::no_pyramid_fusion))->parameter_count();
  const auto single = PoseNetwork(small_config(Ablation::no_pyramid_backbone))->parameter_count();
  EXPECT_GT(full, shallow);
  EXPECT_GT(shallow, flat);
  EXPECT_GT(full, single);

  NetworkConfig cfg = small_config();
  cfg.backbone_width_multiplier = 1.0;
  EXPECT_EQ(cfg.backbone_base_width(), 64);
}

TEST(Network, CropTooSmallAndWrongChannels) {
  PoseNetwork net(small_config());
  torch::NoGradGuard guard;
  EXPECT_THROW(net->pyramid_backbone_forward(torch::rand({1, 3, 15, 32}), false), CropTooSmall);
  EXPECT_THROW(net->pyramid_backbone_forward(torch::rand({1, 3, 32, 32}), true), InvalidArgument);
  EXPECT_NO_THROW(net->pyramid_backbone_forward(torch::rand({1, 1, 16, 16}), true));
}

TEST(Network, ConfigValidation) {
  auto cfg = small_config();
  cfg.fusion_levels = 4;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = small_config();
  cfg.upscale_channels = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  EXPECT_EQ(ablation_from_string("shallow_fusion"), Ablation::shallow_fusion);
  EXPECT_THROW(ablation_from_string("nope"), InvalidArgument);
  EXPECT_EQ(small_config(Ablation::shallow_fusion).effective_fusion_levels(), 2);
  EXPECT_EQ(small_config(Ablation::no_pyramid_fusion).effective_fusion_levels(), 1);
}

TEST(PointEncoder, SinglePointGlobalEqualsItsFeatures) {
  torch::manual_seed(2);
  PointEncoder enc(std::vector<int>{16, 24});
  torch::NoGradGuard guard;
  auto f = enc->forward(torch::randn({1, 3}));
  EXPECT_EQ(f.per_point.sizes(), (std::vector<std::int64_t>{1, 48}));
  EXPECT_TRUE(torch::equal(f.per_point[0].narrow(0, 0, 24), f.global));
  EXPECT_THROW(enc->forward(torch::zeros({0, 3})), EmptyCloud);
}

TEST(PointEncoder, PermutationEquivarianceAndDuplicateInvariance) {
  torch::manual_seed(3);
  PointEncoder enc(std::vector<int>{16, 24});
  torch::NoGradGuard guard;
  auto pts = torch::randn({50, 3});
  auto perm = torch::randperm(50, torch::kInt64);
  auto a = enc->forward(pts);
  auto b = enc->forward(pts.index_select(0, perm));
  EXPECT_TRUE(torch::equal(a.global, b.global));
  EXPECT_TRUE(torch::allclose(a.per_point.index_select(0, perm), b.per_point, 0.0, 0.0));
  auto dup = enc->forward(torch::cat({pts, pts.narrow(0, 7, 1)}, 0));
  EXPECT_TRUE(torch::equal(a.global, dup.global));
}

TEST(Fusion, ScatterPlacesRowsAtPixels) {
  auto rows = torch::arange(6, torch::kFloat32).view({3, 2});
  auto idx = torch::tensor({0, 5, 15}, torch::kInt64);
  auto grid = PoseNetworkImpl::scatter_points(rows, idx, 4);
  EXPECT_EQ(grid.sizes(), (std::vector<std::int64_t>{2, 4, 4}));
  EXPECT_EQ(grid[1][1][1].item<float>(), 3.0f);
  EXPECT_EQ(grid[0][3][3].item<float>(), 4.0f);
  EXPECT_EQ(grid.abs().sum().item<float>(), 15.0f);
  EXPECT_THROW(PoseNetworkImpl::scatter_points(rows, torch::tensor({0, 1}, torch::kInt64), 4), AlignmentError);
}

TEST(Fusion, MisalignedStreamsThrow) {
  PoseNetwork net(small_config());
  torch::NoGradGuard guard;
  const auto cfg = net->config();
  auto rgb = torch::rand({1, cfg.extractor_channels(), 32, 32});
  auto pts = torch::rand({1, cfg.point_channels(), 32, 32});
  EXPECT_THROW(net->pyramid_fusion_forward(rgb, torch::rand({1, cfg.extractor_channels(), 32, 31}), pts),
               AlignmentError);
  EXPECT_THROW(net->pyramid_fusion_forward(rgb, rgb, torch::rand({2, cfg.point_channels(), 32, 32})),
               AlignmentError);
  EXPECT_EQ(net->pyramid_fusion_forward(rgb, rgb, pts).sizes(),
            (std::vector<std::int64_t>{1, cfg.fusion_channels, 32, 32}));
}

TEST(Heads, UnitQuaternionAndFiniteTranslation) {
  torch::manual_seed(4);
  PoseNetwork net(small_config());
  torch::NoGradGuard guard;
  auto b = random_batch(32, 1, 4);
  for (int i = 0; i < 100; ++i) {
    auto fused = torch::randn({1, net->config().fusion_channels, 32, 32}) * (1.0 + i);
    auto out = net->heads_forward(fused, b);
    EXPECT_NEAR(out.quaternion.norm().item<double>(), 1.0, 1e-6);
    EXPECT_TRUE(torch::isfinite(out.translation).all().item<bool>());
  }
}

TEST(Refiner, ZeroResidualIsIdentity) {
  torch::manual_seed(5);
  PoseNetwork net(small_config());
  torch::NoGradGuard guard;
  auto b = random_batch(32, 2, 5);
  auto out = net->forward(b, 1);
  EXPECT_TRUE(torch::equal(out.refined[0].translation, out.initial.translation));
  EXPECT_TRUE(torch::allclose(out.refined[0].quaternion, out.initial.quaternion, 0.0, 1e-6));
}

TEST(Refiner, TwoIterationsEqualRefiningTwice) {
  torch::manual_seed(6);
  PoseNetwork net(small_config());
  {
    torch::NoGradGuard guard;
    for (auto& p : net->refiner()->parameters()) p.add_(torch::randn_like(p) * 0.05);
  }
  net->eval();
  torch::NoGradGuard guard;
  auto b = random_batch(32, 2, 6);
  auto out = net->forward(b, 2);
  auto once = net->refine_forward(out.initial, out.fused, b);
  auto twice = net->refine_forward(once, out.fused, b);
  EXPECT_TRUE(torch::equal(out.refined[0].quaternion, once.quaternion));
  EXPECT_TRUE(torch::equal(out.refined[1].quaternion, twice.quaternion));
  EXPECT_TRUE(torch::equal(out.refined[1].translation, twice.translation));
  EXPECT_FALSE(torch::equal(twice.translation, out.initial.translation));
  EXPECT_NEAR(twice.quaternion[0].norm().item<double>(), 1.0, 1e-6);
}

TEST(Network, EveryParameterGroupReceivesGradient) {
  auto spec = SyntheticSpec::desk_default();
  auto sample = generate_synthetic(spec, 1).front();
  const auto models = build_models(spec);
  torch::manual_seed(7);
  auto cfg = small_config();
  PoseNetwork net(cfg);
  // A nonzero refiner output layer lets gradient reach its earlier layers.
  {
    torch::NoGradGuard guard;
    for (auto& p : net->refiner()->parameters()) p.add_(torch::randn_like(p) * 0.01);
  }
  auto frame = frame_tensor(sample.rgb);
  auto labels = torch::from_blob(sample.mask.data().data(), {1, sample.mask.rows(), sample.mask.cols()},
                                 torch::kUInt8)
                    .to(torch::kInt64);
  auto seg = torch::nn::functional::cross_entropy(net->segment(frame), labels);
  const auto& gt = sample.gt.front();
  auto mask = clean_mask(mask_for_label(sample.mask, gt.class_id));
  auto crop = prepare_crop(masked_crop(sample.rgb, sample.depth, mask, gt.class_id), sample.intrinsics, 64);
  auto batch = make_object_batch({crop});
  auto out = net->forward(batch, 1);
  const auto& model = *models.at(gt.class_id);
  auto pts = torch::from_blob(const_cast<double*>(model.points.data()), {model.points.rows(), 3}, torch::kFloat64)
                 .to(torch::kFloat32);
  Eigen::Matrix3d r = gt.pose.rotation;
  auto gt_r = torch::from_blob(r.data(), {3, 3}, torch::kFloat64).t().to(torch::kFloat32);
  auto gt_t = torch::tensor({gt.pose.translation.x(), gt.pose.translation.y(), gt.pose.translation.z()},
                            torch::kFloat64)
                  .to(torch::kFloat32);
  auto loss = seg + pose_loss_tensor(gt_r, gt_t, out.initial.quaternion[0], out.initial.translation[0], pts, false) +
              pose_loss_tensor(gt_r, gt_t, out.refined[0].quaternion[0], out.refined[0].translation[0], pts, false);
  loss.backward();
  const auto groups = net->parameter_groups();
  EXPECT_EQ(groups.size(), 8u);
  for (const auto& [name, params] : groups) {
    double norm = 0.0;
    for (const auto& p : params) {
      if (p.grad().defined()) norm += p.grad().norm().item<double>();
    }
    EXPECT_GT(norm, 0.0) << name;
  }
}

TEST(TorchLoss, MatchesClosedFormOnSimpleCase) {
  auto pts = torch::tensor({{1.0f, 0.0f, 0.0f}, {-1.0f, 0.0f, 0.0f}});
  auto eye = torch::eye(3);
  auto zero = torch::zeros({3});
  auto half_turn = torch::tensor({0.0f, 0.0f, 0.0f, 1.0f});
  EXPECT_NEAR(pose_loss_tensor(eye, zero, half_turn, zero, pts, false).item<double>(), 2.0, 1e-6);
  EXPECT_NEAR(pose_loss_tensor(eye, zero, half_turn, zero, pts, true).item<double>(), 0.0, 1e-5);
  auto q = torch::tensor({{0.0f, 0.0f, 0.0f, 1.0f}});
  auto m = quaternion_to_matrix(q)[0];
  EXPECT_TRUE(torch::allclose(m, torch::diag(torch::tensor({-1.0f, -1.0f, 1.0f}))));
}
