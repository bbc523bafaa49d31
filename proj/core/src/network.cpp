#include "pfpose/network.hpp"

#include <cmath>

#include "pfpose/errors.hpp"

namespace F = torch::nn::functional;

namespace pfpose {
namespace {

int norm_groups(int channels) {
  for (int g : {4, 2}) {
    if (channels % g == 0) return g;
  }
  return 1;
}

torch::nn::Conv2d conv3x3(int in, int out, int stride = 1, int dilation = 1) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3)
                               .stride(stride)
                               .padding(dilation)
                               .dilation(dilation)
                               .bias(true));
}

torch::nn::Conv2d conv1x1(int in, int out) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 1));
}

torch::Tensor resize(const torch::Tensor& x, std::int64_t h, std::int64_t w) {
  if (x.size(2) == h && x.size(3) == w) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<std::int64_t>{h, w})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

torch::Tensor pool_features(const torch::Tensor& fused) {
  return torch::cat({fused.mean({2, 3}), fused.amax({2, 3})}, 1);
}

}  // namespace

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::no_pyramid_backbone: return "no_pyramid_backbone";
    case Ablation::shallow_fusion: return "shallow_fusion";
    case Ablation::no_pyramid_fusion: return "no_pyramid_fusion";
  }
  return "none";
}

Ablation ablation_from_string(const std::string& s) {
  for (Ablation a : {Ablation::none, Ablation::no_pyramid_backbone, Ablation::shallow_fusion,
                     Ablation::no_pyramid_fusion}) {
    if (to_string(a) == s) return a;
  }
  throw InvalidArgument("unknown ablation '" + s + "'");
}

void NetworkConfig::validate() const {
  if (!(backbone_width_multiplier > 0.0)) throw InvalidArgument("network: width multiplier must be > 0");
  if (backbone_blocks.size() != 4) throw InvalidArgument("network: backbone needs four stages");
  for (int b : backbone_blocks) {
    if (b < 1) throw InvalidArgument("network: every stage needs >= 1 block");
  }
  if (fusion_levels != 2 && fusion_levels != 3) throw InvalidArgument("network: fusion_levels must be 2 or 3");
  if (upscale_channels < 1 || fusion_channels < 1 || seg_channels < 1) {
    throw InvalidArgument("network: widths must be >= 1");
  }
  if (point_feature_dims.empty() || head_hidden_dims.empty()) {
    throw InvalidArgument("network: point and head dims must be nonempty");
  }
  for (int d : point_feature_dims) {
    if (d < 1) throw InvalidArgument("network: point dims must be >= 1");
  }
  for (int d : head_hidden_dims) {
    if (d < 1) throw InvalidArgument("network: head dims must be >= 1");
  }
  if (num_classes < 2) throw InvalidArgument("network: num_classes counts background and >= 1 object");
  if (crop_size < kMinCropSide) {
    throw InvalidArgument("network: crop_size must be >= " + std::to_string(kMinCropSide));
  }
  if (refine_iterations < 0) throw InvalidArgument("network: refine_iterations must be >= 0");
  if (!(point_input_scale > 0.0)) throw InvalidArgument("network: point_input_scale must be > 0");
}

int NetworkConfig::backbone_base_width() const {
  return std::max(1, static_cast<int>(std::lround(64.0 * backbone_width_multiplier)));
}

int NetworkConfig::effective_fusion_levels() const {
  switch (ablation) {
    case Ablation::shallow_fusion: return 2;
    case Ablation::no_pyramid_fusion: return 1;
    default: return fusion_levels;
  }
}

// ---------------------------------------------------------------------------

ResidualBlockImpl::ResidualBlockImpl(int in, int out, int stride) {
  conv1_ = register_module("conv1", conv3x3(in, out, stride));
  norm1_ = register_module("norm1", torch::nn::GroupNorm(norm_groups(out), out));
  conv2_ = register_module("conv2", conv3x3(out, out));
  norm2_ = register_module("norm2", torch::nn::GroupNorm(norm_groups(out), out));
  if (stride != 1 || in != out) {
    shortcut_ = register_module(
        "shortcut", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 1).stride(stride)));
    shortcut_norm_ = register_module("shortcut_norm", torch::nn::GroupNorm(norm_groups(out), out));
  }
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  auto y = torch::relu(norm1_(conv1_(x)));
  y = norm2_(conv2_(y));
  auto skip = shortcut_ ? shortcut_norm_(shortcut_(x)) : x;
  return torch::relu(y + skip);
}

ResidualBackboneImpl::ResidualBackboneImpl(int in, int base, const std::vector<int>& blocks,
                                           int stem_stride, const std::vector<int>& strides) {
  stem_ = register_module("stem", conv3x3(in, base, stem_stride));
  stem_norm_ = register_module("stem_norm", torch::nn::GroupNorm(norm_groups(base), base));
  stages_ = register_module("stages", torch::nn::Sequential());
  int channels = base;
  for (std::size_t s = 0; s < blocks.size(); ++s) {
    const int width = base << s;
    for (int b = 0; b < blocks[s]; ++b) {
      stages_->push_back(ResidualBlock(channels, width, b == 0 ? strides[s] : 1));
      channels = width;
    }
  }
  out_channels_ = channels;
}

torch::Tensor ResidualBackboneImpl::forward(const torch::Tensor& x) {
  return stages_->forward(torch::relu(stem_norm_(stem_(x))));
}

UpscaleImpl::UpscaleImpl(int in, int out, int steps) : steps_(steps) {
  project_ = register_module("project", conv1x1(in, out));
  convs_ = register_module("convs", torch::nn::ModuleList());
  for (int i = 0; i < steps; ++i) convs_->push_back(conv3x3(out, out));
}

torch::Tensor UpscaleImpl::forward(const torch::Tensor& x, std::int64_t h, std::int64_t w) {
  auto y = torch::relu(project_->forward(x));
  for (int i = 0; i < steps_; ++i) {
    const std::int64_t div = std::int64_t{1} << (steps_ - 1 - i);
    y = resize(y, (h + div - 1) / div, (w + div - 1) / div);
    y = torch::relu(convs_[i]->as<torch::nn::Conv2d>()->forward(y));
  }
  return resize(y, h, w);
}

// First backbone: /8 (stem stride 2, stages 1,2,2,1). Second backbone runs on
// the first one's output at a further /2 (stem stride 1, stages 1,2,1,1).
PyramidExtractorImpl::PyramidExtractorImpl(int in, const NetworkConfig& cfg, bool pyramid)
    : pyramid_(pyramid) {
  const int base = cfg.backbone_base_width();
  const int u = cfg.upscale_channels;
  first_ = register_module("first", ResidualBackbone(in, base, cfg.backbone_blocks, 2,
                                                      std::vector<int>{1, 2, 2, 1}));
  if (pyramid_) {
    second_ = register_module("second", ResidualBackbone(first_->out_channels(), base, cfg.backbone_blocks,
                                                          1, std::vector<int>{1, 2, 1, 1}));
    up_first_ = register_module("up_first", Upscale(first_->out_channels(), u, 3));
    up_second_ = register_module("up_second", Upscale(second_->out_channels(), u, 4));
    merge1_ = register_module("merge1", conv3x3(2 * u, u));
    merge2_ = register_module("merge2", conv3x3(u, u));
  } else {
    up_first_ = register_module("up_first", Upscale(first_->out_channels(), 3 * u, 3));
  }
}

torch::Tensor PyramidExtractorImpl::forward(const torch::Tensor& image) {
  const auto h = image.size(2);
  const auto w = image.size(3);
  auto a = first_->forward(image);
  if (!pyramid_) return up_first_->forward(a, h, w);
  auto b = second_->forward(a);
  auto ua = up_first_->forward(a, h, w);
  auto ub = up_second_->forward(b, h, w);
  auto both = torch::cat({ua, ub}, 1);
  auto merged = torch::relu(merge2_(torch::relu(merge1_(both))));
  return torch::cat({ua, ub, merged}, 1);
}

PointEncoderImpl::PointEncoderImpl(const std::vector<int>& dims) {
  layers_ = register_module("layers", torch::nn::ModuleList());
  int in = 3;
  for (int d : dims) {
    layers_->push_back(torch::nn::Linear(in, d));
    in = d;
  }
}

PointFeatures PointEncoderImpl::forward(const torch::Tensor& points) {
  if (points.dim() != 2 || points.size(0) < 1) throw EmptyCloud("point encoder: empty cloud");
  auto x = points;
  for (const auto& layer : *layers_) x = torch::relu(layer->as<torch::nn::Linear>()->forward(x));
  auto global = std::get<0>(x.max(0));
  auto per_point = torch::cat({x, global.unsqueeze(0).expand({x.size(0), global.size(0)})}, 1);
  return {per_point, global};
}

PyramidFusionImpl::PyramidFusionImpl(int in, int out, int levels) : levels_(levels) {
  entry_ = register_module("entry", conv3x3(in, out));
  if (levels_ < 2) return;
  down_ = register_module("down", torch::nn::ModuleList());
  down_refine_ = register_module("down_refine", torch::nn::ModuleList());
  merge_ = register_module("merge", torch::nn::ModuleList());
  for (int l = 1; l < levels_; ++l) {
    down_->push_back(conv3x3(out, out, 2));
    down_refine_->push_back(conv3x3(out, out));
    merge_->push_back(conv3x3(2 * out, out));
  }
  output_ = register_module("output", conv1x1(in + out, out));
}

torch::Tensor PyramidFusionImpl::forward(const torch::Tensor& x) {
  auto x0 = torch::relu(entry_(x));
  if (levels_ < 2) return x0;
  std::vector<torch::Tensor> levels{x0};
  for (int l = 1; l < levels_; ++l) {
    auto y = torch::relu(down_[l - 1]->as<torch::nn::Conv2d>()->forward(levels.back()));
    levels.push_back(torch::relu(down_refine_[l - 1]->as<torch::nn::Conv2d>()->forward(y)));
  }
  auto y = levels.back();
  for (int l = levels_ - 2; l >= 0; --l) {
    const auto& skip = levels[static_cast<std::size_t>(l)];
    y = resize(y, skip.size(2), skip.size(3));
    y = torch::relu(merge_[l]->as<torch::nn::Conv2d>()->forward(torch::cat({skip, y}, 1)));
  }
  // Keep the unprocessed streams alongside the pyramid output.
  return torch::relu(output_(torch::cat({x, y}, 1)));
}

RegressionHeadImpl::RegressionHeadImpl(int in, const std::vector<int>& hidden, int num_classes, int width)
    : num_classes_(num_classes), width_(width) {
  layers_ = register_module("layers", torch::nn::ModuleList());
  int c = 2 * in;
  for (int h : hidden) {
    layers_->push_back(torch::nn::Linear(c, h));
    c = h;
  }
  layers_->push_back(torch::nn::Linear(c, num_classes * width));
}

torch::Tensor RegressionHeadImpl::forward(const torch::Tensor& fused, const torch::Tensor& class_index) {
  auto x = pool_features(fused);
  const auto n = layers_->size();
  for (std::size_t i = 0; i < n; ++i) {
    x = layers_[i]->as<torch::nn::Linear>()->forward(x);
    if (i + 1 < n) x = torch::relu(x);
  }
  x = x.view({x.size(0), num_classes_, width_});
  auto idx = class_index.view({-1, 1, 1}).expand({x.size(0), 1, width_});
  return x.gather(1, idx).squeeze(1);
}

void RegressionHeadImpl::zero_output() {
  torch::NoGradGuard guard;
  auto last = layers_[layers_->size() - 1]->as<torch::nn::Linear>();
  last->weight.zero_();
  last->bias.zero_();
}

SegmentationHeadImpl::SegmentationHeadImpl(int num_classes, int ch) {
  shallow_ = register_module("shallow", conv3x3(3, ch));
  enc1_ = register_module("enc1", conv3x3(ch, 2 * ch, 2));
  enc2_ = register_module("enc2", conv3x3(2 * ch, 4 * ch, 2));
  aspp0_ = register_module("aspp0", conv1x1(4 * ch, 2 * ch));
  aspp1_ = register_module("aspp1", conv3x3(4 * ch, 2 * ch, 1, 2));
  aspp2_ = register_module("aspp2", conv3x3(4 * ch, 2 * ch, 1, 4));
  aspp_pool_ = register_module("aspp_pool", conv1x1(4 * ch, 2 * ch));
  project_ = register_module("project", conv1x1(8 * ch, 2 * ch));
  decode_ = register_module("decode", conv3x3(3 * ch, ch));
  classify_ = register_module("classify", conv1x1(ch, num_classes));
}

torch::Tensor SegmentationHeadImpl::forward(const torch::Tensor& rgb) {
  auto s = torch::relu(shallow_(rgb));
  auto e = torch::relu(enc2_(torch::relu(enc1_(s))));
  auto pooled = torch::relu(aspp_pool_(F::adaptive_avg_pool2d(e, F::AdaptiveAvgPool2dFuncOptions(1))));
  auto branches = torch::cat({torch::relu(aspp0_(e)), torch::relu(aspp1_(e)), torch::relu(aspp2_(e)),
                              pooled.expand({e.size(0), pooled.size(1), e.size(2), e.size(3)})},
                             1);
  auto p = torch::relu(project_(branches));
  auto d = torch::relu(decode_(torch::cat({resize(p, rgb.size(2), rgb.size(3)), s}, 1)));
  return classify_(d);
}

// ---------------------------------------------------------------------------

torch::Tensor quaternion_to_matrix(const torch::Tensor& q) {
  auto w = q.select(1, 0), x = q.select(1, 1), y = q.select(1, 2), z = q.select(1, 3);
  auto r = torch::stack({w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y),
                         2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x),
                         2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z},
                        1);
  return r.view({q.size(0), 3, 3});
}

torch::Tensor quaternion_multiply(const torch::Tensor& a, const torch::Tensor& b) {
  auto aw = a.select(1, 0), ax = a.select(1, 1), ay = a.select(1, 2), az = a.select(1, 3);
  auto bw = b.select(1, 0), bx = b.select(1, 1), by = b.select(1, 2), bz = b.select(1, 3);
  return torch::stack({aw * bw - ax * bx - ay * by - az * bz, aw * bx + ax * bw + ay * bz - az * by,
                       aw * by - ax * bz + ay * bw + az * bx, aw * bz + ax * by - ay * bx + az * bw},
                      1);
}

torch::Tensor pose_loss_tensor(const torch::Tensor& gt_r, const torch::Tensor& gt_t, const torch::Tensor& q,
                               const torch::Tensor& t, const torch::Tensor& pts, bool symmetric) {
  auto qn = q / torch::linalg_vector_norm(q, 2, {0}, false, std::nullopt);
  auto est_r = quaternion_to_matrix(qn.unsqueeze(0)).squeeze(0);
  auto a = torch::matmul(pts, gt_r.transpose(0, 1)) + gt_t;
  auto b = torch::matmul(pts, est_r.transpose(0, 1)) + t;
  if (!symmetric) {
    return torch::linalg_vector_norm(a - b, 2, {1}, false, std::nullopt).mean();
  }
  auto d2 = (a.unsqueeze(1) - b.unsqueeze(0)).pow(2).sum(2);
  auto nearest = std::get<0>(d2.min(1));
  return torch::sqrt(nearest + 1e-12).mean();
}

// ---------------------------------------------------------------------------

ObjectBatch make_object_batch(const std::vector<PreparedCrop>& crops) {
  if (crops.empty()) throw InvalidArgument("make_object_batch: no crops");
  const int side = crops.front().side;
  const auto b = static_cast<std::int64_t>(crops.size());
  ObjectBatch batch;
  batch.side = side;
  auto rgb = torch::zeros({b, side, side, 3}, torch::kUInt8);
  auto mask = torch::zeros({b, 1, side, side}, torch::kUInt8);
  batch.class_index = torch::zeros({b}, torch::kInt64);
  batch.centroid = torch::zeros({b, 3});
  for (std::int64_t i = 0; i < b; ++i) {
    const auto& c = crops[static_cast<std::size_t>(i)];
    if (c.side != side) throw AlignmentError("make_object_batch: crops differ in side");
    std::memcpy(rgb[i].data_ptr<std::uint8_t>(), c.rgb.data().data(), c.rgb.data().size());
    std::memcpy(mask[i].data_ptr<std::uint8_t>(), c.mask.data().data(), c.mask.data().size());
    batch.class_index[i] = c.class_id;
    const Eigen::Vector3d centroid = c.cloud.centroid();
    for (int k = 0; k < 3; ++k) batch.centroid[i][k] = centroid[k];
    auto pts = torch::empty({static_cast<std::int64_t>(c.cloud.size()), 3}, torch::kFloat64);
    std::memcpy(pts.data_ptr<double>(), c.cloud.points.data(), sizeof(double) * c.cloud.size() * 3);
    batch.points.push_back(pts.to(torch::kFloat32));
    batch.pixel_index.push_back(
        torch::from_blob(const_cast<std::int64_t*>(c.cloud.pixel_index.data()),
                         {static_cast<std::int64_t>(c.cloud.pixel_index.size())}, torch::kInt64)
            .clone());
  }
  batch.rgb = rgb.permute({0, 3, 1, 2}).to(torch::kFloat32).div(255.0).sub(0.5).contiguous();
  batch.mask = mask.to(torch::kFloat32);
  return batch;
}

torch::Tensor frame_tensor(const RgbImage& rgb) {
  auto t = torch::from_blob(const_cast<std::uint8_t*>(rgb.data().data()), {rgb.rows(), rgb.cols(), 3},
                            torch::kUInt8);
  return t.permute({2, 0, 1}).unsqueeze(0).to(torch::kFloat32).div(255.0).sub(0.5).contiguous();
}

// ---------------------------------------------------------------------------

RefinerImpl::RefinerImpl(const NetworkConfig& cfg) : cfg_(cfg) {
  const int f = cfg.fusion_channels;
  encoder_ = register_module("encoder", PointEncoder(cfg.point_feature_dims));
  level0_ = register_module("level0", conv3x3(f + cfg.point_channels(), f));
  level1_ = register_module("level1", conv3x3(f, f, 2));
  merge_ = register_module("merge", conv3x3(2 * f, f));
  head_ = register_module("head", RegressionHead(f, cfg.head_hidden_dims, cfg.num_classes, 7));
  head_->zero_output();
}

void RefinerImpl::zero_residual() { head_->zero_output(); }

PoseOutput RefinerImpl::forward(const PoseOutput& est, const torch::Tensor& fused, const ObjectBatch& batch) {
  const double k = cfg_.point_input_scale;
  auto rot = quaternion_to_matrix(est.quaternion);
  std::vector<torch::Tensor> maps;
  for (std::int64_t i = 0; i < batch.size(); ++i) {
    // Row-vector form of R^T (p - t).
    auto local = torch::matmul(batch.points[static_cast<std::size_t>(i)] - est.translation[i], rot[i]) * k;
    auto feats = encoder_->forward(local);
    maps.push_back(PoseNetworkImpl::scatter_points(feats.per_point, batch.pixel_index[static_cast<std::size_t>(i)],
                                                   batch.side));
  }
  auto x = torch::cat({fused, torch::stack(maps)}, 1);
  auto l0 = torch::relu(level0_(x));
  auto l1 = torch::relu(level1_(l0));
  auto m = torch::relu(merge_(torch::cat({l0, resize(l1, l0.size(2), l0.size(3))}, 1)));
  auto out = head_->forward(m, batch.class_index);

  auto identity = torch::zeros({1, 4});
  identity[0][0] = 1.0;
  auto delta_q = out.narrow(1, 0, 4) + identity;
  delta_q = delta_q / torch::linalg_vector_norm(delta_q, 2, {1}, true, std::nullopt);
  auto q = quaternion_multiply(est.quaternion, delta_q);
  q = q / torch::linalg_vector_norm(q, 2, {1}, true, std::nullopt);
  return {est.translation + out.narrow(1, 4, 3) / k, q};
}

// ---------------------------------------------------------------------------

PoseNetworkImpl::PoseNetworkImpl(const NetworkConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const bool pyramid = cfg_.ablation != Ablation::no_pyramid_backbone;
  seg_ = register_module("segmentation", SegmentationHead(cfg_.num_classes, cfg_.seg_channels));
  rgb_extractor_ = register_module("rgb_extractor", PyramidExtractor(3, cfg_, pyramid));
  mask_extractor_ = register_module("mask_extractor", PyramidExtractor(1, cfg_, pyramid));
  point_encoder_ = register_module("point_encoder", PointEncoder(cfg_.point_feature_dims));
  const int fused_in = 2 * cfg_.extractor_channels() + cfg_.point_channels();
  fusion_ = register_module("fusion", PyramidFusion(fused_in, cfg_.fusion_channels, cfg_.effective_fusion_levels()));
  translation_head_ = register_module(
      "translation_head", RegressionHead(cfg_.fusion_channels, cfg_.head_hidden_dims, cfg_.num_classes, 3));
  rotation_head_ = register_module(
      "rotation_head", RegressionHead(cfg_.fusion_channels, cfg_.head_hidden_dims, cfg_.num_classes, 4));
  refiner_ = register_module("refiner", Refiner(cfg_));
}

torch::Tensor PoseNetworkImpl::segment(const torch::Tensor& rgb_frame) { return seg_->forward(rgb_frame); }

torch::Tensor PoseNetworkImpl::pyramid_backbone_forward(const torch::Tensor& image, bool is_mask) {
  if (image.dim() != 4 || image.size(1) != (is_mask ? 1 : 3)) {
    throw InvalidArgument(is_mask ? "mask input must be [B,1,H,W]" : "rgb input must be [B,3,H,W]");
  }
  if (image.size(2) < kMinCropSide || image.size(3) < kMinCropSide) {
    throw CropTooSmall("crop is smaller than " + std::to_string(kMinCropSide) + " pixels");
  }
  return is_mask ? mask_extractor_->forward(image) : rgb_extractor_->forward(image);
}

PointFeatures PoseNetworkImpl::point_encoder_forward(const torch::Tensor& points) {
  return point_encoder_->forward(points);
}

torch::Tensor PoseNetworkImpl::scatter_points(const torch::Tensor& per_point, const torch::Tensor& pixel_index,
                                              int side) {
  if (per_point.size(0) != pixel_index.size(0)) throw AlignmentError("point features and pixel indices differ");
  auto grid = torch::zeros({per_point.size(1), static_cast<std::int64_t>(side) * side}, per_point.options());
  return grid.index_copy(1, pixel_index, per_point.transpose(0, 1)).view({per_point.size(1), side, side});
}

torch::Tensor PoseNetworkImpl::pyramid_fusion_forward(const torch::Tensor& rgb_feat, const torch::Tensor& mask_feat,
                                                      const torch::Tensor& point_map) {
  for (const auto* t : {&mask_feat, &point_map}) {
    if (t->size(0) != rgb_feat.size(0) || t->size(2) != rgb_feat.size(2) || t->size(3) != rgb_feat.size(3)) {
      throw AlignmentError("fusion streams differ in batch or spatial size");
    }
  }
  return fusion_->forward(torch::cat({rgb_feat, mask_feat, point_map}, 1));
}

PoseOutput PoseNetworkImpl::heads_forward(const torch::Tensor& fused, const ObjectBatch& batch) {
  auto t = batch.centroid + translation_head_->forward(fused, batch.class_index) / cfg_.point_input_scale;
  auto identity = torch::zeros({1, 4});
  identity[0][0] = 1.0;
  auto q = rotation_head_->forward(fused, batch.class_index) + identity;
  q = q / torch::linalg_vector_norm(q, 2, {1}, true, std::nullopt);
  return {t, q};
}

PoseOutput PoseNetworkImpl::refine_forward(const PoseOutput& est, const torch::Tensor& fused,
                                           const ObjectBatch& batch) {
  return refiner_->forward(est, fused, batch);
}

torch::Tensor PoseNetworkImpl::point_map(const ObjectBatch& batch, PointEncoder& encoder,
                                         const std::vector<torch::Tensor>& inputs) {
  std::vector<torch::Tensor> maps;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto feats = encoder->forward(inputs[i]);
    maps.push_back(scatter_points(feats.per_point, batch.pixel_index[i], batch.side));
  }
  return torch::stack(maps);
}

PoseNetworkImpl::Output PoseNetworkImpl::forward(const ObjectBatch& batch, int refine_iterations) {
  for (std::int64_t i = 0; i < batch.size(); ++i) {
    const auto c = batch.class_index[i].item<std::int64_t>();
    if (c < 1 || c >= cfg_.num_classes) throw InvalidArgument("class id outside the network's classes");
  }
  Output out;
  auto rgb_feat = pyramid_backbone_forward(batch.rgb, false);
  auto mask_feat = pyramid_backbone_forward(batch.mask, true);
  std::vector<torch::Tensor> centred;
  for (std::int64_t i = 0; i < batch.size(); ++i) {
    centred.push_back((batch.points[static_cast<std::size_t>(i)] - batch.centroid[i]) * cfg_.point_input_scale);
  }
  auto points = point_map(batch, point_encoder_, centred);
  out.fused = pyramid_fusion_forward(rgb_feat, mask_feat, points);
  out.initial = heads_forward(out.fused, batch);

  PoseOutput current{out.initial.translation.detach(), out.initial.quaternion.detach()};
  const auto fused = out.fused.detach();
  for (int k = 0; k < refine_iterations; ++k) {
    auto next = refine_forward(current, fused, batch);
    out.refined.push_back(next);
    current = {next.translation.detach(), next.quaternion.detach()};
  }
  return out;
}

std::map<std::string, std::vector<torch::Tensor>> PoseNetworkImpl::parameter_groups() {
  std::map<std::string, std::vector<torch::Tensor>> groups;
  for (const auto& item : named_parameters(true)) {
    const std::string& key = item.key();
    groups[key.substr(0, key.find('.'))].push_back(item.value());
  }
  return groups;
}

std::int64_t PoseNetworkImpl::parameter_count() { return pfpose::parameter_count(*this); }

std::int64_t parameter_count(torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters(true)) n += p.numel();
  return n;
}

PoseEstimate to_estimate(const PoseOutput& out, std::int64_t row, int class_id, bool refined) {
  auto t = out.translation[row].to(torch::kFloat64).contiguous();
  auto q = out.quaternion[row].to(torch::kFloat64).contiguous();
  PoseEstimate est;
  est.class_id = class_id;
  est.translation = {t[0].item<double>(), t[1].item<double>(), t[2].item<double>()};
  est.quaternion = Quaternion{q[0].item<double>(), q[1].item<double>(), q[2].item<double>(),
                              q[3].item<double>()}
                       .normalized();
  est.refined = refined;
  return est;
}

}  // namespace pfpose
