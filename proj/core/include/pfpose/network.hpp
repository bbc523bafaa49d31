#pragma once

#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "pfpose/geometry.hpp"
#include "pfpose/preprocess.hpp"

namespace pfpose {

enum class Ablation { none, no_pyramid_backbone, shallow_fusion, no_pyramid_fusion };

std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& s);

// Channel counts and depths of every learnable block. Defaults are desk scale:
// the residual backbones keep the 34-layer block layout (3, 4, 6, 3) at an
// eighth of the standard width.
struct NetworkConfig {
  double backbone_width_multiplier = 0.125;  // 1.0 -> stage widths 64/128/256/512
  std::vector<int> backbone_blocks{3, 4, 6, 3};
  int upscale_channels = 16;  // per upscale path; an extractor emits 3x this
  int fusion_channels = 32;
  int fusion_levels = 3;
  std::vector<int> point_feature_dims{32, 64};
  std::vector<int> head_hidden_dims{64};
  int seg_channels = 8;
  Ablation ablation = Ablation::none;
  int num_classes = 4;  // label classes including background 0
  int crop_size = 64;
  int refine_iterations = 2;
  double point_input_scale = 10.0;  // point coordinates are fed in units of 1/scale meters

  void validate() const;  // throws InvalidArgument
  int backbone_base_width() const;
  int effective_fusion_levels() const;
  int extractor_channels() const { return 3 * upscale_channels; }
  int point_channels() const { return 2 * point_feature_dims.back(); }
};

// Smallest crop side the two stacked backbones can downsample.
inline constexpr int kMinCropSide = 16;

struct PoseEstimate {
  int class_id = 0;
  Quaternion quaternion;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double confidence = 0.0;
  bool refined = false;

  Pose pose() const { return Pose::from_quaternion(quaternion, translation); }
};

// ---------------------------------------------------------------------------
// Building blocks

class ResidualBlockImpl : public torch::nn::Module {
 public:
  ResidualBlockImpl(int in_channels, int out_channels, int stride);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, shortcut_{nullptr};
  torch::nn::GroupNorm norm1_{nullptr}, norm2_{nullptr}, shortcut_norm_{nullptr};
};
TORCH_MODULE(ResidualBlock);

// Stem convolution followed by four stages of basic residual blocks.
class ResidualBackboneImpl : public torch::nn::Module {
 public:
  ResidualBackboneImpl(int in_channels, int base_width, const std::vector<int>& blocks,
                       int stem_stride, const std::vector<int>& stage_strides);
  torch::Tensor forward(const torch::Tensor& x);
  int out_channels() const { return out_channels_; }

 private:
  torch::nn::Conv2d stem_{nullptr};
  torch::nn::GroupNorm stem_norm_{nullptr};
  torch::nn::Sequential stages_{nullptr};
  int out_channels_ = 0;
};
TORCH_MODULE(ResidualBackbone);

// Convolutions interleaved with x2 bilinear upsampling, ending exactly at the
// requested size.
class UpscaleImpl : public torch::nn::Module {
 public:
  UpscaleImpl(int in_channels, int out_channels, int steps);
  torch::Tensor forward(const torch::Tensor& x, std::int64_t height, std::int64_t width);

 private:
  torch::nn::Conv2d project_{nullptr};
  torch::nn::ModuleList convs_{nullptr};
  int steps_ = 0;
};
TORCH_MODULE(Upscale);

// Two residual backbones in series; both outputs are upscaled to the crop
// size and merged as concat(a, b, conv(conv(concat(a, b)))). With
// `pyramid == false` a single backbone and a single upscale path emit the
// same channel count.
class PyramidExtractorImpl : public torch::nn::Module {
 public:
  PyramidExtractorImpl(int in_channels, const NetworkConfig& cfg, bool pyramid);
  torch::Tensor forward(const torch::Tensor& image);

 private:
  bool pyramid_;
  ResidualBackbone first_{nullptr}, second_{nullptr};
  Upscale up_first_{nullptr}, up_second_{nullptr};
  torch::nn::Conv2d merge1_{nullptr}, merge2_{nullptr};
};
TORCH_MODULE(PyramidExtractor);

struct PointFeatures {
  torch::Tensor per_point;  // [N, 2 * d]: local features then the global vector
  torch::Tensor global;     // [d]
};

// Shared per-point MLP with a max-pooled global vector appended per point.
class PointEncoderImpl : public torch::nn::Module {
 public:
  explicit PointEncoderImpl(const std::vector<int>& dims);
  PointFeatures forward(const torch::Tensor& points);  // points [N, 3]

 private:
  torch::nn::ModuleList layers_{nullptr};
};
TORCH_MODULE(PointEncoder);

// Multi-resolution fusion of the concatenated streams. levels >= 2 builds the
// pyramid; levels == 1 is the flat concat + conv + ReLU variant.
class PyramidFusionImpl : public torch::nn::Module {
 public:
  PyramidFusionImpl(int in_channels, int out_channels, int levels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  int levels_;
  torch::nn::Conv2d entry_{nullptr};
  torch::nn::ModuleList down_{nullptr}, down_refine_{nullptr}, merge_{nullptr};
  torch::nn::Conv2d output_{nullptr};
};
TORCH_MODULE(PyramidFusion);

// Global average + max pooling followed by an MLP emitting one row per class.
class RegressionHeadImpl : public torch::nn::Module {
 public:
  RegressionHeadImpl(int in_channels, const std::vector<int>& hidden, int num_classes, int width);
  torch::Tensor forward(const torch::Tensor& fused, const torch::Tensor& class_index);
  void zero_output();

 private:
  torch::nn::ModuleList layers_{nullptr};
  int num_classes_;
  int width_;
};
TORCH_MODULE(RegressionHead);

// Small atrous spatial pyramid pooling encoder-decoder over the full frame.
class SegmentationHeadImpl : public torch::nn::Module {
 public:
  SegmentationHeadImpl(int num_classes, int channels);
  torch::Tensor forward(const torch::Tensor& rgb);  // [B,3,H,W] -> [B,C,H,W]

 private:
  torch::nn::Conv2d shallow_{nullptr}, enc1_{nullptr}, enc2_{nullptr};
  torch::nn::Conv2d aspp0_{nullptr}, aspp1_{nullptr}, aspp2_{nullptr}, aspp_pool_{nullptr};
  torch::nn::Conv2d project_{nullptr}, decode_{nullptr}, classify_{nullptr};
};
TORCH_MODULE(SegmentationHead);

// Network inputs for a batch of prepared object crops.
struct ObjectBatch {
  torch::Tensor rgb;          // [B,3,S,S], values in [-0.5, 0.5]
  torch::Tensor mask;         // [B,1,S,S]
  torch::Tensor class_index;  // [B] int64
  torch::Tensor centroid;     // [B,3] meters
  std::vector<torch::Tensor> points;       // [N_b,3] meters
  std::vector<torch::Tensor> pixel_index;  // [N_b] int64 into the S x S grid
  int side = 0;

  std::int64_t size() const { return rgb.defined() ? rgb.size(0) : 0; }
};

ObjectBatch make_object_batch(const std::vector<PreparedCrop>& crops);
torch::Tensor frame_tensor(const RgbImage& rgb);  // [1,3,H,W]

struct PoseOutput {
  torch::Tensor translation;  // [B,3] meters
  torch::Tensor quaternion;   // [B,4] unit, (w, x, y, z)
};

// Residual pose update over the current estimate: the observed points are
// moved into the estimate's object frame, encoded, fused with the main
// features through a two-level pyramid, and regressed to a rotation composed
// onto the estimate and a translation added to it.
class RefinerImpl : public torch::nn::Module {
 public:
  explicit RefinerImpl(const NetworkConfig& cfg);
  PoseOutput forward(const PoseOutput& estimate, const torch::Tensor& fused, const ObjectBatch& batch);
  void zero_residual();

 private:
  NetworkConfig cfg_;
  PointEncoder encoder_{nullptr};
  torch::nn::Conv2d level0_{nullptr}, level1_{nullptr}, merge_{nullptr};
  RegressionHead head_{nullptr};
};
TORCH_MODULE(Refiner);

class PoseNetworkImpl : public torch::nn::Module {
 public:
  explicit PoseNetworkImpl(const NetworkConfig& cfg);

  const NetworkConfig& config() const { return cfg_; }

  // Full-frame per-class logits [B, num_classes, H, W].
  torch::Tensor segment(const torch::Tensor& rgb_frame);

  // Pixel-wise RGB or mask features at crop resolution. Throws CropTooSmall.
  torch::Tensor pyramid_backbone_forward(const torch::Tensor& image, bool is_mask);

  PointFeatures point_encoder_forward(const torch::Tensor& points);

  // Scatters per-point rows to their pixels of an S x S grid, zero elsewhere.
  static torch::Tensor scatter_points(const torch::Tensor& per_point, const torch::Tensor& pixel_index,
                                      int side);

  // Throws AlignmentError when the streams disagree in batch or spatial size.
  torch::Tensor pyramid_fusion_forward(const torch::Tensor& rgb_feat, const torch::Tensor& mask_feat,
                                       const torch::Tensor& point_map);

  // Translation anchored at the observed centroid, unit quaternion.
  PoseOutput heads_forward(const torch::Tensor& fused, const ObjectBatch& batch);

  PoseOutput refine_forward(const PoseOutput& estimate, const torch::Tensor& fused,
                            const ObjectBatch& batch);

  struct Output {
    torch::Tensor fused;
    PoseOutput initial;
    std::vector<PoseOutput> refined;  // one entry per refinement iteration
  };
  // Extraction, fusion and heads for a batch of objects, then
  // `refine_iterations` refinement passes on a detached estimate.
  Output forward(const ObjectBatch& batch, int refine_iterations);

  // Parameters per functional block, used for gradient-flow checks.
  std::map<std::string, std::vector<torch::Tensor>> parameter_groups();
  std::int64_t parameter_count();

  Refiner& refiner() { return refiner_; }

 private:
  torch::Tensor point_map(const ObjectBatch& batch, PointEncoder& encoder,
                          const std::vector<torch::Tensor>& inputs);

  NetworkConfig cfg_;
  SegmentationHead seg_{nullptr};
  PyramidExtractor rgb_extractor_{nullptr}, mask_extractor_{nullptr};
  PointEncoder point_encoder_{nullptr};
  PyramidFusion fusion_{nullptr};
  RegressionHead translation_head_{nullptr}, rotation_head_{nullptr};
  Refiner refiner_{nullptr};
};
TORCH_MODULE(PoseNetwork);

std::int64_t parameter_count(torch::nn::Module& module);

// Differentiable helpers shared by the heads and the training losses.
torch::Tensor quaternion_to_matrix(const torch::Tensor& q);  // [B,4] -> [B,3,3]
torch::Tensor quaternion_multiply(const torch::Tensor& a, const torch::Tensor& b);

// Per-object pose losses on sampled model points `pts` [M,3].
torch::Tensor pose_loss_tensor(const torch::Tensor& gt_rotation, const torch::Tensor& gt_translation,
                               const torch::Tensor& est_quaternion, const torch::Tensor& est_translation,
                               const torch::Tensor& pts, bool symmetric);

PoseEstimate to_estimate(const PoseOutput& out, std::int64_t row, int class_id, bool refined);

}  // namespace pfpose
