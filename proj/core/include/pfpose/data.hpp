#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pfpose/geometry.hpp"
#include "pfpose/image.hpp"

namespace pfpose {

struct GroundTruth {
  int class_id = 0;
  Pose pose;
};

struct SceneSample {
  std::string id;
  RgbImage rgb;
  DepthImage depth;
  LabelImage mask;
  CameraIntrinsics intrinsics;
  std::vector<GroundTruth> gt;
  std::string split;

  void validate() const;  // throws InvalidArgument on broken invariants
};

using ModelSet = std::map<int, std::shared_ptr<const ObjectModel>>;

// ---------------------------------------------------------------------------
// Synthetic scenes

enum class ShapeKind { cuboid, cylinder, compound };

struct ShapeSpec {
  int class_id = 1;
  ShapeKind kind = ShapeKind::cuboid;
  // cuboid: full extents; cylinder: (radius, unused, height); compound: extents
  // of the base block, which carries a smaller block on its +z face.
  Eigen::Vector3d size{0.08, 0.06, 0.04};
  std::array<std::uint8_t, 3> color{200, 60, 60};
  std::size_t model_points = 800;
};

struct SyntheticSpec {
  std::vector<ShapeSpec> shapes;
  int rows = 120;
  int cols = 160;
  CameraIntrinsics intrinsics{200.0, 200.0, 79.5, 59.5, 0.0001};
  double min_distance = 0.45;  // meters, camera z of the object origin
  double max_distance = 0.65;
  double max_rotation = 3.14159265358979323846;  // radians; rotations drawn up to this angle
  int objects_per_scene = 1;
  double depth_noise_sigma = 0.0;  // meters
  double pixel_noise_sigma = 0.0;  // 8-bit intensity units
  double mask_corruption_rate = 0.0;  // flip probability of mask boundary pixels
  int min_visible_pixels = 60;
  int max_pose_retries = 50;
  std::array<std::uint8_t, 3> background{30, 30, 30};
  std::uint64_t seed = 1;

  void validate() const;

  // Three-object default: a box, a cylinder (symmetric) and a compound block.
  static SyntheticSpec desk_default();
};

// Model points of a shape sampled uniformly over its surface.
ObjectModel build_model(const ShapeSpec& shape, std::uint64_t seed);
ModelSet build_models(const SyntheticSpec& spec);

// Distance from an object-frame point to the shape's surface.
double surface_distance(const ShapeSpec& shape, const Eigen::Vector3d& p);

// Ray casts every pixel through the shapes' analytic surfaces. Deterministic
// per spec.seed; sample i only depends on (seed, i).
std::vector<SceneSample> generate_synthetic(const SyntheticSpec& spec, std::size_t n);

// ---------------------------------------------------------------------------
// On-disk datasets

// Random-access, lazily loading sample source. Iteration yields samples in a
// deterministic order.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual SceneSample load(std::size_t index) const = 0;
  virtual const ModelSet& models() const = 0;

  class Iterator {
   public:
    using value_type = SceneSample;
    using difference_type = std::ptrdiff_t;
    Iterator(const SampleSource* src, std::size_t i) : src_(src), i_(i) {}
    SceneSample operator*() const { return src_->load(i_); }
    Iterator& operator++() {
      ++i_;
      return *this;
    }
    bool operator==(const Iterator& o) const { return i_ == o.i_; }

   private:
    const SampleSource* src_;
    std::size_t i_;
  };
  Iterator begin() const { return {this, 0}; }
  Iterator end() const { return {this, size()}; }

  std::vector<SceneSample> load_all() const;
};

// LineMOD-style layout:
//   root/models/obj_XX.xyz (+ .xyz.meta)        object models, meters
//   root/data/XX/{rgb,depth,mask}/NNNN.png       XX = two-digit object id
//   root/data/XX/gt.yml     frame -> [{obj_id, cam_R_m2c[9] row-major, cam_t_m2c[3] mm}]
//   root/data/XX/info.yml   frame -> {cam_K[9], depth_scale (mm per depth unit)}
//   root/data/XX/<split>.txt   frame ids
// A mask whose maximum value is 255 is binary for object XX; otherwise its
// values are class labels.
class LinemodDataset : public SampleSource {
 public:
  LinemodDataset(std::filesystem::path root, std::string split);
  std::size_t size() const override { return entries_.size(); }
  SceneSample load(std::size_t index) const override;
  const ModelSet& models() const override { return models_; }

 private:
  struct Entry {
    int object_id;
    int frame;
  };
  std::filesystem::path root_;
  std::string split_;
  std::vector<Entry> entries_;
  ModelSet models_;
};

// YCB-Video-style layout:
//   root/models/obj_XX.xyz (+ .xyz.meta)
//   root/image_sets/<split>.txt        lines "VVVV/FFFFFF", order preserved
//   root/data/VVVV/camera.yml          {intrinsic_matrix[9], factor_depth}
//   root/data/VVVV/FFFFFF-{color,depth,label}.png
//   root/data/VVVV/FFFFFF-meta.yml     {cls_indexes[n], poses[n][12] row-major 3x4, meters}
// Depth in meters is raw / factor_depth.
class YcbvDataset : public SampleSource {
 public:
  YcbvDataset(std::filesystem::path root, std::string split);
  std::size_t size() const override { return frames_.size(); }
  SceneSample load(std::size_t index) const override;
  const ModelSet& models() const override { return models_; }

 private:
  std::filesystem::path root_;
  std::string split_;
  std::vector<std::string> frames_;
  std::map<std::string, CameraIntrinsics> cameras_;  // per video
  ModelSet models_;
};

// Loads every obj_XX.xyz under root/models.
ModelSet load_models(const std::filesystem::path& models_dir);

// Writes samples and models in the LineMOD-style layout. Each sample lands in
// the folder of its first ground-truth object; masks are written as label
// images. Split files are written from SceneSample::split.
void export_linemod_layout(const std::vector<SceneSample>& samples, const ModelSet& models,
                           const std::filesystem::path& root);

// gt.yml record helpers, exposed for round-trip checks.
std::string format_linemod_pose(const GroundTruth& gt);
GroundTruth parse_linemod_pose(const std::string& yaml_record);

}  // namespace pfpose
