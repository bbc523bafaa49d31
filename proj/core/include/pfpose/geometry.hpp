#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "pfpose/image.hpp"

namespace pfpose {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

// Rotation quaternion stored as (w, x, y, z). q and -q are the same rotation;
// compare rotations through rotation_distance(), never component-wise.
struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const;
  Quaternion normalized() const;  // throws DegenerateInput on near-zero norm
  Eigen::Vector4d as_vector() const { return {w, x, y, z}; }
  static Quaternion from_vector(const Eigen::Vector4d& v) { return {v[0], v[1], v[2], v[3]}; }
  static Quaternion identity() { return {}; }
};

Eigen::Matrix3d quat_to_matrix(const Quaternion& q);

// Branch-per-largest-diagonal conversion. Input must be orthonormal with
// det +1 within 1e-4; it is never re-orthonormalized.
Quaternion matrix_to_quat(const Eigen::Matrix3d& rotation);

// Rotation about a unit axis by `angle` radians.
Quaternion axis_angle(const Eigen::Vector3d& axis, double angle);

// Hamilton product a * b (rotation b applied first).
Quaternion multiply(const Quaternion& a, const Quaternion& b);

// Geodesic angle in radians between the two rotations.
double rotation_distance(const Quaternion& a, const Quaternion& b);

// Rigid transform x -> R x + t with t in meters.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  static Pose from_quaternion(const Quaternion& q, const Eigen::Vector3d& t);

  Quaternion quaternion() const { return matrix_to_quat(rotation); }
  Pose inverse() const;
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
};

// a * b: apply b, then a.
Pose compose(const Pose& a, const Pose& b);

// Throws InvalidRotation if R^T R deviates from I or det(R) from +1 by more than `tol`.
void check_rotation(const Eigen::Matrix3d& rotation, double tol = 1e-6);

Points transform_points(const Pose& pose, const Points& pts);

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double depth_scale = 0.001;  // meters per depth unit

  void validate() const;  // throws InvalidArgument

  // Intrinsics of a sub-image whose top-left source pixel is (row0, col0).
  CameraIntrinsics shifted(int row0, int col0) const;

  // Pixel (u, v) of a 3D point in the camera frame.
  Eigen::Vector2d project(const Eigen::Vector3d& p) const;
};

// Back-projected pixels. `pixel_index` holds the row-major source pixel of
// every point (row * cols + col) so per-point features can be scattered back.
struct PointCloud {
  Points points;
  std::vector<std::int64_t> pixel_index;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  Eigen::Vector3d centroid() const;
};

// Selected pixels with depth > 0 become ((u-cx) z / fx, (v-cy) z / fy, z) with
// z = d * depth_scale, in row-major scan order. Throws EmptyCloud when nothing
// is selected.
template <typename DepthT>
PointCloud depth_to_pointcloud(const Image<DepthT>& depth, const CameraIntrinsics& intr,
                               const BinaryMask* mask = nullptr);

extern template PointCloud depth_to_pointcloud(const Image<std::uint16_t>&,
                                               const CameraIntrinsics&, const BinaryMask*);
extern template PointCloud depth_to_pointcloud(const Image<float>&, const CameraIntrinsics&,
                                               const BinaryMask*);
extern template PointCloud depth_to_pointcloud(const Image<double>&, const CameraIntrinsics&,
                                               const BinaryMask*);

struct ObjectModel {
  int class_id = 0;
  Points points;
  double diameter = 0.0;  // max pairwise point distance, meters
  bool symmetric = false;

  // Builds a model and computes its diameter. Requires at least two points.
  static ObjectModel from_points(int class_id, Points points, bool symmetric);

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  Eigen::Vector3d mean() const;
};

// Exact O(m^2) maximum pairwise distance.
double point_set_diameter(const Points& pts);

// M points drawn with a seeded engine: without replacement when M <= m
// (M = m yields a permutation), uniformly with replacement otherwise.
Points sample_model_points(const ObjectModel& model, std::size_t count, std::uint64_t seed);

// ASCII point list: first line is the point count m, then m lines "x y z" in
// meters. The sidecar `<path>.meta` holds "class_id", "diameter" and
// "symmetric" as whitespace-separated key/value lines.
ObjectModel load_object_model(const std::filesystem::path& path);
void save_object_model(const ObjectModel& model, const std::filesystem::path& path);

}  // namespace pfpose
