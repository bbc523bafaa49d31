#include "pfpose/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "pfpose/errors.hpp"

namespace pfpose {

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quaternion Quaternion::normalized() const {
  const double n = norm();
  if (!std::isfinite(n) || n <= 1e-12) {
    throw DegenerateInput("quaternion norm is zero or non-finite");
  }
  return {w / n, x / n, y / n, z / n};
}

Eigen::Matrix3d quat_to_matrix(const Quaternion& q_in) {
  const Quaternion q = q_in.normalized();
  const double ww = q.w * q.w, xx = q.x * q.x, yy = q.y * q.y, zz = q.z * q.z;
  const double xy = q.x * q.y, xz = q.x * q.z, yz = q.y * q.z;
  const double wx = q.w * q.x, wy = q.w * q.y, wz = q.w * q.z;
  Eigen::Matrix3d r;
  r << ww + xx - yy - zz, 2.0 * (xy - wz), 2.0 * (xz + wy),
      2.0 * (xy + wz), ww - xx + yy - zz, 2.0 * (yz - wx),
      2.0 * (xz - wy), 2.0 * (yz + wx), ww - xx - yy + zz;
  return r;
}

void check_rotation(const Eigen::Matrix3d& rotation, double tol) {
  if (!rotation.allFinite()) throw InvalidRotation("rotation has non-finite entries");
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).norm();
  const double det = rotation.determinant();
  if (ortho > tol || std::abs(det - 1.0) > tol) {
    std::ostringstream msg;
    msg << "matrix is not a rotation: |R^T R - I|_F = " << ortho << ", det = " << det;
    throw InvalidRotation(msg.str());
  }
}

Quaternion matrix_to_quat(const Eigen::Matrix3d& r) {
  check_rotation(r, 1e-4);
  const double trace = r.trace();
  Quaternion q;
  // Pick the largest of (trace, r00, r11, r22) so the square root argument
  // stays well away from zero.
  if (trace >= r(0, 0) && trace >= r(1, 1) && trace >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + trace);
    q = {0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s};
  } else if (r(0, 0) >= r(1, 1) && r(0, 0) >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2));
    q = {(r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s};
  } else if (r(1, 1) >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2));
    q = {(r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s};
  } else {
    const double s = 2.0 * std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1));
    q = {(r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s};
  }
  if (q.w < 0.0) q = {-q.w, -q.x, -q.y, -q.z};
  return q.normalized();
}

Quaternion axis_angle(const Eigen::Vector3d& axis, double angle) {
  const double n = axis.norm();
  if (n <= 1e-12) throw DegenerateInput("rotation axis has zero length");
  const Eigen::Vector3d a = axis / n;
  const double s = std::sin(0.5 * angle);
  return {std::cos(0.5 * angle), a.x() * s, a.y() * s, a.z() * s};
}

Quaternion multiply(const Quaternion& a, const Quaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

double rotation_distance(const Quaternion& a, const Quaternion& b) {
  const Quaternion qa = a.normalized();
  const Quaternion qb = b.normalized();
  const double dot = std::abs(qa.w * qb.w + qa.x * qb.x + qa.y * qb.y + qa.z * qb.z);
  return 2.0 * std::acos(std::min(1.0, dot));
}

Pose Pose::from_quaternion(const Quaternion& q, const Eigen::Vector3d& t) {
  return {quat_to_matrix(q), t};
}

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Points transform_points(const Pose& pose, const Points& pts) {
  Points out = pts * pose.rotation.transpose();
  out.rowwise() += pose.translation.transpose();
  return out;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("intrinsics: focal lengths must be > 0");
  if (!(depth_scale > 0.0)) throw InvalidArgument("intrinsics: depth_scale must be > 0");
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    throw InvalidArgument("intrinsics: principal point must be finite");
  }
}

CameraIntrinsics CameraIntrinsics::shifted(int row0, int col0) const {
  CameraIntrinsics out = *this;
  out.cx -= col0;
  out.cy -= row0;
  return out;
}

Eigen::Vector2d CameraIntrinsics::project(const Eigen::Vector3d& p) const {
  return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
}

Eigen::Vector3d PointCloud::centroid() const {
  if (points.rows() == 0) throw EmptyCloud("centroid of an empty cloud");
  return points.colwise().mean().transpose();
}

template <typename DepthT>
PointCloud depth_to_pointcloud(const Image<DepthT>& depth, const CameraIntrinsics& intr,
                               const BinaryMask* mask) {
  intr.validate();
  if (mask != nullptr && !mask->same_size(depth)) {
    throw InvalidArgument("depth_to_pointcloud: mask and depth sizes differ");
  }
  std::vector<std::int64_t> selected;
  for (int v = 0; v < depth.rows(); ++v) {
    for (int u = 0; u < depth.cols(); ++u) {
      const double d = static_cast<double>(depth(v, u));
      if (d < 0.0) throw InvalidArgument("depth_to_pointcloud: negative depth");
      if (d > 0.0 && (mask == nullptr || (*mask)(v, u) != 0)) {
        selected.push_back(static_cast<std::int64_t>(v) * depth.cols() + u);
      }
    }
  }
  if (selected.empty()) throw EmptyCloud("depth_to_pointcloud: no pixel with depth selected");

  PointCloud cloud;
  cloud.points.resize(static_cast<Eigen::Index>(selected.size()), 3);
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const int v = static_cast<int>(selected[i] / depth.cols());
    const int u = static_cast<int>(selected[i] % depth.cols());
    const double z = static_cast<double>(depth(v, u)) * intr.depth_scale;
    const auto row = static_cast<Eigen::Index>(i);
    cloud.points(row, 0) = (u - intr.cx) * z / intr.fx;
    cloud.points(row, 1) = (v - intr.cy) * z / intr.fy;
    cloud.points(row, 2) = z;
  }
  cloud.pixel_index = std::move(selected);
  return cloud;
}

template PointCloud depth_to_pointcloud(const Image<std::uint16_t>&, const CameraIntrinsics&,
                                        const BinaryMask*);
template PointCloud depth_to_pointcloud(const Image<float>&, const CameraIntrinsics&,
                                        const BinaryMask*);
template PointCloud depth_to_pointcloud(const Image<double>&, const CameraIntrinsics&,
                                        const BinaryMask*);

double point_set_diameter(const Points& pts) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < pts.rows(); ++j) {
      best = std::max(best, (pts.row(i) - pts.row(j)).squaredNorm());
    }
  }
  return std::sqrt(best);
}

ObjectModel ObjectModel::from_points(int class_id, Points points, bool symmetric) {
  if (points.rows() < 2) throw InvalidArgument("object model needs at least two points");
  if (!points.allFinite()) throw InvalidArgument("object model has non-finite points");
  ObjectModel model;
  model.class_id = class_id;
  model.diameter = point_set_diameter(points);
  if (!(model.diameter > 0.0)) throw InvalidArgument("object model has zero diameter");
  model.points = std::move(points);
  model.symmetric = symmetric;
  return model;
}

Eigen::Vector3d ObjectModel::mean() const { return points.colwise().mean().transpose(); }

Points sample_model_points(const ObjectModel& model, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw InvalidArgument("sample_model_points: count must be >= 1");
  const std::size_t m = model.size();
  if (m == 0) throw InvalidArgument("sample_model_points: empty model");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> picks(count);
  if (count <= m) {
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> dist(i, m - 1);
      std::swap(idx[i], idx[dist(rng)]);
      picks[i] = idx[i];
    }
  } else {
    std::uniform_int_distribution<std::size_t> dist(0, m - 1);
    for (auto& p : picks) p = dist(rng);
  }
  Points out(static_cast<Eigen::Index>(count), 3);
  for (std::size_t i = 0; i < count; ++i) {
    out.row(static_cast<Eigen::Index>(i)) = model.points.row(static_cast<Eigen::Index>(picks[i]));
  }
  return out;
}

ObjectModel load_object_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open object model " + path.string());
  long long m = 0;
  if (!(in >> m) || m < 2) throw ParseError(path.string() + ": bad point count header");
  Points pts(static_cast<Eigen::Index>(m), 3);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(in >> pts(i, 0) >> pts(i, 1) >> pts(i, 2))) {
      throw ParseError(path.string() + ": truncated point list at row " + std::to_string(i));
    }
  }

  auto meta_path = path;
  meta_path += ".meta";
  std::ifstream meta(meta_path);
  if (!meta) throw MissingFile("missing model metadata " + meta_path.string());
  std::optional<int> class_id;
  std::optional<double> diameter;
  bool symmetric = false;
  std::string key;
  while (meta >> key) {
    if (key == "class_id") {
      int v = 0;
      if (!(meta >> v)) throw ParseError(meta_path.string() + ": bad class_id");
      class_id = v;
    } else if (key == "diameter") {
      double v = 0;
      if (!(meta >> v)) throw ParseError(meta_path.string() + ": bad diameter");
      diameter = v;
    } else if (key == "symmetric") {
      int v = 0;
      if (!(meta >> v)) throw ParseError(meta_path.string() + ": bad symmetric flag");
      symmetric = v != 0;
    } else {
      throw ParseError(meta_path.string() + ": unknown key '" + key + "'");
    }
  }
  if (!class_id) throw ParseError(meta_path.string() + ": class_id missing");

  ObjectModel model = ObjectModel::from_points(*class_id, std::move(pts), symmetric);
  if (diameter && std::abs(*diameter - model.diameter) > 1e-6) {
    std::ostringstream msg;
    msg << meta_path.string() << ": diameter " << *diameter
        << " disagrees with point set diameter " << model.diameter;
    throw ParseError(msg.str());
  }
  return model;
}

void save_object_model(const ObjectModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw MissingFile("cannot write " + path.string());
  out.precision(std::numeric_limits<double>::max_digits10);
  out << model.size() << '\n';
  for (Eigen::Index i = 0; i < model.points.rows(); ++i) {
    out << model.points(i, 0) << ' ' << model.points(i, 1) << ' ' << model.points(i, 2) << '\n';
  }
  auto meta_path = path;
  meta_path += ".meta";
  std::ofstream meta(meta_path);
  if (!meta) throw MissingFile("cannot write " + meta_path.string());
  meta.precision(std::numeric_limits<double>::max_digits10);
  meta << "class_id " << model.class_id << '\n'
       << "diameter " << model.diameter << '\n'
       << "symmetric " << (model.symmetric ? 1 : 0) << '\n';
}

}  // namespace pfpose
