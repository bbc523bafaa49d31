#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <set>

#include <Eigen/Dense>

#include "pfpose/data.hpp"
#include "pfpose/errors.hpp"

namespace pfpose {
namespace {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct Primitive {
  bool is_box = true;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half = Eigen::Vector3d::Zero();  // box half extents; cylinder (r, r, h/2)

  double sdf(const Eigen::Vector3d& p_in) const {
    const Eigen::Vector3d p = p_in - center;
    if (is_box) {
      const Eigen::Vector3d q = p.cwiseAbs() - half;
      return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
    }
    const Eigen::Vector2d d(std::hypot(p.x(), p.y()) - half.x(), std::abs(p.z()) - half.z());
    return std::min(std::max(d.x(), d.y()), 0.0) + d.cwiseMax(0.0).norm();
  }

  struct Hit {
    double t;
    Eigen::Vector3d normal;
  };

  // First entering intersection of origin + t * dir with t > 0.
  std::optional<Hit> intersect(const Eigen::Vector3d& origin_in, const Eigen::Vector3d& dir) const {
    const Eigen::Vector3d o = origin_in - center;
    if (is_box) {
      double t0 = -std::numeric_limits<double>::infinity();
      double t1 = std::numeric_limits<double>::infinity();
      int axis = -1;
      double sign = 0.0;
      for (int a = 0; a < 3; ++a) {
        if (std::abs(dir[a]) < 1e-15) {
          if (std::abs(o[a]) > half[a]) return std::nullopt;
          continue;
        }
        double ta = (-half[a] - o[a]) / dir[a];
        double tb = (half[a] - o[a]) / dir[a];
        double s = -1.0;
        if (ta > tb) {
          std::swap(ta, tb);
          s = 1.0;
        }
        if (ta > t0) {
          t0 = ta;
          axis = a;
          sign = s;
        }
        t1 = std::min(t1, tb);
      }
      if (t0 > t1 || t0 <= 0.0 || axis < 0) return std::nullopt;
      Eigen::Vector3d n = Eigen::Vector3d::Zero();
      n[axis] = sign;
      return Hit{t0, n};
    }
    const double r = half.x();
    const double h = half.z();
    std::optional<Hit> best;
    auto consider = [&](double t, const Eigen::Vector3d& n) {
      if (t > 0.0 && (!best || t < best->t)) best = Hit{t, n};
    };
    const double a = dir.x() * dir.x() + dir.y() * dir.y();
    if (a > 1e-15) {
      const double b = 2.0 * (o.x() * dir.x() + o.y() * dir.y());
      const double c = o.x() * o.x() + o.y() * o.y() - r * r;
      const double disc = b * b - 4.0 * a * c;
      if (disc >= 0.0) {
        const double t = (-b - std::sqrt(disc)) / (2.0 * a);
        const Eigen::Vector3d p = o + t * dir;
        if (std::abs(p.z()) <= h) consider(t, Eigen::Vector3d(p.x(), p.y(), 0.0).normalized());
      }
    }
    if (std::abs(dir.z()) > 1e-15) {
      for (double zc : {-h, h}) {
        const double t = (zc - o.z()) / dir.z();
        const Eigen::Vector3d p = o + t * dir;
        // Entering through a cap means travelling against its outward normal.
        if (p.x() * p.x() + p.y() * p.y() <= r * r && dir.z() * zc < 0.0) {
          consider(t, Eigen::Vector3d(0.0, 0.0, zc > 0 ? 1.0 : -1.0));
        }
      }
    }
    return best;
  }

  double area() const {
    if (is_box) {
      return 8.0 * (half.x() * half.y() + half.y() * half.z() + half.x() * half.z());
    }
    const double r = half.x();
    return 2.0 * M_PI * r * (2.0 * half.z()) + 2.0 * M_PI * r * r;
  }

  template <typename Rng>
  Eigen::Vector3d sample_surface(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (is_box) {
      const double axy = half.x() * half.y(), ayz = half.y() * half.z(), axz = half.x() * half.z();
      const double pick = u(rng) * (axy + ayz + axz);
      Eigen::Vector3d p(2 * u(rng) - 1, 2 * u(rng) - 1, 2 * u(rng) - 1);
      const double side = u(rng) < 0.5 ? -1.0 : 1.0;
      if (pick < axy) p.z() = side;
      else if (pick < axy + ayz) p.x() = side;
      else p.y() = side;
      return center + p.cwiseProduct(half);
    }
    const double r = half.x(), h = half.z();
    const double side_area = 2.0 * M_PI * r * 2.0 * h;
    const double cap_area = 2.0 * M_PI * r * r;
    const double phi = 2.0 * M_PI * u(rng);
    if (u(rng) * (side_area + cap_area) < side_area) {
      return center + Eigen::Vector3d(r * std::cos(phi), r * std::sin(phi), h * (2 * u(rng) - 1));
    }
    const double rad = r * std::sqrt(u(rng));
    return center + Eigen::Vector3d(rad * std::cos(phi), rad * std::sin(phi), u(rng) < 0.5 ? -h : h);
  }
};

std::vector<Primitive> primitives_of(const ShapeSpec& s) {
  switch (s.kind) {
    case ShapeKind::cuboid:
      return {Primitive{true, Eigen::Vector3d::Zero(), s.size / 2.0}};
    case ShapeKind::cylinder:
      return {Primitive{false, Eigen::Vector3d::Zero(), {s.size.x(), s.size.x(), s.size.z() / 2.0}}};
    case ShapeKind::compound: {
      // Base block plus an off-centre block on its top face; no symmetry.
      const Eigen::Vector3d& e = s.size;
      Primitive base{true, Eigen::Vector3d(0.0, 0.0, -0.3 * e.z()), e / 2.0};
      Primitive top{true, Eigen::Vector3d(0.3 * e.x(), 0.0, 0.2 * e.z() + 0.4 * e.z()),
                    Eigen::Vector3d(0.2 * e.x(), 0.25 * e.y(), 0.4 * e.z())};
      return {base, top};
    }
  }
  return {};
}

struct Placed {
  const ShapeSpec* shape;
  std::vector<Primitive> prims;
  Pose pose;
};

struct RayHit {
  double z;
  Eigen::Vector3d normal_cam;
};

std::optional<RayHit> cast(const Placed& obj, const Eigen::Vector3d& ray_cam) {
  const Eigen::Matrix3d rt = obj.pose.rotation.transpose();
  const Eigen::Vector3d origin = -(rt * obj.pose.translation);
  const Eigen::Vector3d dir = rt * ray_cam;
  std::optional<Primitive::Hit> best;
  for (const auto& p : obj.prims) {
    auto h = p.intersect(origin, dir);
    if (h && (!best || h->t < best->t)) best = h;
  }
  if (!best) return std::nullopt;
  // ray_cam has z = 1, so the ray parameter is the camera depth.
  return RayHit{best->t, obj.pose.rotation * best->normal};
}

Pose random_pose(const SyntheticSpec& spec, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::Vector3d axis(gauss(rng), gauss(rng), gauss(rng));
  if (axis.norm() < 1e-9) axis = Eigen::Vector3d::UnitZ();
  const double angle = spec.max_rotation * u(rng);
  const double z = spec.min_distance + (spec.max_distance - spec.min_distance) * u(rng);
  const double px = spec.cols * (0.3 + 0.4 * u(rng));
  const double py = spec.rows * (0.3 + 0.4 * u(rng));
  const auto& k = spec.intrinsics;
  const Eigen::Vector3d t((px - k.cx) * z / k.fx, (py - k.cy) * z / k.fy, z);
  return Pose::from_quaternion(axis_angle(axis, angle), t);
}

}  // namespace

void SyntheticSpec::validate() const {
  if (shapes.empty()) throw InvalidArgument("synthetic: no shapes");
  if (rows < 8 || cols < 8) throw InvalidArgument("synthetic: image too small");
  intrinsics.validate();
  if (!(min_distance > 0.0) || max_distance < min_distance) {
    throw InvalidArgument("synthetic: invalid distance range");
  }
  if (objects_per_scene < 1 || objects_per_scene > static_cast<int>(shapes.size())) {
    throw InvalidArgument("synthetic: objects_per_scene must be in [1, #shapes]");
  }
  if (depth_noise_sigma < 0.0 || pixel_noise_sigma < 0.0) {
    throw InvalidArgument("synthetic: negative noise level");
  }
  if (mask_corruption_rate < 0.0 || mask_corruption_rate > 1.0) {
    throw InvalidArgument("synthetic: mask_corruption_rate must be in [0, 1]");
  }
  if (max_pose_retries < 1) throw InvalidArgument("synthetic: max_pose_retries must be >= 1");
  std::set<int> ids;
  for (const auto& s : shapes) {
    if (s.class_id < 1 || s.class_id > 254) throw InvalidArgument("synthetic: class id out of range");
    if (!ids.insert(s.class_id).second) throw InvalidArgument("synthetic: duplicate class id");
    const bool bad = s.kind == ShapeKind::cylinder ? (s.size.x() <= 0.0 || s.size.z() <= 0.0)
                                                   : (s.size.array() <= 0.0).any();
    if (bad) throw InvalidArgument("synthetic: nonpositive shape size");
    if (s.model_points < 2) throw InvalidArgument("synthetic: model needs >= 2 points");
  }
}

SyntheticSpec SyntheticSpec::desk_default() {
  SyntheticSpec spec;
  spec.shapes = {
      ShapeSpec{1, ShapeKind::cuboid, {0.09, 0.06, 0.04}, {210, 70, 60}, 800},
      ShapeSpec{2, ShapeKind::cylinder, {0.03, 0.0, 0.09}, {60, 180, 90}, 800},
      ShapeSpec{3, ShapeKind::compound, {0.08, 0.05, 0.05}, {70, 90, 220}, 800},
  };
  return spec;
}

ObjectModel build_model(const ShapeSpec& shape, std::uint64_t seed) {
  const auto prims = primitives_of(shape);
  std::vector<double> areas;
  for (const auto& p : prims) areas.push_back(p.area());
  std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
  std::mt19937_64 rng(mix64(seed ^ static_cast<std::uint64_t>(shape.class_id)));
  Points pts(static_cast<Eigen::Index>(shape.model_points), 3);
  Eigen::Index n = 0;
  while (n < pts.rows()) {
    const std::size_t k = pick(rng);
    const Eigen::Vector3d p = prims[k].sample_surface(rng);
    bool buried = false;
    for (std::size_t j = 0; j < prims.size(); ++j) {
      if (j != k && prims[j].sdf(p) < -1e-9) buried = true;
    }
    if (!buried) pts.row(n++) = p.transpose();
  }
  return ObjectModel::from_points(shape.class_id, std::move(pts),
                                  shape.kind == ShapeKind::cylinder);
}

ModelSet build_models(const SyntheticSpec& spec) {
  ModelSet out;
  for (const auto& s : spec.shapes) {
    out[s.class_id] = std::make_shared<const ObjectModel>(build_model(s, spec.seed));
  }
  return out;
}

double surface_distance(const ShapeSpec& shape, const Eigen::Vector3d& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& prim : primitives_of(shape)) best = std::min(best, std::abs(prim.sdf(p)));
  return best;
}

std::vector<SceneSample> generate_synthetic(const SyntheticSpec& spec, std::size_t n) {
  spec.validate();
  if (n < 1) throw InvalidArgument("generate_synthetic: n must be >= 1");
  const auto& k = spec.intrinsics;
  std::vector<SceneSample> out;
  out.reserve(n);

  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(mix64(spec.seed) ^ mix64(i + 1));
    std::vector<Placed> objects;
    Image<double> zbuf;
    Image<int> owner;
    Image<double> shade;
    bool ok = false;

    for (int attempt = 0; attempt < spec.max_pose_retries && !ok; ++attempt) {
      std::vector<const ShapeSpec*> pool;
      for (const auto& s : spec.shapes) pool.push_back(&s);
      std::shuffle(pool.begin(), pool.end(), rng);
      objects.clear();
      for (int j = 0; j < spec.objects_per_scene; ++j) {
        objects.push_back({pool[j], primitives_of(*pool[j]), random_pose(spec, rng)});
      }

      zbuf = Image<double>(spec.rows, spec.cols, 1, 0.0);
      owner = Image<int>(spec.rows, spec.cols, 1, -1);
      shade = Image<double>(spec.rows, spec.cols, 1, 0.0);
      std::vector<int> visible(objects.size(), 0);
      for (int v = 0; v < spec.rows; ++v) {
        for (int u = 0; u < spec.cols; ++u) {
          const Eigen::Vector3d ray((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
          for (std::size_t o = 0; o < objects.size(); ++o) {
            auto hit = cast(objects[o], ray);
            if (!hit) continue;
            if (owner(v, u) < 0 || hit->z < zbuf(v, u)) {
              zbuf(v, u) = hit->z;
              owner(v, u) = static_cast<int>(o);
              shade(v, u) = 0.35 + 0.65 * std::abs(hit->normal_cam.dot(ray.normalized()));
            }
          }
        }
      }
      for (int v = 0; v < spec.rows; ++v) {
        for (int u = 0; u < spec.cols; ++u) {
          if (owner(v, u) >= 0) ++visible[static_cast<std::size_t>(owner(v, u))];
        }
      }
      ok = std::all_of(visible.begin(), visible.end(),
                       [&](int c) { return c >= spec.min_visible_pixels; });
    }
    if (!ok) {
      throw Error("generate_synthetic: no pose with enough visible pixels after " +
                  std::to_string(spec.max_pose_retries) + " retries");
    }

    SceneSample s;
    s.id = "synthetic_" + std::to_string(i);
    s.split = "train";
    s.intrinsics = k;
    s.rgb = RgbImage(spec.rows, spec.cols, 3);
    s.depth = DepthImage(spec.rows, spec.cols);
    s.mask = LabelImage(spec.rows, spec.cols);
    std::normal_distribution<double> depth_noise(0.0, spec.depth_noise_sigma);
    std::normal_distribution<double> pixel_noise(0.0, spec.pixel_noise_sigma);
    for (int v = 0; v < spec.rows; ++v) {
      for (int u = 0; u < spec.cols; ++u) {
        const int o = owner(v, u);
        std::array<double, 3> color{};
        if (o >= 0) {
          const ShapeSpec& shape = *objects[static_cast<std::size_t>(o)].shape;
          s.mask(v, u) = static_cast<std::uint8_t>(shape.class_id);
          double z = zbuf(v, u);
          if (spec.depth_noise_sigma > 0.0) z += depth_noise(rng);
          const double raw = std::round(z / k.depth_scale);
          s.depth(v, u) = static_cast<std::uint16_t>(std::clamp(raw, 1.0, 65535.0));
          for (int c = 0; c < 3; ++c) color[c] = shape.color[c] * shade(v, u);
        } else {
          for (int c = 0; c < 3; ++c) color[c] = spec.background[c];
        }
        for (int c = 0; c < 3; ++c) {
          double value = color[c];
          if (spec.pixel_noise_sigma > 0.0) value += pixel_noise(rng);
          s.rgb(v, u, c) = static_cast<std::uint8_t>(std::clamp(std::round(value), 0.0, 255.0));
        }
      }
    }

    if (spec.mask_corruption_rate > 0.0) {
      std::bernoulli_distribution flip(spec.mask_corruption_rate);
      const LabelImage clean = s.mask;
      for (int v = 0; v < spec.rows; ++v) {
        for (int u = 0; u < spec.cols; ++u) {
          const int nbr[4][2] = {{v - 1, u}, {v + 1, u}, {v, u - 1}, {v, u + 1}};
          for (const auto& q : nbr) {
            if (q[0] < 0 || q[1] < 0 || q[0] >= spec.rows || q[1] >= spec.cols) continue;
            if (clean(q[0], q[1]) != clean(v, u)) {
              if (flip(rng)) s.mask(v, u) = clean(q[0], q[1]);
              break;
            }
          }
        }
      }
    }

    for (const auto& obj : objects) s.gt.push_back({obj.shape->class_id, obj.pose});
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace pfpose
