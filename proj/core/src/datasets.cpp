#include <algorithm>
#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "pfpose/data.hpp"
#include "pfpose/errors.hpp"
#include "pfpose/io.hpp"

namespace fs = std::filesystem;

namespace pfpose {
namespace {

YAML::Node load_yaml(const fs::path& path) {
  if (!fs::exists(path)) throw MissingFile("missing annotation file " + path.string());
  try {
    return YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

template <std::size_t N>
std::array<double, N> read_numbers(const YAML::Node& node, const std::string& where) {
  if (!node || !node.IsSequence() || node.size() != N) {
    throw ParseError(where + ": expected a list of " + std::to_string(N) + " numbers");
  }
  std::array<double, N> out{};
  try {
    for (std::size_t i = 0; i < N; ++i) out[i] = node[i].as<double>();
  } catch (const YAML::Exception& e) {
    throw ParseError(where + ": " + e.what());
  }
  return out;
}

// Converts a stored rotation to the library's convention: through the
// (w, x, y, z) quaternion, rejecting matrices that are not rotations.
Pose to_pose(const std::array<double, 9>& r, const Eigen::Vector3d& t, const std::string& where) {
  Eigen::Matrix3d m;
  m << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
  try {
    return Pose::from_quaternion(matrix_to_quat(m), t);
  } catch (const InvalidRotation& e) {
    throw ParseError(where + ": " + e.what());
  }
}

std::string two_digit(int id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", id);
  return buf;
}

std::string four_digit(int frame) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", frame);
  return buf;
}

CameraIntrinsics intrinsics_from_k(const std::array<double, 9>& k, double depth_scale) {
  CameraIntrinsics intr{k[0], k[4], k[2], k[5], depth_scale};
  intr.validate();
  return intr;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("missing split file " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    line.erase(std::remove_if(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }),
               line.end());
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

GroundTruth parse_linemod_node(const YAML::Node& rec, const std::string& where) {
  if (!rec.IsMap()) throw ParseError(where + ": pose record is not a map");
  GroundTruth gt;
  try {
    gt.class_id = rec["obj_id"].as<int>();
  } catch (const YAML::Exception&) {
    throw ParseError(where + ": missing or invalid obj_id");
  }
  const auto r = read_numbers<9>(rec["cam_R_m2c"], where + " cam_R_m2c");
  const auto t = read_numbers<3>(rec["cam_t_m2c"], where + " cam_t_m2c");
  gt.pose = to_pose(r, Eigen::Vector3d(t[0], t[1], t[2]) * 1e-3, where);
  return gt;
}

void emit_seq(YAML::Emitter& out, const double* v, int n) {
  out << YAML::Flow << YAML::BeginSeq;
  for (int i = 0; i < n; ++i) out << v[i];
  out << YAML::EndSeq;
}

void emit_linemod_pose(YAML::Emitter& out, const GroundTruth& gt) {
  Eigen::Matrix<double, 3, 3, Eigen::RowMajor> r = gt.pose.rotation;
  const Eigen::Vector3d t_mm = gt.pose.translation * 1e3;
  out << YAML::BeginMap;
  out << YAML::Key << "cam_R_m2c" << YAML::Value;
  emit_seq(out, r.data(), 9);
  out << YAML::Key << "cam_t_m2c" << YAML::Value;
  emit_seq(out, t_mm.data(), 3);
  out << YAML::Key << "obj_id" << YAML::Value << gt.class_id;
  out << YAML::EndMap;
}

}  // namespace

void SceneSample::validate() const {
  if (rgb.channels() != 3) throw InvalidArgument(id + ": rgb must have 3 channels");
  if (!rgb.same_size(depth) || !rgb.same_size(mask)) throw InvalidArgument(id + ": image sizes differ");
  intrinsics.validate();
  std::set<int> classes{0};
  for (const auto& g : gt) {
    classes.insert(g.class_id);
    check_rotation(g.pose.rotation, 1e-6);
  }
  for (std::uint8_t v : mask.data()) {
    if (!classes.count(v)) throw InvalidArgument(id + ": mask label without ground truth");
  }
}

std::vector<SceneSample> SampleSource::load_all() const {
  std::vector<SceneSample> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(load(i));
  return out;
}

ModelSet load_models(const fs::path& models_dir) {
  ModelSet out;
  if (!fs::is_directory(models_dir)) return out;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(models_dir)) {
    if (e.path().extension() == ".xyz") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto model = std::make_shared<const ObjectModel>(load_object_model(f));
    out[model->class_id] = model;
  }
  return out;
}

// ---------------------------------------------------------------------------

LinemodDataset::LinemodDataset(fs::path root, std::string split)
    : root_(std::move(root)), split_(std::move(split)) {
  const fs::path data = root_ / "data";
  if (!fs::is_directory(data)) throw EmptyDataset("no data directory under " + root_.string());
  std::vector<int> objects;
  static const std::regex two_digits("[0-9]+");
  for (const auto& e : fs::directory_iterator(data)) {
    const std::string name = e.path().filename().string();
    if (e.is_directory() && std::regex_match(name, two_digits)) objects.push_back(std::stoi(name));
  }
  std::sort(objects.begin(), objects.end());
  for (int obj : objects) {
    const fs::path split_file = data / two_digit(obj) / (split_ + ".txt");
    if (!fs::exists(split_file)) continue;
    for (const auto& line : read_lines(split_file)) {
      try {
        entries_.push_back({obj, std::stoi(line)});
      } catch (const std::exception&) {
        throw ParseError(split_file.string() + ": bad frame id '" + line + "'");
      }
    }
  }
  if (entries_.empty()) {
    throw EmptyDataset("no '" + split_ + "' frames under " + data.string());
  }
  models_ = load_models(root_ / "models");
}

SceneSample LinemodDataset::load(std::size_t index) const {
  if (index >= entries_.size()) throw InvalidArgument("LinemodDataset: index out of range");
  const Entry& e = entries_[index];
  const fs::path dir = root_ / "data" / two_digit(e.object_id);
  const std::string frame = four_digit(e.frame);

  SceneSample s;
  s.id = two_digit(e.object_id) + "/" + frame;
  s.split = split_;
  s.rgb = io::read_rgb(dir / "rgb" / (frame + ".png"));
  s.depth = io::read_depth(dir / "depth" / (frame + ".png"));
  LabelImage mask = io::read_labels(dir / "mask" / (frame + ".png"));

  const fs::path gt_path = dir / "gt.yml";
  const YAML::Node gt_doc = load_yaml(gt_path);
  const YAML::Node records = gt_doc[e.frame];
  if (!records || !records.IsSequence()) {
    throw ParseError(gt_path.string() + ": no pose record for frame " + std::to_string(e.frame));
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    s.gt.push_back(parse_linemod_node(records[i], gt_path.string() + " frame " + std::to_string(e.frame)));
  }

  const fs::path info_path = dir / "info.yml";
  const YAML::Node info = load_yaml(info_path)[e.frame];
  if (!info) throw ParseError(info_path.string() + ": no record for frame " + std::to_string(e.frame));
  const auto k = read_numbers<9>(info["cam_K"], info_path.string() + " cam_K");
  double depth_scale_mm = 1.0;
  if (info["depth_scale"]) depth_scale_mm = info["depth_scale"].as<double>();
  s.intrinsics = intrinsics_from_k(k, depth_scale_mm * 1e-3);

  const auto max_label = *std::max_element(mask.data().begin(), mask.data().end());
  if (max_label == 255) {
    for (auto& v : mask.data()) v = v != 0 ? static_cast<std::uint8_t>(e.object_id) : 0;
  }
  s.mask = std::move(mask);
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------

YcbvDataset::YcbvDataset(fs::path root, std::string split)
    : root_(std::move(root)), split_(std::move(split)) {
  const fs::path split_file = root_ / "image_sets" / (split_ + ".txt");
  if (!fs::exists(split_file)) throw EmptyDataset("missing split file " + split_file.string());
  frames_ = read_lines(split_file);
  if (frames_.empty()) throw EmptyDataset(split_file.string() + " lists no frames");
  for (const auto& f : frames_) {
    const auto slash = f.find('/');
    if (slash == std::string::npos) throw ParseError(split_file.string() + ": bad entry '" + f + "'");
    const std::string video = f.substr(0, slash);
    if (cameras_.count(video)) continue;
    const fs::path cam_path = root_ / "data" / video / "camera.yml";
    const YAML::Node cam = load_yaml(cam_path);
    const auto k = read_numbers<9>(cam["intrinsic_matrix"], cam_path.string() + " intrinsic_matrix");
    double factor = 0.0;
    try {
      factor = cam["factor_depth"].as<double>();
    } catch (const YAML::Exception&) {
      throw ParseError(cam_path.string() + ": missing factor_depth");
    }
    if (!(factor > 0.0)) throw ParseError(cam_path.string() + ": factor_depth must be > 0");
    cameras_[video] = intrinsics_from_k(k, 1.0 / factor);
  }
  models_ = load_models(root_ / "models");
}

SceneSample YcbvDataset::load(std::size_t index) const {
  if (index >= frames_.size()) throw InvalidArgument("YcbvDataset: index out of range");
  const std::string& f = frames_[index];
  const auto slash = f.find('/');
  const std::string video = f.substr(0, slash);
  const std::string frame = f.substr(slash + 1);
  const fs::path dir = root_ / "data" / video;

  SceneSample s;
  s.id = f;
  s.split = split_;
  s.intrinsics = cameras_.at(video);
  s.rgb = io::read_rgb(dir / (frame + "-color.png"));
  s.depth = io::read_depth(dir / (frame + "-depth.png"));
  s.mask = io::read_labels(dir / (frame + "-label.png"));

  const fs::path meta_path = dir / (frame + "-meta.yml");
  const YAML::Node meta = load_yaml(meta_path);
  const YAML::Node cls = meta["cls_indexes"];
  const YAML::Node poses = meta["poses"];
  if (!cls || !poses || !cls.IsSequence() || !poses.IsSequence() || cls.size() != poses.size()) {
    throw ParseError(meta_path.string() + ": cls_indexes and poses must be lists of equal length");
  }
  for (std::size_t i = 0; i < cls.size(); ++i) {
    const std::string where = meta_path.string() + " pose " + std::to_string(i);
    const auto p = read_numbers<12>(poses[i], where);
    GroundTruth gt;
    try {
      gt.class_id = cls[i].as<int>();
    } catch (const YAML::Exception&) {
      throw ParseError(where + ": bad class index");
    }
    gt.pose = to_pose({p[0], p[1], p[2], p[4], p[5], p[6], p[8], p[9], p[10]},
                      Eigen::Vector3d(p[3], p[7], p[11]), where);
    s.gt.push_back(gt);
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------

std::string format_linemod_pose(const GroundTruth& gt) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  emit_linemod_pose(out, gt);
  return out.c_str();
}

GroundTruth parse_linemod_pose(const std::string& yaml_record) {
  YAML::Node node;
  try {
    node = YAML::Load(yaml_record);
  } catch (const YAML::Exception& e) {
    throw ParseError(std::string("pose record: ") + e.what());
  }
  return parse_linemod_node(node, "pose record");
}

void export_linemod_layout(const std::vector<SceneSample>& samples, const ModelSet& models,
                           const fs::path& root) {
  fs::create_directories(root / "models");
  for (const auto& [id, model] : models) {
    save_object_model(*model, root / "models" / ("obj_" + two_digit(id) + ".xyz"));
  }

  struct Folder {
    std::vector<const SceneSample*> frames;
  };
  std::map<int, Folder> folders;
  for (const auto& s : samples) {
    if (s.gt.empty()) throw InvalidArgument("export: sample " + s.id + " has no ground truth");
    folders[s.gt.front().class_id].frames.push_back(&s);
  }

  for (const auto& [obj, folder] : folders) {
    const fs::path dir = root / "data" / two_digit(obj);
    YAML::Emitter gt_out, info_out;
    gt_out.SetDoublePrecision(17);
    info_out.SetDoublePrecision(17);
    gt_out << YAML::BeginMap;
    info_out << YAML::BeginMap;
    std::map<std::string, std::vector<int>> splits;
    for (std::size_t i = 0; i < folder.frames.size(); ++i) {
      const SceneSample& s = *folder.frames[i];
      const int frame = static_cast<int>(i);
      const std::string name = four_digit(frame) + ".png";
      io::write_rgb(dir / "rgb" / name, s.rgb);
      io::write_depth(dir / "depth" / name, s.depth);
      io::write_labels(dir / "mask" / name, s.mask);

      gt_out << YAML::Key << frame << YAML::Value << YAML::BeginSeq;
      for (const auto& g : s.gt) emit_linemod_pose(gt_out, g);
      gt_out << YAML::EndSeq;

      const auto& k = s.intrinsics;
      const double cam_k[9] = {k.fx, 0.0, k.cx, 0.0, k.fy, k.cy, 0.0, 0.0, 1.0};
      info_out << YAML::Key << frame << YAML::Value << YAML::BeginMap;
      info_out << YAML::Key << "cam_K" << YAML::Value;
      emit_seq(info_out, cam_k, 9);
      info_out << YAML::Key << "depth_scale" << YAML::Value << k.depth_scale * 1e3;
      info_out << YAML::EndMap;

      splits[s.split.empty() ? "train" : s.split].push_back(frame);
    }
    gt_out << YAML::EndMap;
    info_out << YAML::EndMap;
    std::ofstream(dir / "gt.yml") << gt_out.c_str() << '\n';
    std::ofstream(dir / "info.yml") << info_out.c_str() << '\n';
    for (const auto& [split, frames] : splits) {
      std::ofstream out(dir / (split + ".txt"));
      for (int f : frames) out << four_digit(f) << '\n';
    }
  }
}

}  // namespace pfpose
