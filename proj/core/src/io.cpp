#include "pfpose/io.hpp"

#include <cstring>
#include <fstream>
#include <limits>
#include <map>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "pfpose/errors.hpp"

namespace pfpose::io {
namespace {

cv::Mat read_raw(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingFile("missing image " + path.string());
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw ParseError("cannot decode image " + path.string());
  return m;
}

template <typename T>
Image<T> from_mat(const cv::Mat& m) {
  Image<T> out(m.rows, m.cols, m.channels());
  for (int r = 0; r < m.rows; ++r) {
    std::memcpy(&out(r, 0), m.ptr<T>(r), sizeof(T) * m.cols * m.channels());
  }
  return out;
}

template <typename T>
cv::Mat to_mat(const Image<T>& img, int type) {
  cv::Mat m(img.rows(), img.cols(), type);
  for (int r = 0; r < img.rows(); ++r) {
    std::memcpy(m.ptr<T>(r), &img(r, 0), sizeof(T) * img.cols() * img.channels());
  }
  return m;
}

void write_mat(const std::filesystem::path& path, const cv::Mat& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw MissingFile("cannot write image " + path.string());
}

}  // namespace

RgbImage read_rgb(const std::filesystem::path& path) {
  cv::Mat m = read_raw(path);
  if (m.depth() != CV_8U) throw ParseError(path.string() + ": expected 8-bit color image");
  if (m.channels() == 4) cv::cvtColor(m, m, cv::COLOR_BGRA2RGB);
  else if (m.channels() == 3) cv::cvtColor(m, m, cv::COLOR_BGR2RGB);
  else if (m.channels() == 1) cv::cvtColor(m, m, cv::COLOR_GRAY2RGB);
  return from_mat<std::uint8_t>(m);
}

DepthImage read_depth(const std::filesystem::path& path) {
  cv::Mat m = read_raw(path);
  if (m.depth() != CV_16U || m.channels() != 1) {
    throw ParseError(path.string() + ": expected 16-bit single-channel depth");
  }
  return from_mat<std::uint16_t>(m);
}

LabelImage read_labels(const std::filesystem::path& path) {
  cv::Mat m = read_raw(path);
  if (m.depth() != CV_8U) throw ParseError(path.string() + ": expected 8-bit label image");
  if (m.channels() != 1) cv::extractChannel(m, m, 0);
  return from_mat<std::uint8_t>(m);
}

void write_rgb(const std::filesystem::path& path, const RgbImage& img) {
  if (img.channels() != 3) throw InvalidArgument("write_rgb: expected 3 channels");
  cv::Mat m = to_mat(img, CV_8UC3);
  cv::cvtColor(m, m, cv::COLOR_RGB2BGR);
  write_mat(path, m);
}

void write_depth(const std::filesystem::path& path, const DepthImage& img) {
  write_mat(path, to_mat(img, CV_16UC1));
}

void write_labels(const std::filesystem::path& path, const LabelImage& img) {
  write_mat(path, to_mat(img, CV_8UC1));
}

CameraIntrinsics read_intrinsics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open intrinsics " + path.string());
  std::map<std::string, double> values;
  std::string key;
  double v = 0.0;
  while (in >> key) {
    if (!(in >> v)) throw ParseError(path.string() + ": missing value for '" + key + "'");
    values[key] = v;
  }
  auto get = [&](const char* k) {
    auto it = values.find(k);
    if (it == values.end()) throw ParseError(path.string() + ": missing key '" + k + "'");
    return it->second;
  };
  CameraIntrinsics intr{get("fx"), get("fy"), get("cx"), get("cy"), get("depth_scale")};
  intr.validate();
  return intr;
}

void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& intr) {
  std::ofstream out(path);
  if (!out) throw MissingFile("cannot write " + path.string());
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "fx " << intr.fx << "\nfy " << intr.fy << "\ncx " << intr.cx << "\ncy " << intr.cy
      << "\ndepth_scale " << intr.depth_scale << '\n';
}

}  // namespace pfpose::io
