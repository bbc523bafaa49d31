#pragma once

#include <filesystem>

#include "pfpose/geometry.hpp"
#include "pfpose/image.hpp"

namespace pfpose::io {

// PNG codecs. RGB images are stored in R,G,B channel order in memory.
RgbImage read_rgb(const std::filesystem::path& path);
DepthImage read_depth(const std::filesystem::path& path);  // 16-bit single channel
LabelImage read_labels(const std::filesystem::path& path);  // 8-bit single channel

void write_rgb(const std::filesystem::path& path, const RgbImage& img);
void write_depth(const std::filesystem::path& path, const DepthImage& img);
void write_labels(const std::filesystem::path& path, const LabelImage& img);

// Whitespace-separated "key value" lines with keys fx, fy, cx, cy, depth_scale.
CameraIntrinsics read_intrinsics(const std::filesystem::path& path);
void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& intr);

}  // namespace pfpose::io
