#include "pfpose/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "pfpose/errors.hpp"

namespace pfpose {

PreparedCrop prepare_crop(const CropResult& crop, const CameraIntrinsics& frame_intrinsics, int side) {
  if (side < 1) throw InvalidArgument("prepare_crop: side must be >= 1");
  const int h = crop.bbox.height();
  const int w = crop.bbox.width();
  const int square = std::max(h, w);
  const int pad_r = (square - h) / 2;
  const int pad_c = (square - w) / 2;
  const double scale = static_cast<double>(side) / square;

  PreparedCrop out;
  out.class_id = crop.class_id;
  out.side = side;
  out.source_bbox = crop.bbox;
  out.rgb = RgbImage(side, side, 3);
  out.mask = BinaryMask(side, side);
  out.depth = DepthImage(side, side);
  for (int i = 0; i < side; ++i) {
    const int pr = static_cast<int>(std::floor((i + 0.5) / scale)) - pad_r;
    if (pr < 0 || pr >= h) continue;
    for (int j = 0; j < side; ++j) {
      const int pc = static_cast<int>(std::floor((j + 0.5) / scale)) - pad_c;
      if (pc < 0 || pc >= w) continue;
      out.mask(i, j) = crop.mask_crop(pr, pc);
      out.depth(i, j) = crop.depth_crop(pr, pc);
      for (int ch = 0; ch < 3; ++ch) out.rgb(i, j, ch) = crop.rgb_crop(pr, pc, ch);
    }
  }

  // Resampled pixel j has its centre at padded coordinate (j + 0.5) / scale - 0.5.
  CameraIntrinsics intr = frame_intrinsics;
  intr.fx = frame_intrinsics.fx * scale;
  intr.fy = frame_intrinsics.fy * scale;
  intr.cx = (frame_intrinsics.cx - crop.bbox.col0 + pad_c + 0.5) * scale - 0.5;
  intr.cy = (frame_intrinsics.cy - crop.bbox.row0 + pad_r + 0.5) * scale - 0.5;
  out.intrinsics = intr;
  out.cloud = depth_to_pointcloud(out.depth, intr, &out.mask);
  return out;
}

}  // namespace pfpose
