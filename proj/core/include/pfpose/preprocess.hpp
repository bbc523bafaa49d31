#pragma once

#include "pfpose/geometry.hpp"
#include "pfpose/maskops.hpp"

namespace pfpose {

// A masked crop brought to a fixed square side: the crop is zero-padded to a
// centred square and nearest-neighbour resampled. `cloud` is back-projected
// from the resampled depth with matching intrinsics, so its pixel indices
// address the side x side grid.
struct PreparedCrop {
  int class_id = 0;
  int side = 0;
  RgbImage rgb;
  BinaryMask mask;
  DepthImage depth;
  CameraIntrinsics intrinsics;
  PointCloud cloud;
  BoundingBox source_bbox;
};

// Throws EmptyCloud if no masked pixel carries depth.
PreparedCrop prepare_crop(const CropResult& crop, const CameraIntrinsics& frame_intrinsics, int side);

}  // namespace pfpose
