#pragma once

#include "pfpose/image.hpp"

namespace pfpose {

// Masks are handled per class as binary images. Both filters replicate the
// border pixels.

// Majority of the 3x3 neighbourhood.
BinaryMask median_filter_3x3(const BinaryMask& mask);

// 1 iff any pixel of the 5x5 window is 1.
BinaryMask dilate_5x5(const BinaryMask& mask);

// median_filter_3x3 followed by dilate_5x5.
BinaryMask clean_mask(const BinaryMask& mask);

// Half-open pixel rectangle [row0, row1) x [col0, col1).
struct BoundingBox {
  int row0 = 0;
  int col0 = 0;
  int row1 = 0;
  int col1 = 0;

  int height() const { return row1 - row0; }
  int width() const { return col1 - col0; }
  bool operator==(const BoundingBox&) const = default;
};

// Tight box around the nonzero pixels; throws EmptyMask if there are none.
BoundingBox mask_bbox(const BinaryMask& mask);

struct CropResult {
  RgbImage rgb_crop;
  DepthImage depth_crop;
  BinaryMask mask_crop;
  BoundingBox bbox;
  int class_id = 0;
};

// Bit-wise AND of the mask with both images, cut to the mask's tight box.
// Throws EmptyMask for an empty mask.
CropResult masked_crop(const RgbImage& rgb, const DepthImage& depth, const BinaryMask& mask,
                       int class_id);

}  // namespace pfpose
