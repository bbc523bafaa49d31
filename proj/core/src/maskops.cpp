#include "pfpose/maskops.hpp"

#include <algorithm>

#include "pfpose/errors.hpp"

namespace pfpose {
namespace {

inline int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

void require_size(const BinaryMask& mask) {
  if (mask.rows() < 1 || mask.cols() < 1) throw InvalidArgument("mask must be at least 1x1");
}

}  // namespace

BinaryMask median_filter_3x3(const BinaryMask& mask) {
  require_size(mask);
  BinaryMask out(mask.rows(), mask.cols());
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) {
      int ones = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          ones += mask(clamp_index(r + dr, mask.rows()), clamp_index(c + dc, mask.cols())) != 0;
        }
      }
      out(r, c) = ones >= 5 ? 1 : 0;
    }
  }
  return out;
}

BinaryMask dilate_5x5(const BinaryMask& mask) {
  require_size(mask);
  // Separable: a 5-wide row max followed by a 5-tall column max.
  BinaryMask rows(mask.rows(), mask.cols());
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) {
      std::uint8_t v = 0;
      for (int dc = -2; dc <= 2 && v == 0; ++dc) v = mask(r, clamp_index(c + dc, mask.cols())) != 0;
      rows(r, c) = v;
    }
  }
  BinaryMask out(mask.rows(), mask.cols());
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) {
      std::uint8_t v = 0;
      for (int dr = -2; dr <= 2 && v == 0; ++dr) v = rows(clamp_index(r + dr, mask.rows()), c);
      out(r, c) = v;
    }
  }
  return out;
}

BinaryMask clean_mask(const BinaryMask& mask) { return dilate_5x5(median_filter_3x3(mask)); }

BoundingBox mask_bbox(const BinaryMask& mask) {
  BoundingBox box{mask.rows(), mask.cols(), -1, -1};
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) {
      if (mask(r, c) == 0) continue;
      box.row0 = std::min(box.row0, r);
      box.col0 = std::min(box.col0, c);
      box.row1 = std::max(box.row1, r + 1);
      box.col1 = std::max(box.col1, c + 1);
    }
  }
  if (box.row1 < 0) throw EmptyMask("mask has no foreground pixels");
  return box;
}

CropResult masked_crop(const RgbImage& rgb, const DepthImage& depth, const BinaryMask& mask,
                       int class_id) {
  if (!rgb.same_size(mask) || !depth.same_size(mask)) {
    throw InvalidArgument("masked_crop: image sizes differ");
  }
  if (rgb.channels() != 3) throw InvalidArgument("masked_crop: rgb must have 3 channels");
  const BoundingBox box = mask_bbox(mask);

  CropResult out;
  out.bbox = box;
  out.class_id = class_id;
  out.rgb_crop = RgbImage(box.height(), box.width(), 3);
  out.depth_crop = DepthImage(box.height(), box.width());
  out.mask_crop = BinaryMask(box.height(), box.width());
  for (int r = 0; r < box.height(); ++r) {
    for (int c = 0; c < box.width(); ++c) {
      const int sr = box.row0 + r;
      const int sc = box.col0 + c;
      if (mask(sr, sc) == 0) continue;
      out.mask_crop(r, c) = 1;
      out.depth_crop(r, c) = depth(sr, sc);
      for (int ch = 0; ch < 3; ++ch) out.rgb_crop(r, c, ch) = rgb(sr, sc, ch);
    }
  }
  return out;
}

}  // namespace pfpose
