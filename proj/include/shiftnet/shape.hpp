#pragma once

#include <cstdint>
#include <vector>

#include "shiftnet/volume.hpp"

namespace shiftnet {

inline constexpr double kDefaultSdfCapMm = 20.0;

// Exact squared Euclidean distance (mm^2) from every voxel center to the
// nearest voxel with feature[i] != 0; +inf when there is none.
std::vector<double> squared_edt(const std::vector<std::uint8_t>& feature, const Geometry& geometry);

// Signed distance in mm between voxel centers: negative inside the mask
// (distance to the nearest background voxel), positive outside (distance to
// the nearest foreground voxel). Magnitudes clamped to cap_mm.
Volume signed_distance(const Volume& mask, double cap_mm = kDefaultSdfCapMm);

// Max over the (2k+1)^3 cube around each voxel, window truncated at the border.
Volume dilate(const Volume& mask, int k);

// As dilate, also returning for each voxel the linear index (within the
// channel) of the window maximum; ties go to the lowest linear index.
Volume dilate_with_argmax(const Volume& mask, int k, std::vector<std::size_t>* argmax);

}  // namespace shiftnet
