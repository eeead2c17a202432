#pragma once

#include <cstdint>
#include <string>

#include "shiftnet/ffd.hpp"
#include "shiftnet/geometry.hpp"
#include "shiftnet/volume.hpp"

namespace shiftnet {

enum class Side { Left, Right };

std::string to_string(Side side);
Side side_from_string(const std::string& s);

struct PhantomParams {
  // Peak FFD displacement toward the cavity, mm.
  double amplitude_mm = 3.0;
  // Uniform downward sag added after the clamp, mm.
  double sag_mm = 1.0;
  // Multiplies every displacement; 0 gives an undeformed case.
  double deformation_scale = 1.0;
  double cp_spacing_mm = 8.0;
  // Cavity radius as a fraction of the mean brain diameter.
  double cavity_radius_frac = 0.15;
  double noise_mm = 0.25;
  double bias_amplitude = 0.1;
  double spacing_mm = 1.0;

  std::vector<std::string> violations() const;
  // Upper bound on max |gt_disp|: the 0.4-spacing clamp plus the sag.
  double displacement_bound() const;
};

struct Case {
  Volume pmri;
  Volume half_mask;
  Volume mask_pre;
  Volume gt_disp;
  Volume gt_mask_intra;
  Volume gt_sdf;
  Volume imri;
  LandmarkSet landmarks_pre;
  LandmarkSet landmarks_intra;
  FfdGrid ffd;
  Side side = Side::Right;
  std::uint64_t seed = 0;
};

// Throws DimsNotDivisible unless dims are multiples of 4.
Case gen_phantom(std::uint64_t seed, const Index3& dims, Side side, const PhantomParams& params = {});

// out(x) = vol(x + disp(x)), trilinear, border clamped.
Volume warp_volume(const Volume& vol, const Volume& disp);
// warp_volume followed by >= 0.5 thresholding.
Volume warp_mask(const Volume& mask, const Volume& disp);

// p -> p + disp(p), trilinear sampling of the field.
LandmarkSet warp_landmarks(const LandmarkSet& lms, const Volume& disp);

// Names of the ten phantom landmarks (P1L..P6R analogs, P3/P5 midline).
const std::vector<std::string>& phantom_landmark_names();

}  // namespace shiftnet
