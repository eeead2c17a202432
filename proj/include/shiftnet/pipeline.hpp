#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "shiftnet/geometry.hpp"
#include "shiftnet/volume.hpp"

namespace shiftnet {

enum class NormMode { ZScoreInMask, MinMax };

std::string to_string(NormMode mode);
NormMode norm_mode_from_string(const std::string& s);

struct PipelineConfig {
  int crop_margin_vox = 2;
  double bias_sigma_mm = 16.0;
  NormMode norm_mode = NormMode::ZScoreInMask;
  Index3 target_dims{32, 32, 32};

  // Every violation, empty when valid. target_dims must be multiples of 2^depth.
  std::vector<std::string> violations(int network_depth = 2) const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);
PipelineConfig read_pipeline_config(const std::filesystem::path& path);

// zscore_in_mask: (v - mean) / max(std, 1e-6) over mask voxels, applied everywhere.
// minmax: in-mask [min, max] -> [0, 1], background 0.
Volume normalize_intensity(const Volume& vol, const Volume& mask, NormMode mode);

// Separable Gaussian (sigma in mm) of vol * weight, divided by the same
// smoothing of weight. Voxels with zero smoothed weight get 0.
Volume masked_gaussian(const Volume& vol, const Volume& weight, double sigma_mm);

// Homomorphic correction: in-mask vol / B with B the masked Gaussian
// smoothing of vol, rescaled to preserve the in-mask mean. Background is
// left untouched.
Volume correct_bias(const Volume& vol, const Volume& mask, double sigma_mm);

// Window of target_dims centred on the mask bounding box; values outside the
// source are 0. World coordinates of retained voxels are unchanged.
Volume crop_to_mask(const Volume& vol, const Volume& mask, int margin, const Index3& target_dims);

// Start index of the crop window crop_to_mask would use.
Index3 crop_window(const Volume& mask, int margin, const Index3& target_dims);
Volume crop_at(const Volume& vol, const Index3& start, const Index3& target_dims);

// Bias correction followed by normalisation, as applied to network inputs.
Volume standardize_intensity(const Volume& vol, const Volume& mask, const PipelineConfig& config);

// Inputs for the pre/intra alignment chain. `*_anatomy` must hold AC, PC and
// IH; any further shared names refine the rigid fit.
struct PairInputs {
  Volume pmri;
  Volume pre_mask;
  LandmarkSet pre_anatomy;
  Volume imri;
  LandmarkSet intra_anatomy;
};

struct StandardizedPair {
  Volume pmri;
  Volume imri;
  Volume pre_mask;
  RigidTransform pre_to_standard;    // pMRI world -> standard frame
  RigidTransform intra_to_standard;  // iMRI world -> standard frame
};

// Reorient both scans into the pMRI AC-PC-IH frame (iMRI via its rigid map to
// the pMRI), then bias-correct, normalise and crop to target_dims. The
// standard grid has the pMRI dims and spacing, centred on the mask centroid.
StandardizedPair standardize_pair(const PairInputs& in, const PipelineConfig& config);

}  // namespace shiftnet
