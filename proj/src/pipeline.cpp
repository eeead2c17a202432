#include "shiftnet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "shiftnet/error.hpp"
#include "shiftnet/reduce.hpp"

namespace shiftnet {

std::string to_string(NormMode mode) {
  return mode == NormMode::ZScoreInMask ? "zscore_in_mask" : "minmax";
}

NormMode norm_mode_from_string(const std::string& s) {
  if (s == "zscore_in_mask") return NormMode::ZScoreInMask;
  if (s == "minmax") return NormMode::MinMax;
  throw Error(ErrorCode::Config, "norm_mode", "expected zscore_in_mask or minmax, got " + s);
}

std::vector<std::string> PipelineConfig::violations(int network_depth) const {
  std::vector<std::string> out;
  if (crop_margin_vox < 0) out.push_back("crop_margin_vox must be >= 0");
  if (!(bias_sigma_mm > 0)) out.push_back("bias_sigma_mm must be > 0");
  const int multiple = 1 << network_depth;
  for (int a = 0; a < 3; ++a) {
    if (target_dims[a] < 1 || target_dims[a] % multiple != 0) {
      out.push_back("target_dims[" + std::to_string(a) + "] must be a positive multiple of " +
                    std::to_string(multiple));
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = nlohmann::json{{"crop_margin_vox", c.crop_margin_vox},
                     {"bias_sigma_mm", c.bias_sigma_mm},
                     {"norm_mode", to_string(c.norm_mode)},
                     {"target_dims", c.target_dims}};
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
  if (j.contains("crop_margin_vox")) c.crop_margin_vox = j.at("crop_margin_vox").get<int>();
  if (j.contains("bias_sigma_mm")) c.bias_sigma_mm = j.at("bias_sigma_mm").get<double>();
  if (j.contains("norm_mode")) c.norm_mode = norm_mode_from_string(j.at("norm_mode").get<std::string>());
  if (j.contains("target_dims")) c.target_dims = j.at("target_dims").get<Index3>();
}

PipelineConfig read_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, path.string(), "cannot open config");
  try {
    return nlohmann::json::parse(in).get<PipelineConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, path.string(), e.what());
  }
}

namespace {

std::vector<std::size_t> mask_indices(const Volume& mask) {
  std::vector<std::size_t> idx;
  const auto m = mask.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] > 0.5) idx.push_back(i);
  }
  return idx;
}

void require_scalar_pair(const Volume& vol, const Volume& mask, const char* what) {
  if (vol.channels() != 1 || mask.channels() != 1 ||
      !vol.geometry().same_grid(mask.geometry(), 1e-6)) {
    throw Error(ErrorCode::GeometryMismatch, what, "volume and mask must be scalar on one grid");
  }
}

double masked_mean(const Volume& vol, const std::vector<std::size_t>& idx) {
  std::vector<double> vals(idx.size());
  for (std::size_t n = 0; n < idx.size(); ++n) vals[n] = vol.data()[idx[n]];
  return pairwise_sum(vals) / static_cast<double>(idx.size());
}

void smooth_axis(std::vector<double>& data, const Index3& d, int axis, const std::vector<double>& w) {
  const int r = static_cast<int>(w.size()) - 1;
  const std::size_t stride[3] = {1, static_cast<std::size_t>(d[0]),
                                 static_cast<std::size_t>(d[0]) * d[1]};
  std::vector<double> out(data.size());
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        const int pos[3] = {x, y, z};
        const std::size_t here = x + stride[1] * y + stride[2] * z;
        double acc = w[0] * data[here];
        for (int o = 1; o <= r; ++o) {
          if (pos[axis] - o >= 0) acc += w[o] * data[here - o * stride[axis]];
          if (pos[axis] + o < d[axis]) acc += w[o] * data[here + o * stride[axis]];
        }
        out[here] = acc;
      }
  data.swap(out);
}

}  // namespace

Volume normalize_intensity(const Volume& vol, const Volume& mask, NormMode mode) {
  require_scalar_pair(vol, mask, "normalize_intensity");
  const auto idx = mask_indices(mask);
  if (idx.empty()) throw Error(ErrorCode::EmptyMask, "mask", "normalisation mask is empty");
  Volume out = vol.zeros_like();
  if (mode == NormMode::ZScoreInMask) {
    const double mean = masked_mean(vol, idx);
    std::vector<double> sq(idx.size());
    for (std::size_t n = 0; n < idx.size(); ++n) {
      const double dv = vol.data()[idx[n]] - mean;
      sq[n] = dv * dv;
    }
    const double sd = std::max(std::sqrt(pairwise_sum(sq) / idx.size()), 1e-6);
    for (std::size_t i = 0; i < vol.size(); ++i) out.data()[i] = (vol.data()[i] - mean) / sd;
  } else {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto i : idx) {
      lo = std::min(lo, vol.data()[i]);
      hi = std::max(hi, vol.data()[i]);
    }
    const double range = std::max(hi - lo, 1e-6);
    for (auto i : idx) out.data()[i] = (vol.data()[i] - lo) / range;
  }
  return out;
}

Volume masked_gaussian(const Volume& vol, const Volume& weight, double sigma_mm) {
  require_scalar_pair(vol, weight, "masked_gaussian");
  std::vector<double> num(vol.size()), den(vol.size());
  for (std::size_t i = 0; i < vol.size(); ++i) {
    den[i] = weight.data()[i];
    num[i] = vol.data()[i] * den[i];
  }
  const auto& d = vol.dims();
  for (int a = 0; a < 3; ++a) {
    const double h = vol.geometry().spacing[a];
    const int r = std::max(0, static_cast<int>(std::ceil(3.0 * sigma_mm / h)));
    std::vector<double> w(r + 1);
    for (int o = 0; o <= r; ++o) w[o] = std::exp(-0.5 * (o * h / sigma_mm) * (o * h / sigma_mm));
    smooth_axis(num, d, a, w);
    smooth_axis(den, d, a, w);
  }
  Volume out = vol.zeros_like();
  for (std::size_t i = 0; i < vol.size(); ++i) out.data()[i] = den[i] > 0 ? num[i] / den[i] : 0.0;
  return out;
}

Volume correct_bias(const Volume& vol, const Volume& mask, double sigma_mm) {
  require_scalar_pair(vol, mask, "correct_bias");
  if (!(sigma_mm > 0)) throw Error(ErrorCode::InvalidArgument, "bias_sigma_mm", "must be > 0");
  const auto idx = mask_indices(mask);
  if (idx.empty()) return vol;

  // Shift into strictly positive territory inside the mask.
  double lo = std::numeric_limits<double>::infinity();
  for (auto i : idx) lo = std::min(lo, vol.data()[i]);
  const double shift = lo > 0 ? 0.0 : 1e-6 - lo;

  Volume binary = mask.zeros_like();
  Volume shifted = vol;
  for (auto i : idx) {
    binary.data()[i] = 1.0;
    shifted.data()[i] += shift;
  }
  const Volume field = masked_gaussian(shifted, binary, sigma_mm);

  Volume ratio = vol.zeros_like();
  for (auto i : idx) ratio.data()[i] = shifted.data()[i] / field.data()[i];
  const double scale = masked_mean(shifted, idx) / masked_mean(ratio, idx);

  Volume out = vol;
  for (auto i : idx) out.data()[i] = ratio.data()[i] * scale - shift;
  return out;
}

Index3 crop_window(const Volume& mask, int margin, const Index3& target_dims) {
  const auto& d = mask.dims();
  Index3 lo{d[0], d[1], d[2]}, hi{-1, -1, -1};
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        if (mask.at(i, j, k) > 0.5) {
          const int p[3] = {i, j, k};
          for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], p[a]);
            hi[a] = std::max(hi[a], p[a]);
          }
        }
      }
  if (hi[0] < 0) throw Error(ErrorCode::EmptyMask, "mask", "crop mask is empty");
  std::string overflow;
  Index3 start;
  for (int a = 0; a < 3; ++a) {
    const int need = hi[a] - lo[a] + 1 + 2 * margin;
    if (need > target_dims[a]) {
      overflow += " axis" + std::to_string(a) + "+" + std::to_string(need - target_dims[a]);
    }
    start[a] = (lo[a] + hi[a] + 1) / 2 - target_dims[a] / 2;
  }
  if (!overflow.empty()) {
    throw Error(ErrorCode::BboxExceedsTarget, "target_dims",
                "mask bounding box plus margin exceeds target by" + overflow);
  }
  return start;
}

Volume crop_at(const Volume& vol, const Index3& start, const Index3& target_dims) {
  Geometry g = vol.geometry();
  g.origin = vol.geometry().voxel_to_world(start[0], start[1], start[2]);
  g.dims = target_dims;
  Volume out(g, vol.channels());
  for (int c = 0; c < vol.channels(); ++c)
    for (int k = 0; k < target_dims[2]; ++k)
      for (int j = 0; j < target_dims[1]; ++j)
        for (int i = 0; i < target_dims[0]; ++i) {
          const int si = i + start[0], sj = j + start[1], sk = k + start[2];
          if (vol.geometry().contains(si, sj, sk)) out.at(i, j, k, c) = vol.at(si, sj, sk, c);
        }
  return out;
}

Volume crop_to_mask(const Volume& vol, const Volume& mask, int margin, const Index3& target_dims) {
  if (!vol.geometry().same_grid(mask.geometry(), 1e-6)) {
    throw Error(ErrorCode::GeometryMismatch, "crop_to_mask", "volume and mask grids differ");
  }
  return crop_at(vol, crop_window(mask, margin, target_dims), target_dims);
}

Volume standardize_intensity(const Volume& vol, const Volume& mask, const PipelineConfig& config) {
  return normalize_intensity(correct_bias(vol, mask, config.bias_sigma_mm), mask, config.norm_mode);
}

namespace {

Volume threshold(Volume v) {
  for (double& x : v.data()) x = x >= 0.5 ? 1.0 : 0.0;
  return v;
}

}  // namespace

StandardizedPair standardize_pair(const PairInputs& in, const PipelineConfig& config) {
  for (const auto* set : {&in.pre_anatomy, &in.intra_anatomy}) {
    for (const char* name : {"AC", "PC", "IH"}) set->at(name);
  }
  const RigidTransform pre_frame =
      acpc_frame(in.pre_anatomy.at("AC"), in.pre_anatomy.at("PC"), in.pre_anatomy.at("IH"));
  const RigidTransform intra_frame =
      acpc_frame(in.intra_anatomy.at("AC"), in.intra_anatomy.at("PC"), in.intra_anatomy.at("IH"));

  // iMRI world -> pMRI world: frame-based reorientation, refined by a
  // least-squares fit when more than the three frame landmarks are shared.
  RigidTransform intra_to_pre = pre_frame.inverse().compose(intra_frame);
  int shared = 0;
  for (const auto& e : in.intra_anatomy.entries()) shared += in.pre_anatomy.contains(e.name);
  if (shared > 3) intra_to_pre = fit_rigid(in.intra_anatomy, in.pre_anatomy);

  // Standard grid: pMRI sampling, axis-aligned in the frame, centred on the mask centroid.
  const Geometry& pg = in.pmri.geometry();
  Vec3 centroid = Vec3::Zero();
  int count = 0;
  for (int k = 0; k < pg.dims[2]; ++k)
    for (int j = 0; j < pg.dims[1]; ++j)
      for (int i = 0; i < pg.dims[0]; ++i) {
        if (in.pre_mask.at(i, j, k) > 0.5) {
          centroid += pre_frame.apply(pg.voxel_to_world(i, j, k));
          ++count;
        }
      }
  if (count == 0) throw Error(ErrorCode::EmptyMask, "pre_mask", "brain mask is empty");
  centroid /= count;
  Geometry standard;
  standard.dims = pg.dims;
  standard.spacing = pg.spacing;
  const Vec3 half = 0.5 * Vec3(pg.dims[0] - 1, pg.dims[1] - 1, pg.dims[2] - 1);
  standard.origin = centroid - pg.spacing.cwiseProduct(half);

  StandardizedPair out;
  out.pre_to_standard = pre_frame;
  out.intra_to_standard = pre_frame.compose(intra_to_pre);
  Volume pmri = resample(in.pmri, out.pre_to_standard, standard);
  Volume imri = resample(in.imri, out.intra_to_standard, standard);
  Volume mask = threshold(resample(in.pre_mask, out.pre_to_standard, standard));

  Volume intra_nonzero = in.imri.zeros_like();
  for (std::size_t i = 0; i < in.imri.size(); ++i) intra_nonzero.data()[i] = in.imri.data()[i] > 0 ? 1.0 : 0.0;
  const Volume intra_support = threshold(resample(intra_nonzero, out.intra_to_standard, standard));

  pmri = standardize_intensity(pmri, mask, config);
  imri = standardize_intensity(imri, intra_support, config);

  const Index3 start = crop_window(mask, config.crop_margin_vox, config.target_dims);
  out.pmri = crop_at(pmri, start, config.target_dims);
  out.imri = crop_at(imri, start, config.target_dims);
  out.pre_mask = crop_at(mask, start, config.target_dims);
  return out;
}

}  // namespace shiftnet
