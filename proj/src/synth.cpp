#include "shiftnet/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "shiftnet/error.hpp"
#include "shiftnet/shape.hpp"

namespace shiftnet {

namespace {

struct Sinusoid {
  Vec3 k;
  double phase;
  double weight;
};

// Fixed parametric landmark positions in units of the brain semi-axes, right
// side first; the left partner mirrors x.
struct LandmarkTemplate {
  const char* stem;
  Vec3 at;
  bool lateral;
};

const std::vector<LandmarkTemplate>& landmark_templates() {
  static const std::vector<LandmarkTemplate> t = {
      {"P1", {0.55, 0.35, 0.0}, true},  {"P2", {0.6, -0.2, -0.2}, true}, {"P3", {0.0, -0.3, -0.25}, false},
      {"P4", {0.3, 0.5, 0.6}, true},    {"P5", {0.0, 0.0, 0.3}, false},  {"P6", {0.25, 0.1, -0.45}, true},
  };
  return t;
}

std::string swap_side(const std::string& name) {
  if (name.size() == 3 && name[0] == 'P') {
    if (name[2] == 'L') return name.substr(0, 2) + "R";
    if (name[2] == 'R') return name.substr(0, 2) + "L";
  }
  return name;
}

void require_divisible(const Index3& dims) {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 4 || dims[a] % 4 != 0) {
      throw Error(ErrorCode::DimsNotDivisible, "dims",
                  "phantom dims must be positive multiples of 4, got " + std::to_string(dims[a]));
    }
  }
}

Case mirror(const Case& in, const Geometry& geom) {
  Case out;
  out.pmri = flip_x(in.pmri);
  out.half_mask = flip_x(in.half_mask);
  out.mask_pre = flip_x(in.mask_pre);
  out.gt_disp = flip_x(in.gt_disp, true);
  out.gt_mask_intra = flip_x(in.gt_mask_intra);
  out.gt_sdf = flip_x(in.gt_sdf);
  out.imri = flip_x(in.imri);

  const double mid = geom.voxel_to_world(Vec3(0.5 * (geom.dims[0] - 1), 0, 0))[0];
  std::vector<Landmark> pre;
  for (const auto& lm : in.landmarks_pre.entries()) {
    Vec3 p = lm.position;
    p[0] = 2.0 * mid - p[0];
    pre.push_back({swap_side(lm.name), p});
  }
  out.landmarks_pre = LandmarkSet(pre);
  out.landmarks_intra = warp_landmarks(out.landmarks_pre, out.gt_disp);

  const FfdGrid& g = in.ffd;
  out.ffd = FfdGrid(g.cp_dims(), g.cp_spacing(), g.cp_origin());
  const auto& d = g.cp_dims();
  for (int c = 0; c < d[2]; ++c)
    for (int b = 0; b < d[1]; ++b)
      for (int a = 0; a < d[0]; ++a) {
        Vec3 v = g.displacement(d[0] - 1 - a, b, c);
        v[0] = -v[0];
        out.ffd.displacement(a, b, c) = v;
      }
  out.side = Side::Left;
  out.seed = in.seed;
  return out;
}

}  // namespace

std::string to_string(Side side) { return side == Side::Left ? "left" : "right"; }

Side side_from_string(const std::string& s) {
  if (s == "left") return Side::Left;
  if (s == "right") return Side::Right;
  throw Error(ErrorCode::InvalidArgument, "side", "expected left or right, got '" + s + "'");
}

std::vector<std::string> PhantomParams::violations() const {
  std::vector<std::string> v;
  auto non_negative = [&](double x, const char* name) {
    if (!(x >= 0.0) || !std::isfinite(x)) v.push_back(std::string(name) + " must be finite and >= 0");
  };
  non_negative(amplitude_mm, "amplitude_mm");
  non_negative(sag_mm, "sag_mm");
  non_negative(deformation_scale, "deformation_scale");
  non_negative(noise_mm, "noise_mm");
  if (!(cp_spacing_mm > 0.0)) v.push_back("cp_spacing_mm must be > 0");
  if (!(spacing_mm > 0.0)) v.push_back("spacing_mm must be > 0");
  if (!(cavity_radius_frac > 0.0 && cavity_radius_frac < 0.5)) v.push_back("cavity_radius_frac must be in (0, 0.5)");
  if (!(bias_amplitude >= 0.0 && bias_amplitude < 0.5)) v.push_back("bias_amplitude must be in [0, 0.5)");
  return v;
}

double PhantomParams::displacement_bound() const {
  return deformation_scale * (0.4 * cp_spacing_mm + 1.15 * sag_mm);
}

const std::vector<std::string>& phantom_landmark_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& t : landmark_templates()) {
      if (t.lateral) {
        n.push_back(std::string(t.stem) + "L");
        n.push_back(std::string(t.stem) + "R");
      } else {
        n.push_back(t.stem);
      }
    }
    return n;
  }();
  return names;
}

Volume warp_volume(const Volume& vol, const Volume& disp) {
  if (disp.channels() != 3) {
    throw Error(ErrorCode::InvalidArgument, "disp", "displacement field must have 3 channels");
  }
  if (!vol.geometry().same_grid(disp.geometry())) {
    throw Error(ErrorCode::GeometryMismatch, "disp", "volume and field grids differ");
  }
  const Geometry& g = vol.geometry();
  Volume out = vol.zeros_like();
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const Vec3 x = g.voxel_to_world(i, j, k) + disp.vec3_at(i, j, k);
        for (int c = 0; c < vol.channels(); ++c) out.at(i, j, k, c) = vol.sample(x, c);
      }
  return out;
}

Volume warp_mask(const Volume& mask, const Volume& disp) {
  Volume out = warp_volume(mask, disp);
  for (double& v : out.data()) v = v >= 0.5 ? 1.0 : 0.0;
  return out;
}

LandmarkSet warp_landmarks(const LandmarkSet& lms, const Volume& disp) {
  if (disp.channels() != 3) {
    throw Error(ErrorCode::InvalidArgument, "disp", "displacement field must have 3 channels");
  }
  std::vector<Landmark> out;
  for (const auto& lm : lms.entries()) out.push_back({lm.name, lm.position + disp.sample_vec3(lm.position)});
  return LandmarkSet(out);
}

Case gen_phantom(std::uint64_t seed, const Index3& dims, Side side, const PhantomParams& params) {
  require_divisible(dims);
  if (auto v = params.violations(); !v.empty()) {
    std::string msg;
    for (const auto& s : v) msg += (msg.empty() ? "" : "; ") + s;
    throw Error(ErrorCode::Config, "phantom", msg);
  }
  const Geometry geom = Geometry::make(dims, Vec3::Constant(params.spacing_mm));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const Vec3 grid_mid = geom.voxel_to_world(Vec3(0.5 * (dims[0] - 1), 0.5 * (dims[1] - 1), 0.5 * (dims[2] - 1)));
  const double diameter = params.spacing_mm * (dims[0] + dims[1] + dims[2]) / 3.0;

  Vec3 center = grid_mid;
  center[1] += unit(rng);
  center[2] += unit(rng);
  Vec3 semi(0.36, 0.40, 0.34);
  semi *= diameter;
  for (int a = 0; a < 3; ++a) semi[a] *= 1.0 + 0.05 * unit(rng);
  const double amplitude = params.amplitude_mm * (1.0 + 0.15 * unit(rng));
  const double sag = params.sag_mm * (1.0 + 0.15 * unit(rng));

  std::vector<Sinusoid> waves(8);
  for (auto& w : waves) {
    Vec3 dir(normal(rng), normal(rng), normal(rng));
    dir.normalize();
    const double wavelength = 6.0 + 5.0 * (unit(rng) + 1.0);
    w.k = dir * (2.0 * std::numbers::pi / wavelength);
    w.phase = std::numbers::pi * unit(rng);
    w.weight = 0.5 + 0.25 * unit(rng);
  }
  Vec3 bias_dir(normal(rng), normal(rng), normal(rng));
  bias_dir.normalize();

  const Vec3 cavity_center = center + Vec3(0.80, 0.10, -0.55).cwiseProduct(semi);
  const double cavity_radius = params.cavity_radius_frac * 2.0 * semi.mean();

  Case cs;
  cs.seed = seed;
  cs.side = Side::Right;
  cs.pmri = Volume(geom);
  cs.mask_pre = Volume(geom);
  cs.half_mask = Volume(geom);
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) {
        const Vec3 x = geom.voxel_to_world(i, j, k);
        const Vec3 q = (x - center).cwiseQuotient(semi);
        cs.half_mask.at(i, j, k) = x[0] > grid_mid[0] ? 1.0 : 0.0;
        if (q.squaredNorm() > 1.0) continue;
        cs.mask_pre.at(i, j, k) = 1.0;
        double texture = 0.0;
        for (const auto& w : waves) texture += w.weight * std::sin(w.k.dot(x - center) + w.phase);
        double value = 1.0 + 0.08 * texture;
        const double r_vent = (x - center).cwiseQuotient(0.3 * semi).squaredNorm();
        if (r_vent < 1.0) value *= 0.5 + 0.5 * r_vent;
        value *= 1.0 + params.bias_amplitude * bias_dir.dot(x - center) / semi.maxCoeff();
        cs.pmri.at(i, j, k) = value;
      }

  cs.ffd = FfdGrid::covering(geom, params.cp_spacing_mm);
  const double sigma = 0.35 * diameter;
  const double clamp = 0.4 * params.cp_spacing_mm;
  const auto& cd = cs.ffd.cp_dims();
  for (int c = 0; c < cd[2]; ++c)
    for (int b = 0; b < cd[1]; ++b)
      for (int a = 0; a < cd[0]; ++a) {
        const Vec3 p = cs.ffd.cp_position(a, b, c);
        const Vec3 d = cavity_center - p;
        Vec3 v = Vec3::Zero();
        if (d.norm() > 1e-12) v = amplitude * std::exp(-d.squaredNorm() / (2.0 * sigma * sigma)) * d.normalized();
        const Vec3 noise(normal(rng), normal(rng), normal(rng));
        v += params.noise_mm * noise;
        if (v.norm() > clamp) v *= clamp / v.norm();
        v[2] -= sag;
        cs.ffd.displacement(a, b, c) = params.deformation_scale * v;
      }

  cs.gt_disp = cs.ffd.densify(geom);
  round_to_float(cs.gt_disp);

  Volume warped_mask = warp_mask(cs.mask_pre, cs.gt_disp);
  cs.imri = warp_volume(cs.pmri, cs.gt_disp);
  cs.gt_mask_intra = warped_mask;
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) {
        if ((geom.voxel_to_world(i, j, k) - cavity_center).norm() <= cavity_radius) {
          cs.gt_mask_intra.at(i, j, k) = 0.0;
          cs.imri.at(i, j, k) = 0.0;
        }
      }
  round_to_float(cs.pmri);
  round_to_float(cs.imri);
  cs.gt_sdf = signed_distance(cs.gt_mask_intra, kDefaultSdfCapMm);
  round_to_float(cs.gt_sdf);

  std::vector<Landmark> pre;
  for (const auto& t : landmark_templates()) {
    if (t.lateral) {
      const Vec3 left(-t.at[0], t.at[1], t.at[2]);
      pre.push_back({std::string(t.stem) + "L", center + left.cwiseProduct(semi)});
      pre.push_back({std::string(t.stem) + "R", center + t.at.cwiseProduct(semi)});
    } else {
      pre.push_back({t.stem, center + t.at.cwiseProduct(semi)});
    }
  }
  cs.landmarks_pre = LandmarkSet(pre);
  cs.landmarks_intra = warp_landmarks(cs.landmarks_pre, cs.gt_disp);

  if (side == Side::Left) return mirror(cs, geom);
  return cs;
}

}  // namespace shiftnet
