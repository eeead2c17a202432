#include "shiftnet/ffd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shiftnet/error.hpp"
#include "shiftnet/nifti.hpp"

namespace shiftnet {

double bspline_basis(int i, double t) {
  const double u = 1.0 - t;
  switch (i) {
    case 0: return u * u * u / 6.0;
    case 1: return (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0;
    case 2: return (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0;
    case 3: return t * t * t / 6.0;
    default: return 0.0;
  }
}

FfdGrid::FfdGrid(Index3 cp_dims, Vec3 cp_spacing, Vec3 cp_origin)
    : cp_dims_(cp_dims), cp_spacing_(cp_spacing), cp_origin_(cp_origin) {
  for (int a = 0; a < 3; ++a) {
    if (cp_dims[a] < 4) {
      throw Error(ErrorCode::InvalidArgument, "cp_dims", "cubic support needs >= 4 control points");
    }
    if (!(cp_spacing[a] > 0)) {
      throw Error(ErrorCode::InvalidArgument, "cp_spacing", "must be positive");
    }
  }
  displacements_.assign(cp_count(), Vec3::Zero());
}

FfdGrid FfdGrid::covering(const Geometry& geometry, double cp_spacing_mm) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3 v((corner & 1) ? geometry.dims[0] - 1 : 0, (corner & 2) ? geometry.dims[1] - 1 : 0,
                 (corner & 4) ? geometry.dims[2] - 1 : 0);
    const Vec3 w = geometry.voxel_to_world(v);
    lo = lo.cwiseMin(w);
    hi = hi.cwiseMax(w);
  }
  Index3 dims;
  Vec3 origin;
  for (int a = 0; a < 3; ++a) {
    const double extent = hi[a] - lo[a];
    const int cells = std::max(1, static_cast<int>(std::ceil(extent / cp_spacing_mm - 1e-9)));
    dims[a] = cells + 3;
    const double mid = 0.5 * (lo[a] + hi[a]);
    origin[a] = mid - cp_spacing_mm * (1.0 + 0.5 * cells);
  }
  return FfdGrid(dims, Vec3::Constant(cp_spacing_mm), origin);
}

bool FfdGrid::supports(const Vec3& world) const {
  const Vec3 l = lattice_coordinate(world);
  for (int a = 0; a < 3; ++a) {
    if (!(l[a] >= 1.0 - 1e-9) || !(l[a] <= cp_dims_[a] - 2 + 1e-9)) return false;
  }
  return true;
}

Vec3 FfdGrid::displacement_at(const Vec3& world) const {
  const Vec3 l = lattice_coordinate(world);
  int base[3];
  double w[3][4];
  for (int a = 0; a < 3; ++a) {
    if (!(l[a] >= 1.0 - 1e-9) || !(l[a] <= cp_dims_[a] - 2 + 1e-9)) {
      throw Error(ErrorCode::OutsideSupport, "x",
                  "point lacks a full 4x4x4 control neighbourhood");
    }
    const double la = std::clamp(l[a], 1.0, static_cast<double>(cp_dims_[a] - 2));
    int i = static_cast<int>(std::floor(la));
    if (i > cp_dims_[a] - 3) i = cp_dims_[a] - 3;
    const double t = la - i;
    base[a] = i - 1;
    for (int n = 0; n < 4; ++n) w[a][n] = bspline_basis(n, t);
  }
  Vec3 u = Vec3::Zero();
  for (int c = 0; c < 4; ++c) {
    Vec3 plane = Vec3::Zero();
    for (int b = 0; b < 4; ++b) {
      Vec3 row = Vec3::Zero();
      for (int a = 0; a < 4; ++a) row += w[0][a] * displacement(base[0] + a, base[1] + b, base[2] + c);
      plane += w[1][b] * row;
    }
    u += w[2][c] * plane;
  }
  return u;
}

Volume FfdGrid::densify(const Geometry& geometry) const {
  Volume out(geometry, 3);
  const auto& d = geometry.dims;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        const Vec3 u = displacement_at(geometry.voxel_to_world(i, j, k));
        for (int c = 0; c < 3; ++c) out.at(i, j, k, c) = u[c];
      }
  return out;
}

double FfdGrid::max_displacement_norm() const {
  double m = 0.0;
  for (const auto& d : displacements_) m = std::max(m, d.norm());
  return m;
}

Volume grid_to_volume(const FfdGrid& grid) {
  const Geometry g = Geometry::make(grid.cp_dims(), grid.cp_spacing(), grid.cp_origin());
  Volume vol(g, 3);
  const auto& d = grid.cp_dims();
  for (int c = 0; c < d[2]; ++c)
    for (int b = 0; b < d[1]; ++b)
      for (int a = 0; a < d[0]; ++a)
        for (int ch = 0; ch < 3; ++ch) vol.at(a, b, c, ch) = grid.displacement(a, b, c)[ch];
  return vol;
}

FfdGrid grid_from_volume(const Volume& vol) {
  if (vol.channels() != 3) {
    throw Error(ErrorCode::NiftiNotVector, "dim[5]",
                "control-point file must be a 3-component vector volume, got " +
                    std::to_string(vol.channels()) + " channel(s)");
  }
  const Geometry& g = vol.geometry();
  if ((g.direction - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
    throw Error(ErrorCode::InvalidArgument, "direction", "control lattice must be axis-aligned");
  }
  FfdGrid grid(g.dims, g.spacing, g.origin);
  const auto& d = g.dims;
  for (int c = 0; c < d[2]; ++c)
    for (int b = 0; b < d[1]; ++b)
      for (int a = 0; a < d[0]; ++a) grid.displacement(a, b, c) = vol.vec3_at(a, b, c);
  return grid;
}

FfdGrid read_cpp(const std::filesystem::path& path) { return grid_from_volume(nifti::read(path)); }

void write_cpp(const FfdGrid& grid, const std::filesystem::path& path) {
  nifti::write(grid_to_volume(grid), path, nifti::DataType::Float32);
}

}  // namespace shiftnet
