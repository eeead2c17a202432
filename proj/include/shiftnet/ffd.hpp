#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "shiftnet/volume.hpp"

namespace shiftnet {

// Uniform cubic B-spline basis, i in 0..3, t in [0, 1].
double bspline_basis(int i, double t);

// Axis-aligned lattice of cubic B-spline control-point displacements (mm).
// Control point (a, b, c) sits at cp_origin + cp_spacing .* (a, b, c).
// A world point with fractional lattice coordinate l = i + t draws on
// control indices i-1 .. i+2 along each axis.
class FfdGrid {
 public:
  FfdGrid() = default;
  FfdGrid(Index3 cp_dims, Vec3 cp_spacing, Vec3 cp_origin);

  // Smallest lattice (inset by one cell on every side) that supports every
  // voxel center of `geometry`, centred on the image extent.
  static FfdGrid covering(const Geometry& geometry, double cp_spacing_mm);

  const Index3& cp_dims() const { return cp_dims_; }
  const Vec3& cp_spacing() const { return cp_spacing_; }
  const Vec3& cp_origin() const { return cp_origin_; }
  std::size_t cp_count() const {
    return static_cast<std::size_t>(cp_dims_[0]) * cp_dims_[1] * cp_dims_[2];
  }

  std::size_t cp_index(int a, int b, int c) const {
    return (static_cast<std::size_t>(c) * cp_dims_[1] + b) * cp_dims_[0] + a;
  }
  Vec3& displacement(int a, int b, int c) { return displacements_[cp_index(a, b, c)]; }
  const Vec3& displacement(int a, int b, int c) const { return displacements_[cp_index(a, b, c)]; }
  std::vector<Vec3>& displacements() { return displacements_; }
  const std::vector<Vec3>& displacements() const { return displacements_; }

  Vec3 cp_position(int a, int b, int c) const {
    return cp_origin_ + cp_spacing_.cwiseProduct(Vec3(a, b, c));
  }
  Vec3 lattice_coordinate(const Vec3& world) const {
    return (world - cp_origin_).cwiseQuotient(cp_spacing_);
  }

  // True when x has a full 4x4x4 control neighbourhood.
  bool supports(const Vec3& world) const;

  // u(x) = sum over the 4^3 neighbourhood of B_a(s) B_b(t) B_c(w) d_abc.
  // Throws OutsideSupport otherwise.
  Vec3 displacement_at(const Vec3& world) const;
  // y(x) = x + u(x)
  Vec3 deform(const Vec3& world) const { return world + displacement_at(world); }

  // Dense 3-channel field of u at every voxel center of `geometry`.
  Volume densify(const Geometry& geometry) const;

  double max_displacement_norm() const;

 private:
  Index3 cp_dims_{4, 4, 4};
  Vec3 cp_spacing_ = Vec3::Ones();
  Vec3 cp_origin_ = Vec3::Zero();
  std::vector<Vec3> displacements_ = std::vector<Vec3>(64, Vec3::Zero());
};

// Control grid as a vector NIfTI: spacing cp_spacing, origin cp_origin.
FfdGrid read_cpp(const std::filesystem::path& path);
void write_cpp(const FfdGrid& grid, const std::filesystem::path& path);

FfdGrid grid_from_volume(const Volume& vol);
Volume grid_to_volume(const FfdGrid& grid);

}  // namespace shiftnet
