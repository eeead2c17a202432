#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace shiftnet {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Index3 = std::array<int, 3>;

// Voxel grid placement in world space (mm).
// world(v) = origin + direction * (spacing .* v), v in continuous voxel units.
struct Geometry {
  Index3 dims{1, 1, 1};
  Vec3 spacing = Vec3::Ones();
  Vec3 origin = Vec3::Zero();
  Mat3 direction = Mat3::Identity();

  static Geometry make(Index3 dims, Vec3 spacing = Vec3::Ones(), Vec3 origin = Vec3::Zero(),
                       Mat3 direction = Mat3::Identity());

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }

  Vec3 voxel_to_world(const Vec3& voxel) const;
  Vec3 world_to_voxel(const Vec3& world) const;
  Vec3 voxel_to_world(int i, int j, int k) const { return voxel_to_world(Vec3(i, j, k)); }

  bool contains(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
  }

  // Throws InvalidArgument when dims/spacing are non-positive or direction is not orthonormal.
  void validate() const;

  bool same_grid(const Geometry& other, double tol = 1e-6) const;
};

// Dense 3D grid of 64-bit reals. Layout is x-fastest with channels outermost,
// i.e. data[((c * nz + k) * ny + j) * nx + i], the NIfTI on-disk order.
class Volume {
 public:
  Volume() = default;
  explicit Volume(const Geometry& geometry, int channels = 1, double fill = 0.0);
  Volume(const Geometry& geometry, int channels, std::vector<double> data);

  const Geometry& geometry() const { return geometry_; }
  const Index3& dims() const { return geometry_.dims; }
  int channels() const { return channels_; }
  std::size_t voxel_count() const { return geometry_.voxel_count(); }
  std::size_t size() const { return data_.size(); }

  std::size_t index(int i, int j, int k, int c = 0) const {
    const auto& d = geometry_.dims;
    return ((static_cast<std::size_t>(c) * d[2] + k) * d[1] + j) * d[0] + i;
  }

  double& at(int i, int j, int k, int c = 0) { return data_[index(i, j, k, c)]; }
  double at(int i, int j, int k, int c = 0) const { return data_[index(i, j, k, c)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> channel(int c);
  std::span<const double> channel(int c) const;

  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  // Channel-wise tensor-product linear interpolation at a world point.
  // Points outside the grid are clamped to the border voxels.
  double sample(const Vec3& world, int c = 0) const;
  double sample_voxel(const Vec3& voxel, int c = 0) const;
  // First three channels as a vector (for displacement fields).
  Vec3 sample_vec3(const Vec3& world) const;
  Vec3 vec3_at(int i, int j, int k) const {
    return {at(i, j, k, 0), at(i, j, k, 1), at(i, j, k, 2)};
  }

  // Same geometry and channel count, zero-filled.
  Volume zeros_like(int channels = -1) const;

 private:
  Geometry geometry_;
  int channels_ = 1;
  std::vector<double> data_;
};

// Throws GeometryMismatch unless both volumes share grid and channel count.
void require_same_grid(const Volume& a, const Volume& b, const char* what);

// Round every value to the nearest float32 (makes a volume storable losslessly).
void round_to_float(Volume& vol);

// Reverse the x axis in index space. Vector channel 0 is negated when flip_vector_x is set.
Volume flip_x(const Volume& vol, bool flip_vector_x = false);

}  // namespace shiftnet
