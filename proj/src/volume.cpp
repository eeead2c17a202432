#include "shiftnet/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "shiftnet/error.hpp"

namespace shiftnet {

Geometry Geometry::make(Index3 dims, Vec3 spacing, Vec3 origin, Mat3 direction) {
  Geometry g;
  g.dims = dims;
  g.spacing = spacing;
  g.origin = origin;
  g.direction = direction;
  g.validate();
  return g;
}

Vec3 Geometry::voxel_to_world(const Vec3& voxel) const {
  return origin + direction * spacing.cwiseProduct(voxel);
}

Vec3 Geometry::world_to_voxel(const Vec3& world) const {
  return (direction.transpose() * (world - origin)).cwiseQuotient(spacing);
}

void Geometry::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) {
      throw Error(ErrorCode::InvalidArgument, "dims", "every dimension must be >= 1");
    }
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
      throw Error(ErrorCode::InvalidArgument, "spacing", "spacing must be positive and finite");
    }
  }
  if (!origin.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "origin", "origin must be finite");
  }
  const double err = (direction.transpose() * direction - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(err <= 1e-9)) {
    throw Error(ErrorCode::InvalidArgument, "direction", "direction matrix is not orthonormal");
  }
}

bool Geometry::same_grid(const Geometry& other, double tol) const {
  return dims == other.dims && (spacing - other.spacing).cwiseAbs().maxCoeff() <= tol &&
         (origin - other.origin).cwiseAbs().maxCoeff() <= tol &&
         (direction - other.direction).cwiseAbs().maxCoeff() <= tol;
}

Volume::Volume(const Geometry& geometry, int channels, double fill)
    : geometry_(geometry), channels_(channels) {
  geometry_.validate();
  if (channels < 1) throw Error(ErrorCode::InvalidArgument, "channels", "must be >= 1");
  data_.assign(geometry_.voxel_count() * channels, fill);
}

Volume::Volume(const Geometry& geometry, int channels, std::vector<double> data)
    : geometry_(geometry), channels_(channels), data_(std::move(data)) {
  geometry_.validate();
  if (channels < 1) throw Error(ErrorCode::InvalidArgument, "channels", "must be >= 1");
  if (data_.size() != geometry_.voxel_count() * channels) {
    throw Error(ErrorCode::InvalidArgument, "data",
                "length " + std::to_string(data_.size()) + " does not match dims x channels");
  }
}

std::span<double> Volume::channel(int c) {
  return std::span<double>(data_).subspan(static_cast<std::size_t>(c) * voxel_count(),
                                          voxel_count());
}

std::span<const double> Volume::channel(int c) const {
  return std::span<const double>(data_).subspan(static_cast<std::size_t>(c) * voxel_count(),
                                                voxel_count());
}

double Volume::sample(const Vec3& world, int c) const {
  return sample_voxel(geometry_.world_to_voxel(world), c);
}

double Volume::sample_voxel(const Vec3& voxel, int c) const {
  const auto& d = geometry_.dims;
  int base[3];
  double t[3];
  for (int a = 0; a < 3; ++a) {
    const double x = std::clamp(voxel[a], 0.0, static_cast<double>(d[a] - 1));
    int i0 = static_cast<int>(std::floor(x));
    if (i0 > d[a] - 2) i0 = std::max(d[a] - 2, 0);
    base[a] = i0;
    t[a] = d[a] > 1 ? x - i0 : 0.0;
  }
  const int sx = d[0] > 1 ? 1 : 0;
  const int sy = d[1] > 1 ? 1 : 0;
  const int sz = d[2] > 1 ? 1 : 0;
  const int i = base[0], j = base[1], k = base[2];

  auto lerp = [](double a, double b, double w) { return (1.0 - w) * a + w * b; };
  const double c00 = lerp(at(i, j, k, c), at(i + sx, j, k, c), t[0]);
  const double c10 = lerp(at(i, j + sy, k, c), at(i + sx, j + sy, k, c), t[0]);
  const double c01 = lerp(at(i, j, k + sz, c), at(i + sx, j, k + sz, c), t[0]);
  const double c11 = lerp(at(i, j + sy, k + sz, c), at(i + sx, j + sy, k + sz, c), t[0]);
  return lerp(lerp(c00, c10, t[1]), lerp(c01, c11, t[1]), t[2]);
}

Vec3 Volume::sample_vec3(const Vec3& world) const {
  const Vec3 v = geometry_.world_to_voxel(world);
  return {sample_voxel(v, 0), sample_voxel(v, 1), sample_voxel(v, 2)};
}

Volume Volume::zeros_like(int channels) const {
  return Volume(geometry_, channels < 0 ? channels_ : channels, 0.0);
}

void require_same_grid(const Volume& a, const Volume& b, const char* what) {
  if (a.channels() != b.channels() || !a.geometry().same_grid(b.geometry(), 1e-6)) {
    throw Error(ErrorCode::GeometryMismatch, what, "operands do not share grid and channel count");
  }
}

void round_to_float(Volume& vol) {
  for (double& v : vol.data()) v = static_cast<double>(static_cast<float>(v));
}

Volume flip_x(const Volume& vol, bool flip_vector_x) {
  Volume out = vol.zeros_like();
  const auto& d = vol.dims();
  for (int c = 0; c < vol.channels(); ++c) {
    const double sign = (flip_vector_x && c == 0) ? -1.0 : 1.0;
    for (int k = 0; k < d[2]; ++k)
      for (int j = 0; j < d[1]; ++j)
        for (int i = 0; i < d[0]; ++i) out.at(d[0] - 1 - i, j, k, c) = sign * vol.at(i, j, k, c);
  }
  return out;
}

}  // namespace shiftnet
