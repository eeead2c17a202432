#pragma once

// Slow, independent reference implementations used only by the tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "shiftnet/ffd.hpp"
#include "shiftnet/layers.hpp"
#include "shiftnet/volume.hpp"

namespace oracle {

using shiftnet::Geometry;
using shiftnet::Index3;
using shiftnet::Vec3;
using shiftnet::Volume;

// Cubic B-spline basis written from the piecewise polynomial of the
// centred kernel, evaluated at distance r from a knot.
inline double bspline_kernel(double r) {
  r = std::abs(r);
  if (r < 1.0) return (4.0 - 6.0 * r * r + 3.0 * r * r * r) / 6.0;
  if (r < 2.0) return (2.0 - r) * (2.0 - r) * (2.0 - r) / 6.0;
  return 0.0;
}

// u(x) as the sum over every control point of the kernel tensor product.
inline Vec3 ffd_bruteforce(const shiftnet::FfdGrid& g, const Vec3& x) {
  const Vec3 l = g.lattice_coordinate(x);
  Vec3 u = Vec3::Zero();
  const auto& d = g.cp_dims();
  for (int c = 0; c < d[2]; ++c)
    for (int b = 0; b < d[1]; ++b)
      for (int a = 0; a < d[0]; ++a) {
        const double w = bspline_kernel(l[0] - a) * bspline_kernel(l[1] - b) * bspline_kernel(l[2] - c);
        u += w * g.displacement(a, b, c);
      }
  return u;
}

// Trilinear interpolation as an explicit weighted sum over the 8 corners,
// with border clamping of the continuous coordinate.
inline double trilinear_bruteforce(const Volume& v, const Vec3& world, int ch = 0) {
  const Geometry& g = v.geometry();
  Vec3 q = g.world_to_voxel(world);
  for (int a = 0; a < 3; ++a) q[a] = std::clamp(q[a], 0.0, static_cast<double>(g.dims[a] - 1));
  double s = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    int idx[3];
    double w = 1.0;
    for (int a = 0; a < 3; ++a) {
      const int lo = std::min(static_cast<int>(std::floor(q[a])), g.dims[a] - 1);
      const int hi = std::min(lo + 1, g.dims[a] - 1);
      const double t = q[a] - lo;
      const bool up = (corner >> a) & 1;
      idx[a] = up ? hi : lo;
      w *= up ? t : 1.0 - t;
    }
    s += w * v.at(idx[0], idx[1], idx[2], ch);
  }
  return s;
}

// All-pairs signed distance between voxel centres, negative inside.
inline Volume sdf_bruteforce(const Volume& mask, double cap) {
  const Geometry& g = mask.geometry();
  std::vector<Vec3> fg, bg;
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const Vec3 p = g.spacing.cwiseProduct(Vec3(i, j, k));
        (mask.at(i, j, k) > 0.5 ? fg : bg).push_back(p);
      }
  Volume out(g);
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const Vec3 p = g.spacing.cwiseProduct(Vec3(i, j, k));
        const bool inside = mask.at(i, j, k) > 0.5;
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& q : inside ? bg : fg) best = std::min(best, (p - q).squaredNorm());
        const double d = std::min(std::sqrt(best), cap);
        out.at(i, j, k) = inside ? -d : d;
      }
  return out;
}

inline Volume dilate_bruteforce(const Volume& m, int k) {
  const auto& d = m.dims();
  Volume out(m.geometry());
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        for (int dz = -k; dz <= k; ++dz)
          for (int dy = -k; dy <= k; ++dy)
            for (int dx = -k; dx <= k; ++dx) {
              const int a = x + dx, b = y + dy, c = z + dz;
              if (a < 0 || b < 0 || c < 0 || a >= d[0] || b >= d[1] || c >= d[2]) continue;
              best = std::max(best, m.at(a, b, c));
            }
        out.at(x, y, z) = best;
      }
  return out;
}

// Direct 3x3x3 cross-correlation with zero padding.
inline shiftnet::layers::Tensor conv3_bruteforce(const shiftnet::layers::Tensor& in, const std::vector<double>& w,
                                                 const std::vector<double>& b, int cout) {
  shiftnet::layers::Tensor out(cout, in.dims);
  const auto& d = in.dims;
  for (int co = 0; co < cout; ++co)
    for (int z = 0; z < d[2]; ++z)
      for (int y = 0; y < d[1]; ++y)
        for (int x = 0; x < d[0]; ++x) {
          double s = b[co];
          for (int ci = 0; ci < in.channels; ++ci)
            for (int kz = 0; kz < 3; ++kz)
              for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                  const int a = x + kx - 1, bb = y + ky - 1, c = z + kz - 1;
                  if (a < 0 || bb < 0 || c < 0 || a >= d[0] || bb >= d[1] || c >= d[2]) continue;
                  s += w[(((static_cast<std::size_t>(co) * in.channels + ci) * 3 + kz) * 3 + ky) * 3 + kx] *
                       in.at(ci, a, bb, c);
                }
          out.at(co, x, y, z) = s;
        }
  return out;
}

// Gradient of sum(grad_out * conv(in)) w.r.t. in: full correlation with the
// flipped kernel.
inline shiftnet::layers::Tensor conv3_input_grad_bruteforce(const shiftnet::layers::Tensor& grad_out,
                                                            const std::vector<double>& w, int cin) {
  shiftnet::layers::Tensor gin(cin, grad_out.dims);
  const auto& d = grad_out.dims;
  for (int ci = 0; ci < cin; ++ci)
    for (int z = 0; z < d[2]; ++z)
      for (int y = 0; y < d[1]; ++y)
        for (int x = 0; x < d[0]; ++x) {
          double s = 0.0;
          for (int co = 0; co < grad_out.channels; ++co)
            for (int kz = 0; kz < 3; ++kz)
              for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                  const int a = x - (kx - 1), bb = y - (ky - 1), c = z - (kz - 1);
                  if (a < 0 || bb < 0 || c < 0 || a >= d[0] || bb >= d[1] || c >= d[2]) continue;
                  s += w[(((static_cast<std::size_t>(co) * cin + ci) * 3 + kz) * 3 + ky) * 3 + kx] *
                       grad_out.at(co, a, bb, c);
                }
          gin.at(ci, x, y, z) = s;
        }
  return gin;
}

inline Volume random_volume(const Geometry& g, int channels, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Volume v(g, channels);
  for (double& x : v.data()) x = u(rng);
  return v;
}

inline Volume random_mask(const Geometry& g, std::mt19937_64& rng, double p = 0.5) {
  std::bernoulli_distribution b(p);
  Volume v(g);
  for (double& x : v.data()) x = b(rng) ? 1.0 : 0.0;
  return v;
}

inline shiftnet::Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace oracle
