#include "shiftnet/shape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shiftnet/error.hpp"

namespace shiftnet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D lower envelope of parabolas (Felzenszwalb & Huttenlocher) on samples
// at positions n * h. f holds squared distances, +inf where no feature.
void edt_line(const double* f, double* out, int n, double h, std::vector<int>& v,
              std::vector<double>& z) {
  v.resize(n);
  z.resize(n + 1);
  auto intersect = [&](int p, int q) {
    const double xp = p * h, xq = q * h;
    return ((f[q] + xq * xq) - (f[p] + xp * xp)) / (2.0 * (xq - xp));
  };
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    while (k >= 0 && intersect(v[k], q) <= z[k]) --k;
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -kInf : intersect(v[k - 1], q);
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(out, out + n, kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    const double xq = q * h;
    while (z[j + 1] < xq) ++j;
    const double dx = xq - v[j] * h;
    out[q] = dx * dx + f[v[j]];
  }
}

}  // namespace

std::vector<double> squared_edt(const std::vector<std::uint8_t>& feature, const Geometry& g) {
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  std::vector<double> dist(feature.size());
  for (std::size_t n = 0; n < feature.size(); ++n) dist[n] = feature[n] ? 0.0 : kInf;

  const int nmax = std::max({nx, ny, nz});
  std::vector<double> line(nmax), result(nmax);
  std::vector<int> v;
  std::vector<double> z;
  auto idx = [&](int i, int j, int k) { return (static_cast<std::size_t>(k) * ny + j) * nx + i; };

  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) line[i] = dist[idx(i, j, k)];
      edt_line(line.data(), result.data(), nx, g.spacing[0], v, z);
      for (int i = 0; i < nx; ++i) dist[idx(i, j, k)] = result[i];
    }
  for (int k = 0; k < nz; ++k)
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < ny; ++j) line[j] = dist[idx(i, j, k)];
      edt_line(line.data(), result.data(), ny, g.spacing[1], v, z);
      for (int j = 0; j < ny; ++j) dist[idx(i, j, k)] = result[j];
    }
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      for (int k = 0; k < nz; ++k) line[k] = dist[idx(i, j, k)];
      edt_line(line.data(), result.data(), nz, g.spacing[2], v, z);
      for (int k = 0; k < nz; ++k) dist[idx(i, j, k)] = result[k];
    }
  return dist;
}

Volume signed_distance(const Volume& mask, double cap_mm) {
  if (mask.channels() != 1) {
    throw Error(ErrorCode::InvalidArgument, "mask", "signed distance needs a scalar mask");
  }
  const std::size_t n = mask.voxel_count();
  std::vector<std::uint8_t> fg(n), bg(n);
  for (std::size_t i = 0; i < n; ++i) {
    fg[i] = mask.data()[i] > 0.5 ? 1 : 0;
    bg[i] = 1 - fg[i];
  }
  const auto to_fg = squared_edt(fg, mask.geometry());
  const auto to_bg = squared_edt(bg, mask.geometry());
  Volume out(mask.geometry(), 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = fg[i] ? -std::sqrt(to_bg[i]) : std::sqrt(to_fg[i]);
    out.data()[i] = std::clamp(d, -cap_mm, cap_mm);
  }
  return out;
}

Volume dilate_with_argmax(const Volume& mask, int k, std::vector<std::size_t>* argmax) {
  if (k < 0) throw Error(ErrorCode::InvalidArgument, "k", "dilation radius must be >= 0");
  if (mask.channels() != 1) {
    throw Error(ErrorCode::InvalidArgument, "mask", "dilation needs a scalar volume");
  }
  const auto& d = mask.dims();
  const std::size_t n = mask.voxel_count();
  const std::size_t stride[3] = {1, static_cast<std::size_t>(d[0]),
                                 static_cast<std::size_t>(d[0]) * d[1]};

  // Separable passes along x, y, z. Each pass keeps the source index of the
  // running max; strict '>' keeps the earliest (lowest index) winner.
  std::vector<double> val(mask.data().begin(), mask.data().end());
  std::vector<std::size_t> src(n);
  for (std::size_t i = 0; i < n; ++i) src[i] = i;
  std::vector<double> nval(n);
  std::vector<std::size_t> nsrc(n);

  for (int axis = 0; axis < 3; ++axis) {
    for (int z = 0; z < d[2]; ++z)
      for (int y = 0; y < d[1]; ++y)
        for (int x = 0; x < d[0]; ++x) {
          const int pos[3] = {x, y, z};
          const std::size_t here = x + stride[1] * y + stride[2] * z;
          const int lo = std::max(0, pos[axis] - k);
          const int hi = std::min(d[axis] - 1, pos[axis] + k);
          const std::size_t first = here - stride[axis] * (pos[axis] - lo);
          double best = val[first];
          std::size_t best_src = src[first];
          for (int p = lo + 1; p <= hi; ++p) {
            const std::size_t at = first + stride[axis] * (p - lo);
            if (val[at] > best) {
              best = val[at];
              best_src = src[at];
            }
          }
          nval[here] = best;
          nsrc[here] = best_src;
        }
    val.swap(nval);
    src.swap(nsrc);
  }
  if (argmax) *argmax = std::move(src);
  return Volume(mask.geometry(), 1, std::move(val));
}

Volume dilate(const Volume& mask, int k) { return dilate_with_argmax(mask, k, nullptr); }

}  // namespace shiftnet
