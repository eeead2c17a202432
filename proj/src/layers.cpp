#include "shiftnet/layers.hpp"

#include <cmath>
#include <cstring>

#include <Eigen/Core>

namespace shiftnet::layers {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedRows = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedRows = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// Sequential sum in a fixed order.
double plain_sum(const double* x, Eigen::Index n) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) s += x[i];
  return s;
}

// Column matrix for output slice z: row (ci * 27 + tap) holds the input
// shifted by that tap, zero outside the volume.
void im2col_slice(const Tensor& in, int z, RowMat& cols) {
  const int nx = in.dims[0], ny = in.dims[1], nz = in.dims[2];
  const std::size_t p = static_cast<std::size_t>(nx) * ny;
  cols.resize(in.channels * 27, static_cast<Eigen::Index>(p));
  for (int ci = 0; ci < in.channels; ++ci) {
    for (int tap = 0; tap < 27; ++tap) {
      const int dz = tap / 9 - 1, dy = (tap / 3) % 3 - 1, dx = tap % 3 - 1;
      double* row = cols.data() + (static_cast<std::size_t>(ci) * 27 + tap) * p;
      const int sz = z + dz;
      if (sz < 0 || sz >= nz) {
        std::memset(row, 0, p * sizeof(double));
        continue;
      }
      const double* src_plane = in.channel(ci) + static_cast<std::size_t>(sz) * p;
      const int x0 = std::max(0, -dx), x1 = std::min(nx, nx - dx);
      for (int y = 0; y < ny; ++y) {
        double* dst = row + static_cast<std::size_t>(y) * nx;
        const int sy = y + dy;
        if (sy < 0 || sy >= ny) {
          std::memset(dst, 0, nx * sizeof(double));
          continue;
        }
        const double* src = src_plane + static_cast<std::size_t>(sy) * nx;
        for (int x = 0; x < x0; ++x) dst[x] = 0.0;
        std::memcpy(dst + x0, src + x0 + dx, (x1 - x0) * sizeof(double));
        for (int x = x1; x < nx; ++x) dst[x] = 0.0;
      }
    }
  }
}

// Scatter-add of a column-matrix gradient back onto the input grid.
void col2im_slice_add(const RowMat& cols, int z, Tensor& grad_in) {
  const int nx = grad_in.dims[0], ny = grad_in.dims[1], nz = grad_in.dims[2];
  const std::size_t p = static_cast<std::size_t>(nx) * ny;
  for (int ci = 0; ci < grad_in.channels; ++ci) {
    for (int tap = 0; tap < 27; ++tap) {
      const int dz = tap / 9 - 1, dy = (tap / 3) % 3 - 1, dx = tap % 3 - 1;
      const int sz = z + dz;
      if (sz < 0 || sz >= nz) continue;
      const double* row = cols.data() + (static_cast<std::size_t>(ci) * 27 + tap) * p;
      double* dst_plane = grad_in.channel(ci) + static_cast<std::size_t>(sz) * p;
      const int x0 = std::max(0, -dx), x1 = std::min(nx, nx - dx);
      for (int y = 0; y < ny; ++y) {
        const int sy = y + dy;
        if (sy < 0 || sy >= ny) continue;
        const double* src = row + static_cast<std::size_t>(y) * nx;
        double* dst = dst_plane + static_cast<std::size_t>(sy) * nx + dx;
        for (int x = x0; x < x1; ++x) dst[x] += src[x];
      }
    }
  }
}

}  // namespace

Tensor conv3_forward(const Tensor& in, std::span<const double> weight, std::span<const double> bias,
                     int cout) {
  const int nz = in.dims[2];
  const Eigen::Index k = static_cast<Eigen::Index>(in.channels) * 27;
  const Eigen::Index p = static_cast<Eigen::Index>(in.dims[0]) * in.dims[1];
  Tensor out(cout, in.dims);
  Eigen::Map<const RowMat> w(weight.data(), cout, k);
  Eigen::Map<const Eigen::VectorXd> b(bias.data(), cout);
  RowMat cols;
  for (int z = 0; z < nz; ++z) {
    im2col_slice(in, z, cols);
    StridedRows o(out.data.data() + z * p, cout, p, Eigen::OuterStride<>(nz * p));
    o.noalias() = w * cols;
    o.colwise() += b;
  }
  return out;
}

void conv3_backward(const Tensor& in, const Tensor& grad_out, std::span<const double> weight,
                    std::span<double> grad_weight, std::span<double> grad_bias, Tensor* grad_in) {
  const int nz = in.dims[2];
  const int cout = grad_out.channels;
  const Eigen::Index k = static_cast<Eigen::Index>(in.channels) * 27;
  const Eigen::Index p = static_cast<Eigen::Index>(in.dims[0]) * in.dims[1];
  Eigen::Map<const RowMat> w(weight.data(), cout, k);
  Eigen::Map<RowMat> gw(grad_weight.data(), cout, k);
  Eigen::Map<Eigen::VectorXd> gb(grad_bias.data(), cout);
  if (grad_in) *grad_in = Tensor(in.channels, in.dims);
  RowMat cols, gcols;
  for (int z = 0; z < nz; ++z) {
    ConstStridedRows go(grad_out.data.data() + z * p, cout, p, Eigen::OuterStride<>(nz * p));
    im2col_slice(in, z, cols);
    gw.noalias() += go * cols.transpose();
    for (int c = 0; c < cout; ++c) gb[c] += plain_sum(go.row(c).data(), p);
    if (grad_in) {
      gcols.noalias() = w.transpose() * go;
      col2im_slice_add(gcols, z, *grad_in);
    }
  }
}

Tensor conv1_forward(const Tensor& in, std::span<const double> weight, std::span<const double> bias,
                     int cout) {
  const Eigen::Index n = static_cast<Eigen::Index>(in.plane());
  Tensor out(cout, in.dims);
  Eigen::Map<const RowMat> w(weight.data(), cout, in.channels);
  Eigen::Map<const RowMat> x(in.data.data(), in.channels, n);
  Eigen::Map<RowMat> o(out.data.data(), cout, n);
  o.noalias() = w * x;
  o.colwise() += Eigen::Map<const Eigen::VectorXd>(bias.data(), cout);
  return out;
}

void conv1_backward(const Tensor& in, const Tensor& grad_out, std::span<const double> weight,
                    std::span<double> grad_weight, std::span<double> grad_bias, Tensor* grad_in) {
  const Eigen::Index n = static_cast<Eigen::Index>(in.plane());
  const int cout = grad_out.channels;
  Eigen::Map<const RowMat> w(weight.data(), cout, in.channels);
  Eigen::Map<const RowMat> x(in.data.data(), in.channels, n);
  Eigen::Map<const RowMat> go(grad_out.data.data(), cout, n);
  Eigen::Map<RowMat>(grad_weight.data(), cout, in.channels).noalias() += go * x.transpose();
  for (int c = 0; c < cout; ++c) grad_bias[c] += plain_sum(go.row(c).data(), n);
  if (grad_in) {
    *grad_in = Tensor(in.channels, in.dims);
    Eigen::Map<RowMat>(grad_in->data.data(), in.channels, n).noalias() = w.transpose() * go;
  }
}

void relu_inplace(Tensor& t) {
  for (double& v : t.data) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(const Tensor& activation, Tensor& grad) {
  for (std::size_t i = 0; i < grad.data.size(); ++i) {
    if (!(activation.data[i] > 0.0)) grad.data[i] = 0.0;
  }
}

Tensor maxpool2_forward(const Tensor& in, std::vector<std::size_t>* argmax) {
  const Index3 od{in.dims[0] / 2, in.dims[1] / 2, in.dims[2] / 2};
  Tensor out(in.channels, od);
  if (argmax) argmax->assign(out.data.size(), 0);
  std::size_t o = 0;
  for (int c = 0; c < in.channels; ++c)
    for (int z = 0; z < od[2]; ++z)
      for (int y = 0; y < od[1]; ++y)
        for (int x = 0; x < od[0]; ++x, ++o) {
          double best = 0.0;
          std::size_t best_at = 0;
          bool first = true;
          for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                const std::size_t at =
                    ((static_cast<std::size_t>(c) * in.dims[2] + 2 * z + dz) * in.dims[1] + 2 * y + dy) *
                        in.dims[0] + 2 * x + dx;
                if (first || in.data[at] > best) {
                  best = in.data[at];
                  best_at = at;
                  first = false;
                }
              }
          out.data[o] = best;
          if (argmax) (*argmax)[o] = best_at;
        }
  return out;
}

Tensor maxpool2_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax,
                         int channels, Index3 in_dims) {
  Tensor grad_in(channels, in_dims);
  for (std::size_t o = 0; o < grad_out.data.size(); ++o) grad_in.data[argmax[o]] += grad_out.data[o];
  return grad_in;
}

Tensor upsample2_forward(const Tensor& in) {
  const Index3 od{in.dims[0] * 2, in.dims[1] * 2, in.dims[2] * 2};
  Tensor out(in.channels, od);
  for (int c = 0; c < in.channels; ++c)
    for (int z = 0; z < od[2]; ++z)
      for (int y = 0; y < od[1]; ++y)
        for (int x = 0; x < od[0]; ++x) out.at(c, x, y, z) = in.at(c, x / 2, y / 2, z / 2);
  return out;
}

Tensor upsample2_backward(const Tensor& grad_out) {
  const Index3 id{grad_out.dims[0] / 2, grad_out.dims[1] / 2, grad_out.dims[2] / 2};
  Tensor grad_in(grad_out.channels, id);
  for (int c = 0; c < grad_out.channels; ++c)
    for (int z = 0; z < grad_out.dims[2]; ++z)
      for (int y = 0; y < grad_out.dims[1]; ++y)
        for (int x = 0; x < grad_out.dims[0]; ++x)
          grad_in.at(c, x / 2, y / 2, z / 2) += grad_out.at(c, x, y, z);
  return grad_in;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  Tensor out(a.channels + b.channels, a.dims);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return out;
}

void split(const Tensor& grad, int channels_a, Tensor* grad_a, Tensor* grad_b) {
  const std::size_t cut = static_cast<std::size_t>(channels_a) * grad.plane();
  *grad_a = Tensor(channels_a, grad.dims);
  *grad_b = Tensor(grad.channels - channels_a, grad.dims);
  std::copy(grad.data.begin(), grad.data.begin() + static_cast<std::ptrdiff_t>(cut), grad_a->data.begin());
  std::copy(grad.data.begin() + static_cast<std::ptrdiff_t>(cut), grad.data.end(), grad_b->data.begin());
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace shiftnet::layers
