#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "shiftnet/volume.hpp"

namespace shiftnet::layers {

// Channel-planar activation: data[((c * nz + z) * ny + y) * nx + x].
struct Tensor {
  int channels = 0;
  Index3 dims{0, 0, 0};
  std::vector<double> data;

  Tensor() = default;
  Tensor(int c, Index3 d) : channels(c), dims(d), data(static_cast<std::size_t>(c) * d[0] * d[1] * d[2], 0.0) {}

  std::size_t plane() const { return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]; }
  double* channel(int c) { return data.data() + c * plane(); }
  const double* channel(int c) const { return data.data() + c * plane(); }
  double& at(int c, int x, int y, int z) {
    return data[((static_cast<std::size_t>(c) * dims[2] + z) * dims[1] + y) * dims[0] + x];
  }
  double at(int c, int x, int y, int z) const {
    return data[((static_cast<std::size_t>(c) * dims[2] + z) * dims[1] + y) * dims[0] + x];
  }
};

// 3x3x3 cross-correlation, zero padding 1, stride 1.
// weight layout [cout][cin][kz][ky][kx], bias [cout].
Tensor conv3_forward(const Tensor& in, std::span<const double> weight, std::span<const double> bias,
                     int cout);

// Accumulates into grad_weight/grad_bias; writes grad_in when non-null.
void conv3_backward(const Tensor& in, const Tensor& grad_out, std::span<const double> weight,
                    std::span<double> grad_weight, std::span<double> grad_bias, Tensor* grad_in);

// 1x1x1 convolution, weight [cout][cin].
Tensor conv1_forward(const Tensor& in, std::span<const double> weight, std::span<const double> bias,
                     int cout);
void conv1_backward(const Tensor& in, const Tensor& grad_out, std::span<const double> weight,
                    std::span<double> grad_weight, std::span<double> grad_bias, Tensor* grad_in);

void relu_inplace(Tensor& t);
// grad *= (activation > 0), using the post-ReLU activation.
void relu_backward_inplace(const Tensor& activation, Tensor& grad);

// 2x2x2 max pooling; argmax holds the input linear index (within the whole
// tensor) of each output, ties resolved to the lowest index.
Tensor maxpool2_forward(const Tensor& in, std::vector<std::size_t>* argmax);
Tensor maxpool2_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax,
                         int channels, Index3 in_dims);

Tensor upsample2_forward(const Tensor& in);
Tensor upsample2_backward(const Tensor& grad_out);

Tensor concat(const Tensor& a, const Tensor& b);
// Splits a gradient over concat(a, b) back into its two parts.
void split(const Tensor& grad, int channels_a, Tensor* grad_a, Tensor* grad_b);

double sigmoid(double x);

}  // namespace shiftnet::layers
