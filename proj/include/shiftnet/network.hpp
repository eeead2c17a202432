#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shiftnet/layers.hpp"
#include "shiftnet/volume.hpp"

namespace shiftnet {

struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;
};

enum class LayerKind { Conv3, Conv1 };

struct LayerSpec {
  std::string name;
  LayerKind kind;
  int cin;
  int cout;
};

// enc1a, enc1b, mid_a, mid_b, dec_a, dec_b, head_disp, head_mask, head_sdf.
const std::vector<LayerSpec>& architecture();

// Named weights and biases for the fixed architecture, "<layer>.w" then
// "<layer>.b" per layer. Every mutable access moves the version, which
// invalidates saved activations.
class NetParams {
 public:
  NetParams();

  // He-normal weights (std sqrt(2 / fan_in)), zero biases; each tensor has its own stream.
  static NetParams init(std::uint64_t seed);
  static NetParams zeros();

  std::uint64_t rng_seed = 0;

  const std::vector<ParamTensor>& tensors() const { return tensors_; }
  std::vector<ParamTensor>& mutable_tensors();
  const ParamTensor& tensor(const std::string& name) const;

  std::size_t scalar_count() const;
  // Flat addressing across tensors in order.
  double get(std::size_t flat) const;
  void set(std::size_t flat, double value);

  std::uint64_t version() const { return version_; }
  bool all_finite() const;

 private:
  void touch();

  std::vector<ParamTensor> tensors_;
  std::uint64_t version_ = 0;
};

// Gradients laid out like NetParams::tensors().
using ParamGrads = std::vector<std::vector<double>>;
ParamGrads zero_grads(const NetParams& params);

struct NetOutput {
  Volume disp;       // 3 channels, mm
  Volume mask_prob;  // (0, 1)
  Volume sdf;        // mm
};

struct ForwardCache {
  std::uint64_t params_version = 0;
  Geometry geometry;
  layers::Tensor input, e1, e2, pooled, m1, m2, up, cat, d1, d2;
  std::vector<std::size_t> pool_argmax;
  layers::Tensor mask_prob;
  bool valid = false;
};

// Throws DimsNotDivisible unless every dim is a multiple of 4, GeometryMismatch
// when the inputs differ in grid.
NetOutput forward(const Volume& image, const Volume& half_mask, const NetParams& params,
                  ForwardCache* cache = nullptr);

// Reverse pass for the loss gradients w.r.t. each head. Throws StaleActivations
// if params changed since the cached forward.
ParamGrads backward(const ForwardCache& cache, const NetParams& params, const Volume& grad_disp,
                    const Volume& grad_mask, const Volume& grad_sdf);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Global gradient-norm clip applied before the update; 0 disables.
  double clip_norm = 0.0;
};

struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  ParamGrads m;
  ParamGrads v;
};

AdamState make_adam(const NetParams& params, const AdamConfig& config = {});
void adam_step(NetParams& params, const ParamGrads& grads, AdamState& state);

double grad_norm(const ParamGrads& grads);

}  // namespace shiftnet
