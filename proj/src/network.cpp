#include "shiftnet/network.hpp"

#include <atomic>
#include <cmath>
#include <random>

#include "shiftnet/error.hpp"

namespace shiftnet {

using layers::Tensor;

namespace {

std::atomic<std::uint64_t> g_version{0};

std::uint64_t next_version() { return ++g_version; }

int kernel_volume(LayerKind kind) { return kind == LayerKind::Conv3 ? 27 : 1; }

std::vector<int> weight_shape(const LayerSpec& l) {
  if (l.kind == LayerKind::Conv3) return {l.cout, l.cin, 3, 3, 3};
  return {l.cout, l.cin};
}

std::span<const double> view(const ParamTensor& t) { return t.values; }
std::span<double> view(std::vector<double>& g) { return g; }

Tensor to_tensor(const Volume& v) {
  Tensor t(v.channels(), v.dims());
  std::copy(v.storage().begin(), v.storage().end(), t.data.begin());
  return t;
}

Volume to_volume(const Tensor& t, const Geometry& g) { return Volume(g, t.channels, t.data); }

Tensor add(Tensor a, const Tensor& b) {
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
  return a;
}

}  // namespace

const std::vector<LayerSpec>& architecture() {
  static const std::vector<LayerSpec> layers_ = {
      {"enc1a", LayerKind::Conv3, 2, 8},      {"enc1b", LayerKind::Conv3, 8, 8},
      {"mid_a", LayerKind::Conv3, 8, 16},     {"mid_b", LayerKind::Conv3, 16, 16},
      {"dec_a", LayerKind::Conv3, 24, 8},     {"dec_b", LayerKind::Conv3, 8, 8},
      {"head_disp", LayerKind::Conv1, 8, 3},  {"head_mask", LayerKind::Conv1, 8, 1},
      {"head_sdf", LayerKind::Conv1, 8, 1},
  };
  return layers_;
}

NetParams::NetParams() {
  for (const auto& l : architecture()) {
    const auto shape = weight_shape(l);
    tensors_.push_back({l.name + ".w", shape,
                        std::vector<double>(static_cast<std::size_t>(l.cout) * l.cin * kernel_volume(l.kind), 0.0)});
    tensors_.push_back({l.name + ".b", {l.cout}, std::vector<double>(l.cout, 0.0)});
  }
  version_ = next_version();
}

NetParams NetParams::zeros() { return NetParams(); }

NetParams NetParams::init(std::uint64_t seed) {
  NetParams p;
  p.rng_seed = seed;
  const auto& arch = architecture();
  for (std::size_t li = 0; li < arch.size(); ++li) {
    const auto& l = arch[li];
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(li)};
    std::mt19937_64 rng(seq);
    const double fan_in = static_cast<double>(l.cin) * kernel_volume(l.kind);
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
    for (double& w : p.tensors_[2 * li].values) w = normal(rng);
  }
  p.touch();
  return p;
}

std::vector<ParamTensor>& NetParams::mutable_tensors() {
  touch();
  return tensors_;
}

const ParamTensor& NetParams::tensor(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw Error(ErrorCode::InvalidArgument, name, "no such parameter tensor");
}

std::size_t NetParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.values.size();
  return n;
}

double NetParams::get(std::size_t flat) const {
  for (const auto& t : tensors_) {
    if (flat < t.values.size()) return t.values[flat];
    flat -= t.values.size();
  }
  throw Error(ErrorCode::InvalidArgument, "flat", "parameter index out of range");
}

void NetParams::set(std::size_t flat, double value) {
  for (auto& t : tensors_) {
    if (flat < t.values.size()) {
      t.values[flat] = value;
      touch();
      return;
    }
    flat -= t.values.size();
  }
  throw Error(ErrorCode::InvalidArgument, "flat", "parameter index out of range");
}

bool NetParams::all_finite() const {
  for (const auto& t : tensors_) {
    for (double v : t.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

void NetParams::touch() { version_ = next_version(); }

ParamGrads zero_grads(const NetParams& params) {
  ParamGrads g;
  for (const auto& t : params.tensors()) g.emplace_back(t.values.size(), 0.0);
  return g;
}

NetOutput forward(const Volume& image, const Volume& half_mask, const NetParams& params,
                  ForwardCache* cache) {
  require_same_grid(image, half_mask, "half_mask");
  if (image.channels() != 1 || half_mask.channels() != 1) {
    throw Error(ErrorCode::InvalidArgument, "channels", "network inputs must be single-channel");
  }
  const Index3 dims = image.dims();
  for (int a = 0; a < 3; ++a) {
    if (dims[a] % 4 != 0) {
      throw Error(ErrorCode::DimsNotDivisible, "dims",
                  "dim " + std::to_string(a) + " = " + std::to_string(dims[a]) + " is not a multiple of 4");
    }
  }
  const auto& t = params.tensors();
  auto conv3 = [&](const Tensor& in, int layer, bool relu) {
    Tensor out = layers::conv3_forward(in, view(t[2 * layer]), view(t[2 * layer + 1]), architecture()[layer].cout);
    if (relu) layers::relu_inplace(out);
    return out;
  };

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.geometry = image.geometry();
  c.input = Tensor(2, dims);
  std::copy(image.storage().begin(), image.storage().end(), c.input.data.begin());
  std::copy(half_mask.storage().begin(), half_mask.storage().end(),
            c.input.data.begin() + static_cast<std::ptrdiff_t>(image.size()));

  c.e1 = conv3(c.input, 0, true);
  c.e2 = conv3(c.e1, 1, true);
  c.pooled = layers::maxpool2_forward(c.e2, &c.pool_argmax);
  c.m1 = conv3(c.pooled, 2, true);
  c.m2 = conv3(c.m1, 3, true);
  c.up = layers::upsample2_forward(c.m2);
  c.cat = layers::concat(c.up, c.e2);
  c.d1 = conv3(c.cat, 4, true);
  c.d2 = conv3(c.d1, 5, true);

  Tensor disp = layers::conv1_forward(c.d2, view(t[12]), view(t[13]), 3);
  Tensor logit = layers::conv1_forward(c.d2, view(t[14]), view(t[15]), 1);
  Tensor sdf = layers::conv1_forward(c.d2, view(t[16]), view(t[17]), 1);
  for (double& v : logit.data) v = layers::sigmoid(v);
  c.mask_prob = logit;
  c.params_version = params.version();
  c.valid = true;

  const Geometry& g = image.geometry();
  return {to_volume(disp, g), to_volume(c.mask_prob, g), to_volume(sdf, g)};
}

ParamGrads backward(const ForwardCache& c, const NetParams& params, const Volume& grad_disp,
                    const Volume& grad_mask, const Volume& grad_sdf) {
  if (!c.valid || c.params_version != params.version()) {
    throw Error(ErrorCode::StaleActivations, "params", "parameters changed since the forward pass");
  }
  const auto& t = params.tensors();
  ParamGrads g = zero_grads(params);

  Tensor g_disp = to_tensor(grad_disp);
  Tensor g_logit = to_tensor(grad_mask);
  for (std::size_t i = 0; i < g_logit.data.size(); ++i) {
    const double p = c.mask_prob.data[i];
    g_logit.data[i] *= p * (1.0 - p);
  }
  Tensor g_sdf = to_tensor(grad_sdf);

  Tensor g_d2, tmp;
  layers::conv1_backward(c.d2, g_disp, view(t[12]), view(g[12]), view(g[13]), &g_d2);
  layers::conv1_backward(c.d2, g_logit, view(t[14]), view(g[14]), view(g[15]), &tmp);
  g_d2 = add(std::move(g_d2), tmp);
  layers::conv1_backward(c.d2, g_sdf, view(t[16]), view(g[16]), view(g[17]), &tmp);
  g_d2 = add(std::move(g_d2), tmp);

  auto conv3_back = [&](const Tensor& in, const Tensor& act, Tensor grad, int layer, Tensor* grad_in) {
    layers::relu_backward_inplace(act, grad);
    layers::conv3_backward(in, grad, view(t[2 * layer]), view(g[2 * layer]), view(g[2 * layer + 1]), grad_in);
  };

  Tensor g_d1, g_cat, g_up, g_skip, g_m1, g_pooled, g_e1;
  conv3_back(c.d1, c.d2, std::move(g_d2), 5, &g_d1);
  conv3_back(c.cat, c.d1, std::move(g_d1), 4, &g_cat);
  layers::split(g_cat, c.up.channels, &g_up, &g_skip);
  conv3_back(c.m1, c.m2, layers::upsample2_backward(g_up), 3, &g_m1);
  conv3_back(c.pooled, c.m1, std::move(g_m1), 2, &g_pooled);
  Tensor g_e2 = add(layers::maxpool2_backward(g_pooled, c.pool_argmax, c.e2.channels, c.e2.dims), g_skip);
  conv3_back(c.e1, c.e2, std::move(g_e2), 1, &g_e1);
  conv3_back(c.input, c.e1, std::move(g_e1), 0, nullptr);
  return g;
}

AdamState make_adam(const NetParams& params, const AdamConfig& config) {
  AdamState s;
  s.config = config;
  s.m = zero_grads(params);
  s.v = zero_grads(params);
  return s;
}

double grad_norm(const ParamGrads& grads) {
  double sq = 0.0;
  for (const auto& t : grads) {
    for (double v : t) sq += v * v;
  }
  return std::sqrt(sq);
}

void adam_step(NetParams& params, const ParamGrads& grads, AdamState& state) {
  const AdamConfig& cfg = state.config;
  double scale = 1.0;
  if (cfg.clip_norm > 0.0) {
    const double n = grad_norm(grads);
    if (n > cfg.clip_norm) scale = cfg.clip_norm / n;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  auto& tensors = params.mutable_tensors();
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    auto& p = tensors[ti].values;
    auto& m = state.m[ti];
    auto& v = state.v[ti];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = grads[ti][i] * scale;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      p[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
    }
  }
}

}  // namespace shiftnet
