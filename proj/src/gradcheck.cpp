#include "shiftnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "shiftnet/losses.hpp"
#include "shiftnet/network.hpp"

namespace shiftnet {

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

namespace {

using Objective = std::function<double(const Volume&)>;

GradcheckResult check_volume(const std::string& name, Volume x, const Volume& analytic, const Objective& f,
                             double h, double tolerance) {
  GradcheckResult r{name, 0, 0.0, tolerance, 0, 0};
  // Entries whose gradient is tiny next to the rest of the tensor are judged
  // against a floor tied to the tensor's scale, not against their own size.
  double scale = 0.0;
  for (double a : analytic.data()) scale = std::max(scale, std::abs(a));
  const double floor = std::max(1e-7, 1e-3 * scale);
  auto d = x.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double x0 = d[i];
    d[i] = x0 + h;
    const double fp = f(x);
    d[i] = x0 - h;
    const double fm = f(x);
    d[i] = x0;
    r.max_rel_err = std::max(r.max_rel_err, relative_error(analytic.data()[i], (fp - fm) / (2.0 * h), floor));
    ++r.checked;
  }
  return r;
}

std::vector<std::size_t> activation_pattern(const ForwardCache& c) {
  std::vector<std::size_t> bits(c.pool_argmax);
  for (const layers::Tensor* t : {&c.e1, &c.e2, &c.m1, &c.m2, &c.d1, &c.d2}) {
    for (double v : t->data) bits.push_back(v > 0.0);
  }
  return bits;
}

Volume random_volume(const Geometry& g, int channels, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Volume v(g, channels);
  for (double& x : v.data()) x = u(rng);
  return v;
}

}  // namespace

std::vector<GradcheckResult> gradcheck_losses(std::uint64_t seed, double tolerance) {
  std::mt19937_64 rng(seed);
  const Geometry g = Geometry::make({5, 5, 5}, Vec3(1.0, 1.2, 0.9));
  const double h = 1e-5;
  const double eps = 1e-3;

  const Volume pd = random_volume(g, 3, rng, -2.0, 2.0);
  const Volume gd = random_volume(g, 3, rng, -2.0, 2.0);
  const Volume pm = random_volume(g, 1, rng, 0.05, 0.95);
  Volume gm = random_volume(g, 1, rng, 0.0, 1.0);
  for (double& v : gm.data()) v = v > 0.5 ? 1.0 : 0.0;
  const Volume ps = random_volume(g, 1, rng, -5.0, 5.0);
  const Volume gs = random_volume(g, 1, rng, -5.0, 5.0);

  std::vector<GradcheckResult> out;
  out.push_back(check_volume("disp_mse", pd, loss_disp_mse(pd, gd).grad,
                             [&](const Volume& p) { return loss_disp_mse(p, gd).value; }, h, tolerance));
  const SphericalTerms sph = loss_disp_sph(pd, gd, eps);
  out.push_back(check_volume("theta", pd, sph.theta.grad,
                             [&](const Volume& p) { return loss_disp_sph(p, gd, eps).theta.value; }, h, tolerance));
  out.push_back(check_volume("phi", pd, sph.phi.grad,
                             [&](const Volume& p) { return loss_disp_sph(p, gd, eps).phi.value; }, h, tolerance));
  out.push_back(check_volume("mag", pd, sph.mag.grad,
                             [&](const Volume& p) { return loss_disp_sph(p, gd, eps).mag.value; }, h, tolerance));
  out.push_back(check_volume("dice", pm, loss_dice(pm, gm).grad,
                             [&](const Volume& p) { return loss_dice(p, gm).value; }, h, tolerance));
  out.push_back(check_volume("edge", pm, loss_edge(pm, gm, 1).grad,
                             [&](const Volume& p) { return loss_edge(p, gm, 1).value; }, h, tolerance));
  out.push_back(check_volume("sdf", ps, loss_sdf(ps, gs).grad,
                             [&](const Volume& p) { return loss_sdf(p, gs).value; }, h, tolerance));

  LossWeights w;
  w.alpha = 0.7;
  w.beta = 1.3;
  w.gamma = 0.2;
  const TotalLoss total = total_loss({&pd, &pm, &ps}, {&gd, &gm, &gs}, w);
  out.push_back(check_volume(
      "total/disp", pd, total.grad_disp,
      [&](const Volume& p) { return total_loss({&p, &pm, &ps}, {&gd, &gm, &gs}, w).report.total; }, h, tolerance));
  out.push_back(check_volume(
      "total/mask", pm, total.grad_mask,
      [&](const Volume& p) { return total_loss({&pd, &p, &ps}, {&gd, &gm, &gs}, w).report.total; }, h, tolerance));
  out.push_back(check_volume(
      "total/sdf", ps, total.grad_sdf,
      [&](const Volume& p) { return total_loss({&pd, &pm, &p}, {&gd, &gm, &gs}, w).report.total; }, h, tolerance));
  return out;
}

GradcheckResult gradcheck_network(std::uint64_t seed, int n_params, double tolerance) {
  std::mt19937_64 rng(seed);
  const Geometry g = Geometry::make({4, 4, 4});
  const Volume image = random_volume(g, 1, rng, -1.0, 1.0);
  Volume half(g);
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 2; i < 4; ++i) half.at(i, j, k) = 1.0;
  NetParams params = NetParams::init(seed);
  {
    // Non-zero biases so every bias gradient path is exercised.
    std::normal_distribution<double> n(0.0, 0.1);
    for (auto& t : params.mutable_tensors()) {
      if (t.name.ends_with(".b")) {
        for (double& b : t.values) b = n(rng);
      }
    }
  }
  const Volume rd = random_volume(g, 3, rng, -1.0, 1.0);
  const Volume rm = random_volume(g, 1, rng, -1.0, 1.0);
  const Volume rs = random_volume(g, 1, rng, -1.0, 1.0);
  auto readout = [&](const NetParams& p, ForwardCache* cache) {
    const NetOutput o = forward(image, half, p, cache);
    double s = 0.0;
    for (std::size_t i = 0; i < rd.size(); ++i) s += rd.data()[i] * o.disp.data()[i];
    for (std::size_t i = 0; i < rm.size(); ++i) s += rm.data()[i] * o.mask_prob.data()[i];
    for (std::size_t i = 0; i < rs.size(); ++i) s += rs.data()[i] * o.sdf.data()[i];
    return s;
  };

  ForwardCache cache;
  forward(image, half, params, &cache);
  const auto base_pattern = activation_pattern(cache);
  const ParamGrads grads = backward(cache, params, rd, rm, rs);
  std::vector<double> flat;
  for (const auto& t : grads) flat.insert(flat.end(), t.begin(), t.end());

  GradcheckResult r{"network", 0, 0.0, tolerance, 0, n_params};
  std::uniform_int_distribution<std::size_t> pick(0, params.scalar_count() - 1);
  const double h = 1e-4;
  // Central differences are only meaningful when neither probe crosses a
  // ReLU or max-pool switch; such draws are replaced.
  ForwardCache probe;
  while (r.checked < n_params) {
    const std::size_t idx = pick(rng);
    const double x0 = params.get(idx);
    params.set(idx, x0 + h);
    const double fp = readout(params, &probe);
    bool smooth = activation_pattern(probe) == base_pattern;
    params.set(idx, x0 - h);
    const double fm = readout(params, &probe);
    smooth = smooth && activation_pattern(probe) == base_pattern;
    params.set(idx, x0);
    if (!smooth) {
      ++r.skipped;
      if (r.skipped > 10 * n_params) break;
      continue;
    }
    r.max_rel_err = std::max(r.max_rel_err, relative_error(flat[idx], (fp - fm) / (2.0 * h)));
    ++r.checked;
  }
  return r;
}

}  // namespace shiftnet
