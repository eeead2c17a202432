#include "shiftnet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "shiftnet/error.hpp"
#include "shiftnet/reduce.hpp"
#include "shiftnet/shape.hpp"

namespace shiftnet {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_pair(const Volume& pred, const Volume& gt, int channels, const char* what) {
  if (pred.channels() != channels) {
    throw Error(ErrorCode::GeometryMismatch, what,
                "expected " + std::to_string(channels) + " channel(s)");
  }
  require_same_grid(pred, gt, what);
}

// Voxel weights (1 or 0) and their count.
std::vector<double> region_weights(const Volume& pred, const Volume* region, double* count) {
  std::vector<double> w(pred.voxel_count(), 1.0);
  if (region) {
    if (region->channels() != 1 || !region->geometry().same_grid(pred.geometry(), 1e-6)) {
      throw Error(ErrorCode::GeometryMismatch, "region", "region mask grid differs");
    }
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = region->data()[i] > 0.5 ? 1.0 : 0.0;
  }
  *count = pairwise_sum(w);
  return w;
}

}  // namespace

std::vector<std::string> LossWeights::violations() const {
  std::vector<std::string> out;
  if (!(alpha >= 0)) out.push_back("alpha must be >= 0");
  if (!(beta >= 0)) out.push_back("beta must be >= 0");
  if (!(gamma >= 0)) out.push_back("gamma must be >= 0");
  if (edge_k < 0) out.push_back("edge_k must be >= 0");
  if (!(angle_eps_mm > 0)) out.push_back("angle_eps_mm must be > 0");
  return out;
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = nlohmann::json{{"alpha", w.alpha},   {"beta", w.beta},
                     {"gamma", w.gamma},   {"edge_k", w.edge_k},
                     {"angle_eps_mm", w.angle_eps_mm}, {"disp_in_mask", w.disp_in_mask}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  if (j.contains("alpha")) w.alpha = j.at("alpha").get<double>();
  if (j.contains("beta")) w.beta = j.at("beta").get<double>();
  if (j.contains("gamma")) w.gamma = j.at("gamma").get<double>();
  if (j.contains("edge_k")) w.edge_k = j.at("edge_k").get<int>();
  if (j.contains("angle_eps_mm")) w.angle_eps_mm = j.at("angle_eps_mm").get<double>();
  if (j.contains("disp_in_mask")) w.disp_in_mask = j.at("disp_in_mask").get<bool>();
}

void to_json(nlohmann::json& j, const LossReport& r) {
  j = nlohmann::json{{"disp_mse", r.disp_mse}, {"theta", r.theta}, {"phi", r.phi},
                     {"mag", r.mag},           {"dice", r.dice},   {"edge", r.edge},
                     {"sdf", r.sdf},           {"total", r.total}};
}

void from_json(const nlohmann::json& j, LossReport& r) {
  r.disp_mse = j.at("disp_mse").get<double>();
  r.theta = j.at("theta").get<double>();
  r.phi = j.at("phi").get<double>();
  r.mag = j.at("mag").get<double>();
  r.dice = j.at("dice").get<double>();
  r.edge = j.at("edge").get<double>();
  r.sdf = j.at("sdf").get<double>();
  r.total = j.at("total").get<double>();
}

double elevation(const Vec3& v, double eps) {
  const double d = std::max(v.norm(), eps);
  return std::asin(std::clamp(v[2] / d, -1.0, 1.0));
}

double azimuth(const Vec3& v) {
  double phi = std::atan2(v[1], v[0]);
  if (phi <= -kPi) phi += kTwoPi;
  return phi;
}

double azimuth_term(double phi_pred, double phi_gt) {
  const double d = phi_pred - phi_gt;
  const double wrap = kTwoPi - std::fabs(d);
  return std::min(d * d, wrap * wrap);
}

LossTerm loss_disp_mse(const Volume& pred, const Volume& gt, const Volume* region) {
  check_pair(pred, gt, 3, "loss_disp_mse");
  double n = 0.0;
  const auto w = region_weights(pred, region, &n);
  LossTerm out{0.0, pred.zeros_like()};
  if (n == 0.0) return out;
  const std::size_t nv = pred.voxel_count();
  std::vector<double> terms(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    double sq = 0.0;
    for (int c = 0; c < 3; ++c) {
      const std::size_t at = c * nv + i;
      const double diff = pred.data()[at] - gt.data()[at];
      sq += diff * diff;
      out.grad.data()[at] = w[i] * 2.0 * diff / n;
    }
    terms[i] = w[i] * sq;
  }
  out.value = pairwise_sum(terms) / n;
  return out;
}

SphericalTerms loss_disp_sph(const Volume& pred, const Volume& gt, double eps, const Volume* region) {
  check_pair(pred, gt, 3, "loss_disp_sph");
  double n = 0.0;
  const auto w = region_weights(pred, region, &n);
  SphericalTerms out{{0.0, pred.zeros_like()}, {0.0, pred.zeros_like()}, {0.0, pred.zeros_like()}};
  if (n == 0.0) return out;
  const std::size_t nv = pred.voxel_count();
  std::vector<double> th(nv, 0.0), ph(nv, 0.0), mg(nv, 0.0);
  auto vec = [nv](const Volume& v, std::size_t i) {
    return Vec3(v.data()[i], v.data()[nv + i], v.data()[2 * nv + i]);
  };
  auto put = [nv](Volume& g, std::size_t i, const Vec3& val) {
    for (int c = 0; c < 3; ++c) g.data()[c * nv + i] = val[c];
  };

  for (std::size_t i = 0; i < nv; ++i) {
    if (w[i] == 0.0) continue;
    const Vec3 vp = vec(pred, i);
    const Vec3 vg = vec(gt, i);
    const double rp = vp.norm();
    const double rg = vg.norm();

    // Magnitude term, always active.
    const double dm = rp - rg;
    mg[i] = dm * dm;
    if (rp > 0) put(out.mag.grad, i, (2.0 * dm / n) * vp / rp);

    if (rg < eps) continue;

    // Elevation.
    const double dth = elevation(vp, eps) - elevation(vg, eps);
    th[i] = dth * dth;
    Vec3 gth = Vec3::Zero();
    if (rp >= eps) {
      const double rho = std::hypot(vp[0], vp[1]);
      if (rho > 0) {
        const double r2 = rp * rp;
        gth = Vec3(-vp[2] * vp[0] / (rho * r2), -vp[2] * vp[1] / (rho * r2), rho / r2);
      }
    } else {
      const double a = vp[2] / eps;
      if (std::fabs(a) < 1.0) gth[2] = 1.0 / (eps * std::sqrt(1.0 - a * a));
    }
    put(out.theta.grad, i, (2.0 * dth / n) * gth);

    // Azimuth with the 2 pi wrap.
    const double pp = azimuth(vp);
    const double d = pp - azimuth(vg);
    const double wrap = kTwoPi - std::fabs(d);
    double dterm;
    if (d * d <= wrap * wrap) {
      ph[i] = d * d;
      dterm = 2.0 * d;
    } else {
      ph[i] = wrap * wrap;
      dterm = -2.0 * wrap * (d > 0 ? 1.0 : -1.0);
    }
    const double rho2 = vp[0] * vp[0] + vp[1] * vp[1];
    if (rho2 > 0) {
      put(out.phi.grad, i, (dterm / n) * Vec3(-vp[1] / rho2, vp[0] / rho2, 0.0));
    }
  }
  out.theta.value = pairwise_sum(th) / n;
  out.phi.value = pairwise_sum(ph) / n;
  out.mag.value = pairwise_sum(mg) / n;
  return out;
}

LossTerm loss_dice(const Volume& pred, const Volume& gt) {
  check_pair(pred, gt, 1, "loss_dice");
  const std::size_t nv = pred.voxel_count();
  std::vector<double> pg(nv), pp(nv), gg(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    const double p = pred.data()[i], g = gt.data()[i];
    pg[i] = p * g;
    pp[i] = p * p;
    gg[i] = g * g;
  }
  const double inter = pairwise_sum(pg);
  const double denom = pairwise_sum(pp) + pairwise_sum(gg) + kDiceEps;
  LossTerm out{1.0 - 2.0 * inter / denom, pred.zeros_like()};
  const double d2 = denom * denom;
  for (std::size_t i = 0; i < nv; ++i) {
    out.grad.data()[i] = (-2.0 * gt.data()[i] * denom + 4.0 * inter * pred.data()[i]) / d2;
  }
  return out;
}

LossTerm loss_edge(const Volume& pred, const Volume& gt, int k) {
  check_pair(pred, gt, 1, "loss_edge");
  std::vector<std::size_t> arg;
  const Volume dp = dilate_with_argmax(pred, k, &arg);
  const Volume dg = dilate(gt, k);
  const std::size_t nv = pred.voxel_count();
  const double n = static_cast<double>(nv);
  std::vector<double> terms(nv);
  LossTerm out{0.0, pred.zeros_like()};
  for (std::size_t i = 0; i < nv; ++i) {
    const double diff = dp.data()[i] - dg.data()[i];
    terms[i] = std::fabs(diff);
    if (diff != 0.0) out.grad.data()[arg[i]] += (diff > 0 ? 1.0 : -1.0) / n;
  }
  out.value = pairwise_sum(terms) / n;
  return out;
}

LossTerm loss_sdf(const Volume& pred, const Volume& gt) {
  check_pair(pred, gt, 1, "loss_sdf");
  const std::size_t nv = pred.voxel_count();
  const double n = static_cast<double>(nv);
  std::vector<double> terms(nv);
  LossTerm out{0.0, pred.zeros_like()};
  for (std::size_t i = 0; i < nv; ++i) {
    const double diff = pred.data()[i] - gt.data()[i];
    terms[i] = diff * diff;
    out.grad.data()[i] = 2.0 * diff / n;
  }
  out.value = pairwise_sum(terms) / n;
  return out;
}

double recompute_total(const LossReport& r, const LossWeights& w) {
  return w.alpha * (r.disp_mse + r.theta + r.phi + r.mag) + w.gamma * r.sdf +
         w.beta * (r.dice + r.edge);
}

TotalLoss total_loss(const FieldSet& pred, const FieldSet& target, const LossWeights& w) {
  const Volume* region = w.disp_in_mask ? target.mask : nullptr;
  const LossTerm mse = loss_disp_mse(*pred.disp, *target.disp, region);
  const SphericalTerms sph = loss_disp_sph(*pred.disp, *target.disp, w.angle_eps_mm, region);
  const LossTerm dice = loss_dice(*pred.mask, *target.mask);
  const LossTerm edge = loss_edge(*pred.mask, *target.mask, w.edge_k);
  const LossTerm sdf = loss_sdf(*pred.sdf, *target.sdf);

  TotalLoss out;
  out.report.disp_mse = mse.value;
  out.report.theta = sph.theta.value;
  out.report.phi = sph.phi.value;
  out.report.mag = sph.mag.value;
  out.report.dice = dice.value;
  out.report.edge = edge.value;
  out.report.sdf = sdf.value;
  out.report.total = recompute_total(out.report, w);

  out.grad_disp = pred.disp->zeros_like();
  for (std::size_t i = 0; i < out.grad_disp.size(); ++i) {
    out.grad_disp.data()[i] = w.alpha * (mse.grad.data()[i] + sph.theta.grad.data()[i] +
                                         sph.phi.grad.data()[i] + sph.mag.grad.data()[i]);
  }
  out.grad_mask = pred.mask->zeros_like();
  for (std::size_t i = 0; i < out.grad_mask.size(); ++i) {
    out.grad_mask.data()[i] = w.beta * (dice.grad.data()[i] + edge.grad.data()[i]);
  }
  out.grad_sdf = pred.sdf->zeros_like();
  for (std::size_t i = 0; i < out.grad_sdf.size(); ++i) {
    out.grad_sdf.data()[i] = w.gamma * sdf.grad.data()[i];
  }
  return out;
}

}  // namespace shiftnet
