#pragma once

#include <string>

#include <json.hpp>

#include "shiftnet/volume.hpp"

namespace shiftnet {

struct LossWeights {
  double alpha = 1.0;  // displacement (Cartesian + spherical)
  double beta = 1.0;   // mask (Dice + edge)
  double gamma = 0.1;  // SDF
  int edge_k = 1;
  double angle_eps_mm = 1e-3;
  // Average displacement terms over the ground-truth intra mask instead of the whole crop.
  bool disp_in_mask = false;

  std::vector<std::string> violations() const;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

struct LossReport {
  double disp_mse = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  double mag = 0.0;
  double dice = 0.0;
  double edge = 0.0;
  double sdf = 0.0;
  double total = 0.0;
};

void to_json(nlohmann::json& j, const LossReport& r);
void from_json(const nlohmann::json& j, LossReport& r);

// A scalar objective together with its gradient with respect to the prediction.
struct LossTerm {
  double value = 0.0;
  Volume grad;
};

struct SphericalTerms {
  LossTerm theta;
  LossTerm phi;
  LossTerm mag;
};

// Elevation asin(v_z / max(|v|, eps)) in [-pi/2, pi/2].
double elevation(const Vec3& v, double eps);
// Azimuth atan2(v_y, v_x) folded into (-pi, pi].
double azimuth(const Vec3& v);
// min(d^2, (2 pi - |d|)^2) for d = phi_p - phi_g.
double azimuth_term(double phi_pred, double phi_gt);

// Mean over voxels of |v_p - v_g|^2. `region`, when given, restricts the
// average to voxels with region > 0.5.
LossTerm loss_disp_mse(const Volume& pred, const Volume& gt, const Volume* region = nullptr);

// Elevation, azimuth (wrap-aware) and magnitude terms. Voxels whose ground
// truth is shorter than angle_eps_mm contribute 0 to the angular terms.
SphericalTerms loss_disp_sph(const Volume& pred, const Volume& gt, double angle_eps_mm,
                             const Volume* region = nullptr);

inline constexpr double kDiceEps = 1e-8;

// 1 - 2 sum(p g) / (sum p^2 + sum g^2 + eps)
LossTerm loss_dice(const Volume& pred, const Volume& gt);

// mean |dilate(p, k) - dilate(g, k)|; gradient routed through the window argmax.
LossTerm loss_edge(const Volume& pred, const Volume& gt, int k);

// mean (s_p - s_g)^2
LossTerm loss_sdf(const Volume& pred, const Volume& gt);

struct FieldSet {
  const Volume* disp;
  const Volume* mask;
  const Volume* sdf;
};

struct TotalLoss {
  LossReport report;
  Volume grad_disp;
  Volume grad_mask;
  Volume grad_sdf;
};

// alpha (mse + theta + phi + mag) + gamma sdf + beta (dice + edge).
// `pred.mask` holds probabilities, `target.mask` the binary intra mask.
TotalLoss total_loss(const FieldSet& pred, const FieldSet& target, const LossWeights& w);

double recompute_total(const LossReport& r, const LossWeights& w);

}  // namespace shiftnet
