#include "shiftnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "shiftnet/error.hpp"

namespace shiftnet {

std::vector<std::string> TrainConfig::violations() const {
  std::vector<std::string> v;
  if (epochs < 0) v.push_back("epochs must be >= 0");
  if (!(adam.lr > 0.0) || !std::isfinite(adam.lr)) v.push_back("lr must be positive and finite");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) v.push_back("beta1 must be in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) v.push_back("beta2 must be in [0, 1)");
  if (!(adam.eps > 0.0)) v.push_back("adam_eps must be > 0");
  if (!(adam.clip_norm >= 0.0)) v.push_back("clip_norm must be >= 0");
  for (auto& s : weights.violations()) v.push_back(s);
  for (auto& s : pipeline.violations()) v.push_back(s);
  return v;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},         {"seed", c.seed},           {"lr", c.adam.lr},
       {"beta1", c.adam.beta1},      {"beta2", c.adam.beta2},    {"adam_eps", c.adam.eps},
       {"clip_norm", c.adam.clip_norm}, {"shuffle", c.shuffle}, {"loss", c.weights},
       {"pipeline", c.pipeline}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.adam.lr = j.value("lr", c.adam.lr);
  c.adam.beta1 = j.value("beta1", c.adam.beta1);
  c.adam.beta2 = j.value("beta2", c.adam.beta2);
  c.adam.eps = j.value("adam_eps", c.adam.eps);
  c.adam.clip_norm = j.value("clip_norm", c.adam.clip_norm);
  c.shuffle = j.value("shuffle", c.shuffle);
  if (j.contains("loss")) c.weights = j.at("loss").get<LossWeights>();
  if (j.contains("pipeline")) c.pipeline = j.at("pipeline").get<PipelineConfig>();
}

Volume network_image(const Case& c, const PipelineConfig& pipeline) {
  return standardize_intensity(c.pmri, c.mask_pre, pipeline);
}

Sample make_sample(const Case& c, const PipelineConfig& pipeline) {
  return {network_image(c, pipeline), c.half_mask, c.gt_disp, c.gt_mask_intra, c.gt_sdf};
}

StepResult loss_and_grads(const Sample& s, const NetParams& params, const LossWeights& w) {
  ForwardCache cache;
  const NetOutput out = forward(s.image, s.half_mask, params, &cache);
  StepResult r;
  r.loss = total_loss({&out.disp, &out.mask_prob, &out.sdf}, {&s.gt_disp, &s.gt_mask, &s.gt_sdf}, w);
  r.grads = backward(cache, params, r.loss.grad_disp, r.loss.grad_mask, r.loss.grad_sdf);
  return r;
}

namespace {

void check_finite(const LossReport& r, int step) {
  const std::pair<const char*, double> terms[] = {
      {"disp_mse", r.disp_mse}, {"theta", r.theta}, {"phi", r.phi}, {"mag", r.mag},
      {"dice", r.dice},         {"edge", r.edge},   {"sdf", r.sdf}, {"total", r.total}};
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value)) {
      throw Error(ErrorCode::NonFiniteLoss, name, "non-finite loss at step " + std::to_string(step));
    }
  }
}

}  // namespace

TrainResult train(const std::vector<Sample>& samples, const TrainConfig& config, const NetParams* warm_start,
                  const std::function<void(const StepLog&)>& on_step) {
  if (samples.empty()) throw Error(ErrorCode::EmptyTrainFold, "cases", "training needs at least one case");
  if (auto v = config.violations(); !v.empty()) {
    std::string msg;
    for (const auto& s : v) msg += (msg.empty() ? "" : "; ") + s;
    throw Error(ErrorCode::Config, "train", msg);
  }
  for (const auto& s : samples) {
    if (s.image.dims() != samples.front().image.dims()) {
      throw Error(ErrorCode::GeometryMismatch, "dims", "all training cases must share crop dims");
    }
  }

  TrainResult result{warm_start ? *warm_start : NetParams::init(config.seed), {}};
  AdamState adam = make_adam(result.params, config.adam);
  std::mt19937_64 rng(config.seed);
  std::vector<int> order(samples.size());
  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    if (config.shuffle) std::shuffle(order.begin(), order.end(), rng);
    for (int ci : order) {
      ++step;
      StepResult r = loss_and_grads(samples[ci], result.params, config.weights);
      check_finite(r.loss.report, step);
      adam_step(result.params, r.grads, adam);
      result.log.push_back({step, epoch, ci, r.loss.report});
      if (on_step) on_step(result.log.back());
    }
  }
  return result;
}

TrainResult train(const std::vector<Case>& cases, const TrainConfig& config, const NetParams* warm_start) {
  std::vector<Sample> samples;
  samples.reserve(cases.size());
  for (const auto& c : cases) samples.push_back(make_sample(c, config.pipeline));
  return train(samples, config, warm_start);
}

void write_loss_csv(const std::vector<StepLog>& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, path.string(), "cannot open for writing");
  out.precision(17);
  out << "step,epoch,case,disp_mse,theta,phi,mag,dice,edge,sdf,total\n";
  for (const auto& s : log) {
    const auto& r = s.report;
    out << s.step << ',' << s.epoch << ',' << s.case_index << ',' << r.disp_mse << ',' << r.theta << ','
        << r.phi << ',' << r.mag << ',' << r.dice << ',' << r.edge << ',' << r.sdf << ',' << r.total << '\n';
  }
}

}  // namespace shiftnet
