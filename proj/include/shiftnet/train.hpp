#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include <json.hpp>

#include "shiftnet/losses.hpp"
#include "shiftnet/network.hpp"
#include "shiftnet/pipeline.hpp"
#include "shiftnet/synth.hpp"

namespace shiftnet {

struct TrainConfig {
  int epochs = 20;
  std::uint64_t seed = 7;
  AdamConfig adam{.lr = 3e-3, .clip_norm = 10.0};
  LossWeights weights;
  PipelineConfig pipeline;
  bool shuffle = true;

  std::vector<std::string> violations() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// Network-ready tensors for one case.
struct Sample {
  Volume image;
  Volume half_mask;
  Volume gt_disp;
  Volume gt_mask;
  Volume gt_sdf;
};

// Image channel: bias-corrected, normalised pMRI over the preoperative mask.
Volume network_image(const Case& c, const PipelineConfig& pipeline);
Sample make_sample(const Case& c, const PipelineConfig& pipeline);

struct StepLog {
  int step;
  int epoch;
  int case_index;
  LossReport report;
};

struct TrainResult {
  NetParams params;
  std::vector<StepLog> log;
};

// Batch-1 Adam over epochs x cases. Throws EmptyTrainFold for no cases,
// GeometryMismatch when crop dims differ and NonFiniteLoss naming the term.
TrainResult train(const std::vector<Sample>& samples, const TrainConfig& config,
                  const NetParams* warm_start = nullptr,
                  const std::function<void(const StepLog&)>& on_step = {});
TrainResult train(const std::vector<Case>& cases, const TrainConfig& config,
                  const NetParams* warm_start = nullptr);

// One evaluation of the objective and its parameter gradient.
struct StepResult {
  TotalLoss loss;
  ParamGrads grads;
};
StepResult loss_and_grads(const Sample& s, const NetParams& params, const LossWeights& w);

void write_loss_csv(const std::vector<StepLog>& log, const std::filesystem::path& path);

}  // namespace shiftnet
