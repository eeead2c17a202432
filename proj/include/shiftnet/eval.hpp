#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "shiftnet/synth.hpp"
#include "shiftnet/train.hpp"

namespace shiftnet {

// Euclidean distance per name, in the order given. Throws MissingLandmark.
std::vector<double> tre(const LandmarkSet& pred, const LandmarkSet& gt, const std::vector<std::string>& names);

// P1, P2, P4, P6 of `side` followed by the midline P3 and P5.
std::vector<std::string> select_eval_landmarks(Side side);

// 2|A ∩ B| / (|A| + |B|) over voxels > 0.5; 1 when both are empty.
double dice(const Volume& a, const Volume& b);

struct FoldPlan {
  int k = 9;
  std::uint64_t seed = 0;
  std::vector<int> assignments;  // case index -> fold

  std::vector<int> test_cases(int fold) const;
  std::vector<int> train_cases(int fold) const;
};

// Seeded shuffle, then round-robin. Throws InvalidArgument unless 2 <= k <= n.
FoldPlan make_fold_plan(int n_cases, int k, std::uint64_t seed);

struct Prediction {
  Volume disp;
  Volume mask;  // binary
};

using Predictor = std::function<Prediction(const Case&)>;
// Builds the predictor for one fold from its training cases.
using PredictorFactory = std::function<Predictor(const std::vector<const Case*>& train, int fold)>;

// Ground-truth field; mask = preoperative mask pulled through it.
Predictor oracle_predictor();

Prediction predict(const Case& c, const NetParams& params, const PipelineConfig& pipeline);
NetOutput predict_raw(const Case& c, const NetParams& params, const PipelineConfig& pipeline);

struct CaseMetrics {
  std::string id;
  int fold = 0;
  Side side = Side::Right;
  double dice_pred = 0.0;
  double dice_base = 0.0;
  std::vector<std::string> landmarks;
  std::vector<double> tre_pred;
  std::vector<double> tre_base;

  double mean_tre_pred() const;
  double mean_tre_base() const;
};

CaseMetrics evaluate_case(const Case& c, const Prediction& p);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  int n = 0;
};

// Population std.
MeanStd mean_std(const std::vector<double>& values);

struct FoldMetrics {
  int fold = 0;
  int n_train = 0;
  int n_test = 0;
  double dice_pred = 0.0;
  double dice_base = 0.0;
  double tre_pred = 0.0;
  double tre_base = 0.0;
};

struct LandmarkRow {
  Side side;
  std::string name;
  MeanStd base;
  MeanStd pred;
};

struct EvalReport {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<CaseMetrics> cases;
  std::vector<FoldMetrics> folds;
  std::vector<LandmarkRow> landmarks;
  MeanStd dice_pred, dice_base, tre_pred, tre_base;

  // 1 - tre_pred / tre_base on the fold means.
  double tre_reduction() const;
  double dice_gain() const { return dice_pred.mean - dice_base.mean; }
};

// Per-fold means, then mean ± std across folds. Independent of case order.
EvalReport aggregate(std::vector<CaseMetrics> cases, const FoldPlan& plan);

// For each fold: factory(train cases) then evaluate the held-out cases.
// Folds run on up to `threads` workers. Throws EmptyTrainFold.
EvalReport run_crossval(const std::vector<Case>& cases, const std::vector<std::string>& ids, const FoldPlan& plan,
                        const PredictorFactory& factory, int threads = 1);

// Network cross-validation: each fold trains from `warm_start` (or a fresh
// init) under `config`.
EvalReport crossval(const std::vector<Case>& cases, const std::vector<std::string>& ids, const FoldPlan& plan,
                    const TrainConfig& config, const NetParams* warm_start = nullptr, int threads = 1);

void to_json(nlohmann::json& j, const MeanStd& m);
nlohmann::json report_json(const EvalReport& r);
std::string report_text(const EvalReport& r);
void write_case_csv(const EvalReport& r, const std::filesystem::path& path);

}  // namespace shiftnet
