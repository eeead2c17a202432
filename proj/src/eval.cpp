#include "shiftnet/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "shiftnet/error.hpp"
#include "shiftnet/network.hpp"

namespace shiftnet {

std::vector<double> tre(const LandmarkSet& pred, const LandmarkSet& gt, const std::vector<std::string>& names) {
  std::vector<double> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back((pred.at(n) - gt.at(n)).norm());
  return out;
}

std::vector<std::string> select_eval_landmarks(Side side) {
  const std::string s = side == Side::Left ? "L" : "R";
  return {"P1" + s, "P2" + s, "P4" + s, "P6" + s, "P3", "P5"};
}

double dice(const Volume& a, const Volume& b) {
  require_same_grid(a, b, "dice");
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a.data()[i] > 0.5, y = b.data()[i] > 0.5;
    na += x;
    nb += y;
    both += x && y;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

std::vector<int> FoldPlan::test_cases(int fold) const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(assignments.size()); ++i) {
    if (assignments[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<int> FoldPlan::train_cases(int fold) const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(assignments.size()); ++i) {
    if (assignments[i] != fold) out.push_back(i);
  }
  return out;
}

FoldPlan make_fold_plan(int n_cases, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "folds", "need at least 2 folds");
  if (k > n_cases) {
    throw Error(ErrorCode::InvalidArgument, "folds",
                std::to_string(k) + " folds requested for " + std::to_string(n_cases) + " cases");
  }
  std::vector<int> order(n_cases);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  FoldPlan plan{k, seed, std::vector<int>(n_cases, 0)};
  for (int p = 0; p < n_cases; ++p) plan.assignments[order[p]] = p % k;
  return plan;
}

Predictor oracle_predictor() {
  return [](const Case& c) { return Prediction{c.gt_disp, warp_mask(c.mask_pre, c.gt_disp)}; };
}

NetOutput predict_raw(const Case& c, const NetParams& params, const PipelineConfig& pipeline) {
  return forward(network_image(c, pipeline), c.half_mask, params);
}

Prediction predict(const Case& c, const NetParams& params, const PipelineConfig& pipeline) {
  NetOutput o = predict_raw(c, params, pipeline);
  for (double& v : o.mask_prob.data()) v = v >= 0.5 ? 1.0 : 0.0;
  return {std::move(o.disp), std::move(o.mask_prob)};
}

double CaseMetrics::mean_tre_pred() const { return mean_std(tre_pred).mean; }
double CaseMetrics::mean_tre_base() const { return mean_std(tre_base).mean; }

CaseMetrics evaluate_case(const Case& c, const Prediction& p) {
  CaseMetrics m;
  m.side = c.side;
  m.landmarks = select_eval_landmarks(c.side);
  m.tre_pred = tre(warp_landmarks(c.landmarks_pre, p.disp), c.landmarks_intra, m.landmarks);
  m.tre_base = tre(c.landmarks_pre, c.landmarks_intra, m.landmarks);
  m.dice_pred = dice(p.mask, c.gt_mask_intra);
  m.dice_base = dice(c.mask_pre, c.gt_mask_intra);
  return m;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd r;
  r.n = static_cast<int>(values.size());
  if (values.empty()) return r;
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / r.n;
  double sq = 0.0;
  for (double v : values) sq += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(sq / r.n);
  return r;
}

double EvalReport::tre_reduction() const {
  if (!(tre_base.mean > 0.0)) return 0.0;
  return 1.0 - tre_pred.mean / tre_base.mean;
}

EvalReport aggregate(std::vector<CaseMetrics> cases, const FoldPlan& plan) {
  std::sort(cases.begin(), cases.end(), [](const CaseMetrics& a, const CaseMetrics& b) {
    return a.fold != b.fold ? a.fold < b.fold : a.id < b.id;
  });
  EvalReport r;
  r.k = plan.k;
  r.seed = plan.seed;
  std::vector<double> dp, db, tp, tb;
  for (int f = 0; f < plan.k; ++f) {
    std::vector<double> fdp, fdb, ftp, ftb;
    for (const auto& c : cases) {
      if (c.fold != f) continue;
      fdp.push_back(c.dice_pred);
      fdb.push_back(c.dice_base);
      ftp.push_back(c.mean_tre_pred());
      ftb.push_back(c.mean_tre_base());
    }
    if (fdp.empty()) continue;
    FoldMetrics fm{f, static_cast<int>(plan.train_cases(f).size()), static_cast<int>(fdp.size()),
                   mean_std(fdp).mean, mean_std(fdb).mean, mean_std(ftp).mean, mean_std(ftb).mean};
    r.folds.push_back(fm);
    dp.push_back(fm.dice_pred);
    db.push_back(fm.dice_base);
    tp.push_back(fm.tre_pred);
    tb.push_back(fm.tre_base);
  }
  r.dice_pred = mean_std(dp);
  r.dice_base = mean_std(db);
  r.tre_pred = mean_std(tp);
  r.tre_base = mean_std(tb);

  for (Side side : {Side::Left, Side::Right}) {
    for (const auto& name : select_eval_landmarks(side)) {
      std::vector<double> fold_pred, fold_base;
      for (int f = 0; f < plan.k; ++f) {
        std::vector<double> p, b;
        for (const auto& c : cases) {
          if (c.fold != f || c.side != side) continue;
          for (std::size_t i = 0; i < c.landmarks.size(); ++i) {
            if (c.landmarks[i] == name) {
              p.push_back(c.tre_pred[i]);
              b.push_back(c.tre_base[i]);
            }
          }
        }
        if (p.empty()) continue;
        fold_pred.push_back(mean_std(p).mean);
        fold_base.push_back(mean_std(b).mean);
      }
      if (fold_pred.empty()) continue;
      r.landmarks.push_back({side, name, mean_std(fold_base), mean_std(fold_pred)});
    }
  }
  r.cases = std::move(cases);
  return r;
}

EvalReport run_crossval(const std::vector<Case>& cases, const std::vector<std::string>& ids, const FoldPlan& plan,
                        const PredictorFactory& factory, int threads) {
  if (plan.assignments.size() != cases.size()) {
    throw Error(ErrorCode::InvalidArgument, "plan", "fold plan does not match the number of cases");
  }
  for (int f = 0; f < plan.k; ++f) {
    if (plan.train_cases(f).empty()) {
      throw Error(ErrorCode::EmptyTrainFold, "fold " + std::to_string(f), "no training cases left for this fold");
    }
  }
  std::vector<std::vector<CaseMetrics>> per_fold(plan.k);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int f = next++; f < plan.k; f = next++) {
      try {
        std::vector<const Case*> train;
        for (int i : plan.train_cases(f)) train.push_back(&cases[i]);
        const Predictor predictor = factory(train, f);
        for (int i : plan.test_cases(f)) {
          CaseMetrics m = evaluate_case(cases[i], predictor(cases[i]));
          m.id = i < static_cast<int>(ids.size()) ? ids[i] : std::to_string(i);
          m.fold = f;
          per_fold[f].push_back(std::move(m));
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min(threads, plan.k));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<CaseMetrics> all;
  for (auto& v : per_fold) {
    for (auto& m : v) all.push_back(std::move(m));
  }
  return aggregate(std::move(all), plan);
}

EvalReport crossval(const std::vector<Case>& cases, const std::vector<std::string>& ids, const FoldPlan& plan,
                    const TrainConfig& config, const NetParams* warm_start, int threads) {
  PredictorFactory factory = [&](const std::vector<const Case*>& train_cases, int) -> Predictor {
    std::vector<Sample> samples;
    for (const Case* c : train_cases) samples.push_back(make_sample(*c, config.pipeline));
    auto params = std::make_shared<NetParams>(train(samples, config, warm_start).params);
    const PipelineConfig pipeline = config.pipeline;
    return [params, pipeline](const Case& c) { return predict(c, *params, pipeline); };
  };
  return run_crossval(cases, ids, plan, factory, threads);
}

void to_json(nlohmann::json& j, const MeanStd& m) { j = {{"mean", m.mean}, {"std", m.std}, {"n", m.n}}; }

nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json j;
  j["k"] = r.k;
  j["seed"] = r.seed;
  j["dice"] = {{"predicted", r.dice_pred}, {"preop", r.dice_base}, {"gain", r.dice_gain()}};
  j["tre_mm"] = {{"predicted", r.tre_pred}, {"preop", r.tre_base}, {"reduction", r.tre_reduction()}};
  j["landmarks"] = nlohmann::json::array();
  for (const auto& l : r.landmarks) {
    j["landmarks"].push_back({{"side", to_string(l.side)}, {"name", l.name}, {"preop", l.base}, {"predicted", l.pred}});
  }
  j["folds"] = nlohmann::json::array();
  for (const auto& f : r.folds) {
    j["folds"].push_back({{"fold", f.fold},
                          {"n_train", f.n_train},
                          {"n_test", f.n_test},
                          {"dice_predicted", f.dice_pred},
                          {"dice_preop", f.dice_base},
                          {"tre_predicted", f.tre_pred},
                          {"tre_preop", f.tre_base}});
  }
  j["cases"] = nlohmann::json::array();
  for (const auto& c : r.cases) {
    nlohmann::json t;
    for (std::size_t i = 0; i < c.landmarks.size(); ++i) {
      t[c.landmarks[i]] = {{"predicted", c.tre_pred[i]}, {"preop", c.tre_base[i]}};
    }
    j["cases"].push_back({{"id", c.id},
                          {"fold", c.fold},
                          {"side", to_string(c.side)},
                          {"dice_predicted", c.dice_pred},
                          {"dice_preop", c.dice_base},
                          {"tre_mm", t}});
  }
  return j;
}

namespace {

std::string pm(const MeanStd& m, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f ± %.*f", digits, m.mean, digits, m.std);
  return buf;
}

}  // namespace

std::string report_text(const EvalReport& r) {
  std::ostringstream out;
  char line[160];
  out << "Target registration error (mm), mean ± std across " << r.folds.size() << " folds\n";
  std::snprintf(line, sizeof line, "%-6s %-9s %-18s %-18s\n", "side", "landmark", "preop->intra", "predicted");
  out << line;
  for (const auto& l : r.landmarks) {
    std::snprintf(line, sizeof line, "%-6s %-9s %-18s %-18s\n", to_string(l.side).c_str(), l.name.c_str(),
                  pm(l.base, 2).c_str(), pm(l.pred, 2).c_str());
    out << line;
  }
  std::snprintf(line, sizeof line, "%-16s %-18s %-18s  (reduction %.1f%%)\n", "all", pm(r.tre_base, 2).c_str(),
                pm(r.tre_pred, 2).c_str(), 100.0 * r.tre_reduction());
  out << line << '\n';
  out << "Dice, intraoperative brain mask, mean ± std across folds\n";
  std::snprintf(line, sizeof line, "%-16s %s\n", "preop vs intra", pm(r.dice_base, 3).c_str());
  out << line;
  std::snprintf(line, sizeof line, "%-16s %s\n", "predicted", pm(r.dice_pred, 3).c_str());
  out << line;
  return out.str();
}

void write_case_csv(const EvalReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, path.string(), "cannot open for writing");
  out.precision(10);
  out << "id,fold,side,dice_pred,dice_preop,tre_pred_mean,tre_preop_mean";
  for (const char* s : {"P1", "P2", "P4", "P6", "P3", "P5"}) out << ",tre_pred_" << s << ",tre_preop_" << s;
  out << '\n';
  for (const auto& c : r.cases) {
    out << c.id << ',' << c.fold << ',' << to_string(c.side) << ',' << c.dice_pred << ',' << c.dice_base << ','
        << c.mean_tre_pred() << ',' << c.mean_tre_base();
    for (std::size_t i = 0; i < c.landmarks.size(); ++i) out << ',' << c.tre_pred[i] << ',' << c.tre_base[i];
    out << '\n';
  }
}

}  // namespace shiftnet
