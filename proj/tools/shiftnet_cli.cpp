#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "shiftnet/checkpoint.hpp"
#include "shiftnet/cohort.hpp"
#include "shiftnet/error.hpp"
#include "shiftnet/eval.hpp"
#include "shiftnet/ffd.hpp"
#include "shiftnet/gradcheck.hpp"
#include "shiftnet/nifti.hpp"
#include "shiftnet/shape.hpp"
#include "shiftnet/synth.hpp"
#include "shiftnet/train.hpp"

namespace fs = std::filesystem;
using namespace shiftnet;
using nlohmann::json;

namespace {

// Everything a run can be configured with. The file layout is
//   { "train": {...TrainConfig...}, "phantom": {...}, "folds": K, "fold_seed": S }
struct RunConfig {
  TrainConfig train;
  PhantomParams phantom;
  int folds = 9;
  std::uint64_t fold_seed = 0;
  int threads = 1;
  // Problems found while reading the file, reported together with the value checks.
  std::vector<std::string> load_problems;

  json to_json() const {
    return {{"train", train}, {"phantom", phantom}, {"folds", folds}, {"fold_seed", fold_seed}, {"threads", threads}};
  }
};

void validate(const RunConfig& c) {
  std::vector<std::string> v = c.load_problems;
  for (auto& s : c.train.violations()) v.push_back(s);
  for (auto& s : c.phantom.violations()) v.push_back(s);
  if (c.folds < 2) v.push_back("folds must be >= 2");
  if (c.threads < 1) v.push_back("threads must be >= 1");
  if (v.empty()) return;
  std::string msg = std::to_string(v.size()) + " invalid setting(s): ";
  for (std::size_t i = 0; i < v.size(); ++i) msg += (i ? "; " : "") + v[i];
  throw Error(ErrorCode::Config, msg);
}

RunConfig load_config(const std::string& path) {
  RunConfig c;
  if (path.empty()) return c;
  json j;
  try {
    j = read_json(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.what());
  }
  static const std::set<std::string> known = {"train", "phantom", "folds", "fold_seed", "threads"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key())) c.load_problems.push_back("unknown config key " + it.key());
  }
  try {
    if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
    if (j.contains("phantom")) c.phantom = j.at("phantom").get<PhantomParams>();
    c.folds = j.value("folds", c.folds);
    c.fold_seed = j.value("fold_seed", c.fold_seed);
    c.threads = j.value("threads", c.threads);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, path, e.what());
  }
  return c;
}

Index3 parse_dims(const std::vector<int>& d) {
  if (d.size() == 1) return {d[0], d[0], d[0]};
  if (d.size() == 3) return {d[0], d[1], d[2]};
  throw Error(ErrorCode::InvalidArgument, "dims", "expected one or three values");
}

fs::path sidecar(const fs::path& out, const std::string& suffix) { return fs::path(out.string() + suffix); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Brain-shift displacement, mask and SDF prediction on synthetic pre/intraoperative pairs"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<int> threads;
  app.add_option("--threads", threads, "Maximum worker threads")->check(CLI::PositiveNumber);

  // phantom
  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic cohort");
  std::uint64_t ph_seed = 1;
  int ph_n = 1;
  std::vector<int> ph_dims{32};
  std::string ph_out;
  phantom->add_option("--seed", ph_seed, "Cohort seed");
  phantom->add_option("--n", ph_n, "Number of cases")->check(CLI::PositiveNumber);
  phantom->add_option("--dims", ph_dims, "Grid dims (one value or three)")->expected(1, 3);
  phantom->add_option("--out", ph_out, "Output directory")->required();
  phantom->add_option("--config", config_path, "Run config JSON");

  // supervise
  auto* supervise = app.add_subcommand("supervise", "Densify an FFD control grid into training targets");
  std::string sv_cpp, sv_geom, sv_mask, sv_out;
  double sv_cap = kDefaultSdfCapMm;
  supervise->add_option("--cpp", sv_cpp, "Control-point NIfTI")->required();
  supervise->add_option("--geom", sv_geom, "NIfTI whose grid the field is sampled on")->required();
  supervise->add_option("--mask", sv_mask, "Preoperative mask; enables mask and SDF targets");
  supervise->add_option("--sdf-cap", sv_cap, "SDF clamp (mm)");
  supervise->add_option("--out", sv_out, "Output directory")->required();

  // train
  auto* trainc = app.add_subcommand("train", "Train on a cohort");
  std::string tr_cohort, tr_out;
  std::optional<int> tr_epochs;
  std::optional<double> tr_lr;
  std::optional<std::uint64_t> tr_seed;
  trainc->add_option("--cohort", tr_cohort, "Cohort directory")->required();
  trainc->add_option("--config", config_path, "Run config JSON");
  trainc->add_option("--out", tr_out, "Checkpoint path")->required();
  trainc->add_option("--epochs", tr_epochs, "Override epochs");
  trainc->add_option("--lr", tr_lr, "Override learning rate");
  trainc->add_option("--seed", tr_seed, "Override seed");

  // predict
  auto* predictc = app.add_subcommand("predict", "Predict displacement, mask and SDF for one case");
  std::string pr_ckpt, pr_case, pr_out;
  predictc->add_option("--ckpt", pr_ckpt, "Checkpoint")->required();
  predictc->add_option("--case", pr_case, "Case directory")->required();
  predictc->add_option("--out", pr_out, "Output directory")->required();
  predictc->add_option("--config", config_path, "Run config JSON (pipeline settings)");

  // warp
  auto* warpc = app.add_subcommand("warp", "Pull-warp a volume by a displacement field");
  std::string wp_vol, wp_field, wp_out;
  bool wp_mask = false;
  warpc->add_option("--vol", wp_vol, "Input volume")->required();
  warpc->add_option("--field", wp_field, "3-channel displacement NIfTI")->required();
  warpc->add_option("--out", wp_out, "Output NIfTI")->required();
  warpc->add_flag("--mask", wp_mask, "Threshold at 0.5 and write uint8");

  // sdf
  auto* sdfc = app.add_subcommand("sdf", "Signed distance of a binary mask");
  std::string sd_mask, sd_out;
  double sd_cap = kDefaultSdfCapMm;
  sdfc->add_option("--mask", sd_mask, "Binary mask NIfTI")->required();
  sdfc->add_option("--out", sd_out, "Output NIfTI")->required();
  sdfc->add_option("--cap", sd_cap, "Clamp (mm)");

  // eval
  auto* evalc = app.add_subcommand("eval", "k-fold cross-validation report");
  std::string ev_cohort, ev_ckpt, ev_out;
  std::optional<int> ev_folds, ev_epochs;
  std::optional<std::uint64_t> ev_seed;
  bool ev_oracle = false;
  evalc->add_option("--cohort", ev_cohort, "Cohort directory")->required();
  evalc->add_option("--ckpt", ev_ckpt, "Warm-start checkpoint for every fold");
  evalc->add_option("--folds", ev_folds, "Number of folds");
  evalc->add_option("--out", ev_out, "Report JSON path")->required();
  evalc->add_option("--config", config_path, "Run config JSON");
  evalc->add_option("--epochs", ev_epochs, "Override epochs");
  evalc->add_option("--fold-seed", ev_seed, "Override fold assignment seed");
  evalc->add_flag("--oracle", ev_oracle, "Inject ground-truth fields instead of training");

  // gradcheck
  auto* gradc = app.add_subcommand("gradcheck", "Finite-difference checks of losses and network");
  std::uint64_t gc_seed = 1;
  int gc_seeds = 5;
  gradc->add_option("--seed", gc_seed, "First seed");
  gradc->add_option("--seeds", gc_seeds, "Number of seeds")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[INVALID_ARGUMENT]: " << e.what() << '\n';
    return 1;
  }

  try {
    RunConfig cfg = load_config(config_path);
    if (threads) cfg.threads = *threads;

    if (*phantom) {
      validate(cfg);
      CohortSpec spec;
      spec.seed = ph_seed;
      spec.n_cases = ph_n;
      spec.dims = parse_dims(ph_dims);
      spec.phantom = cfg.phantom;
      const auto cases = generate_cohort(spec, cfg.threads);
      write_cohort(cases, spec, ph_out);
      json echo = cfg.to_json();
      echo["seed"] = ph_seed;
      echo["n"] = ph_n;
      echo["dims"] = spec.dims;
      write_json(echo, fs::path(ph_out) / "run_config.json");
      std::cout << "wrote " << cases.size() << " cases to " << ph_out << '\n';
    } else if (*supervise) {
      const FfdGrid grid = read_cpp(sv_cpp);
      const Volume ref = nifti::read(sv_geom);
      fs::create_directories(sv_out);
      Volume disp = grid.densify(ref.geometry());
      nifti::write(disp, fs::path(sv_out) / "disp.nii");
      json echo = {{"cpp", sv_cpp}, {"geom", sv_geom}, {"mask", sv_mask}, {"sdf_cap_mm", sv_cap}};
      if (!sv_mask.empty()) {
        const Volume mask = nifti::read(sv_mask);
        const Volume intra = warp_mask(mask, disp);
        nifti::write(intra, fs::path(sv_out) / "mask.nii", nifti::DataType::UInt8);
        nifti::write(signed_distance(intra, sv_cap), fs::path(sv_out) / "sdf.nii");
      }
      write_json(echo, fs::path(sv_out) / "run_config.json");
    } else if (*trainc) {
      if (tr_epochs) cfg.train.epochs = *tr_epochs;
      if (tr_lr) cfg.train.adam.lr = *tr_lr;
      if (tr_seed) cfg.train.seed = *tr_seed;
      validate(cfg);
      const Cohort cohort = read_cohort(tr_cohort);
      std::vector<Sample> samples;
      for (const auto& c : cohort.cases) samples.push_back(make_sample(c, cfg.train.pipeline));
      const TrainResult res = train(samples, cfg.train, nullptr, [](const StepLog& s) {
        std::fprintf(stderr, "step %d epoch %d total %.6f\n", s.step, s.epoch, s.report.total);
      });
      write_checkpoint(res.params, tr_out);
      write_loss_csv(res.log, sidecar(tr_out, ".loss.csv"));
      json echo = cfg.to_json();
      echo["cohort"] = tr_cohort;
      write_json(echo, sidecar(tr_out, ".config.json"));
      if (!res.log.empty()) {
        std::cout << "final total loss " << res.log.back().report.total << " after " << res.log.size() << " steps\n";
      }
    } else if (*predictc) {
      validate(cfg);
      const NetParams params = read_checkpoint(pr_ckpt);
      const Case c = read_case_inputs(pr_case);
      const NetOutput o = predict_raw(c, params, cfg.train.pipeline);
      fs::create_directories(pr_out);
      const fs::path out(pr_out);
      nifti::write(o.disp, out / "disp.nii");
      nifti::write(o.mask_prob, out / "mask_prob.nii");
      Volume mask = o.mask_prob;
      for (double& v : mask.data()) v = v >= 0.5 ? 1.0 : 0.0;
      nifti::write(mask, out / "mask.nii", nifti::DataType::UInt8);
      nifti::write(o.sdf, out / "sdf.nii");
      if (c.landmarks_pre.size() > 0) write_landmarks(warp_landmarks(c.landmarks_pre, o.disp), out / "landmarks_pred.json");
      json echo = cfg.to_json();
      echo["ckpt"] = pr_ckpt;
      echo["case"] = pr_case;
      write_json(echo, out / "run_config.json");
    } else if (*warpc) {
      const Volume vol = nifti::read(wp_vol);
      const Volume field = nifti::read(wp_field);
      if (wp_mask) {
        nifti::write(warp_mask(vol, field), wp_out, nifti::DataType::UInt8);
      } else {
        nifti::write(warp_volume(vol, field), wp_out);
      }
    } else if (*sdfc) {
      if (!(sd_cap > 0.0)) throw Error(ErrorCode::InvalidArgument, "cap", "cap must be > 0");
      nifti::write(signed_distance(nifti::read(sd_mask), sd_cap), sd_out);
    } else if (*evalc) {
      if (ev_folds) cfg.folds = *ev_folds;
      if (ev_epochs) cfg.train.epochs = *ev_epochs;
      if (ev_seed) cfg.fold_seed = *ev_seed;
      validate(cfg);
      const Cohort cohort = read_cohort(ev_cohort);
      const FoldPlan plan = make_fold_plan(static_cast<int>(cohort.cases.size()), cfg.folds, cfg.fold_seed);
      EvalReport report;
      if (ev_oracle) {
        report = run_crossval(cohort.cases, cohort.ids, plan,
                              [](const std::vector<const Case*>&, int) { return oracle_predictor(); }, cfg.threads);
      } else {
        std::optional<NetParams> warm;
        if (!ev_ckpt.empty()) warm = read_checkpoint(ev_ckpt);
        report = crossval(cohort.cases, cohort.ids, plan, cfg.train, warm ? &*warm : nullptr, cfg.threads);
      }
      json j = report_json(report);
      json echo = cfg.to_json();
      echo["cohort"] = ev_cohort;
      echo["ckpt"] = ev_ckpt;
      echo["oracle"] = ev_oracle;
      j["config"] = echo;
      const fs::path out(ev_out);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      write_json(j, out);
      const std::string text = report_text(report);
      std::ofstream(sidecar(out, ".txt")) << text;
      write_case_csv(report, sidecar(out, ".csv"));
      std::cout << text;
    } else if (*gradc) {
      bool ok = true;
      for (int s = 0; s < gc_seeds; ++s) {
        const std::uint64_t seed = gc_seed + static_cast<std::uint64_t>(s);
        std::vector<GradcheckResult> results = gradcheck_losses(seed);
        results.push_back(gradcheck_network(seed));
        for (const auto& r : results) {
          std::printf("seed %llu %-12s checked %4d skipped %3d max_rel_err %.3e tol %.0e %s\n",
                      static_cast<unsigned long long>(seed), r.name.c_str(), r.checked, r.skipped, r.max_rel_err,
                      r.tolerance, r.passed() ? "ok" : "FAIL");
          ok = ok && r.passed();
        }
      }
      if (!ok) throw Error(ErrorCode::Gradcheck, "gradient check failed");
    }
  } catch (const Error& e) {
    std::cerr << "error[" << code_name(e.code()) << "]: " << e.what() << '\n';
    return is_validation_error(e.code()) ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error[INTERNAL]: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
