#include <doctest.h>

#include <algorithm>
#include <set>

#include "scratch.hpp"
#include "shiftnet/error.hpp"
#include "shiftnet/eval.hpp"

using namespace shiftnet;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

struct Cohort4 {
  std::vector<Case> cases;
  std::vector<std::string> ids;
};

const Cohort4& cohort() {
  static const Cohort4 c = [] {
    Cohort4 out;
    for (int i = 0; i < 4; ++i) {
      out.cases.push_back(gen_phantom(100 + i, {32, 32, 32}, i % 2 ? Side::Left : Side::Right));
      out.ids.push_back("c" + std::to_string(i));
    }
    return out;
  }();
  return c;
}

Predictor zero_predictor() {
  return [](const Case& c) { return Prediction{c.gt_disp.zeros_like(), c.mask_pre}; };
}

}  // namespace

TEST_CASE("target registration error") {
  const LandmarkSet gt({{"P1L", Vec3(1, 2, 3)}, {"P3", Vec3(0, 0, 0)}});
  LandmarkSet pred = gt;
  for (double d : tre(pred, gt, {"P1L", "P3"})) CHECK(d == 0.0);
  pred.set("P1L", Vec3(4, 6, 3));
  CHECK(tre(pred, gt, {"P1L"})[0] == 5.0);
  try {
    tre(pred, gt, {"P5"});
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingLandmark);
    CHECK(e.field() == "P5");
  }
}

TEST_CASE("evaluation landmarks per side") {
  const auto l = select_eval_landmarks(Side::Left), r = select_eval_landmarks(Side::Right);
  CHECK(std::set<std::string>(l.begin(), l.end()) == std::set<std::string>{"P1L", "P2L", "P4L", "P6L", "P3", "P5"});
  CHECK(std::set<std::string>(r.begin(), r.end()) == std::set<std::string>{"P1R", "P2R", "P4R", "P6R", "P3", "P5"});
  CHECK(l.size() == 6);
  CHECK(r.size() == 6);
  std::set<std::string> ls(l.begin(), l.end()), both;
  for (const auto& n : r)
    if (ls.contains(n)) both.insert(n);
  CHECK(both.size() == 2);
}

TEST_CASE("dice coefficient") {
  const Geometry g = Geometry::make({10, 10, 10});
  Volume a(g), b(g);
  CHECK(dice(a, b) == 1.0);
  for (int i = 0; i < 100; ++i) a.data()[i] = 1.0;
  for (int i = 50; i < 150; ++i) b.data()[i] = 1.0;
  CHECK(dice(a, b) == 0.5);
  CHECK(dice(b, a) == 0.5);
  CHECK(dice(a, a) == 1.0);
  Volume c(g);
  for (int i = 200; i < 300; ++i) c.data()[i] = 1.0;
  CHECK(dice(a, c) == 0.0);
}

TEST_CASE("fold plans") {
  SUBCASE("partition with balanced sizes") {
    const FoldPlan p = make_fold_plan(27, 9, 3);
    CHECK(p.assignments.size() == 27);
    std::vector<int> seen(27, 0);
    int lo = 100, hi = 0;
    for (int f = 0; f < 9; ++f) {
      const auto t = p.test_cases(f);
      lo = std::min<int>(lo, t.size());
      hi = std::max<int>(hi, t.size());
      for (int i : t) ++seen[i];
      CHECK(p.train_cases(f).size() + t.size() == 27);
    }
    CHECK(hi - lo <= 1);
    for (int s : seen) CHECK(s == 1);
    CHECK(make_fold_plan(27, 9, 3).assignments == p.assignments);
    CHECK(make_fold_plan(27, 9, 4).assignments != p.assignments);
  }
  SUBCASE("uneven split") {
    const FoldPlan p = make_fold_plan(10, 3, 1);
    std::vector<std::size_t> sizes;
    for (int f = 0; f < 3; ++f) sizes.push_back(p.test_cases(f).size());
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<std::size_t>{3, 3, 4});
  }
  SUBCASE("invalid k") {
    CHECK(code_of([] { make_fold_plan(5, 1, 0); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { make_fold_plan(5, 6, 0); }) == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("mean and population std") {
  const MeanStd m = mean_std({1, 2, 3, 4});
  CHECK(m.mean == 2.5);
  CHECK(m.std == doctest::Approx(std::sqrt(1.25)));
  CHECK(m.n == 4);
}

TEST_CASE("leave-one-out evaluates every case once") {
  const auto& co = cohort();
  const FoldPlan plan = make_fold_plan(4, 4, 2);
  std::vector<int> train_sizes;
  const EvalReport r = run_crossval(co.cases, co.ids, plan, [&](const std::vector<const Case*>& train, int) {
    train_sizes.push_back(static_cast<int>(train.size()));
    return zero_predictor();
  });
  CHECK(r.cases.size() == 4);
  std::set<std::string> ids;
  for (const auto& c : r.cases) ids.insert(c.id);
  CHECK(ids.size() == 4);
  for (int s : train_sizes) CHECK(s == 3);
}

TEST_CASE("zero field baseline equals the ground-truth landmark motion") {
  const auto& co = cohort();
  const EvalReport r = run_crossval(co.cases, co.ids, make_fold_plan(4, 2, 1),
                                    [](const std::vector<const Case*>&, int) { return zero_predictor(); });
  for (const auto& m : r.cases) {
    const Case& c = co.cases[std::find(co.ids.begin(), co.ids.end(), m.id) - co.ids.begin()];
    for (std::size_t i = 0; i < m.landmarks.size(); ++i) {
      const double motion = (c.landmarks_intra.at(m.landmarks[i]) - c.landmarks_pre.at(m.landmarks[i])).norm();
      CHECK(m.tre_base[i] == motion);
      CHECK(m.tre_pred[i] == motion);
    }
    CHECK(m.dice_pred == m.dice_base);
  }
  CHECK(std::abs(r.tre_reduction()) < 1e-12);
  for (const auto& row : r.landmarks) CHECK(row.base.mean >= 0.0);
}

TEST_CASE("oracle injection") {
  const auto& co = cohort();
  const EvalReport r = run_crossval(co.cases, co.ids, make_fold_plan(4, 2, 1),
                                    [](const std::vector<const Case*>&, int) { return oracle_predictor(); });
  for (const auto& m : r.cases) {
    for (double t : m.tre_pred) CHECK(t < 1e-9);
    CHECK(m.dice_pred >= 0.99);
    CHECK(m.dice_pred > m.dice_base);
  }
}

TEST_CASE("aggregation ignores case order") {
  const auto& co = cohort();
  const FoldPlan plan = make_fold_plan(4, 2, 5);
  std::vector<CaseMetrics> ms;
  for (std::size_t i = 0; i < co.cases.size(); ++i) {
    CaseMetrics m = evaluate_case(co.cases[i], oracle_predictor()(co.cases[i]));
    m.id = co.ids[i];
    m.fold = plan.assignments[i];
    ms.push_back(m);
  }
  const EvalReport a = aggregate(ms, plan);
  std::reverse(ms.begin(), ms.end());
  const EvalReport b = aggregate(ms, plan);
  CHECK(a.dice_pred.mean == b.dice_pred.mean);
  CHECK(a.tre_base.mean == b.tre_base.mean);
  CHECK(a.tre_base.std == b.tre_base.std);
  CHECK(report_json(a).dump() == report_json(b).dump());
}

TEST_CASE("fold without training cases") {
  const auto& co = cohort();
  FoldPlan plan;
  plan.k = 2;
  plan.assignments = {0, 0, 0, 0};
  CHECK(code_of([&] {
          run_crossval(co.cases, co.ids, plan, [](const std::vector<const Case*>&, int) { return zero_predictor(); });
        }) == ErrorCode::EmptyTrainFold);
}

TEST_CASE("report outputs") {
  const auto& co = cohort();
  const EvalReport r = run_crossval(co.cases, co.ids, make_fold_plan(4, 2, 1),
                                    [](const std::vector<const Case*>&, int) { return oracle_predictor(); });
  const nlohmann::json j = report_json(r);
  CHECK(j.at("k") == 2);
  CHECK(j.contains("landmarks"));
  const std::string text = report_text(r);
  CHECK(text.find("P1L") != std::string::npos);
  CHECK(text.find("P1R") != std::string::npos);
  const auto dir = scratch_dir("eval_csv");
  write_case_csv(r, dir / "cases.csv");
  const std::string csv = read_bytes(dir / "cases.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("network prediction shapes") {
  const Case& c = cohort().cases[0];
  const Prediction p = predict(c, NetParams::init(1), PipelineConfig{});
  CHECK(p.disp.channels() == 3);
  CHECK(p.disp.dims() == c.gt_disp.dims());
  for (double x : p.mask.data()) CHECK((x == 0.0 || x == 1.0));
}
