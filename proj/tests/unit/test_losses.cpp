#include <doctest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"
#include "shiftnet/error.hpp"
#include "shiftnet/gradcheck.hpp"
#include "shiftnet/losses.hpp"

using namespace shiftnet;

namespace {

Volume filled_field(const Geometry& g, const Vec3& v) {
  Volume f(g, 3);
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < g.voxel_count(); ++i) f.data()[c * g.voxel_count() + i] = v[c];
  return f;
}

}  // namespace

TEST_CASE("displacement MSE") {
  std::mt19937_64 rng(1);
  const Geometry g = Geometry::make({4, 4, 4});
  const Volume gt = oracle::random_volume(g, 3, rng);
  CHECK(loss_disp_mse(gt, gt).value == 0.0);

  Volume pred = gt;
  const Volume off = filled_field(g, Vec3(1, 2, 2));
  for (std::size_t i = 0; i < pred.size(); ++i) pred.data()[i] += off.data()[i];
  CHECK(loss_disp_mse(pred, gt).value == doctest::Approx(9.0).epsilon(1e-12));

  SUBCASE("gradient matches central differences") {
    const Volume p = oracle::random_volume(g, 3, rng);
    const LossTerm t = loss_disp_mse(p, gt);
    const double h = 1e-5;
    for (std::size_t i = 0; i < p.size(); i += 7) {
      Volume a = p, b = p;
      a.data()[i] += h;
      b.data()[i] -= h;
      const double num = (loss_disp_mse(a, gt).value - loss_disp_mse(b, gt).value) / (2 * h);
      CHECK(relative_error(t.grad.data()[i], num) < 1e-6);
    }
  }
  SUBCASE("region restricts the average") {
    Volume region(g);
    region.at(0, 0, 0) = 1.0;
    CHECK(loss_disp_mse(pred, gt, &region).value == doctest::Approx(9.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(loss_disp_mse(gt, Volume(Geometry::make({4, 4, 5}), 3)), Error);
}

TEST_CASE("spherical terms") {
  const Geometry one = Geometry::make({1, 1, 1});

  SUBCASE("identical fields give zero") {
    std::mt19937_64 rng(2);
    Volume gt = oracle::random_volume(Geometry::make({3, 3, 3}), 3, rng, 0.5, 2.0);
    const SphericalTerms s = loss_disp_sph(gt, gt, 1e-3);
    CHECK(s.theta.value == 0.0);
    CHECK(s.phi.value == 0.0);
    CHECK(s.mag.value == 0.0);
  }
  SUBCASE("azimuth wraps around the branch cut") {
    CHECK(azimuth_term(0.1, 2 * std::numbers::pi - 0.1) == doctest::Approx(0.04).epsilon(1e-12));
    CHECK(azimuth_term(0.1, -0.1) == doctest::Approx(0.04).epsilon(1e-12));
    const Volume p = filled_field(one, Vec3(std::cos(3.0), std::sin(3.0), 0));
    const Volume q = filled_field(one, Vec3(std::cos(-3.0), std::sin(-3.0), 0));
    const double d = 2 * std::numbers::pi - 6.0;
    CHECK(loss_disp_sph(p, q, 1e-3).phi.value == doctest::Approx(d * d).epsilon(1e-9));
  }
  SUBCASE("magnitude only") {
    const Vec3 dir = Vec3(1, 2, -2).normalized();
    const SphericalTerms s = loss_disp_sph(filled_field(one, 2 * dir), filled_field(one, dir), 1e-3);
    CHECK(s.mag.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(s.theta.value) < 1e-24);
    CHECK(std::abs(s.phi.value) < 1e-24);
  }
  SUBCASE("short ground-truth vectors skip the angular terms") {
    const SphericalTerms s = loss_disp_sph(filled_field(one, Vec3(0, 1, 1)), filled_field(one, Vec3(1e-4, 0, 0)), 1e-3);
    CHECK(s.theta.value == 0.0);
    CHECK(s.phi.value == 0.0);
    CHECK(s.mag.value > 0.0);
  }
  SUBCASE("elevation and azimuth conventions") {
    CHECK(elevation(Vec3(0, 0, 2), 1e-3) == doctest::Approx(std::numbers::pi / 2));
    CHECK(azimuth(Vec3(-1, 0, 0)) == doctest::Approx(std::numbers::pi));
    CHECK(azimuth(Vec3(0, -1, 0)) == doctest::Approx(-std::numbers::pi / 2));
  }
}

TEST_CASE("dice loss") {
  const Geometry g = Geometry::make({4, 4, 4});
  std::mt19937_64 rng(3);
  Volume m = oracle::random_mask(g, rng);
  m.at(0, 0, 0) = 1.0;
  CHECK(loss_dice(m, m).value <= 1e-7);

  Volume a(g), b(g);
  a.at(0, 0, 0) = 1.0;
  b.at(1, 0, 0) = 1.0;
  CHECK(loss_dice(a, b).value == doctest::Approx(1.0).epsilon(1e-7));

  CHECK(loss_dice(Volume(g, 1, 0.5), Volume(g, 1, 1.0)).value == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("edge loss") {
  const Geometry g = Geometry::make({8, 8, 8});
  std::mt19937_64 rng(4);
  const Volume p = oracle::random_volume(g, 1, rng, 0, 1);
  CHECK(loss_edge(p, p, 1).value == 0.0);

  const Volume q = oracle::random_volume(g, 1, rng, 0, 1);
  double mad = 0;
  for (std::size_t i = 0; i < p.size(); ++i) mad += std::abs(p.data()[i] - q.data()[i]);
  CHECK(loss_edge(p, q, 0).value == doctest::Approx(mad / p.size()).epsilon(1e-12));

  Volume a(g), b(g);
  b.at(4, 3, 5) = 1.0;
  CHECK(loss_edge(b, a, 1).value == doctest::Approx(27.0 / 512.0).epsilon(1e-12));
}

TEST_CASE("sdf loss") {
  std::mt19937_64 rng(5);
  const Geometry g = Geometry::make({5, 5, 5});
  const Volume s = oracle::random_volume(g, 1, rng, -5, 5);
  CHECK(loss_sdf(s, s).value == 0.0);
  Volume t = s;
  for (double& x : t.data()) x += 1.5;
  CHECK(loss_sdf(t, s).value == doctest::Approx(2.25).epsilon(1e-12));
}

TEST_CASE("total loss") {
  std::mt19937_64 rng(6);
  const Geometry g = Geometry::make({4, 4, 4});
  const Volume pd = oracle::random_volume(g, 3, rng), gd = oracle::random_volume(g, 3, rng);
  const Volume pm = oracle::random_volume(g, 1, rng, 0, 1), gm = oracle::random_mask(g, rng);
  const Volume ps = oracle::random_volume(g, 1, rng), gs = oracle::random_volume(g, 1, rng);
  const FieldSet pred{&pd, &pm, &ps}, target{&gd, &gm, &gs};

  SUBCASE("zero weights") {
    LossWeights w;
    w.alpha = w.beta = w.gamma = 0;
    const TotalLoss t = total_loss(pred, target, w);
    CHECK(t.report.total == 0.0);
    for (const Volume* v : {&t.grad_disp, &t.grad_mask, &t.grad_sdf})
      for (double x : v->data()) CHECK(x == 0.0);
  }
  SUBCASE("weighted combination of the individual terms") {
    LossWeights w;
    w.alpha = 0.7;
    w.beta = 1.3;
    w.gamma = 0.2;
    const TotalLoss t = total_loss(pred, target, w);
    const SphericalTerms s = loss_disp_sph(pd, gd, w.angle_eps_mm);
    const double expect = 0.7 * (loss_disp_mse(pd, gd).value + s.theta.value + s.phi.value + s.mag.value) +
                          0.2 * loss_sdf(ps, gs).value + 1.3 * (loss_dice(pm, gm).value + loss_edge(pm, gm, 1).value);
    CHECK(t.report.total == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("weight validation") {
    LossWeights w;
    w.alpha = -1;
    w.angle_eps_mm = 0;
    CHECK(w.violations().size() == 2);
  }
}

TEST_CASE("finite-difference suite over five seeds") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const GradcheckResult& r : gradcheck_losses(seed)) {
      INFO(r.name << " seed " << seed << " err " << r.max_rel_err);
      CHECK(r.passed());
    }
  }
}
