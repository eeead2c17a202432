#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "shiftnet/error.hpp"
#include "shiftnet/pipeline.hpp"

using namespace shiftnet;

namespace {

Volume sphere_mask(const Geometry& g, const Vec3& c, double r) {
  Volume m(g);
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) m.at(i, j, k) = (Vec3(i, j, k) - c).norm() <= r ? 1.0 : 0.0;
  return m;
}

std::pair<double, double> in_mask_moments(const Volume& v, const Volume& m) {
  double s = 0, n = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (m.data()[i] > 0.5) {
      s += v.data()[i];
      ++n;
    }
  const double mean = s / n;
  double q = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (m.data()[i] > 0.5) q += (v.data()[i] - mean) * (v.data()[i] - mean);
  return {mean, std::sqrt(q / n)};
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("normalize_intensity") {
  const Geometry g = Geometry::make({6, 6, 6});
  const Volume all(g, 1, 1.0);

  SUBCASE("constant volume z-scores to zero") {
    const Volume v(g, 1, 3.5);
    const Volume n = normalize_intensity(v, all, NormMode::ZScoreInMask);
    for (double x : n.data()) CHECK(x == 0.0);
  }
  SUBCASE("minmax maps the in-mask endpoints to 0 and 1") {
    Volume v(g), m(g);
    v.at(1, 1, 1) = 0.0;
    v.at(2, 2, 2) = 10.0;
    m.at(1, 1, 1) = m.at(2, 2, 2) = 1.0;
    const Volume n = normalize_intensity(v, m, NormMode::MinMax);
    CHECK(n.at(1, 1, 1) == 0.0);
    CHECK(n.at(2, 2, 2) == 1.0);
  }
  SUBCASE("random volume z-scores to zero mean and unit std in the mask") {
    std::mt19937_64 rng(12);
    const Volume v = oracle::random_volume(g, 1, rng, 5, 50);
    const Volume m = oracle::random_mask(g, rng);
    const auto [mean, sd] = in_mask_moments(normalize_intensity(v, m, NormMode::ZScoreInMask), m);
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(sd - 1.0) < 1e-9);
  }
  SUBCASE("empty mask") {
    CHECK(code_of([&] { normalize_intensity(all, Volume(g), NormMode::ZScoreInMask); }) == ErrorCode::EmptyMask);
  }
}

TEST_CASE("correct_bias") {
  const Geometry g = Geometry::make({24, 24, 24});
  const Volume mask = sphere_mask(g, Vec3(11.5, 11.5, 11.5), 10.0);

  SUBCASE("constant volume is unchanged") {
    const Volume v(g, 1, 7.0);
    const Volume c = correct_bias(v, mask, 8.0);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(c.data()[i] - 7.0) < 1e-9);
  }
  SUBCASE("known smooth multiplicative field is mostly removed") {
    Volume v(g);
    for (int k = 0; k < 24; ++k)
      for (int j = 0; j < 24; ++j)
        for (int i = 0; i < 24; ++i)
          v.at(i, j, k) = 100.0 * (1.0 + 0.3 * (i - 11.5) / 11.5) * (1.0 - 0.2 * (k - 11.5) / 11.5);
    const auto [m0, s0] = in_mask_moments(v, mask);
    const auto [m1, s1] = in_mask_moments(correct_bias(v, mask, 3.0), mask);
    CHECK(s1 / m1 <= 0.5 * s0 / m0);
  }
  SUBCASE("tiny sigma preserves the mean and flattens the volume") {
    std::mt19937_64 rng(3);
    const Volume v = oracle::random_volume(g, 1, rng, 1, 2);
    const Volume c = correct_bias(v, mask, 0.2);
    const auto [m0, s0] = in_mask_moments(v, mask);
    const auto [m1, s1] = in_mask_moments(c, mask);
    CHECK(std::abs(m1 - m0) < 1e-6);
    CHECK(s1 / m1 < 1e-3);
  }
}

TEST_CASE("crop_to_mask") {
  std::mt19937_64 rng(1);
  const Geometry g = Geometry::make({20, 20, 20}, Vec3(1, 1.5, 2), Vec3(3, -4, 5));
  const Volume v = oracle::random_volume(g, 1, rng);

  SUBCASE("full mask with matching target is the identity") {
    const Volume c = crop_to_mask(v, Volume(g, 1, 1.0), 0, g.dims);
    CHECK(c.storage() == v.storage());
    CHECK((c.geometry().origin - g.origin).norm() < 1e-12);
  }
  SUBCASE("single voxel is centred and keeps its world position") {
    Volume m(g);
    m.at(10, 10, 10) = 1.0;
    const Volume c = crop_to_mask(v, m, 0, {8, 8, 8});
    CHECK(c.at(4, 4, 4) == v.at(10, 10, 10));
    CHECK((c.geometry().voxel_to_world(4, 4, 4) - g.voxel_to_world(10, 10, 10)).norm() < 1e-9);
  }
  SUBCASE("bounding box larger than the target") {
    Volume m(g);
    m.at(2, 2, 2) = m.at(15, 2, 2) = 1.0;
    CHECK(code_of([&] { crop_to_mask(v, m, 0, {8, 8, 8}); }) == ErrorCode::BboxExceedsTarget);
  }
  SUBCASE("window past the border is zero-filled") {
    Volume m(g);
    m.at(0, 0, 0) = 1.0;
    const Volume c = crop_to_mask(v, m, 0, {4, 4, 4});
    CHECK(c.at(0, 0, 0) == 0.0);
    CHECK(c.at(2, 2, 2) == v.at(0, 0, 0));
  }
}

TEST_CASE("pipeline config validation") {
  PipelineConfig c;
  CHECK(c.violations().empty());
  c.target_dims = {30, 32, 32};
  c.bias_sigma_mm = 0;
  CHECK(c.violations().size() == 2);
  nlohmann::json j = PipelineConfig{};
  CHECK(j.at("norm_mode") == "zscore_in_mask");
  CHECK_THROWS_AS(norm_mode_from_string("histogram"), Error);
}

TEST_CASE("standardize_pair aligns a rigidly moved copy onto the preop scan") {
  const Geometry pg = Geometry::make({24, 24, 24}, Vec3::Ones(), Vec3(-12, -12, -12));
  const Volume mask = sphere_mask(pg, Vec3(12, 12, 12), 8.0);
  Volume pmri(pg);
  for (int k = 0; k < 24; ++k)
    for (int j = 0; j < 24; ++j)
      for (int i = 0; i < 24; ++i)
        if (mask.at(i, j, k) > 0.5) pmri.at(i, j, k) = 50.0 + 10.0 * std::sin(0.4 * i) + j + 0.5 * k;

  std::mt19937_64 rng(21);
  RigidTransform move;
  move.rotation = oracle::random_rotation(rng);
  move.translation = Vec3(7, -3, 11);
  Geometry ig = pg;
  ig.direction = move.rotation * pg.direction;
  ig.origin = move.apply(pg.origin);
  Volume imri(ig);
  imri.storage() = pmri.storage();

  // frame deliberately oblique so grid points do not fall on exact half-voxel ties
  const LandmarkSet anatomy({{"AC", Vec3(0.3, 2.1, -0.2)}, {"PC", Vec3(-0.4, -23, 0.6)}, {"IH", Vec3(1.1, 0.2, 40)}});
  PipelineConfig cfg;
  cfg.target_dims = {20, 20, 20};
  const StandardizedPair sp = standardize_pair({pmri, mask, anatomy, imri, anatomy.transformed(move)}, cfg);

  CHECK(sp.pmri.dims() == Index3{20, 20, 20});
  double worst = 0;
  for (std::size_t i = 0; i < sp.pmri.size(); ++i) worst = std::max(worst, std::abs(sp.pmri.data()[i] - sp.imri.data()[i]));
  CHECK(worst < 1e-6);
  const Vec3 p(1, 2, 3);
  CHECK((sp.intra_to_standard.apply(move.apply(p)) - sp.pre_to_standard.apply(p)).norm() < 1e-9);
}
