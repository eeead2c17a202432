#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "scratch.hpp"
#include "shiftnet/error.hpp"
#include "shiftnet/geometry.hpp"

using namespace shiftnet;

namespace {

Mat3 rot_z90() {
  Mat3 r;
  r << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  return r;
}

LandmarkSet random_points(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-40, 40);
  std::vector<Landmark> v;
  for (int i = 0; i < n; ++i) v.push_back({"L" + std::to_string(i), Vec3(u(rng), u(rng), u(rng))});
  return LandmarkSet(v);
}

}  // namespace

TEST_CASE("acpc_frame on the canonical pose is the identity") {
  const RigidTransform t = acpc_frame(Vec3(0, 0, 0), Vec3(0, -25, 0), Vec3(0, 0, 40));
  CHECK((t.rotation - Mat3::Identity()).norm() < 1e-12);
  CHECK(t.translation.norm() < 1e-12);
}

TEST_CASE("acpc_frame undoes a known rotation") {
  const Mat3 r = rot_z90();
  const RigidTransform t = acpc_frame(r * Vec3(0, 0, 0), r * Vec3(0, -25, 0), r * Vec3(0, 0, 40));
  CHECK((t.rotation - r.transpose()).norm() < 1e-9);
  CHECK(t.translation.norm() < 1e-9);
}

TEST_CASE("acpc_frame post-conditions on random triples") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-60, 60);
  for (int n = 0; n < 1000; ++n) {
    const Vec3 ac(u(rng), u(rng), u(rng)), pc(u(rng), u(rng), u(rng)), ih(u(rng), u(rng), u(rng));
    const RigidTransform t = acpc_frame(ac, pc, ih);
    CHECK(t.is_valid());
    CHECK(t.apply(ac).norm() < 1e-9);
    const Vec3 p = t.apply(pc);
    CHECK(std::abs(p[0]) < 1e-9);
    CHECK(std::abs(p[2]) < 1e-9);
    CHECK(std::abs(p[1] + (ac - pc).norm()) < 1e-9);
    CHECK(t.apply(ih)[2] > 0.0);
    CHECK(std::abs(t.apply(ih)[0]) < 1e-9);
  }
}

TEST_CASE("acpc_frame rejects degenerate landmarks") {
  try {
    acpc_frame(Vec3(0, 0, 0), Vec3(0, -25, 0), Vec3(0, 10, 0));
    FAIL("expected collinear error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CollinearLandmarks);
  }
  CHECK_THROWS_AS(acpc_frame(Vec3(1, 2, 3), Vec3(1, 2, 3), Vec3(0, 0, 40)), Error);
}

TEST_CASE("fit_rigid recovers identity, translations and rotations") {
  std::mt19937_64 rng(4);
  const LandmarkSet src = random_points(rng, 5);

  SUBCASE("identity") {
    const RigidTransform t = fit_rigid(src, src);
    CHECK((t.rotation - Mat3::Identity()).norm() < 1e-9);
    CHECK(t.translation.norm() < 1e-9);
  }
  SUBCASE("translation") {
    RigidTransform shift;
    shift.translation = Vec3(5, -3, 2);
    const RigidTransform t = fit_rigid(src, src.transformed(shift));
    CHECK((t.rotation - Mat3::Identity()).norm() < 1e-9);
    CHECK((t.translation - Vec3(5, -3, 2)).norm() < 1e-9);
  }
  SUBCASE("random rigid maps") {
    for (int n = 0; n < 50; ++n) {
      RigidTransform truth;
      truth.rotation = oracle::random_rotation(rng);
      truth.translation = Vec3(n, -2.0 * n, 0.5);
      const LandmarkSet dst = src.transformed(truth);
      const RigidTransform t = fit_rigid(src, dst);
      CHECK((t.rotation - truth.rotation).norm() < 1e-9);
      CHECK(rigid_rmsd(t, src, dst) < 1e-9);
    }
  }
  SUBCASE("too few shared names") {
    const LandmarkSet two({{"a", Vec3(0, 0, 0)}, {"b", Vec3(1, 0, 0)}});
    try {
      fit_rigid(two, two);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InsufficientCorrespondences);
    }
  }
}

TEST_CASE("rigid transform algebra") {
  std::mt19937_64 rng(8);
  RigidTransform a, b;
  a.rotation = oracle::random_rotation(rng);
  a.translation = Vec3(1, 2, 3);
  b.rotation = oracle::random_rotation(rng);
  b.translation = Vec3(-4, 0, 2);
  const Vec3 p(3, -1, 7);
  CHECK((a.inverse().apply(a.apply(p)) - p).norm() < 1e-12);
  CHECK((a.compose(b).apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
}

TEST_CASE("resample") {
  std::mt19937_64 rng(6);
  const Geometry g = Geometry::make({6, 5, 4});
  const Volume v = oracle::random_volume(g, 1, rng);

  SUBCASE("identity transform on the source grid") {
    const Volume r = resample(v, RigidTransform::identity(), g);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(r.data()[i] - v.data()[i]) < 1e-9);
  }
  SUBCASE("one-voxel translation shifts the index with border clamping") {
    RigidTransform t;
    t.translation = Vec3(1, 0, 0);
    const Volume r = resample(v, t, g);
    for (int k = 0; k < 4; ++k)
      for (int j = 0; j < 5; ++j) {
        CHECK(std::abs(r.at(0, j, k) - v.at(0, j, k)) < 1e-9);
        for (int i = 1; i < 6; ++i) CHECK(std::abs(r.at(i, j, k) - v.at(i - 1, j, k)) < 1e-9);
      }
  }
}

TEST_CASE("landmark sets") {
  LandmarkSet s({{"AC", Vec3(0, 0, 0)}, {"PC", Vec3(0, -25, 0)}});
  CHECK(s.contains("AC"));
  CHECK_FALSE(s.contains("IH"));
  try {
    s.at("IH");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingLandmark);
    CHECK(e.field() == "IH");
  }
  s.set("AC", Vec3(1, 1, 1));
  CHECK(s.size() == 2);
  CHECK(s.at("AC") == Vec3(1, 1, 1));

  const auto dir = scratch_dir("landmarks");
  s.set("P1R", Vec3(0.1, 0.2, 0.3));
  write_landmarks(s, dir / "l.json");
  const LandmarkSet r = read_landmarks(dir / "l.json");
  CHECK(r.size() == 3);
  for (const auto& e : s.entries()) CHECK(r.at(e.name) == e.position);
}
