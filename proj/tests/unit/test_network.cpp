#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "scratch.hpp"
#include "shiftnet/checkpoint.hpp"
#include "shiftnet/error.hpp"
#include "shiftnet/gradcheck.hpp"
#include "shiftnet/network.hpp"

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

struct Inputs {
  Volume image, half;
};

Inputs inputs(Index3 dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Geometry g = Geometry::make(dims);
  Inputs in{oracle::random_volume(g, 1, rng), Volume(g)};
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = dims[0] / 2; i < dims[0]; ++i) in.half.at(i, j, k) = 1.0;
  return in;
}

}  // namespace

TEST_CASE("architecture and parameter layout") {
  const auto& arch = architecture();
  REQUIRE(arch.size() == 9);
  CHECK(arch[0].name == "enc1a");
  CHECK(arch[0].cin == 2);
  CHECK(arch[4].cin == 24);
  CHECK(arch[6].cout == 3);

  const NetParams p = NetParams::init(1);
  CHECK(p.tensors().size() == 18);
  CHECK(p.tensor("enc1a.w").shape == std::vector<int>{8, 2, 3, 3, 3});
  CHECK(p.tensor("head_disp.w").shape == std::vector<int>{3, 8});
  std::size_t expect = 0;
  for (const auto& l : arch) expect += (l.kind == LayerKind::Conv3 ? 27 : 1) * l.cin * l.cout + l.cout;
  CHECK(p.scalar_count() == expect);
  CHECK(code_of([&] { p.tensor("nope.w"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("He initialisation") {
  const NetParams a = NetParams::init(42), b = NetParams::init(42), c = NetParams::init(43);
  for (std::size_t t = 0; t < a.tensors().size(); ++t) CHECK(a.tensors()[t].values == b.tensors()[t].values);
  CHECK(a.tensors()[0].values != c.tensors()[0].values);
  const auto& w = a.tensor("dec_a.w").values;
  double s = 0, q = 0;
  for (double x : w) {
    s += x;
    q += x * x;
  }
  const double sd = std::sqrt(q / w.size() - (s / w.size()) * (s / w.size()));
  CHECK(sd == doctest::Approx(std::sqrt(2.0 / (24 * 27))).epsilon(0.1));
  for (double x : a.tensor("dec_a.b").values) CHECK(x == 0.0);
}

TEST_CASE("zero network outputs") {
  const Inputs in = inputs({8, 8, 8}, 1);
  const NetOutput out = forward(in.image, in.half, NetParams::zeros());
  for (double x : out.disp.data()) CHECK(x == 0.0);
  for (double x : out.sdf.data()) CHECK(x == 0.0);
  for (double x : out.mask_prob.data()) CHECK(x == 0.5);
}

TEST_CASE("output shapes follow the input") {
  const NetParams p = NetParams::init(3);
  for (Index3 d : {Index3{8, 8, 8}, Index3{16, 8, 12}, Index3{32, 32, 32}}) {
    const Inputs in = inputs(d, 2);
    const NetOutput out = forward(in.image, in.half, p);
    CHECK(out.disp.dims() == d);
    CHECK(out.disp.channels() == 3);
    CHECK(out.mask_prob.dims() == d);
    CHECK(out.sdf.dims() == d);
    for (double x : out.mask_prob.data()) CHECK((x > 0.0 && x < 1.0));
  }
}

TEST_CASE("forward input validation") {
  const NetParams p = NetParams::init(3);
  const Inputs odd = inputs({8, 8, 6}, 1);
  CHECK(code_of([&] { forward(odd.image, odd.half, p); }) == ErrorCode::DimsNotDivisible);
  const Inputs a = inputs({8, 8, 8}, 1), b = inputs({8, 8, 12}, 1);
  CHECK(code_of([&] { forward(a.image, b.half, p); }) == ErrorCode::GeometryMismatch);
}

TEST_CASE("backward") {
  NetParams p = NetParams::init(5);
  const Inputs in = inputs({8, 8, 8}, 4);
  ForwardCache cache;
  const NetOutput out = forward(in.image, in.half, p, &cache);

  SUBCASE("zero output gradient gives zero parameter gradient") {
    const ParamGrads g = backward(cache, p, out.disp.zeros_like(), out.mask_prob.zeros_like(), out.sdf.zeros_like());
    for (const auto& t : g)
      for (double x : t) CHECK(x == 0.0);
  }
  SUBCASE("parameters changed after forward") {
    p.set(0, p.get(0) + 1.0);
    CHECK(code_of([&] {
            backward(cache, p, out.disp.zeros_like(), out.mask_prob.zeros_like(), out.sdf.zeros_like());
          }) == ErrorCode::StaleActivations);
  }
}

TEST_CASE("whole-network finite differences over five seeds") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const GradcheckResult r = gradcheck_network(seed);
    INFO("seed " << seed << " err " << r.max_rel_err << " checked " << r.checked);
    CHECK(r.checked >= 50);
    CHECK(r.max_rel_err < 1e-3);
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    NetParams p = NetParams::init(1);
    const NetParams before = p;
    AdamState s = make_adam(p);
    for (int i = 0; i < 3; ++i) adam_step(p, zero_grads(p), s);
    for (std::size_t t = 0; t < p.tensors().size(); ++t) CHECK(p.tensors()[t].values == before.tensors()[t].values);
  }
  SUBCASE("matches a scalar reference trace") {
    NetParams p = NetParams::init(1);
    AdamConfig cfg;
    cfg.lr = 0.01;
    AdamState s = make_adam(p, cfg);
    const std::size_t flat = 123;
    double x = p.get(flat), m = 0, v = 0;
    const double gs[] = {0.5, -1.5, 2.0, 0.1};
    for (int t = 1; t <= 4; ++t) {
      ParamGrads g = zero_grads(p);
      std::size_t off = flat;
      std::size_t ti = 0;
      while (off >= g[ti].size()) off -= g[ti++].size();
      g[ti][off] = gs[t - 1];
      adam_step(p, g, s);

      m = 0.9 * m + 0.1 * gs[t - 1];
      v = 0.999 * v + 0.001 * gs[t - 1] * gs[t - 1];
      const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
      x -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
      CHECK(std::abs(p.get(flat) - x) < 1e-12);
    }
  }
  SUBCASE("clipping bounds the global norm") {
    NetParams p = NetParams::zeros();
    AdamConfig cfg;
    cfg.clip_norm = 1.0;
    AdamState s = make_adam(p, cfg);
    ParamGrads g = zero_grads(p);
    g[0][0] = 300.0;
    g[1][0] = 400.0;
    CHECK(grad_norm(g) == doctest::Approx(500.0));
    adam_step(p, g, s);
    CHECK(std::abs(p.get(0) + cfg.lr) < 1e-9);
  }
  SUBCASE("identical runs give identical trajectories") {
    auto run = [] {
      NetParams p = NetParams::init(9);
      AdamState s = make_adam(p);
      const Inputs in = inputs({8, 8, 8}, 9);
      for (int i = 0; i < 3; ++i) {
        ForwardCache c;
        const NetOutput o = forward(in.image, in.half, p, &c);
        adam_step(p, backward(c, p, o.disp, o.mask_prob, o.sdf), s);
      }
      return p;
    };
    const NetParams a = run(), b = run();
    for (std::size_t t = 0; t < a.tensors().size(); ++t) CHECK(a.tensors()[t].values == b.tensors()[t].values);
  }
}

TEST_CASE("checkpoints") {
  const auto dir = scratch_dir("ckpt");
  NetParams p = NetParams::init(77);
  for (auto& t : p.mutable_tensors())
    for (double& x : t.values) x = static_cast<float>(x);
  write_checkpoint(p, dir / "a.ckpt");
  const NetParams r = read_checkpoint(dir / "a.ckpt");
  CHECK(r.rng_seed == 77);
  for (std::size_t t = 0; t < p.tensors().size(); ++t) CHECK(r.tensors()[t].values == p.tensors()[t].values);

  const std::string bytes = read_bytes(dir / "a.ckpt");
  CHECK(bytes.substr(0, 4) == "SNCK");
  auto rewrite = [&](const std::string& name, const std::string& b) {
    std::ofstream(dir / name, std::ios::binary) << b;
    return dir / name;
  };
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK(code_of([&] { read_checkpoint(rewrite("magic.ckpt", bad)); }) == ErrorCode::CkptFormat);
  CHECK(code_of([&] { read_checkpoint(rewrite("short.ckpt", bytes.substr(0, bytes.size() - 3))); }) ==
        ErrorCode::CkptFormat);
  CHECK(code_of([&] { read_checkpoint(rewrite("long.ckpt", bytes + "x")); }) == ErrorCode::CkptFormat);
  bad = bytes;
  const std::uint32_t count = 17;
  std::memcpy(bad.data() + 8, &count, 4);
  CHECK(code_of([&] { read_checkpoint(rewrite("count.ckpt", bad)); }) == ErrorCode::CkptShape);
}
