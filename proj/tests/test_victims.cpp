#include <doctest.h>

#include <cmath>
#include <random>

#include "ctrlattack/objectives.hpp"
#include "ctrlattack/victims.hpp"

using namespace ctrlattack;

namespace {

TrajectoryCondition linear(int frames, Vec2 step, BoundingBox start = {60, 60, 90, 100}) {
  std::vector<BoundingBox> boxes;
  for (int t = 0; t < frames; ++t) {
    boxes.push_back({start.x0 + t * step.x, start.y0 + t * step.y, start.x1 + t * step.x, start.y1 + t * step.y});
  }
  return TrajectoryCondition(256, 256, boxes);
}

GenerationRequest request(const TrajectoryCondition& t, std::uint64_t seed = 1, std::size_t k = 8) {
  return GenerationRequest{t, seed, k, std::nullopt};
}

Vec2 frame_mean(const ObservedTracks& tr, std::size_t t) {
  Vec2 s;
  for (const Vec2& p : tr.frame(t)) s += p;
  return (1.0 / tr.points_per_frame()) * s;
}

}  // namespace

TEST_CASE("observed tracks reject ragged or non-finite input") {
  CHECK_THROWS_AS(ObservedTracks({{{0, 0}, {1, 1}}, {{0, 0}}}), ValidationError);
  CHECK_THROWS_AS(ObservedTracks({{{0, NAN}}, {{0, 0}}}), ValidationError);
  const ObservedTracks ok({{{0, 0}, {1, 1}}, {{2, 2}, {3, 3}}});
  CHECK(ok.frame_count() == 2);
  CHECK(ok.points_per_frame() == 2);
  CHECK(ok(1, 0) == Vec2{2, 2});
}

TEST_CASE("faithful follower without jitter emits centers") {
  const auto t = linear(14, {2, 1});
  const auto tr = faithful_follower(request(t), 0.0);
  REQUIRE(tr.frame_count() == 14);
  REQUIRE(tr.points_per_frame() == 8);
  for (std::size_t f = 0; f < 14; ++f) {
    for (const Vec2& p : tr.frame(f)) CHECK(p == t.box(f).center());
  }
}

TEST_CASE("faithful follower is deterministic per seed") {
  const auto t = linear(14, {2, 1});
  CHECK(faithful_follower(request(t, 5), 1.0) == faithful_follower(request(t, 5), 1.0));
  CHECK_FALSE(faithful_follower(request(t, 5), 1.0) == faithful_follower(request(t, 6), 1.0));
}

TEST_CASE("faithful jitter mean stays near the center") {
  // Standard error per axis is 1/sqrt(8); 1.1 px is about 3.1 of them.
  const auto t = linear(14, {2, 1});
  int good = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto tr = faithful_follower(request(t, seed), 1.0);
    bool all = true;
    for (std::size_t f = 0; f < 14; ++f) all = all && (frame_mean(tr, f) - t.box(f).center()).norm() <= 1.1;
    good += all ? 1 : 0;
  }
  // Per-frame miss rate is about exp(-1.1^2 * 8 / 2) = 0.008, so per-seed success is near 0.89.
  CHECK(good >= 75);
}

TEST_CASE("inertial params validation") {
  CHECK_NOTHROW(InertialParams{}.validate());
  CHECK_THROWS_AS((InertialParams{0.0, 0.2, 4, 0.5}.validate()), InvalidArgument);
  CHECK_THROWS_AS((InertialParams{1.5, 0.2, 4, 0.5}.validate()), InvalidArgument);
  CHECK_THROWS_AS((InertialParams{0.3, -0.1, 4, 0.5}.validate()), InvalidArgument);
  CHECK_THROWS_AS((InertialParams{0.3, 0.2, 0, 0.5}.validate()), InvalidArgument);
  CHECK_THROWS_AS((InertialParams{0.3, 0.2, 4, -1}.validate()), InvalidArgument);
}

TEST_CASE("inertial follower at rest stays put") {
  const auto t = linear(10, {0, 0});
  const auto tr = inertial_follower(request(t), {0.3, 0.2, 4, 0});
  for (std::size_t f = 0; f < 10; ++f) CHECK(frame_mean(tr, f) == t.box(0).center());
}

TEST_CASE("inertial follower with alpha = beta = 1 lags by one frame") {
  std::vector<BoundingBox> boxes;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(40, 180);
  for (int i = 0; i < 12; ++i) {
    const double x = u(rng), y = u(rng);
    boxes.push_back({x, y, x + 20, y + 30});
  }
  const TrajectoryCondition t(256, 256, boxes);
  const auto tr = inertial_follower(request(t), {1.0, 1.0, 1e9, 0});
  CHECK(frame_mean(tr, 0) == t.box(0).center());
  for (std::size_t f = 1; f < 12; ++f) {
    const Vec2 d = frame_mean(tr, f) - t.box(f - 1).center();
    CHECK(d.norm() < 1e-9);
  }
}

TEST_CASE("inertial follower saturates at v_max") {
  // 50 frames stepping (3, 0) on a wide frame; the recurrence settles at the speed cap.
  std::vector<BoundingBox> boxes;
  for (int f = 0; f < 50; ++f) boxes.push_back({10.0 + 3 * f, 100, 20.0 + 3 * f, 110});
  const TrajectoryCondition t(256, 256, boxes);
  const auto tr = inertial_follower(request(t), {0.3, 0.2, 2, 0});
  const auto est = estimate_motion(tr);
  for (std::size_t f = 40; f < 49; ++f) {
    CHECK(est.velocities.vec2(f).norm() == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(est.velocities(f, 0) > 0);
  }
}

TEST_CASE("inertial positions stay bounded") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 220);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<BoundingBox> boxes;
    for (int i = 0; i < 30; ++i) {
      const double x = u(rng), y = u(rng);
      boxes.push_back({x, y, x + 30, y + 30});
    }
    const TrajectoryCondition t(256, 256, boxes);
    const InertialParams p{0.3 + 0.7 * (trial % 3) / 2.0, 0.1 * (trial % 5), 4, 0};
    const auto tr = inertial_follower(request(t), p);
    for (std::size_t f = 0; f < 30; ++f) {
      const Vec2 m = frame_mean(tr, f);
      CHECK(m.x >= -4 * 30.0);
      CHECK(m.x <= 256 + 4 * 30.0);
    }
  }
}

TEST_CASE("counting victim counts") {
  FaithfulVictim v(0.0);
  CountingVictim c(v);
  const auto t = linear(4, {1, 0});
  c.generate(request(t));
  c.generate(request(t));
  CHECK(c.count() == 2);
  CHECK(c.name() == "faithful");
}

TEST_CASE("coordinate field without noise holds coordinates") {
  const auto t = linear(3, {1, 0});
  const auto f = coordfield_build(request(t), 16, 16, 0.0);
  REQUIRE(f.size() == 3);
  CHECK(f[0](7, 3, 0) == 3.0);
  CHECK(f[0](7, 3, 1) == 7.0);
  CHECK(f == coordfield_build(request(t), 16, 16, 0.0));
}

TEST_CASE("coordinate field noise level") {
  const auto t = linear(2, {1, 0});
  const auto f = coordfield_build(request(t, 3), 50, 50, 0.1);
  CHECK(f == coordfield_build(request(t, 3), 50, 50, 0.1));
  double mad = 0.0;
  std::size_t n = 0;
  for (std::size_t y = 0; y < 50; ++y) {
    for (std::size_t x = 0; x < 50; ++x) {
      mad += std::abs(f[0](y, x, 0) - double(x)) + std::abs(f[0](y, x, 1) - double(y));
      n += 2;
    }
  }
  // E|N(0, 0.1)| = 0.1 * sqrt(2 / pi).
  CHECK(mad / n == doctest::Approx(0.0797885).epsilon(0.05));
}

TEST_CASE("stage-1 alignment") {
  const auto t = linear(6, {3, 1});
  const auto f = coordfield_build(request(t), 257, 257, 0.0);
  const auto zero = coordfield_align(f, t, 50, 8, 0.25);
  // The grid mean reproduces the center up to rounding, so zero stays zero to ~1e-14.
  for (const Vec2& o : zero) CHECK(o.norm() < 1e-12);
  const auto moved = coordfield_align(f, t, 50, 8, 0.25, std::vector<Vec2>(6, Vec2{2, 2}));
  for (const Vec2& o : moved) CHECK(o.norm() < 1e-3);
  const auto same = coordfield_align(f, t, 0, 8, 0.25, std::vector<Vec2>(6, Vec2{2, 2}));
  for (const Vec2& o : same) CHECK(o == Vec2{2, 2});
}

TEST_CASE("coordfield readout follows the mean displacement") {
  const auto t = linear(5, {3, 1});
  const auto req = request(t);
  const auto f = coordfield_build(req, 257, 257, 0.0);
  const std::vector<Vec2> offsets(5);
  const auto p0 = coordfield_positions(f, t, offsets, {}, 8);
  for (std::size_t i = 0; i < 5; ++i) CHECK((p0[i] - t.box(i).center()).norm() < 1e-12);

  std::vector<DisplacementField> uniform(5, DisplacementField(8, 8, Vec2{4, -2}));
  const auto p1 = coordfield_positions(f, t, offsets, uniform, 8);
  for (std::size_t i = 0; i < 5; ++i) CHECK((p1[i] - t.box(i).center() - Vec2{4, -2}).norm() < 1e-9);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<DisplacementField> du(5, DisplacementField(8, 8));
    for (auto& d : du) {
      for (Vec2& v : d.values()) v = {n(rng), n(rng)};
    }
    const auto p = coordfield_positions(f, t, offsets, du, 8);
    for (std::size_t i = 0; i < 5; ++i) CHECK((p[i] - t.box(i).center() - du[i].mean()).norm() < 1e-9);
  }
}

TEST_CASE("emitted points average to the position") {
  const auto t = linear(5, {3, 1});
  const std::vector<Vec2> pos = {{1, 2}, {3, 4}, {5, 6}, {7, 8}, {9, 10}};
  const auto tr = coordfield_emit(pos, request(t, 4, 8), 1.0);
  for (std::size_t i = 0; i < 5; ++i) CHECK((frame_mean(tr, i) - pos[i]).norm() < 1e-12);
  const auto single = coordfield_emit(pos, request(t, 4, 1), 1.0);
  CHECK(single(2, 0) == pos[2]);
}

TEST_CASE("position Jacobian on a noiseless field is I / (h w)") {
  const auto t = linear(3, {2, 0});
  const auto f = coordfield_build(request(t), 257, 257, 0.0);
  const auto jac = coordfield_position_gradient(f, t, std::vector<Vec2>(3), {}, 8);
  for (const auto& j : jac) {
    for (const Mat2& b : j.blocks) {
      CHECK(b.xx == doctest::Approx(1.0 / 64).epsilon(1e-12));
      CHECK(b.yy == doctest::Approx(1.0 / 64).epsilon(1e-12));
      CHECK(std::abs(b.xy) < 1e-15);
      CHECK(std::abs(b.yx) < 1e-15);
    }
  }
}

TEST_CASE("position Jacobian matches finite differences on a noisy field") {
  const auto t = linear(2, {2, 0});
  const auto f = coordfield_build(request(t, 9), 257, 257, 0.1);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 2);
  std::vector<DisplacementField> du(2, DisplacementField(8, 8));
  for (auto& d : du) {
    for (Vec2& v : d.values()) v = {n(rng), n(rng)};
  }
  const std::vector<Vec2> off(2, Vec2{0.3, -0.2});
  const auto jac = coordfield_position_gradient(f, t, off, du, 8);
  const double h = 1e-6;
  for (std::size_t r : {0u, 3u, 7u}) {
    for (std::size_t c : {1u, 5u}) {
      for (int axis = 0; axis < 2; ++axis) {
        auto plus = du, minus = du;
        (axis ? plus[1](r, c).y : plus[1](r, c).x) += h;
        (axis ? minus[1](r, c).y : minus[1](r, c).x) -= h;
        const Vec2 d = (1.0 / (2 * h)) * (coordfield_positions(f, t, off, plus, 8)[1] -
                                          coordfield_positions(f, t, off, minus, 8)[1]);
        const Mat2& b = jac[1](r, c);
        const Vec2 col = axis ? Vec2{b.xy, b.yy} : Vec2{b.xx, b.yx};
        CHECK((col - d).norm() <= 1e-4 * std::max(1.0 / 64, d.norm()));
      }
    }
  }
}

TEST_CASE("position Jacobian vanishes on clamped axes") {
  // Box touching the left border and a displacement pushing samples out of the map.
  const TrajectoryCondition t(64, 64, {{0, 10, 20, 30}, {0, 10, 20, 30}});
  const auto f = coordfield_build(request(t), 65, 65, 0.0);
  std::vector<DisplacementField> du(2, DisplacementField(8, 8, Vec2{-5, 0}));
  const auto jac = coordfield_position_gradient(f, t, std::vector<Vec2>(2), du, 8);
  CHECK(jac[0](3, 0).xx == 0.0);
  CHECK(jac[0](3, 0).yy != 0.0);
  CHECK(jac[0](3, 7).xx != 0.0);
}

TEST_CASE("coordfield victim is deterministic and close to centers") {
  CoordFieldVictim v(CoordFieldParams{});
  const auto t = linear(14, {3, 1});
  const auto a = v.generate(request(t, 2));
  CHECK(a == v.generate(request(t, 2)));
  CHECK(objmc_metric(a, t) < 0.5);
}
