#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracle.hpp"
#include "sgc/errors.hpp"
#include "sgc/wavepacket.hpp"

using namespace sgc;

namespace {

// Co-located branches just after an SG_S kick: Up at +u, Down at -u.
BohmianState kicked_state(double p_up, double z0, const PhysicalParams& params = {}) {
  BohmianState s{make_initial_wave(SpinorWeights::from_up_probability(p_up), params), 0.0, z0};
  for (auto& b : s.wave.branches) b.vel_z = b.spin == Spin::Up ? params.u : -params.u;
  return s;
}

double final_z(double p_up, double z0, const PhysicalParams& params = {}) {
  const auto traj = integrate_trajectory(kicked_state(p_up, z0, params), params.dt, 1.5 * params.a / params.u);
  return traj.samples.back().z;
}

}  // namespace

TEST_CASE("spinor weights are checked for normalization") {
  CHECK_NOTHROW(SpinorWeights(std::sqrt(0.75), 0.5));
  CHECK_NOTHROW(SpinorWeights({0.0, 1.0}, 0.0));
  CHECK_THROWS_AS(SpinorWeights(1.0, 1.0), ValidationError);
  CHECK_THROWS_AS(SpinorWeights(0.5, 0.5), ValidationError);
  CHECK_THROWS_AS(SpinorWeights::from_up_probability(1.5), ValidationError);

  const auto w = SpinorWeights::from_up_probability(0.25);
  CHECK(w.p_up() == doctest::Approx(0.25));
  CHECK(w.p_down() == doctest::Approx(0.75));
}

TEST_CASE("initial wave drops components with zero weight") {
  CHECK(make_initial_wave(SpinorWeights(1.0, 0.0), {}).branches.size() == 1);
  CHECK(make_initial_wave(SpinorWeights(0.0, 1.0), {}).branches.size() == 1);
  const auto w = make_initial_wave(SpinorWeights::from_up_probability(0.5), {});
  CHECK(w.branches.size() == 2);
  CHECK(w.total_weight() == doctest::Approx(1.0));
}

TEST_CASE("guiding velocity is the density-weighted mean of branch velocities") {
  const PhysicalParams params;
  SUBCASE("overlap of an unequal superposition") {
    const auto s = kicked_state(0.75, 0.0, params);
    const Vec2 v = velocity_at(s.wave, s.pos());
    CHECK(v.z == doctest::Approx(0.5));
    CHECK(v.x == doctest::Approx(params.v));
  }
  SUBCASE("equal superposition is at rest in the overlap") {
    const auto s = kicked_state(0.5, 0.1, params);
    CHECK(velocity_at(s.wave, s.pos()).z == doctest::Approx(0.0));
  }
  SUBCASE("a single branch moves with its group velocity") {
    auto s = kicked_state(0.75, 0.0, params);
    const auto later = s.wave.advanced_to(0.6);
    const Vec2 top{later.branches[0].center_x, 0.9};
    CHECK(velocity_at(later, top).z == doctest::Approx(params.u));
    const Vec2 bottom{later.branches[0].center_x, -0.9};
    CHECK(velocity_at(later, bottom).z == doctest::Approx(-params.u));
  }
  SUBCASE("outside every support") {
    const auto s = kicked_state(0.75, 0.0, params);
    CHECK_THROWS_AS((void)velocity_at(s.wave, {0.0, 2.0}), NoSupport);
  }
}

TEST_CASE("overlap velocity flips sign with the device polarity") {
  for (const double p : {0.0, 0.1, 0.25, 0.5, 0.6, 0.75, 1.0}) {
    const auto w = SpinorWeights::from_up_probability(p);
    const double vs = overlap_velocity(w, 1.0);
    // An SG_N device swaps the roles of the components: v_N = (|b|^2 - |a|^2)u.
    const double vn = (w.p_down() - w.p_up()) * 1.0;
    CHECK(vn == doctest::Approx(-vs));
  }
}

TEST_CASE("exit threshold agrees with an independent brute-force integration") {
  const double oracle_34 = oracle::brute_force_threshold(0.75, 1.0, 1.0);
  const double oracle_14 = oracle::brute_force_threshold(0.25, 1.0, 1.0);
  CHECK(std::abs(oracle_34 - -0.25) < 1e-3);
  CHECK(std::abs(oracle_14 - 0.25) < 1e-3);

  // Frozen values.
  CHECK(exit_threshold(SpinorWeights::from_up_probability(0.75), 1.0, 1.0) == doctest::Approx(-0.25));
  CHECK(exit_threshold(SpinorWeights::from_up_probability(0.25), 1.0, 1.0) == doctest::Approx(0.25));
  CHECK(exit_threshold(SpinorWeights::from_up_probability(0.5), 1.0, 1.0) == 0.0);
  CHECK_FALSE(std::signbit(exit_threshold(SpinorWeights::from_up_probability(0.5), 1.0, 1.0)));

  // The threshold -a·v_S/u (twice as far out) is contradicted by the oracle.
  const auto w = SpinorWeights::from_up_probability(0.75);
  const double doubled = -1.0 * overlap_velocity(w, 1.0) / 1.0;
  CHECK(std::abs(oracle_34 - doubled) > 0.2);

  SUBCASE("scales with a and u") {
    for (const double a : {0.5, 2.0}) {
      for (const double u : {0.5, 3.0}) {
        const double expect = oracle::brute_force_threshold(0.75, u, a, 1e-5 * a / u);
        CHECK(std::abs(exit_threshold(w, u, a) - expect) < 1e-3 * a);
      }
    }
  }
}

TEST_CASE("analytic exit matches the brute-force side on a grid") {
  for (const double p : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    const auto w = SpinorWeights::from_up_probability(p);
    const double zs = exit_threshold(w, 1.0, 1.0);
    for (int i = 0; i <= 40; ++i) {
      const double z0 = -0.5 + i / 40.0;
      if (std::abs(z0 - zs) < 1e-3) continue;
      const auto oracle_side = oracle::brute_force_side(p, 1.0, 1.0, z0, 1e-4);
      const Path expect = oracle_side == oracle::Side::Upper ? Path::Upper : Path::Lower;
      CHECK_MESSAGE(analytic_exit(w, z0, 1.0, 1.0).side == expect, "p=", p, " z0=", z0);
    }
  }
}

TEST_CASE("analytic exit examples") {
  const auto w = SpinorWeights::from_up_probability(0.75);
  SUBCASE("below the threshold goes lower") {
    const auto r = analytic_exit(w, -0.3, 1.0, 1.0);
    CHECK(r.side == Path::Lower);
    // z0 + v_S t meets the rising lower edge u t - a/2.
    CHECK(-0.3 + 0.5 * r.t_exit == doctest::Approx(r.t_exit - 0.5));
  }
  SUBCASE("above the threshold goes upper") {
    const auto r = analytic_exit(w, -0.2, 1.0, 1.0);
    CHECK(r.side == Path::Upper);
    CHECK(-0.2 + 0.5 * r.t_exit == doctest::Approx(0.5 - r.t_exit));
  }
  SUBCASE("a start exactly on the threshold goes upper") {
    CHECK(analytic_exit(w, exit_threshold(w, 1.0, 1.0), 1.0, 1.0).side == Path::Upper);
  }
  SUBCASE("eigenstates ignore the start height") {
    for (const double z0 : {-0.5, 0.0, 0.5}) {
      CHECK(analytic_exit(SpinorWeights(1.0, 0.0), z0, 1.0, 1.0).side == Path::Upper);
      CHECK(analytic_exit(SpinorWeights(0.0, 1.0), z0, 1.0, 1.0).side == Path::Lower);
      CHECK(analytic_exit(SpinorWeights(1.0, 0.0), z0, 1.0, 1.0).t_exit == 0.0);
    }
  }
  SUBCASE("bad input") {
    CHECK_THROWS_AS((void)analytic_exit(w, 0.6, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS((void)analytic_exit(w, 0.0, 0.0, 1.0), std::invalid_argument);
  }
}

TEST_CASE("exit side is monotone in the start height") {
  for (const double p : {0.2, 0.5, 0.7}) {
    const auto w = SpinorWeights::from_up_probability(p);
    int flips = 0;
    Path prev = analytic_exit(w, -0.5, 1.0, 1.0).side;
    for (int i = 1; i <= 1000; ++i) {
      const Path side = analytic_exit(w, -0.5 + i / 1000.0, 1.0, 1.0).side;
      if (side != prev) {
        ++flips;
        CHECK(side == Path::Upper);
      }
      prev = side;
    }
    CHECK(flips == 1);
  }
}

TEST_CASE("integrated trajectories follow the analytic solution") {
  const PhysicalParams params;
  SUBCASE("pure up state moves straight up") {
    auto s = kicked_state(1.0, 0.1, params);
    const auto traj = integrate_trajectory(s, params.dt, 1.0);
    CHECK(traj.samples.back().z == doctest::Approx(1.1).epsilon(1e-9));
    CHECK(traj.samples.back().x == doctest::Approx(params.v * 1.0).epsilon(1e-9));
    CHECK(traj.samples.back().occupied == Occupancy::Up);
  }
  SUBCASE("lower exit of an unequal superposition") {
    const auto w = SpinorWeights::from_up_probability(0.75);
    const double z0 = -0.4;
    const auto r = analytic_exit(w, z0, 1.0, 1.0);
    REQUIRE(r.side == Path::Lower);
    const double t_end = 1.5;
    const double expect = z0 + 0.5 * r.t_exit - (t_end - r.t_exit);
    const auto traj = integrate_trajectory(kicked_state(0.75, z0, params), params.dt, t_end);
    CHECK(std::abs(traj.samples.back().z - expect) < 2.0 * params.dt * params.u);
    CHECK(traj.samples.back().occupied == Occupancy::Down);
  }
  SUBCASE("equal superposition stays put until the overlap closes") {
    const auto traj = integrate_trajectory(kicked_state(0.5, 0.2, params), params.dt, 1.0);
    const double expect = 0.2 + (1.0 - (0.5 - 0.2));
    CHECK(std::abs(traj.samples.back().z - expect) < 2.0 * params.dt);
  }
  SUBCASE("sample times are the fixed grid plus an exact end") {
    const auto traj = integrate_trajectory(kicked_state(0.5, 0.0, params), 0.01, 0.255);
    CHECK(traj.samples.front().t == 0.0);
    CHECK(traj.samples.back().t == 0.255);
    CHECK(traj.samples.size() == 27);
    for (std::size_t i = 1; i < traj.samples.size(); ++i) CHECK(traj.samples[i].t > traj.samples[i - 1].t);
  }
}

TEST_CASE("integrator agrees with the analytic exit side away from the threshold") {
  const PhysicalParams params;
  for (const double p : {0.25, 0.5, 0.75}) {
    const auto w = SpinorWeights::from_up_probability(p);
    const double zs = exit_threshold(w, params.u, params.a);
    for (int i = 0; i <= 100; ++i) {
      const double z0 = -0.5 + i / 100.0;
      if (std::abs(z0 - zs) <= 2.0 * params.dt * params.u) continue;
      const Path side = final_z(p, z0, params) > 0.0 ? Path::Upper : Path::Lower;
      CHECK_MESSAGE(side == analytic_exit(w, z0, params.u, params.a).side, "p=", p, " z0=", z0);
    }
  }
}

TEST_CASE("integrated trajectories never cross") {
  Rng rng = substream(7, 0);
  const PhysicalParams params;
  for (const double p : {0.25, 0.5, 0.75}) {
    for (int k = 0; k < 20; ++k) {
      double z1 = params.a * (uniform01(rng) - 0.5);
      double z2 = params.a * (uniform01(rng) - 0.5);
      if (z1 > z2) std::swap(z1, z2);
      const auto t1 = integrate_trajectory(kicked_state(p, z1, params), params.dt, 1.5);
      const auto t2 = integrate_trajectory(kicked_state(p, z2, params), params.dt, 1.5);
      REQUIRE(t1.samples.size() == t2.samples.size());
      for (std::size_t i = 0; i < t1.samples.size(); ++i) REQUIRE(t1.samples[i].z <= t2.samples[i].z);
    }
  }
}

TEST_CASE("integrator refuses coarse steps") {
  const auto s = kicked_state(0.5, 0.0);
  CHECK_THROWS_AS((void)integrate_trajectory(s, 0.02, 1.0), StepTooLarge);
  CHECK_THROWS_AS((void)integrate_trajectory(s, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS((void)integrate_trajectory(s, 0.001, -1.0), std::invalid_argument);
  auto outside = s;
  outside.pos_z = 3.0;
  CHECK_THROWS_AS((void)integrate_trajectory(outside, 0.001, 1.0), NoSupport);
  CHECK_THROWS_AS(check_support(outside), NoSupport);
}

TEST_CASE("state_after lands on the last sample") {
  const auto s = kicked_state(0.75, 0.1);
  const auto traj = integrate_trajectory(s, 1e-3, 0.3);
  const auto next = state_after(s, traj);
  CHECK(next.wave.time == doctest::Approx(0.3));
  CHECK(next.pos_z == traj.samples.back().z);
  CHECK(next.wave.branches[0].center_z == doctest::Approx(0.3));
}

TEST_CASE("quantum equilibrium draws are uniform across the packet") {
  Rng rng = substream(11, 0);
  const std::size_t n = 100000;
  const auto zs = sample_qeh(2.0, n, rng);
  double sum = 0.0;
  std::size_t above = 0;
  for (const double z : zs) {
    REQUIRE(z >= -1.0);
    REQUIRE(z < 1.0);
    sum += z;
    if (z > -0.5) ++above;
  }
  // Uniform on [-1, 1): mean 0 with sd 1/sqrt(3); P(z > -a/4) = 3/4.
  CHECK(std::abs(sum / n) < 4.0 / std::sqrt(3.0 * n));
  CHECK(std::abs(static_cast<double>(above) / n - 0.75) < 4.0 * oracle::binomial_sigma(0.75, n));
}

TEST_CASE("exit frequencies under the equilibrium follow the Born rule") {
  for (const double p : {0.25, 0.5, 0.75}) {
    const auto w = SpinorWeights::from_up_probability(p);
    Rng rng = substream(3, static_cast<std::uint64_t>(p * 100));
    const std::size_t n = 50000;
    std::size_t upper = 0;
    for (const double z0 : sample_qeh(1.0, n, rng)) upper += analytic_exit(w, z0, 1.0, 1.0).side == Path::Upper;
    CHECK(std::abs(static_cast<double>(upper) / n - p) < 4.0 * oracle::binomial_sigma(p, n));
  }
}

TEST_CASE("seeded substreams repeat and differ by index and lane") {
  Rng a = substream(5, 1), b = substream(5, 1), c = substream(5, 2), d = substream(5, 1, 1);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(x != d());
  Rng e = substream(1, 0);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(e);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const int s = random_sign(e);
    REQUIRE((s == 1 || s == -1));
  }
}
