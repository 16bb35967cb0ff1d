#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "dissipnet/dynamics.hpp"
#include "support.hpp"

using namespace dissipnet;
using namespace dissipnet::testing;
using Catch::Approx;

namespace {

// x' = a x + u, y = 2x
VectorField scalar_linear(double a) {
  VectorField s;
  s.drift = [a](std::span<const double> x, std::span<const double> u) { return std::vector<double>{a * x[0] + u[0]}; };
  s.output = [](std::span<const double> x, std::span<const double>) { return std::vector<double>{2.0 * x[0]}; };
  return s;
}

Matrix constant_input(std::size_t horizon, double v) {
  Matrix u(horizon, 1);
  for (std::size_t k = 0; k < horizon; ++k) u(k, 0) = v;
  return u;
}

}  // namespace

TEST_CASE("Euler on a scalar linear system matches the closed form", "[dynamics]") {
  // x_{k+1} = (1 + a dt) x_k + dt  =>  x_k = (1 - r^k) dt / (1 - r), r = 1 + a dt
  const double a = -0.5, dt = 0.1;
  const auto t = simulate(scalar_linear(a), constant_input(50, 1.0), SimConfig{dt, 50, {}});
  REQUIRE(t.x.rows() == 51);
  REQUIRE(t.y.rows() == 51);
  CHECK(t.horizon() == 50);
  CHECK(t.dt() == Approx(dt));
  const double r = 1.0 + a * dt;
  for (std::size_t k = 0; k <= 50; ++k) {
    const double expect = (1.0 - std::pow(r, static_cast<double>(k))) * dt / (1.0 - r);
    CHECK(t.x(k, 0) == Approx(expect).epsilon(1e-12));
    CHECK(t.y(k, 0) == Approx(2.0 * expect).epsilon(1e-12));
    CHECK(t.times[k] == Approx(static_cast<double>(k) * dt));
  }
}

TEST_CASE("initial state is honoured", "[dynamics]") {
  const auto t = simulate(scalar_linear(-1.0), constant_input(3, 0.0), SimConfig{0.5, 3, {8.0}});
  CHECK(t.x(0, 0) == 8.0);
  CHECK(t.x(1, 0) == 4.0);
  CHECK(t.x(3, 0) == 1.0);
}

TEST_CASE("input_at holds the last input on the final grid point", "[dynamics]") {
  Matrix u(3, 1, {1.0, 2.0, 3.0});
  CHECK(input_at(u, 0)[0] == 1.0);
  CHECK(input_at(u, 2)[0] == 3.0);
  CHECK(input_at(u, 3)[0] == 3.0);
}

TEST_CASE("model rollout is the hand-written Euler loop", "[dynamics]") {
  const Dims d{3, 2, 2};
  std::mt19937_64 rng(1);
  for (auto kind : {ProjectionKind::naive, ProjectionKind::conservative, ProjectionKind::dissipative}) {
    const auto m = random_model(kind, d, 11);
    const Matrix u = random_rectangle(40, 2, rng, 0.5);
    const SimConfig cfg{0.05, 40, {}};
    const auto t = simulate(m, u, cfg);
    const auto ev = evaluator(m);
    std::vector<double> x(3, 0.0);
    for (std::size_t k = 0; k <= 40; ++k) {
      const auto uk = input_at(u, k);
      const auto v = ev.projected(x);
      for (std::size_t i = 0; i < 3; ++i) CHECK(t.x(k, i) == x[i]);
      for (std::size_t i = 0; i < 2; ++i) {
        double y = v.h[i];
        if (!v.j.empty())
          for (std::size_t c = 0; c < 2; ++c) y += v.j(i, c) * uk[c];
        CHECK(t.y(k, i) == Approx(y).epsilon(1e-14));
      }
      std::vector<double> nx = x;
      for (std::size_t i = 0; i < 3; ++i) {
        double dx = v.f[i];
        for (std::size_t c = 0; c < 2; ++c) dx += v.g(i, c) * uk[c];
        nx[i] = x[i] + 0.05 * dx;
      }
      if (k < 40) CHECK(euler_step(m, x, uk, 0.05) == nx);
      x = nx;
    }
  }
}

TEST_CASE("divergence is reported with the step", "[dynamics]") {
  // x' = 10 x doubles every 0.1 in Euler: 1 -> 2 -> 4 ..., crossing 1e6 at step 20
  VectorField s = scalar_linear(10.0);
  try {
    simulate(s, constant_input(100, 0.0), SimConfig{0.1, 100, {1.0}});
    FAIL("expected NonFiniteState");
  } catch (const NonFiniteState& e) {
    CHECK(e.step() == 20);
  }
}

TEST_CASE("shape errors", "[dynamics]") {
  CHECK_THROWS_AS(simulate(scalar_linear(-1.0), constant_input(5, 0.0), SimConfig{0.1, 6, {}}), DimensionMismatch);
  CHECK_THROWS_AS(simulate(scalar_linear(-1.0), constant_input(5, 0.0), SimConfig{0.0, 5, {}}), ConfigError);
  CHECK_THROWS_AS(simulate(scalar_linear(-1.0), constant_input(5, 0.0), SimConfig{0.1, 5, {1.0, 2.0}}),
                  DimensionMismatch);
}

TEST_CASE("trajectory text round trip is exact", "[dynamics]") {
  std::mt19937_64 rng(2);
  const auto m = random_model(ProjectionKind::dissipative, Dims{3, 2, 2}, 5);
  const auto t = simulate(m, random_rectangle(30, 2, rng), SimConfig{0.1, 30, {}});
  const auto back = trajectory_from_csv(trajectory_to_csv(t));
  CHECK(back.times == t.times);
  CHECK(max_abs_diff(back.u, t.u) == 0.0);
  CHECK(max_abs_diff(back.y, t.y) == 0.0);
  CHECK(max_abs_diff(back.x, t.x) == 0.0);

  const auto no_states = trajectory_from_csv(trajectory_to_csv(t, false));
  CHECK_FALSE(no_states.has_states());
  CHECK_THROWS_AS(trajectory_to_csv(no_states, true), MissingStates);

  const auto dir = std::filesystem::temp_directory_path() / "dissipnet_test_dynamics";
  std::filesystem::create_directories(dir);
  write_trajectory(dir / "t.csv", t);
  CHECK(max_abs_diff(read_trajectory(dir / "t.csv").y, t.y) == 0.0);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(read_trajectory(dir / "missing.csv"), IoError);
}

TEST_CASE("malformed trajectory text names the row", "[dynamics]") {
  const std::string good = "t,u_1,y_1\n0,1,0\n0.1,1,0.5\n";
  CHECK_NOTHROW(trajectory_from_csv(good));
  try {
    trajectory_from_csv("t,u_1,y_1\n0,1,0\n0.1,1,abc\n");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("row 1"));
  }
  CHECK_THROWS_AS(trajectory_from_csv("t,u_1,y_1\n0,1\n0.1,1,0\n"), FormatError);
  CHECK_THROWS_AS(trajectory_from_csv("t,y_1,u_1\n0,1,0\n0.1,1,0\n"), FormatError);
  CHECK_THROWS_AS(trajectory_from_csv("t,u_1,y_2\n0,1,0\n0.1,1,0\n"), FormatError);
  CHECK_THROWS_AS(trajectory_from_csv("t,u_1,y_1\n0,1,nan\n0.1,1,0\n"), FormatError);
  CHECK_THROWS_AS(trajectory_from_csv("t,u_1,y_1\n0,1,0\n"), FormatError);
  CHECK_THROWS_AS(trajectory_from_csv(""), FormatError);
}
