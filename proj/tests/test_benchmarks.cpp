#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dissipnet/benchmarks.hpp"

using namespace dissipnet;
using Catch::Approx;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dissipnet_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Matrix zeros(std::size_t horizon) { return Matrix(horizon, 1); }

}  // namespace

TEST_CASE("step signal is constant", "[benchmarks][signals]") {
  SignalSpec s;
  s.kind = SignalKind::step;
  s.horizon = 50;
  const Matrix u = gen_signal(s);
  for (double v : u.data()) CHECK(v == 1.0);
  CHECK(signal_from_string(to_string(SignalKind::random_walk)) == SignalKind::random_walk);
  CHECK_THROWS_AS(signal_from_string("chirp"), ConfigError);
}

TEST_CASE("rectangle signal levels and segment lengths", "[benchmarks][signals]") {
  SignalSpec s;
  s.kind = SignalKind::rectangle;
  s.amplitude = 2.0;
  s.horizon = 2000;
  s.seed = 4;
  const Matrix u = gen_signal(s);
  std::size_t run = 1;
  std::vector<std::size_t> runs;
  for (std::size_t k = 0; k < u.rows(); ++k) {
    CHECK(std::abs(u(k, 0)) == 2.0);
    if (k > 0) {
      if (u(k, 0) == u(k - 1, 0)) {
        ++run;
      } else {
        runs.push_back(run);
        run = 1;
      }
    }
  }
  // Equal consecutive levels merge segments, so runs are at least 5 long.
  for (auto r : runs) CHECK(r >= 5);
  CHECK(max_abs_diff(gen_signal(s), u) == 0.0);
  s.seed = 5;
  CHECK(max_abs_diff(gen_signal(s), u) > 0.0);
}

TEST_CASE("random walk increments have the configured variance", "[benchmarks][signals]") {
  SignalSpec s;
  s.kind = SignalKind::random_walk;
  s.horizon = 100000;
  s.seed = 1;
  const Matrix u = gen_signal(s);
  double sum = 0.0, sq = 0.0;
  for (std::size_t k = 1; k < u.rows(); ++k) {
    const double d = u(k, 0) - u(k - 1, 0);
    sum += d;
    sq += d * d;
  }
  const double n = static_cast<double>(u.rows() - 1);
  const double var = sq / n - (sum / n) * (sum / n);
  CHECK(var >= 0.0045);
  CHECK(var <= 0.0055);
}

TEST_CASE("MSD step response matches the closed form", "[benchmarks][msd]") {
  // m = k = c = 1: q(t) = 1 - e^{-t/2} (cos wt + sin(wt) / (2w)), w = sqrt(3)/2
  Matrix u(100, 1, 1.0);
  const auto t = simulate_msd(MsdParams{}, u, SimConfig{0.1, 100, {}});
  const double w = std::sqrt(3.0) / 2.0;
  for (std::size_t k = 0; k <= 100; ++k) {
    const double tk = 0.1 * static_cast<double>(k);
    const double q = 1.0 - std::exp(-tk / 2) * (std::cos(w * tk) + std::sin(w * tk) / (2 * w));
    CHECK(t.x(k, 0) == Approx(q).margin(1e-9));
    CHECK(t.y(k, 0) == t.x(k, 0));
  }
  CHECK(std::abs(t.x(100, 0) - 1.0) <= 0.05);
  CHECK_THROWS_AS(MsdParams({1.0, 0.0, 1.0}).validate(), ConfigError);
}

TEST_CASE("MSD energy and supply", "[benchmarks][msd]") {
  const MsdParams p{2.0, 3.0, 0.5};
  const std::vector<double> x{2.0, -1.0};
  CHECK(msd_energy(p, x) == Approx(3.0 * 4.0 / 2 + 2.0 * 1.0 / 2));
  // w = -c qdot^2 + qdot u
  const std::vector<double> u{4.0};
  CHECK(supply_eval(msd_supply(p), u, x) == Approx(-0.5 - 4.0));
}

TEST_CASE("substeps converge", "[benchmarks][msd]") {
  SignalSpec s;
  s.horizon = 50;
  s.seed = 2;
  const Matrix u = gen_signal(s);
  const SimConfig cfg{0.1, 50, {}};
  const auto fine = simulate_msd(MsdParams{}, u, cfg, 400);
  const auto a = simulate_msd(MsdParams{}, u, cfg, 1);
  const auto b = simulate_msd(MsdParams{}, u, cfg, 2);
  const double ea = max_abs_diff(a.x, fine.x), eb = max_abs_diff(b.x, fine.x);
  // RK4: halving the step cuts the error roughly 16-fold
  CHECK(eb < ea / 8.0);
}

TEST_CASE("pendulum mass matrix for two links", "[benchmarks][pendulum]") {
  PendulumParams p = PendulumParams::standard(2);
  CHECK(p.lengths[0] == 0.5);
  CHECK(p.masses[0] == 3.0);
  const std::vector<double> q{0.3, -0.4};
  const Matrix m = pendulum_mass_matrix(p, q);
  const double l = 0.5, m1 = 3.0, m2 = 3.0;
  CHECK(m(0, 0) == Approx((m1 + m2) * l * l));
  CHECK(m(0, 1) == Approx(m2 * l * l * std::cos(0.7)));
  CHECK(m(1, 0) == m(0, 1));
  CHECK(m(1, 1) == Approx(m2 * l * l));
  const Matrix c = pendulum_damping_matrix(p);
  CHECK(max_abs_diff(c, Matrix(2, 2, {2.0, -1.0, -1.0, 1.0})) == 0.0);
  CHECK_THROWS_AS(PendulumParams::standard(4).validate(), ConfigError);
}

TEST_CASE("small-angle single pendulum oscillates at sqrt(g / l)", "[benchmarks][pendulum]") {
  PendulumParams p = PendulumParams::standard(1);
  p.dampings = {1e-9};
  const double a0 = 0.01, omega = std::sqrt(p.g_accel / p.lengths[0]);
  const auto t = simulate_pendulum(p, zeros(300), SimConfig{0.01, 300, {a0, 0.0}});
  for (std::size_t k = 0; k <= 300; k += 10) {
    const double expect = a0 * std::cos(omega * 0.01 * static_cast<double>(k));
    CHECK(std::abs(t.x(k, 0) - expect) <= 0.02 * a0);
  }
}

TEST_CASE("pendulum at rest stays at rest", "[benchmarks][pendulum]") {
  for (std::size_t n = 1; n <= 3; ++n) {
    const auto t = simulate_pendulum(PendulumParams::standard(n), zeros(100), SimConfig{0.01, 100, {}});
    CHECK(max_abs(t.x) == 0.0);
  }
}

TEST_CASE("pendulum energy is conserved without damping and decays with it", "[benchmarks][pendulum]") {
  for (std::size_t n = 1; n <= 3; ++n) {
    PendulumParams p = PendulumParams::standard(n);
    std::vector<double> x0(2 * n, 0.0);
    x0[0] = 1.0;
    x0[n - 1] += 0.5;
    const SimConfig cfg{0.01, 200, x0};
    const auto damped = simulate_pendulum(p, zeros(200), cfg);
    p.dampings.assign(n, 1e-9);
    const auto free = simulate_pendulum(p, zeros(200), cfg);
    const double e0 = pendulum_energy(p, free.x.row(0));
    for (std::size_t k = 1; k <= 200; ++k) {
      CHECK(std::abs(pendulum_energy(p, free.x.row(k)) - e0) <= 1e-2 * e0);
      CHECK(pendulum_energy(p, damped.x.row(k)) <= pendulum_energy(p, damped.x.row(k - 1)) + 1e-9);
    }
    CHECK(damped.y.cols() == 2);
    CHECK(damped.y(200, 0) == damped.x(200, 0));
    CHECK(damped.y(200, 1) == damped.x(200, n));
  }
}

TEST_CASE("standard dataset specs", "[benchmarks][dataset]") {
  const auto m = DatasetSpec::standard(SystemKind::msd);
  CHECK(m.dt == 0.1);
  CHECK(m.horizon == 100);
  const auto p = DatasetSpec::standard(SystemKind::pendulum, 3);
  CHECK(p.dt == 0.01);
  CHECK(p.horizon == 100);
  CHECK(p.pendulum.n_links == 3);
  CHECK(system_from_string("pendulum") == SystemKind::pendulum);
}

TEST_CASE("dataset generation: split, determinism, and disk round trip", "[benchmarks][dataset]") {
  auto spec = DatasetSpec::standard(SystemKind::msd);
  spec.count = 20;
  spec.horizon = 30;
  spec.seed = 7;
  const auto a = generate_dataset(spec);
  CHECK(a.indices(Split::train).size() == 18);
  CHECK(a.indices(Split::test) == std::vector<std::size_t>{18, 19});
  CHECK(same_dataset(a, generate_dataset(spec, Exec::serial)));
  CHECK(trajectory_seed(spec, 0) != trajectory_seed(spec, 1));
  auto other = spec;
  other.seed = 8;
  CHECK_FALSE(same_dataset(a, generate_dataset(other)));

  const auto dir = scratch("dataset");
  const auto written = make_dataset(spec, dir, Exec::parallel, {{"note", "unit test"}});
  CHECK(same_dataset(written, a));
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  const auto back = load_dataset(dir);
  CHECK(same_dataset(back, a));
  std::ifstream in(dir / "manifest.json");
  const auto manifest = nlohmann::json::parse(in);
  CHECK(manifest.at("provenance").at("note") == "unit test");
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_dataset(dir), IoError);
}

TEST_CASE("external trajectories", "[benchmarks][dataset]") {
  const auto dir = scratch("external");
  std::vector<std::filesystem::path> files;
  for (std::size_t i = 0; i < 16; ++i) {
    SignalSpec s;
    s.horizon = 16;
    s.seed = i;
    const auto t = simulate_msd(MsdParams{}, gen_signal(s), SimConfig{0.1, 16, {}});
    files.push_back(dir / ("ext_" + std::to_string(i) + ".csv"));
    write_trajectory(files.back(), t, false);
  }
  const auto d = load_external(files);
  CHECK(d.size() == 16);
  CHECK(d.horizon() == 16);
  CHECK(d.dt == Approx(0.1));
  CHECK(d.indices(Split::train).size() == 14);
  CHECK_NOTHROW(d.validate());

  {
    std::ofstream bad(dir / "bad.csv");
    bad << "t,u_1,y_1,y_2\n0,1,0,0\n0.1,1,0,x\n";
  }
  CHECK_THROWS_AS(load_external({dir / "bad.csv"}), FormatError);
  {
    std::ofstream uneven(dir / "uneven.csv");
    uneven << "t,u_1,y_1,y_2\n0,1,0,0\n0.1,1,0,0\n0.3,1,0,0\n";
  }
  CHECK_THROWS_AS(load_external({dir / "uneven.csv"}), FormatError);
  CHECK_THROWS_AS(load_external({}), FormatError);
  std::filesystem::remove_all(dir);
}
