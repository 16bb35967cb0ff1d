#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "dissipnet/verify.hpp"
#include "support.hpp"

using namespace dissipnet;
using namespace dissipnet::testing;
using Catch::Approx;

namespace {

const Dims kDims{3, 2, 2};

DynamicsValues<double> scalar_values(double f, double g, double h) {
  DynamicsValues<double> d;
  d.f = {f};
  d.g = Matrix(1, 1, {g});
  d.h = {h};
  return d;
}

}  // namespace

TEST_CASE("summarize examples", "[verify]") {
  const auto a = summarize("c", {0.1, 0.5, 0.2}, 1.0);
  CHECK(a.pass);
  CHECK(a.max_residual == 0.5);
  CHECK(a.samples == 3);
  CHECK_FALSE(a.offending);

  const auto b = summarize("c", {0.1, 0.5, 0.2}, 0.3);
  CHECK_FALSE(b.pass);
  CHECK(b.offending == 1u);

  const auto c = summarize("c", {0.1, std::numeric_limits<double>::quiet_NaN(), 0.2}, 1.0);
  CHECK_FALSE(c.pass);
  CHECK(c.offending == 1u);
  CHECK(std::isinf(c.max_residual));

  CHECK(summarize("c", {}, 0.0).pass);

  const auto j = to_json(b);
  CHECK(j.at("offending_sample") == 1);
  CHECK(j.at("pass") == false);
  const auto table = format_table({a, b});
  CHECK_THAT(table, Catch::Matchers::ContainsSubstring("FAIL (sample 1)"));
  CHECK_THAT(table, Catch::Matchers::ContainsSubstring("PASS"));
}

TEST_CASE("KYP residual by hand", "[verify]") {
  // grad V = 2, f = -1, g = 1, h = 0.5; Q = -1, S = 0.5, R = 0, no l.
  const auto d = scalar_values(-1.0, 1.0, 0.5);
  const std::vector<double> gv{2.0};
  const SupplyRate w(SymMatrix(Matrix(1, 1, {-1.0})), Matrix(1, 1, {0.5}), SymMatrix::zero(1));
  const auto r = kyp_residual(d, gv, {}, Matrix(), w);
  CHECK(r.r1 == Approx(-2.0 + 0.25));
  CHECK(r.r2[0] == Approx(1.0 - 0.25));
  CHECK(r.r3(0, 0) == 0.0);
  CHECK(r.max_abs() == Approx(1.75));

  // With l = 0.5 and W = 1: r1 += 0.25, r2 += 0.5, r3 = 1.
  const std::vector<double> l{0.5};
  const auto q = kyp_residual(d, gv, l, Matrix(1, 1, {1.0}), w);
  CHECK(q.r1 == Approx(-1.5));
  CHECK(q.r2[0] == Approx(1.25));
  CHECK(q.r3(0, 0) == Approx(1.0));
}

TEST_CASE("QME residual is the norm of the KYP residual blocks", "[verify][property]") {
  // The QME assembles [[r1, r2], [r2', r3]].
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    DynamicsValues<double> d;
    d.f = random_vector(3, rng);
    d.g = random_matrix(3, 2, rng);
    d.h = random_vector(2, rng);
    if (t % 2) d.j = random_matrix(2, 2, rng);
    const auto gv = random_vector(3, rng);
    const auto l = random_vector(2, rng);
    const Matrix wm = random_matrix(2, 2, rng);
    const SupplyRate w(random_sym(2, rng), random_matrix(2, 2, rng), random_sym(2, rng));
    const auto r = kyp_residual(d, gv, l, wm, w);
    double expect = r.r1 * r.r1;
    for (double v : r.r2) expect += 2.0 * v * v;
    expect += frobenius(r.r3) * frobenius(r.r3);
    CHECK(qme_residual(qme_build(d, gv, l, wm, w)) == Approx(std::sqrt(expect)).epsilon(1e-10));
  }
}

TEST_CASE("Lur'e residual by hand", "[verify]") {
  const std::vector<double> gv{2.0};
  CHECK(lure_residual(scalar_values(-1.0, 1.0, 1.0), gv) == 0.0);
  CHECK(lure_residual(scalar_values(0.5, 1.0, 1.0), gv) == Approx(1.0));
  CHECK(lure_residual(scalar_values(-1.0, 1.0, 0.0), gv) == Approx(2.0));
}

TEST_CASE("HJ left-hand side in both forms", "[verify]") {
  // grad V'f = -2, grad V'g = 2, gamma = 1, |h|^2 = 0.25
  const auto d = scalar_values(-1.0, 1.0, 0.5);
  const std::vector<double> gv{2.0};
  CHECK(hj_lhs(d, gv, 1.0, HjForm::stated) == Approx(-2.0 - 1.0 - 0.25));
  CHECK(hj_lhs(d, gv, 1.0, HjForm::standard) == Approx(-2.0 + 1.0 + 0.25));
}

TEST_CASE("audits pass on projected models and fail on raw ones", "[verify]") {
  const auto xs = normal_samples(3, 200, 5);
  for (auto kind : kAllProjectionKinds) {
    const auto m = random_model(kind, kDims, 7);
    const auto r = kyp_audit(m, xs);
    if (kind == ProjectionKind::naive) {
      CHECK_FALSE(r.pass);
      CHECK(r.offending);
    } else {
      INFO(to_string(kind) << " " << r.max_residual);
      CHECK(r.pass);
      CHECK(idempotence_audit(m, xs).pass);
    }
  }
}

TEST_CASE("model KYP residual uses the certificate of its kind", "[verify]") {
  std::mt19937_64 rng(2);
  for (auto kind : {ProjectionKind::conservative, ProjectionKind::dissipative, ProjectionKind::io_stable,
                    ProjectionKind::general}) {
    const auto m = random_model(kind, kDims, 3);
    for (int k = 0; k < 20; ++k) CHECK(kyp_residual(m, random_vector(3, rng)).max_abs() <= 1e-9);
  }
}

TEST_CASE("normal samples are reproducible", "[verify]") {
  const auto a = normal_samples(2, 1000, 9), b = normal_samples(2, 1000, 9), c = normal_samples(2, 1000, 10);
  CHECK(a == b);
  CHECK(a != c);
  double mean = 0.0, var = 0.0;
  for (const auto& x : a) {
    mean += x[0];
    var += x[0] * x[0];
  }
  mean /= 1000.0;
  var /= 1000.0;
  CHECK(std::abs(mean) < 0.1);
  CHECK(std::abs(var - 1.0) < 0.15);
}

TEST_CASE("budget series by hand", "[verify]") {
  // x = (0, 1, 3), y = x, u = (2, 4); V = x^2/2, w = u y.
  Trajectory t;
  t.times = {0.0, 0.5, 1.0};
  t.x = Matrix(3, 1, {0.0, 1.0, 3.0});
  t.y = t.x;
  t.u = Matrix(2, 1, {2.0, 4.0});
  const SupplyRate w(SymMatrix::zero(1), Matrix(1, 1, {0.5}), SymMatrix::zero(1));
  const auto v = [](std::span<const double> x) { return 0.5 * x[0] * x[0]; };
  const auto s = budget_series(t, v, w);
  CHECK(s.delta_v == std::vector<double>{0.0, 0.5, 4.5});
  // 0.25 (2*0 + 2*1) = 0.5 ; + 0.25 (4*1 + 4*3) = 4
  CHECK(s.supply[1] == Approx(0.5));
  CHECK(s.supply[2] == Approx(4.5));

  const auto eq = dissipativity_check(t, v, w, BudgetMode::equality, BudgetOptions{0.0, 1e-12});
  CHECK(eq.pass);
  CHECK(eq.check == "energy_balance");
  // Halving the supply leaves a storage surplus of 2.25 at the end.
  const SupplyRate half(SymMatrix::zero(1), Matrix(1, 1, {0.25}), SymMatrix::zero(1));
  const auto ineq = dissipativity_check(t, v, half, BudgetMode::inequality, BudgetOptions{0.0, 1.0});
  CHECK_FALSE(ineq.pass);
  CHECK(ineq.max_residual == Approx(2.25));
  CHECK(ineq.offending == 2u);

  Trajectory bare = t;
  bare.x = Matrix();
  CHECK_THROWS_AS(budget_series(bare, v, w), MissingStates);
}

TEST_CASE("conservative models keep the energy balance to Euler accuracy", "[verify]") {
  std::mt19937_64 rng(3);
  const auto m = random_model(ProjectionKind::conservative, kDims, 4);
  const Matrix u = random_rectangle(200, 2, rng, 0.5);
  const auto coarse = simulate(m, u, SimConfig{0.01, 200, {}});
  const auto e1 = dissipativity_check(coarse, m.spec.storage, m.spec.supply, BudgetMode::equality);
  CHECK(e1.pass);
}

TEST_CASE("io_stable models respect their gain", "[verify]") {
  std::mt19937_64 rng(4);
  const auto m = random_model(ProjectionKind::io_stable, kDims, 5);
  std::vector<Matrix> inputs;
  for (int i = 0; i < 5; ++i) inputs.push_back(random_rectangle(200, 2, rng));
  const SimConfig cfg{0.01, 200, {}};
  const auto r = gain_check(m, inputs, m.spec.gamma, cfg);
  CHECK(r.pass);
  CHECK(r.samples == 5);
  CHECK(hj_check(m, normal_samples(3, 100, 1), m.spec.gamma, HjForm::stated).pass);
  const auto s = gain_check(m, inputs, m.spec.gamma, cfg, std::nullopt, Exec::serial);
  CHECK(s.max_residual == r.max_residual);
}
