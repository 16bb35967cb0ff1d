// Acceptance runner: one PASS/FAIL line per criterion, exit status 0 iff all
// pass. Oracles are written out here rather than taken from the library where
// that is practical (QME assembly, Cholesky membership test, finite
// differences, brute-force RMSE(t)).

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dissipnet/config.hpp"
#include "dissipnet/seed.hpp"
#include "support.hpp"

using namespace dissipnet;
using namespace dissipnet::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Cholesky of M + shift I; false when a pivot is not positive.
bool cholesky_ok(const Matrix& m, double shift) {
  const std::size_t n = m.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j) + shift;
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) return false;
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return true;
}

Matrix mul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k)
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += a(i, k) * b(k, j);
  return c;
}

// ---------------------------------------------------------------------------

Outcome kyp_suite() {
  const Dims dims{3, 2, 2};
  double worst = 0.0;
  std::string per_kind;
  for (auto kind : {ProjectionKind::dissipative, ProjectionKind::io_stable, ProjectionKind::conservative,
                    ProjectionKind::general}) {
    const auto model = random_model(kind, dims, 1000 + static_cast<std::uint64_t>(kind));
    const auto xs = normal_samples(dims.n, 1000, 77);
    double m = 0.0;
    for (const auto& x : xs) m = std::max(m, kyp_residual(model, x).max_abs());
    if (!std::isfinite(m)) m = INFINITY;
    worst = std::max(worst, m);
    per_kind += " " + to_string(kind) + "=" + fmt("%.1e", m);
  }
  return {worst <= 1e-8, "max residual" + per_kind};
}

Outcome idempotence_suite() {
  const Dims dims{3, 2, 2};
  double worst = 0.0;
  std::size_t pairs = 0;
  for (auto kind : kAllProjectionKinds) {
    if (kind == ProjectionKind::naive) continue;
    // 50 networks x 10 states
    for (std::uint64_t net = 0; net < 50; ++net) {
      const auto model = random_model(kind, dims, 5000 + 100 * static_cast<std::uint64_t>(kind) + net);
      const auto ev = evaluator(model);
      for (const auto& x : normal_samples(dims.n, 10, net)) {
        const auto gv = ev.grad_v(x);
        const auto lv = ev.l_value(x);
        const auto once = project_values<double>(model.spec, ev.raw(x), gv, lv);
        const auto twice = project_values<double>(model.spec, once, gv, lv);
        worst = std::max(worst, max_abs_diff(once, twice));
        ++pairs;
      }
    }
  }
  return {worst <= 1e-9, std::to_string(pairs) + " pairs over 7 kinds, max |P(P(x)) - P(x)| = " + fmt("%.2e", worst)};
}

// X'AX + B'X + X'B + C assembled from the block definitions.
double qme_oracle(const DynamicsValues<double>& d, const std::vector<double>& gv, const std::vector<double>& l,
                  const Matrix& w, const SupplyRate& s) {
  const std::size_t n = gv.size(), lo = d.h.size(), m = d.g.cols(), q = l.size();
  Matrix X(n + lo, 1 + m), A(n + lo, n + lo), B(n + lo, 1 + m), C(1 + m, 1 + m);
  for (std::size_t i = 0; i < n; ++i) {
    X(i, 0) = d.f[i];
    for (std::size_t c = 0; c < m; ++c) X(i, 1 + c) = d.g(i, c);
    B(i, 0) = 0.5 * gv[i];
  }
  for (std::size_t a = 0; a < lo; ++a) {
    X(n + a, 0) = d.h[a];
    for (std::size_t c = 0; c < m; ++c) {
      X(n + a, 1 + c) = d.j.empty() ? 0.0 : d.j(a, c);
      B(n + a, 1 + c) = -s.S(a, c);
    }
    for (std::size_t b = 0; b < lo; ++b) A(n + a, n + b) = -s.Q(a, b);
  }
  for (std::size_t k = 0; k < q; ++k) C(0, 0) += l[k] * l[k];
  for (std::size_t c = 0; c < m; ++c) {
    double lw = 0.0;
    for (std::size_t k = 0; k < q; ++k) lw += l[k] * w(k, c);
    C(0, 1 + c) = C(1 + c, 0) = lw;
    for (std::size_t e = 0; e < m; ++e) {
      double ww = 0.0;
      for (std::size_t k = 0; k < q; ++k) ww += w(k, c) * w(k, e);
      C(1 + c, 1 + e) = ww - s.R(c, e);
    }
  }
  const Matrix Xt = X.transpose(), Bt = B.transpose();
  const Matrix M = mul(mul(Xt, A), X) + mul(Bt, X) + mul(Xt, B) + C;
  return frobenius(M);
}

Outcome lemma3_suite() {
  std::mt19937_64 rng(3);
  const std::size_t n = 4, m = 2, lo = 3;
  double worst = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    const SupplyRate s = random_supply(ProjectionKind::general, m, lo, rng);
    const SymMatrix p = random_spd(n, rng, 0.5);
    const auto x = random_vector(n, rng);
    const auto gv = matvec(p.matrix(), x);
    // j on the ellipsoid: B + (-Q)^{-1/2} K C^{1/2} with |K| <= 1; every
    // fourth instance sits on the boundary (K has orthonormal columns).
    const SymMatrix neg_q(s.Q.matrix() * -1.0);
    const Matrix center = matmul(numerics::pd_inverse(neg_q).matrix(), s.S);
    const SymMatrix radius = feedthrough_radius(s);
    Matrix k = random_matrix(lo, m, rng);
    if (inst % 4 == 0) {
      k = numerics::angle_of(k);
    } else {
      k = k * (0.9 / std::max(1.0, std::sqrt(numerics::max_eigenvalue(SymMatrix(matmul(k.transpose(), k))))));
    }
    const Matrix j = center + mul(mul(numerics::pd_inv_sqrt(neg_q).matrix(), k), numerics::psd_sqrt(radius).matrix());
    // W'W = R + j'S + S'j + j'Qj
    const Matrix jt = j.transpose();
    Matrix ww = s.R.matrix() + mul(jt, s.S) + mul(s.S.transpose(), j) + mul(mul(jt, s.Q.matrix()), j);
    ww = (ww + ww.transpose()) * 0.5;
    const Matrix w = numerics::psd_sqrt(numerics::ramp_eig(SymMatrix(ww))).matrix();
    const auto l = random_vector(m, rng);

    DynamicsValues<double> raw;
    raw.f = random_vector(n, rng);
    raw.g = random_matrix(n, m, rng);
    raw.h = random_vector(lo, rng);
    raw.j = j;
    const auto sol = kyp_solution<double>(raw, gv, l, w, s);
    worst = std::max(worst, qme_oracle(sol, gv, l, w, s));
  }
  return {worst <= 1e-8, "200 instances, max QME residual " + fmt("%.2e", worst)};
}

Outcome ellipsoid_suite() {
  std::mt19937_64 rng(4);
  double member = 0.0, idem = 0.0;
  bool cholesky = true;
  for (int inst = 0; inst < 500; ++inst) {
    // sqrt(A)(X - B) needs full column rank, so n >= m.
    const std::size_t m = 1 + inst % 3, n = m + (inst / 3) % 3;
    const SymMatrix a = random_spd(n, rng, 0.2);
    const Matrix b = random_matrix(n, m, rng);
    const SymMatrix c = inst % 5 == 0 ? random_psd(m, std::max<std::size_t>(1, m - 1), rng) : random_spd(m, rng, 0.1);
    const numerics::Ellipsoid e(a, b, c);
    const Matrix x = random_matrix(n, m, rng, 3.0);
    const Matrix p = numerics::ellipsoid_project(e, x);
    const Matrix d = p - b;
    const Matrix gram = mul(mul(d.transpose(), a.matrix()), d);
    // C - gram + 1e-8 I must be positive definite.
    cholesky = cholesky && cholesky_ok(c.matrix() - gram, 1e-8);
    member = std::max(member, numerics::ellipsoid_violation(e, p));
    idem = std::max(idem, max_abs_diff(numerics::ellipsoid_project(e, p), p));
  }
  // j = 2, Q = -1, S = 0, R = 1: A = 1, B = 0, C = 1, projection 1.
  const numerics::Ellipsoid scalar(SymMatrix(Matrix(1, 1, {1.0})), Matrix(1, 1), SymMatrix(Matrix(1, 1, {1.0})));
  const double jd = numerics::ellipsoid_project(scalar, Matrix(1, 1, {2.0}))(0, 0);
  const bool ok = cholesky && member <= 1e-8 && idem <= 1e-9 && std::abs(jd - 1.0) <= 1e-12;
  return {ok, "500 instances, membership " + fmt("%.2e", member) + ", idempotence " + fmt("%.2e", idem) +
                  ", scalar j_d = " + fmt("%.15g", jd)};
}

// max_k |dV_k - int w| along an Euler rollout.
double conservation_error(const ProjectedModel& m, const Matrix& u, double dt) {
  const auto t = simulate(m, u, SimConfig{dt, u.rows(), {}});
  const auto s = budget_series(t, [&](std::span<const double> x) { return m.spec.storage(x); }, m.spec.supply);
  double e = 0.0;
  for (std::size_t k = 0; k < s.delta_v.size(); ++k) e = std::max(e, std::abs(s.delta_v[k] - s.supply[k]));
  return e;
}

Outcome conservation_suite() {
  const Dims dims{3, 2, 2};
  auto model = random_model(ProjectionKind::conservative, dims, 55);
  std::mt19937_64 rng(5);
  const double dt = 0.01;
  const std::size_t horizon = 200;
  const Matrix u = random_rectangle(horizon, dims.m, rng);
  Matrix u2(2 * horizon, dims.m);
  for (std::size_t k = 0; k < 2 * horizon; ++k)
    for (std::size_t c = 0; c < dims.m; ++c) u2(k, c) = u(k / 2, c);
  const double e1 = conservation_error(model, u, dt);
  const double e2 = conservation_error(model, u2, dt / 2);
  const double ratio = e1 / e2;
  return {e1 <= 1e-2 && ratio >= 1.5 && ratio <= 2.5,
          "error " + fmt("%.3e", e1) + " at dt, " + fmt("%.3e", e2) + " at dt/2, ratio " + fmt("%.3f", ratio)};
}

Outcome ground_truth_suite() {
  // MSD: 1/2 k q^2 + 1/2 m qd^2 + int c qd^2 == int F qd over [0, 10]. F is
  // held over each step, so the work is exactly F (q_{k+1} - q_k); the
  // dissipation integral is trapezoidal on a dt = 0.01 grid.
  double msd_rel = 0.0;
  const MsdParams mp{};
  const double dt = 0.01;
  const std::size_t steps = 1000;
  for (std::uint64_t i = 0; i < 20; ++i) {
    SignalSpec sig;
    sig.horizon = steps;
    sig.dt = dt;
    sig.seed = i;
    sig.min_segment = 50;
    sig.max_segment = 250;
    const Matrix u = gen_signal(sig);
    const auto t = simulate_msd(mp, u, SimConfig{dt, steps, {}});
    double work = 0.0, diss = 0.0, scale = 0.0, err = 0.0;
    const double e0 = 0.5 * mp.k * t.x(0, 0) * t.x(0, 0) + 0.5 * mp.m * t.x(0, 1) * t.x(0, 1);
    for (std::size_t k = 0; k < steps; ++k) {
      const double v0 = t.x(k, 1), v1 = t.x(k + 1, 1);
      work += u(k, 0) * (t.x(k + 1, 0) - t.x(k, 0));
      diss += 0.5 * dt * mp.c * (v0 * v0 + v1 * v1);
      const double e = 0.5 * mp.k * t.x(k + 1, 0) * t.x(k + 1, 0) + 0.5 * mp.m * v1 * v1 - e0;
      err = std::max(err, std::abs(e + diss - work));
      scale = std::max(scale, std::abs(work));
    }
    msd_rel = std::max(msd_rel, err / scale);
  }
  // Pendulum, n = 1, 2: dE <= int (tau qd_1 - c_1 qd_1^2) + tol.
  bool pend_ok = true;
  double pend_margin = -INFINITY;
  for (std::size_t n : {1u, 2u}) {
    const auto p = PendulumParams::standard(n);
    for (std::uint64_t i = 0; i < 10; ++i) {
      SignalSpec sig;
      sig.horizon = 100;
      sig.dt = 0.01;
      sig.seed = 100 + i;
      const auto t = simulate_pendulum(p, gen_signal(sig), SimConfig{0.01, 100, {}});
      const auto r = dissipativity_check(t, [&](std::span<const double> x) { return pendulum_energy(p, x); },
                                         pendulum_supply(p), BudgetMode::inequality);
      pend_ok = pend_ok && r.pass;
      pend_margin = std::max(pend_margin, r.max_residual);
    }
  }
  return {msd_rel <= 1e-3 && pend_ok, "MSD relative energy error " + fmt("%.2e", msd_rel) +
                                          "; pendulum max (dV - int w) " + fmt("%.2e", pend_margin) +
                                          " (tol 1e-2 dt H)"};
}

Outcome gradient_suite() {
  const Dims dims{2, 1, 2};
  std::mt19937_64 rng(7);
  auto model = random_model(ProjectionKind::dissipative, dims, 71, true, Activation::relu);
  Dataset data;
  data.dt = 0.1;
  for (std::uint64_t i = 0; i < 4; ++i) {
    SignalSpec sig;
    sig.horizon = 3;
    sig.seed = i;
    sig.min_segment = 1;
    sig.max_segment = 2;
    data.items.push_back(simulate_msd(MsdParams{}, gen_signal(sig), SimConfig{0.1, 3, {}}));
    data.splits.push_back(Split::train);
  }
  std::vector<const Trajectory*> batch;
  for (const auto& t : data.items) batch.push_back(&t);
  const auto samples = normal_samples(dims.n, 20, 9);
  const LossWeights w{1.0, 1e-3, 1e-4};
  const auto lg = batch_loss(model, batch, samples, w, Exec::serial);

  // Central differences; a parameter whose one-sided differences disagree
  // straddles a ReLU kink and is left out.
  auto p = model.flat_params();
  const double h = 1e-5;
  const double centre = lg.terms.total;
  double num = 0.0, den = 0.0;
  std::size_t kinks = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + h;
    model.set_flat_params(p);
    const double up = batch_loss(model, batch, samples, w, Exec::serial).terms.total;
    p[i] = keep - h;
    model.set_flat_params(p);
    const double down = batch_loss(model, batch, samples, w, Exec::serial).terms.total;
    p[i] = keep;
    const double fwd = (up - centre) / h, bwd = (centre - down) / h;
    if (std::abs(fwd - bwd) > 1e-3 * std::max(1.0, std::abs(fwd) + std::abs(bwd))) {
      ++kinks;
      continue;
    }
    const double fd = 0.5 * (fwd + bwd);
    num += (fd - lg.grad[i]) * (fd - lg.grad[i]);
    den += fd * fd;
  }
  model.set_flat_params(p);
  const double rel = std::sqrt(num / den);
  return {rel <= 1e-4 && kinks * 10 < p.size(), std::to_string(p.size() - kinks) + " of " + std::to_string(p.size()) +
                                                    " parameters away from kinks, relative error " + fmt("%.2e", rel)};
}

ExperimentConfig training_config() {
  return load_config(std::filesystem::path(DISSIPNET_SOURCE_DIR) / "configs" / "msd_conservative.json");
}

// Shared with the boundedness criterion.
std::optional<ProjectedModel> g_trained;

Outcome training_suite() {
  const auto cfg = training_config();
  if (cfg.optimizer.epochs > 500 || cfg.projection != ProjectionKind::conservative || cfg.count != 100) {
    return {false, "configs/msd_conservative.json is outside the desk-scale budget"};
  }
  const auto data = generate_dataset(dataset_spec(cfg));
  auto model = build_from_config(cfg, model_dims(cfg, data.input_dim(), data.output_dim()));
  const auto test = data.indices(Split::test);
  std::vector<Matrix> inputs, targets;
  for (auto i : test) {
    inputs.push_back(data.items[i].u);
    targets.push_back(data.items[i].y);
  }
  const double before = rmse(predict(model, inputs, data.dt), targets);
  train(model, data, resolved_loss(cfg), cfg.optimizer);
  const double after = rmse(predict(model, inputs, data.dt), targets);
  g_trained = model;
  return {after <= 0.3 && after * 5.0 <= before,
          std::to_string(cfg.optimizer.epochs) + " epochs, held-out RMSE " + fmt("%.4f", after) + " (untrained " +
              fmt("%.4f", before) + ", ratio " + fmt("%.1f", before / after) + ")"};
}

Outcome boundedness_suite() {
  const std::size_t horizon = 1000;
  const double dt = 0.1;
  std::vector<std::pair<std::string, ProjectedModel>> models;
  if (g_trained) models.emplace_back("trained conservative", *g_trained);
  models.emplace_back("dissipative", random_model(ProjectionKind::dissipative, {2, 1, 2}, 91, false));
  models.emplace_back("io_stable", random_model(ProjectionKind::io_stable, {2, 1, 2}, 92, false));
  models.emplace_back("conservative", random_model(ProjectionKind::conservative, {2, 1, 2}, 93, false));
  const Matrix u(horizon, 1, 1.0);
  bool ok = true;
  std::string detail;
  for (const auto& [name, m] : models) {
    VerifyReport r;
    bool finite = true;
    double peak = 0.0;
    try {
      const auto t = simulate(m, u, SimConfig{dt, horizon, {}});
      for (double v : t.y.data()) finite = finite && std::isfinite(v);
      peak = max_abs(t.y);
      r = dissipativity_check(t, m.spec.storage, m.spec.supply, BudgetMode::inequality);
    } catch (const NonFiniteState&) {
      finite = false;
    }
    ok = ok && finite && r.pass;
    detail += name + (finite && r.pass ? " ok" : " FAILED") +
              fmt(" (max |y| %.2e, budget excess ", peak) + fmt("%.2e); ", r.max_residual);
  }
  // The naive baseline is reported, not asserted.
  const auto naive = random_model(ProjectionKind::naive, {2, 1, 2}, 94, false);
  try {
    const auto t = simulate(naive, u, SimConfig{dt, horizon, {}});
    detail += "naive (report only) finite, max |y| " + fmt("%.2e", max_abs(t.y));
  } catch (const NonFiniteState& e) {
    detail += std::string("naive (report only) diverged: ") + e.what();
  }
  return {ok, detail};
}

// RMSE(t)_k = sqrt(sum_i sum_c e^2 / (N l)), written as plainly as possible.
Outcome rmse_suite() {
  std::mt19937_64 rng(10);
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t n = 1 + inst % 7, rows = 5 + inst, cols = 1 + inst % 3;
    std::vector<Matrix> pred, target;
    for (std::size_t i = 0; i < n; ++i) {
      pred.push_back(random_matrix(rows, cols, rng));
      target.push_back(random_matrix(rows, cols, rng));
    }
    const auto got = rmse_t(pred, target);
    double mean = 0.0;
    for (std::size_t k = 0; k < rows; ++k) {
      long double s = 0.0L;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < cols; ++c) {
          const long double e = static_cast<long double>(pred[i](k, c)) - target[i](k, c);
          s += e * e;
        }
      const double ref = static_cast<double>(std::sqrt(s / static_cast<long double>(n * cols)));
      worst = std::max(worst, std::abs(ref - got[k]));
      mean += ref;
    }
    worst = std::max(worst, std::abs(mean / static_cast<double>(rows) - rmse(pred, target)));
  }
  return {worst <= 1e-12, "50 random sets, max deviation " + fmt("%.2e", worst)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

// Optional arguments select criteria by number; the default runs all.
int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "KYP certificate suite", 60, kyp_suite},
      {2, "idempotence suite", 60, idempotence_suite},
      {3, "general-solution QME certification", 30, lemma3_suite},
      {4, "ellipsoid projection", 10, ellipsoid_suite},
      {5, "energy-conservation equality", 30, conservation_suite},
      {6, "ground-truth certificates", 60, ground_truth_suite},
      {7, "gradient integrity", 30, gradient_suite},
      {8, "desk-scale MSD training", 900, training_suite},
      {9, "boundedness under a 1000-step step input", 60, boundedness_suite},
      {10, "RMSE(t) metric", 5, rmse_suite},
  };
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("[%s] %2d %s: %s; %.1f s (budget %.0f s)%s\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                secs, c.budget_s, in_time ? "" : " OVER BUDGET");
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
