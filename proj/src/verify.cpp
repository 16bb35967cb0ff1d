#include "dissipnet/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

namespace dissipnet {

VerifyReport summarize(std::string check, const std::vector<double>& residuals, double threshold) {
  VerifyReport r;
  r.check = std::move(check);
  r.samples = residuals.size();
  r.threshold = threshold;
  std::size_t arg = 0;
  bool finite = true;
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    const double v = residuals[i];
    if (!std::isfinite(v)) {
      if (finite) arg = i;
      finite = false;
      r.max_residual = std::numeric_limits<double>::infinity();
      continue;
    }
    if (finite && v > r.max_residual) {
      r.max_residual = v;
      arg = i;
    }
  }
  r.pass = finite && r.max_residual <= threshold;
  if (!r.pass && !residuals.empty()) r.offending = arg;
  return r;
}

nlohmann::json to_json(const VerifyReport& r) {
  nlohmann::json j{{"check", r.check},         {"samples", r.samples}, {"max_residual", r.max_residual},
                   {"threshold", r.threshold}, {"pass", r.pass}};
  if (r.offending) j["offending_sample"] = *r.offending;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

std::string format_table(const std::vector<VerifyReport>& reports) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-32s %8s %14s %12s  %s\n", "check", "samples", "max_residual", "threshold",
                "result");
  out += buf;
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-32s %8zu %14.6e %12.3e  %s", r.check.c_str(), r.samples, r.max_residual,
                  r.threshold, r.pass ? "PASS" : "FAIL");
    out += buf;
    if (r.offending) out += " (sample " + std::to_string(*r.offending) + ")";
    if (!r.note.empty()) out += "  " + r.note;
    out += '\n';
  }
  return out;
}

double KypResidual::max_abs() const {
  double s = std::abs(r1);
  for (double v : r2) s = std::max(s, std::abs(v));
  if (!r3.empty()) s = std::max(s, dissipnet::max_abs(r3));
  return s;
}

KypResidual kyp_residual(const DynamicsValues<double>& d, std::span<const double> grad_v, std::span<const double> l,
                         const Matrix& w, const SupplyRate& supply) {
  const std::size_t n = grad_v.size(), m = d.g.cols(), lo = d.h.size();
  if (d.f.size() != n || d.g.rows() != n || supply.output_dim() != lo || supply.input_dim() != m) {
    throw DimensionMismatch("kyp_residual: inconsistent dimensions");
  }
  const bool has_l = !l.empty() && !w.empty();
  if (has_l && (w.rows() != l.size() || w.cols() != m)) throw DimensionMismatch("kyp_residual: W must be q x m");
  const Matrix j = d.j.empty() ? Matrix(lo, m) : d.j;

  KypResidual r;
  double hqh = 0.0;
  for (std::size_t a = 0; a < lo; ++a)
    for (std::size_t b = 0; b < lo; ++b) hqh += d.h[a] * supply.Q(a, b) * d.h[b];
  double ll = 0.0;
  for (double v : l) ll += v * v;
  r.r1 = dot<double>(grad_v, d.f) - hqh + ll;

  const Matrix s_eff = supply.S + matmul(supply.Q.matrix(), j);
  r.r2.assign(m, 0.0);
  for (std::size_t c = 0; c < m; ++c) {
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += grad_v[i] * d.g(i, c);
    v *= 0.5;
    for (std::size_t a = 0; a < lo; ++a) v -= d.h[a] * s_eff(a, c);
    if (has_l)
      for (std::size_t q = 0; q < l.size(); ++q) v += l[q] * w(q, c);
    r.r2[c] = v;
  }

  Matrix wtw = has_l || !w.empty() ? matmul(w.transpose(), w) : Matrix(m, m);
  const Matrix jts = matmul(j.transpose(), supply.S);
  r.r3 = wtw - supply.R.matrix() - jts - jts.transpose() - matmul(j.transpose(), matmul(supply.Q.matrix(), j));
  return r;
}

KypResidual kyp_residual(const ProjectedModel& m, std::span<const double> x) {
  const auto ev = evaluator(m);
  const auto gv = ev.grad_v(x);
  const auto lv = ev.l_value(x);
  const auto d = ev.projected(x);
  const Matrix w = certificate_w(m.spec, d);
  return kyp_residual(d, gv, w.empty() ? std::span<const double>() : std::span<const double>(lv), w, m.spec.supply);
}

double lure_residual(const DynamicsValues<double>& d, std::span<const double> grad_v) {
  if (d.h.size() != d.g.cols()) throw DimensionMismatch("Lur'e residual needs m == l");
  double r = relu(dot<double>(grad_v, d.f));
  for (std::size_t c = 0; c < d.g.cols(); ++c) {
    double v = 0.0;
    for (std::size_t i = 0; i < grad_v.size(); ++i) v += grad_v[i] * d.g(i, c);
    r = std::max(r, std::abs(v - 2.0 * d.h[c]));
  }
  return r;
}

QmeInstance qme_build(const DynamicsValues<double>& d, std::span<const double> grad_v, std::span<const double> l,
                      const Matrix& w, const SupplyRate& supply) {
  const std::size_t n = grad_v.size(), m = d.g.cols(), lo = d.h.size();
  if (d.f.size() != n || d.g.rows() != n || supply.output_dim() != lo || supply.input_dim() != m) {
    throw DimensionMismatch("qme_build: inconsistent dimensions");
  }
  const bool has_l = !l.empty() && !w.empty();
  if (has_l && (w.rows() != l.size() || w.cols() != m)) throw DimensionMismatch("qme_build: W must be q x m");
  QmeInstance q;
  q.X = Matrix(n + lo, 1 + m);
  for (std::size_t i = 0; i < n; ++i) {
    q.X(i, 0) = d.f[i];
    for (std::size_t c = 0; c < m; ++c) q.X(i, 1 + c) = d.g(i, c);
  }
  for (std::size_t a = 0; a < lo; ++a) {
    q.X(n + a, 0) = d.h[a];
    if (!d.j.empty())
      for (std::size_t c = 0; c < m; ++c) q.X(n + a, 1 + c) = d.j(a, c);
  }
  q.A = Matrix(n + lo, n + lo);
  for (std::size_t a = 0; a < lo; ++a)
    for (std::size_t b = 0; b < lo; ++b) q.A(n + a, n + b) = -supply.Q(a, b);
  q.B = Matrix(n + lo, 1 + m);
  for (std::size_t i = 0; i < n; ++i) q.B(i, 0) = 0.5 * grad_v[i];
  for (std::size_t a = 0; a < lo; ++a)
    for (std::size_t c = 0; c < m; ++c) q.B(n + a, 1 + c) = -supply.S(a, c);
  q.C = Matrix(1 + m, 1 + m);
  if (has_l) {
    double ll = 0.0;
    for (double v : l) ll += v * v;
    q.C(0, 0) = ll;
    for (std::size_t c = 0; c < m; ++c) {
      double lw = 0.0;
      for (std::size_t k = 0; k < l.size(); ++k) lw += l[k] * w(k, c);
      q.C(0, 1 + c) = lw;
      q.C(1 + c, 0) = lw;
    }
  }
  const Matrix wtw = w.empty() ? Matrix(m, m) : matmul(w.transpose(), w);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) q.C(1 + a, 1 + b) = wtw(a, b) - supply.R(a, b);
  return q;
}

double qme_residual(const QmeInstance& q) {
  const std::size_t rows = q.X.rows(), cols = q.X.cols();
  if (q.A.rows() != rows || q.A.cols() != rows || q.B.rows() != rows || q.B.cols() != cols || q.C.rows() != cols ||
      q.C.cols() != cols) {
    throw DimensionMismatch("qme_residual: block dimensions");
  }
  const Matrix xt = q.X.transpose();
  const Matrix btx = matmul(q.B.transpose(), q.X);
  return frobenius(matmul(xt, matmul(q.A, q.X)) + btx + btx.transpose() + q.C);
}

std::vector<std::vector<double>> normal_samples(std::size_t dim, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<std::vector<double>> xs(count, std::vector<double>(dim));
  for (auto& x : xs)
    for (auto& v : x) v = nd(rng);
  return xs;
}

namespace {

bool is_passive(ProjectionKind k) { return k == ProjectionKind::passive_alpha || k == ProjectionKind::passive_beta; }

}  // namespace

VerifyReport kyp_audit(const ProjectedModel& m, const std::vector<std::vector<double>>& xs, double threshold,
                       Exec exec) {
  const auto ev = evaluator(m);
  const bool passive = is_passive(m.spec.kind);
  std::vector<double> res(xs.size());
  for_each_index(xs.size(), exec, [&](std::size_t i) {
    const auto& x = xs[i];
    const auto gv = ev.grad_v(x);
    const auto d = ev.projected(x);
    if (passive) {
      res[i] = lure_residual(d, gv);
      return;
    }
    if (m.spec.kind == ProjectionKind::stable) {
      res[i] = relu(dot<double>(gv, d.f));
      return;
    }
    const auto lv = ev.l_value(x);
    const Matrix w = certificate_w(m.spec, d);
    res[i] = kyp_residual(d, gv, w.empty() ? std::span<const double>() : std::span<const double>(lv), w,
                          m.spec.supply)
                 .max_abs();
  });
  const char* name = passive ? "lure_residual" : m.spec.kind == ProjectionKind::stable ? "lyapunov_decrease" : "kyp_residual";
  auto r = summarize(name, res, threshold);
  r.note = to_string(m.spec.kind);
  return r;
}

VerifyReport idempotence_audit(const ProjectedModel& m, const std::vector<std::vector<double>>& xs, double threshold,
                               Exec exec) {
  const auto ev = evaluator(m);
  std::vector<double> res(xs.size());
  for_each_index(xs.size(), exec, [&](std::size_t i) {
    const auto& x = xs[i];
    const auto gv = ev.grad_v(x);
    const auto lv = ev.l_value(x);
    const auto once = project_values<double>(m.spec, ev.raw(x), gv, lv);
    const auto twice = project_values<double>(m.spec, once, gv, lv);
    res[i] = max_abs_diff(once, twice);
  });
  auto r = summarize("idempotence", res, threshold);
  r.note = to_string(m.spec.kind);
  return r;
}

double hj_lhs(const DynamicsValues<double>& d, std::span<const double> grad_v, double gamma, HjForm form) {
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  double gg = 0.0;
  for (std::size_t c = 0; c < d.g.cols(); ++c) {
    double v = 0.0;
    for (std::size_t i = 0; i < grad_v.size(); ++i) v += grad_v[i] * d.g(i, c);
    gg += v * v;
  }
  double hh = 0.0;
  for (double v : d.h) hh += v * v;
  const double vf = dot<double>(grad_v, d.f);
  const double quad = gg / (4.0 * gamma * gamma) + hh;
  return form == HjForm::stated ? vf - quad : vf + quad;
}

VerifyReport hj_check(const ProjectedModel& m, const std::vector<std::vector<double>>& xs, double gamma, HjForm form,
                      double threshold, Exec exec) {
  const std::string name = form == HjForm::stated ? "hamilton_jacobi" : "hamilton_jacobi_standard";
  if (m.raw.j) {
    VerifyReport r;
    r.check = name;
    r.threshold = threshold;
    r.pass = false;
    r.note = "model has a feedthrough term; the check assumes j = 0";
    return r;
  }
  const auto ev = evaluator(m);
  std::vector<double> res(xs.size());
  for_each_index(xs.size(), exec, [&](std::size_t i) {
    const auto& x = xs[i];
    res[i] = hj_lhs(ev.projected(x), ev.grad_v(x), gamma, form);
  });
  // The reported residual is the largest left-hand side; a negative maximum
  // is a pass with margin.
  VerifyReport r;
  r.check = name;
  r.samples = xs.size();
  r.threshold = threshold;
  r.max_residual = res.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t i = 0; i < res.size(); ++i) {
    const double v = std::isfinite(res[i]) ? res[i] : std::numeric_limits<double>::infinity();
    if (v > r.max_residual) {
      r.max_residual = v;
      arg = i;
    }
  }
  r.pass = r.max_residual <= threshold;
  if (!r.pass) r.offending = arg;
  return r;
}

namespace {

double l2_norm(const Matrix& s, std::size_t rows, double dt) {
  double acc = 0.0;
  for (std::size_t k = 0; k < rows; ++k)
    for (double v : s.row(k)) acc += v * v;
  return std::sqrt(dt * acc);
}

}  // namespace

VerifyReport gain_check(const ProjectedModel& m, const std::vector<Matrix>& inputs, double gamma, const SimConfig& cfg,
                        std::optional<double> tol, Exec exec) {
  SimConfig sim = cfg;
  sim.x0.clear();
  const double threshold = tol.value_or(1e-2 * cfg.dt * static_cast<double>(cfg.horizon));
  std::vector<double> res(inputs.size());
  for_each_index(inputs.size(), exec, [&](std::size_t i) {
    try {
      const auto t = simulate(m, inputs[i], sim);
      res[i] = l2_norm(t.y, sim.horizon, sim.dt) - gamma * l2_norm(t.u, sim.horizon, sim.dt);
    } catch (const NonFiniteState&) {
      res[i] = std::numeric_limits<double>::infinity();
    }
  });
  // Negative residuals are margin; summarize() only tracks the positive side.
  auto r = summarize("l2_gain", res, threshold);
  r.note = "gamma=" + std::to_string(gamma);
  return r;
}

BudgetSeries budget_series(const Trajectory& t, const StorageCallback& v, const SupplyRate& w) {
  if (!t.has_states()) throw MissingStates("dissipation budget needs the state trajectory");
  const std::size_t rows = t.x.rows();
  if (t.y.rows() != rows || t.u.rows() + 1 != rows) throw DimensionMismatch("trajectory rows");
  const double dt = t.dt();
  BudgetSeries s;
  s.delta_v.assign(rows, 0.0);
  s.supply.assign(rows, 0.0);
  const double v0 = v(t.x.row(0));
  for (std::size_t k = 1; k < rows; ++k) {
    s.delta_v[k] = v(t.x.row(k)) - v0;
    const auto u = t.u.row(k - 1);
    s.supply[k] = s.supply[k - 1] + 0.5 * dt * (supply_eval(w, u, t.y.row(k - 1)) + supply_eval(w, u, t.y.row(k)));
  }
  return s;
}

VerifyReport dissipativity_check(const Trajectory& t, const StorageCallback& v, const SupplyRate& w, BudgetMode mode,
                                 const BudgetOptions& opts) {
  const auto s = budget_series(t, v, w);
  const double tol = opts.tol.value_or(opts.c_tol * t.dt() * static_cast<double>(t.horizon()));
  std::vector<double> res(s.delta_v.size());
  for (std::size_t k = 0; k < res.size(); ++k) {
    const double gap = s.delta_v[k] - s.supply[k];
    res[k] = mode == BudgetMode::equality ? std::abs(gap) : gap;
  }
  return summarize(mode == BudgetMode::equality ? "energy_balance" : "dissipation_budget", res, tol);
}

VerifyReport dissipativity_check(const Trajectory& t, const StorageFunction& v, const SupplyRate& w, BudgetMode mode,
                                 const BudgetOptions& opts) {
  return dissipativity_check(
      t, [&v](std::span<const double> x) { return v(x); }, w, mode, opts);
}

}  // namespace dissipnet
