#pragma once

// Numerical certificates: KYP and QME residuals, trajectory dissipation
// budgets, Hamilton-Jacobi and L2-gain checks, and projection audits.
// Sample audits only cover the states they are given; a pass is statistical
// evidence, not a proof.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dissipnet/dynamics.hpp"
#include "dissipnet/parallel.hpp"

namespace dissipnet {

struct VerifyReport {
  std::string check;
  std::size_t samples = 0;
  double max_residual = 0.0;
  double threshold = 0.0;
  bool pass = true;
  std::optional<std::size_t> offending;  // first sample attaining the max when failing
  std::string note;
};

// pass <=> every residual is finite and max <= threshold.
VerifyReport summarize(std::string check, const std::vector<double>& residuals, double threshold);

nlohmann::json to_json(const VerifyReport& r);
std::string format_table(const std::vector<VerifyReport>& reports);

// r1 = grad V'f - h'Qh + l'l
// r2 = grad V'g/2 - h'(S + Qj) + l'W
// r3 = W'W - R - j'S - S'j - j'Qj
// An empty l or W stands for zero.
struct KypResidual {
  double r1 = 0.0;
  std::vector<double> r2;
  Matrix r3;
  double max_abs() const;
};

KypResidual kyp_residual(const DynamicsValues<double>& d, std::span<const double> grad_v,
                         std::span<const double> l, const Matrix& w, const SupplyRate& supply);
// Residuals of the projected model at x with the certificate (l, W) of its kind.
KypResidual kyp_residual(const ProjectedModel& m, std::span<const double> x);

// Lur'e residual max(ReLU(grad V'f), |grad V'g - 2h'|) of the passive kinds.
double lure_residual(const DynamicsValues<double>& d, std::span<const double> grad_v);

// X'AX + B'X + X'B + C = 0 with X = [[f, g], [h, j]].
struct QmeInstance {
  Matrix X;  // (n+l) x (1+m)
  Matrix A;  // (n+l) x (n+l)
  Matrix B;  // (n+l) x (1+m)
  Matrix C;  // (1+m) x (1+m)
};

QmeInstance qme_build(const DynamicsValues<double>& d, std::span<const double> grad_v, std::span<const double> l,
                      const Matrix& w, const SupplyRate& supply);
// Frobenius norm of X'AX + B'X + X'B + C.
double qme_residual(const QmeInstance& q);

std::vector<std::vector<double>> normal_samples(std::size_t dim, std::size_t count, std::uint64_t seed);

// Passive kinds are audited with lure_residual, the stable kind with
// ReLU(grad V'f), all others with kyp_residual.
VerifyReport kyp_audit(const ProjectedModel& m, const std::vector<std::vector<double>>& xs, double threshold = 1e-8,
                       Exec exec = Exec::parallel);

// Once- vs twice-projected values of (f, g, h, j).
VerifyReport idempotence_audit(const ProjectedModel& m, const std::vector<std::vector<double>>& xs,
                               double threshold = 1e-9, Exec exec = Exec::parallel);

// stated:   grad V'f - |grad V'g|^2/(4 gamma^2) - |h|^2 <= 0
// standard: grad V'f + |grad V'g|^2/(4 gamma^2) + |h|^2 <= 0
enum class HjForm { stated, standard };
double hj_lhs(const DynamicsValues<double>& d, std::span<const double> grad_v, double gamma, HjForm form);
// The model must have no feedthrough term.
VerifyReport hj_check(const ProjectedModel& m, const std::vector<std::vector<double>>& xs, double gamma,
                      HjForm form = HjForm::stated, double threshold = 1e-8, Exec exec = Exec::parallel);

// Discrete L2 norms sqrt(dt sum |.|^2) over the horizon from x0 = 0:
// residual |y| - gamma |u| against tol (default 1e-2 dt horizon).
VerifyReport gain_check(const ProjectedModel& m, const std::vector<Matrix>& inputs, double gamma,
                        const SimConfig& cfg, std::optional<double> tol = std::nullopt, Exec exec = Exec::parallel);

// Per-prefix storage change V(x_k) - V(x_0) and trapezoidal supply integral
// sum_{i<k} dt/2 (w(u_i, y_i) + w(u_i, y_{i+1})).
struct BudgetSeries {
  std::vector<double> delta_v;  // horizon+1, delta_v[0] = 0
  std::vector<double> supply;   // horizon+1, supply[0] = 0
};
using StorageCallback = std::function<double(std::span<const double>)>;
BudgetSeries budget_series(const Trajectory& t, const StorageCallback& v, const SupplyRate& w);

enum class BudgetMode { inequality, equality };
struct BudgetOptions {
  double c_tol = 1e-2;           // tol = c_tol dt horizon
  std::optional<double> tol;     // overrides c_tol
};
VerifyReport dissipativity_check(const Trajectory& t, const StorageCallback& v, const SupplyRate& w, BudgetMode mode,
                                 const BudgetOptions& opts = {});
VerifyReport dissipativity_check(const Trajectory& t, const StorageFunction& v, const SupplyRate& w, BudgetMode mode,
                                 const BudgetOptions& opts = {});

}  // namespace dissipnet
