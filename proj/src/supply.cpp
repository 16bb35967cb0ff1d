#include "dissipnet/supply.hpp"

namespace dissipnet {

SupplyRate::SupplyRate(SymMatrix q, Matrix s, SymMatrix r) : Q(std::move(q)), S(std::move(s)), R(std::move(r)) {
  if (S.rows() != Q.dim() || S.cols() != R.dim()) {
    throw DimensionMismatch("supply blocks: Q " + std::to_string(Q.dim()) + ", S " + std::to_string(S.rows()) + "x" +
                            std::to_string(S.cols()) + ", R " + std::to_string(R.dim()));
  }
}

double supply_eval(const SupplyRate& w, std::span<const double> u, std::span<const double> y) {
  if (u.size() != w.input_dim() || y.size() != w.output_dim()) {
    throw DimensionMismatch("supply_eval: u has " + std::to_string(u.size()) + ", y has " + std::to_string(y.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) s += y[i] * w.Q(i, j) * y[j];
    for (std::size_t j = 0; j < u.size(); ++j) s += 2.0 * y[i] * w.S(i, j) * u[j];
  }
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < u.size(); ++j) s += u[i] * w.R(i, j) * u[j];
  return s;
}

void require_psd_r(const SupplyRate& w) {
  const double lo = numerics::min_eigenvalue(w.R);
  if (lo < -numerics::kTolPsd) throw InvalidPreset("R has eigenvalue " + std::to_string(lo) + " < 0");
}

SymMatrix feedthrough_radius(const SupplyRate& w) {
  const SymMatrix q_inv = numerics::pd_inverse(SymMatrix(w.Q.matrix() * -1.0));
  // S'Q^{-1}S = -S'(-Q)^{-1}S
  return SymMatrix(w.R.matrix() + matmul(w.S.transpose(), matmul(q_inv.matrix(), w.S)));
}

void require_general_path(const SupplyRate& w) {
  if (numerics::max_eigenvalue(w.Q) >= -numerics::kTolPd) throw InvalidPreset("Q must be negative definite");
  const double lo = numerics::min_eigenvalue(feedthrough_radius(w));
  if (lo < -numerics::kTolPsd) throw InvalidPreset("R - S'Q^{-1}S has eigenvalue " + std::to_string(lo));
}

std::string to_string(PresetKind k) {
  switch (k) {
    case PresetKind::stable: return "stable";
    case PresetKind::io_stable: return "io_stable";
    case PresetKind::passive: return "passive";
    case PresetKind::conservative: return "conservative";
    case PresetKind::custom: return "custom";
    case PresetKind::msd: return "msd";
    case PresetKind::pendulum: return "pendulum";
  }
  return "custom";
}

PresetKind preset_from_string(const std::string& s) {
  for (auto k : {PresetKind::stable, PresetKind::io_stable, PresetKind::passive, PresetKind::conservative,
                 PresetKind::custom, PresetKind::msd, PresetKind::pendulum}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown supply preset '" + s + "'");
}

namespace {

// Supply rate of a damped mechanical system observed through (position,
// velocity) with force input: w = -c v^2 + v u.
SupplyRate mechanical(double damping) {
  if (!(damping > 0.0)) throw InvalidPreset("damping must be positive");
  Matrix q(2, 2);
  q(1, 1) = -damping;
  Matrix s(2, 1);
  s(1, 0) = 0.5;
  return {SymMatrix(q), s, SymMatrix::zero(1)};
}

}  // namespace

SupplyRate preset(PresetKind kind, const PresetArgs& a) {
  const std::size_t l = a.output_dim, m = a.input_dim;
  switch (kind) {
    case PresetKind::stable:
      return {SymMatrix::zero(l), Matrix(l, m), SymMatrix::zero(m)};
    case PresetKind::io_stable:
      if (!(a.gamma2 > 0.0)) throw InvalidPreset("io_stable needs gamma^2 > 0");
      return {SymMatrix(Matrix::identity(l) * -1.0), Matrix(l, m), SymMatrix(Matrix::identity(m) * a.gamma2)};
    case PresetKind::passive: {
      if (l != m) throw InvalidPreset("passivity needs equal input and output dimensions");
      return {SymMatrix::zero(l), Matrix::identity(m) * 0.5, SymMatrix::zero(m)};
    }
    case PresetKind::conservative: {
      if (!a.R.empty() && max_abs(a.R) != 0.0) throw InvalidPreset("conservative supply requires R = 0");
      SupplyRate w{SymMatrix(a.Q), a.S, SymMatrix::zero(a.S.cols())};
      return w;
    }
    case PresetKind::custom: {
      SupplyRate w{SymMatrix(a.Q), a.S, SymMatrix(a.R)};
      return w;
    }
    case PresetKind::msd:
    case PresetKind::pendulum:
      return mechanical(a.damping);
  }
  throw InvalidPreset("unhandled preset");
}

StorageFunction::StorageFunction(SymMatrix p) : p_(std::move(p)) {
  if (numerics::min_eigenvalue(p_) <= numerics::kTolPd) throw InvalidPreset("storage weight must be positive definite");
}

double StorageFunction::operator()(std::span<const double> x) const {
  if (x.size() != p_.dim()) throw DimensionMismatch("storage input");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) s += x[i] * p_(i, j) * x[j];
  return 0.5 * s;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("matrix must be a nested array");
  const std::size_t rows = j.size();
  const std::size_t cols = rows ? j.at(0).size() : 0;
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto r = j.at(i).get<std::vector<double>>();
    if (r.size() != cols) throw ConfigError("ragged matrix row " + std::to_string(i));
    for (std::size_t k = 0; k < cols; ++k) m(i, k) = r[k];
  }
  return m;
}

nlohmann::json to_json(const SupplyRate& w) {
  return {{"Q", matrix_to_json(w.Q)}, {"S", matrix_to_json(w.S)}, {"R", matrix_to_json(w.R)}};
}

SupplyRate supply_from_json(const nlohmann::json& j) {
  return {SymMatrix(matrix_from_json(j.at("Q"))), matrix_from_json(j.at("S")), SymMatrix(matrix_from_json(j.at("R")))};
}

}  // namespace dissipnet
