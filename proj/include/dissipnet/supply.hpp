#pragma once

// Quadratic supply rates w(u, y) = y'Qy + 2y'Su + u'Ru and quadratic storage
// functions V(x) = x'Px/2.

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dissipnet/numerics.hpp"

namespace dissipnet {

using numerics::SymMatrix;

struct SupplyRate {
  SymMatrix Q;  // l x l
  Matrix S;     // l x m
  SymMatrix R;  // m x m

  std::size_t output_dim() const noexcept { return Q.dim(); }
  std::size_t input_dim() const noexcept { return R.dim(); }

  SupplyRate() = default;
  SupplyRate(SymMatrix q, Matrix s, SymMatrix r);
};

double supply_eval(const SupplyRate& w, std::span<const double> u, std::span<const double> y);

// The Theorem-1 path needs R >= 0.
void require_psd_r(const SupplyRate& w);
// The direct-feedthrough path needs Q < 0 and R - S'Q^{-1}S >= 0.
void require_general_path(const SupplyRate& w);
// R - S'Q^{-1}S, the radius of the feedthrough ellipsoid.
SymMatrix feedthrough_radius(const SupplyRate& w);

enum class PresetKind { stable, io_stable, passive, conservative, custom, msd, pendulum };

std::string to_string(PresetKind k);
PresetKind preset_from_string(const std::string& s);

struct PresetArgs {
  std::size_t output_dim = 1;  // l
  std::size_t input_dim = 1;   // m
  double gamma2 = 2.0;         // io_stable
  double damping = 1.0;        // msd: c, pendulum: c_1
  Matrix Q, S, R;              // conservative/custom
};

SupplyRate preset(PresetKind kind, const PresetArgs& args);

class StorageFunction {
 public:
  StorageFunction() = default;
  explicit StorageFunction(SymMatrix p);
  static StorageFunction half_squared_norm(std::size_t n) { return StorageFunction(SymMatrix::identity(n)); }

  std::size_t dim() const noexcept { return p_.dim(); }
  const SymMatrix& weight() const noexcept { return p_; }

  double operator()(std::span<const double> x) const;

  template <class T>
  std::vector<T> gradient(std::span<const T> x) const {
    const std::size_t n = p_.dim();
    if (x.size() != n) throw DimensionMismatch("storage gradient input");
    std::vector<T> g(n, T(0.0));
    for (std::size_t i = 0; i < n; ++i) {
      T s(0.0);
      for (std::size_t j = 0; j < n; ++j) {
        const double pij = p_(i, j);
        if (pij != 0.0) s = s + pij * x[j];
      }
      g[i] = s;
    }
    return g;
  }

 private:
  SymMatrix p_;
};

inline double storage_eval(const StorageFunction& v, std::span<const double> x) { return v(x); }
inline std::vector<double> storage_grad(const StorageFunction& v, std::span<const double> x) {
  return v.gradient<double>(x);
}

// Guard applied to |grad V|^2 wherever it is a denominator.
inline constexpr double kGradGuard = 1e-8;

nlohmann::json to_json(const SupplyRate& w);
SupplyRate supply_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace dissipnet
