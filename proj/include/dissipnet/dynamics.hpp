#pragma once

// Fixed-step explicit Euler rollouts of x' = f(x) + g(x)u, y = h(x) + j(x)u
// under zero-order-hold inputs, plus the trajectory text format.

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dissipnet/projection.hpp"

namespace dissipnet {

// States beyond this magnitude count as divergence.
inline constexpr double kDivergenceBound = 1e6;

struct SimConfig {
  double dt = 0.1;
  std::size_t horizon = 100;
  std::vector<double> x0;  // empty: the origin
};

struct Trajectory {
  std::vector<double> times;  // horizon+1
  Matrix x;                   // (horizon+1) x n, may be empty
  Matrix u;                   // horizon x m
  Matrix y;                   // (horizon+1) x l

  std::size_t horizon() const noexcept { return u.rows(); }
  bool has_states() const noexcept { return !x.empty(); }
  double dt() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
};

// Input held over step k; the last grid point reuses the last input.
inline std::span<const double> input_at(const Matrix& u, std::size_t k) {
  return u.row(std::min(k, u.rows() - 1));
}

template <class T>
bool state_diverged(std::span<const T> x) {
  for (const auto& v : x) {
    const double d = value(v);
    if (!std::isfinite(d) || std::abs(d) > kDivergenceBound) return true;
  }
  return false;
}

// x + dt (f_d(x) + g_d(x) u) for the projected model.
template <class T>
std::vector<T> euler_step(const ModelEvaluator<T>& ev, std::span<const T> x, std::span<const T> u, double dt) {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  const auto d = ev.projected(x);
  const auto v = drift_of(d, u);
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + T(dt) * v[i];
  if constexpr (std::is_same_v<T, double>) {
    if (state_diverged<double>(out)) throw NonFiniteState(0, "Euler step left the finite region");
  }
  return out;
}

std::vector<double> euler_step(const ProjectedModel& m, std::span<const double> x, std::span<const double> u,
                               double dt);

// Euler rollout on any scalar type; outputs at grid point k use input k
// (the last grid point reuses the last input). Throws NonFiniteState with the
// failing step when a state leaves the finite region.
template <class T>
void rollout(const ModelEvaluator<T>& ev, const Matrix& u, const SimConfig& cfg, std::vector<std::vector<T>>& xs,
             std::vector<std::vector<T>>& ys) {
  const auto& dims = ev.model().dims;
  if (u.rows() != cfg.horizon || u.cols() != dims.m) {
    throw DimensionMismatch("input signal is " + std::to_string(u.rows()) + "x" + std::to_string(u.cols()) +
                            ", expected " + std::to_string(cfg.horizon) + "x" + std::to_string(dims.m));
  }
  if (!(cfg.dt > 0.0)) throw ConfigError("dt must be positive");
  std::vector<T> x(dims.n, T(0.0));
  if (!cfg.x0.empty()) {
    if (cfg.x0.size() != dims.n) throw DimensionMismatch("x0 length");
    for (std::size_t i = 0; i < dims.n; ++i) x[i] = T(cfg.x0[i]);
  }
  xs.clear();
  ys.clear();
  xs.reserve(cfg.horizon + 1);
  ys.reserve(cfg.horizon + 1);
  for (std::size_t k = 0; k <= cfg.horizon; ++k) {
    const auto uk_d = input_at(u, k);
    const std::vector<T> uk(uk_d.begin(), uk_d.end());
    const auto d = ev.projected(x);
    ys.push_back(output_of(d, std::span<const T>(uk)));
    xs.push_back(x);
    if (k == cfg.horizon) break;
    const auto v = drift_of(d, std::span<const T>(uk));
    for (std::size_t i = 0; i < dims.n; ++i) x[i] = x[i] + T(cfg.dt) * v[i];
    if (state_diverged<T>(x)) {
      throw NonFiniteState(k + 1, "state left the finite region");
    }
  }
}

Trajectory simulate(const ProjectedModel& m, const Matrix& u, const SimConfig& cfg);

// A system given directly by callbacks, for reference systems and tests.
struct VectorField {
  std::size_t n = 1, m = 1, l = 1;
  std::function<std::vector<double>(std::span<const double> x, std::span<const double> u)> drift;
  std::function<std::vector<double>(std::span<const double> x, std::span<const double> u)> output;
};

Trajectory simulate(const VectorField& sys, const Matrix& u, const SimConfig& cfg);

// Text export: header t,u_1..u_m,y_1..y_l[,x_1..x_n]; one row per grid point.
std::string trajectory_to_csv(const Trajectory& t, bool with_states = true);
Trajectory trajectory_from_csv(const std::string& text, const std::string& source = "<memory>");
void write_trajectory(const std::filesystem::path& path, const Trajectory& t, bool with_states = true);
Trajectory read_trajectory(const std::filesystem::path& path);

}  // namespace dissipnet
