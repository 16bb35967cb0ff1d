#pragma once

// Random instances shared by the unit tests, the acceptance runner and the
// kernel benchmark.

#include <cmath>
#include <random>
#include <vector>

#include "dissipnet/projection.hpp"

namespace dissipnet::testing {

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = nd(rng);
  return m;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

// G G' / k + floor I
inline SymMatrix random_spd(std::size_t n, std::mt19937_64& rng, double floor = 0.1) {
  const Matrix g = random_matrix(n, n, rng);
  Matrix p = matmul(g, g.transpose()) * (1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) p(i, i) += floor;
  return SymMatrix(p);
}

// Rank-r PSD matrix G G' with G n x r.
inline SymMatrix random_psd(std::size_t n, std::size_t rank, std::mt19937_64& rng) {
  const Matrix g = random_matrix(n, rank, rng);
  return SymMatrix(matmul(g, g.transpose()) * (1.0 / static_cast<double>(std::max<std::size_t>(rank, 1))));
}

inline SymMatrix random_sym(std::size_t n, std::mt19937_64& rng) {
  const Matrix g = random_matrix(n, n, rng);
  return SymMatrix((g + g.transpose()) * 0.5);
}

// A supply rate admissible for the given projection kind.
inline SupplyRate random_supply(ProjectionKind kind, std::size_t m, std::size_t l, std::mt19937_64& rng) {
  switch (kind) {
    case ProjectionKind::naive:
    case ProjectionKind::stable:
      return SupplyRate(SymMatrix::zero(l), Matrix(l, m), SymMatrix::zero(m));
    case ProjectionKind::io_stable:
      return SupplyRate(SymMatrix(Matrix::identity(l) * -1.0), Matrix(l, m), SymMatrix(Matrix::identity(m) * 2.0));
    case ProjectionKind::passive_beta:
    case ProjectionKind::passive_alpha:
      return SupplyRate(SymMatrix::zero(l), Matrix::identity(m) * 0.5, SymMatrix::zero(m));
    case ProjectionKind::conservative:
      return SupplyRate(random_sym(l, rng), random_matrix(l, m, rng, 0.5), SymMatrix::zero(m));
    case ProjectionKind::dissipative:
      return SupplyRate(random_sym(l, rng), random_matrix(l, m, rng, 0.5), random_psd(m, m, rng));
    case ProjectionKind::general: {
      // Q < 0 and R = S'(-Q)^{-1}S + PSD keeps the radius R - S'Q^{-1}S >= 0.
      const SymMatrix neg_q = random_spd(l, rng, 0.5);
      const Matrix s = random_matrix(l, m, rng, 0.5);
      const Matrix inv = numerics::pd_inverse(neg_q).matrix();
      const Matrix base = matmul(matmul(s.transpose(), inv), s);
      const Matrix r = base + random_psd(m, m, rng).matrix();
      return SupplyRate(SymMatrix(neg_q.matrix() * -1.0), s, SymMatrix(r));
    }
  }
  return {};
}

inline ProjectedModel random_model(ProjectionKind kind, const Dims& dims, std::uint64_t seed, bool random_storage = true,
                                   Activation act = Activation::relu) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  ModelArchitecture arch;
  arch.dims = dims;
  arch.f = {{16}, act, 1.0};
  arch.g = {{16}, act, 1.0};
  arch.h = {{16}, act, 1.0};
  arch.l = {{16}, act, 1.0};
  arch.eta = {{}, act, 1.0};
  arch.with_feedthrough = kind == ProjectionKind::general;
  const SupplyRate w = random_supply(kind, dims.m, dims.l, rng);
  const StorageFunction v =
      random_storage ? StorageFunction(random_spd(dims.n, rng, 0.5)) : StorageFunction::half_squared_norm(dims.n);
  // Library init zeroes the biases, which pins f(0) = g(0) = 0; jitter every
  // parameter so random models are generic.
  auto model = build_model(arch, kind, w, v, seed);
  auto p = model.flat_params();
  std::normal_distribution<double> nd(0.0, 0.2);
  for (auto& x : p) x += nd(rng);
  model.set_flat_params(p);
  return model;
}

// Input held as +-amplitude on random segments.
inline Matrix random_rectangle(std::size_t horizon, std::size_t m, std::mt19937_64& rng, double amplitude = 1.0) {
  std::uniform_int_distribution<std::size_t> seg(5, 25);
  std::bernoulli_distribution sign(0.5);
  Matrix u(horizon, m);
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t k = 0;
    while (k < horizon) {
      const double a = sign(rng) ? amplitude : -amplitude;
      const std::size_t len = seg(rng);
      for (std::size_t i = 0; i < len && k < horizon; ++i, ++k) u(k, c) = a;
    }
  }
  return u;
}

}  // namespace dissipnet::testing
