#pragma once

// Reverse-mode automatic differentiation on a per-thread tape.
//
// A Var is a value plus the index of the tape node that produced it. Nodes
// store the indices of their parents and the local partial derivatives, so
// a backward sweep is a single pass in reverse recording order. Each thread
// records onto the tape installed by its innermost TapeScope; Vars from
// different tapes must never be mixed.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dissipnet/errors.hpp"

namespace dissipnet::ad {

class Tape {
 public:
  Tape() { offsets_.push_back(0); }

  std::int32_t push_leaf() { return push_node(); }

  // Appends a node whose parents/partials were appended via add_edge.
  std::int32_t push_node() {
    offsets_.push_back(static_cast<std::uint32_t>(parents_.size()));
    return static_cast<std::int32_t>(offsets_.size() - 2);
  }
  void add_edge(std::int32_t parent, double partial) {
    if (parent < 0) return;
    parents_.push_back(parent);
    partials_.push_back(partial);
  }

  std::size_t size() const noexcept { return offsets_.size() - 1; }
  std::size_t edge_count() const noexcept { return parents_.size(); }

  void clear() {
    offsets_.assign(1, 0);
    parents_.clear();
    partials_.clear();
  }

  // Adjoint of every node given seed adjoints on some nodes.
  std::vector<double> backward(std::span<const std::int32_t> seeds, std::span<const double> seed_adjoints) const;

 private:
  std::vector<std::uint32_t> offsets_;
  std::vector<std::int32_t> parents_;
  std::vector<double> partials_;
};

Tape* active_tape() noexcept;

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

struct Var {
  double val = 0.0;
  std::int32_t idx = -1;  // -1: constant, not on any tape

  Var() = default;
  Var(double v) : val(v) {}  // NOLINT: constants promote implicitly
  Var(double v, std::int32_t i) : val(v), idx(i) {}

  static Var leaf(double v) { return {v, active_tape()->push_leaf()}; }
};

inline double value(double x) { return x; }
inline double value(const Var& x) { return x.val; }

namespace detail {
inline Var unary(double v, const Var& a, double da) {
  if (a.idx < 0) return Var(v);
  Tape* t = active_tape();
  t->add_edge(a.idx, da);
  return {v, t->push_node()};
}
inline Var binary(double v, const Var& a, double da, const Var& b, double db) {
  if (a.idx < 0 && b.idx < 0) return Var(v);
  Tape* t = active_tape();
  t->add_edge(a.idx, da);
  t->add_edge(b.idx, db);
  return {v, t->push_node()};
}
}  // namespace detail

inline Var operator+(const Var& a, const Var& b) { return detail::binary(a.val + b.val, a, 1.0, b, 1.0); }
inline Var operator-(const Var& a, const Var& b) { return detail::binary(a.val - b.val, a, 1.0, b, -1.0); }
inline Var operator*(const Var& a, const Var& b) { return detail::binary(a.val * b.val, a, b.val, b, a.val); }
inline Var operator/(const Var& a, const Var& b) {
  const double inv = 1.0 / b.val;
  return detail::binary(a.val * inv, a, inv, b, -a.val * inv * inv);
}
inline Var operator-(const Var& a) { return detail::unary(-a.val, a, -1.0); }
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

inline Var sqrt(const Var& a) {
  const double s = std::sqrt(a.val);
  return detail::unary(s, a, s > 0.0 ? 0.5 / s : 0.0);
}
inline Var exp(const Var& a) {
  const double e = std::exp(a.val);
  return detail::unary(e, a, e);
}

// Inner product plus bias recorded as one node with 2k+1 parents.
Var dot_affine(std::span<const Var> w, std::span<const Var> x, const Var& bias);

}  // namespace dissipnet::ad

namespace dissipnet {

using ad::value;

// Elementwise nonlinearities shared by the double and Var code paths.
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
// max(x, floor) with zero derivative on the clamped side.
inline double floor_at(double x, double floor) { return x > floor ? x : floor; }

inline ad::Var relu(const ad::Var& x) { return ad::detail::unary(relu(x.val), x, x.val > 0.0 ? 1.0 : 0.0); }
inline ad::Var leaky_relu(const ad::Var& x, double slope) {
  return ad::detail::unary(leaky_relu(x.val, slope), x, x.val > 0.0 ? 1.0 : slope);
}
inline ad::Var sigmoid(const ad::Var& x) {
  const double s = sigmoid(x.val);
  return ad::detail::unary(s, x, s * (1.0 - s));
}
inline ad::Var floor_at(const ad::Var& x, double floor) {
  return x.val > floor ? x : ad::Var(floor);
}

inline double dot_affine(std::span<const double> w, std::span<const double> x, double bias) {
  double s = bias;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return s;
}
using ad::dot_affine;

}  // namespace dissipnet
