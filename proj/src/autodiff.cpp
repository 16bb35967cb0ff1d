#include "dissipnet/autodiff.hpp"

#include <string>

namespace dissipnet::ad {

namespace {
thread_local Tape* g_active = nullptr;
}

Tape* active_tape() noexcept { return g_active; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active) { g_active = &tape; }
TapeScope::~TapeScope() { g_active = previous_; }

std::vector<double> Tape::backward(std::span<const std::int32_t> seeds, std::span<const double> seed_adjoints) const {
  if (seeds.size() != seed_adjoints.size()) {
    throw TapeMismatch("seed count " + std::to_string(seeds.size()) + " != adjoint count " +
                       std::to_string(seed_adjoints.size()));
  }
  std::vector<double> adj(size(), 0.0);
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    if (seeds[k] < 0) continue;
    if (static_cast<std::size_t>(seeds[k]) >= adj.size()) throw TapeMismatch("seed node is not on this tape");
    adj[seeds[k]] += seed_adjoints[k];
  }
  for (std::size_t i = adj.size(); i-- > 0;) {
    const double a = adj[i];
    if (a == 0.0) continue;
    for (std::uint32_t e = offsets_[i]; e < offsets_[i + 1]; ++e) adj[parents_[e]] += a * partials_[e];
  }
  return adj;
}

Var dot_affine(std::span<const Var> w, std::span<const Var> x, const Var& bias) {
  double s = bias.val;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i].val * x[i].val;
  Tape* t = active_tape();
  if (t == nullptr) return Var(s);
  t->add_edge(bias.idx, 1.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    t->add_edge(w[i].idx, x[i].val);
    t->add_edge(x[i].idx, w[i].val);
  }
  return {s, t->push_node()};
}

}  // namespace dissipnet::ad
