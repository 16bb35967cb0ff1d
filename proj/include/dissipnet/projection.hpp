#pragma once

// Projections of raw network dynamics (f, g, h, j) onto dynamics that satisfy
// the nonlinear KYP conditions for a fixed storage function V and map l.
//
// Everything here is pointwise: the formulas act on the values of the maps at
// one state x together with grad V(x) and l(x). The value-level templates run
// on doubles and on tape variables, so the projection sits inside the
// gradient path of training. The direct-feedthrough ("general") projection
// needs spectral decompositions and is only available on doubles.

#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "dissipnet/netcore.hpp"
#include "dissipnet/supply.hpp"

namespace dissipnet {

enum class ProjectionKind { naive, stable, io_stable, conservative, dissipative, passive_beta, passive_alpha, general };

std::string to_string(ProjectionKind k);
ProjectionKind projection_from_string(const std::string& s);
inline constexpr ProjectionKind kAllProjectionKinds[] = {
    ProjectionKind::naive,        ProjectionKind::stable,       ProjectionKind::io_stable,
    ProjectionKind::conservative, ProjectionKind::dissipative,  ProjectionKind::passive_beta,
    ProjectionKind::passive_alpha, ProjectionKind::general};

bool needs_l_net(ProjectionKind k);

struct Dims {
  std::size_t n = 1;  // state
  std::size_t m = 1;  // input
  std::size_t l = 1;  // output
};

// Values of (f, g, h, j) at one state. An empty j means j == 0.
template <class T>
struct DynamicsValues {
  std::vector<T> f;  // n
  Mat<T> g;          // n x m
  std::vector<T> h;  // l
  Mat<T> j;          // l x m or empty
};

struct ProjectionSpec {
  ProjectionKind kind = ProjectionKind::naive;
  SupplyRate supply;
  StorageFunction storage;
  SymMatrix sqrt_r;            // psd_sqrt(R)
  double gamma = 0.0;          // io_stable gain
  std::optional<Mlp> l_net;    // n -> m
  bool anchor_l = true;        // evaluate l(x) - l(0)
  std::optional<numerics::Ellipsoid> feedthrough;  // general kind only

  // Validates the supply against the kind and precomputes sqrt(R) and the
  // feedthrough ellipsoid.
  static ProjectionSpec make(ProjectionKind kind, SupplyRate supply, StorageFunction storage,
                             std::optional<Mlp> l_net = std::nullopt);
};

struct RawDynamics {
  Mlp f;                  // n -> n
  Mlp g;                  // n -> n*m, column-major n x m
  Mlp h;                  // n -> l
  std::optional<Mlp> j;   // n -> l*m, column-major l x m; absent means j == 0
  bool anchor_outputs = true;  // evaluate h(x) - h(0) and j(x) - j(0)
};

struct ProjectedModel {
  Dims dims;
  RawDynamics raw;
  ProjectionSpec spec;
  std::optional<Mlp> eta;  // l -> n reconstruction

  std::vector<double> flat_params() const;
  void set_flat_params(std::span<const double> p);
  std::size_t param_count() const;
};

// Offsets of each network inside ProjectedModel::flat_params().
struct ParamLayout {
  struct Slot {
    std::size_t offset = 0;
    std::size_t count = 0;
  };
  Slot f, g, h, j, l, eta;
  std::size_t total = 0;
  static ParamLayout of(const ProjectedModel& m);
};

// ---------------------------------------------------------------------------
// Pointwise formulas

template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) s = s + a[i] * b[i];
  return s;
}

template <class T>
T grad_denominator(std::span<const T> grad_v) {
  return floor_at(dot(grad_v, grad_v), kGradGuard);
}

// (I - grad_v grad_v^T / |grad_v|^2) v
template <class T>
std::vector<T> complement_projector(std::span<const T> grad_v, std::span<const T> v) {
  if (grad_v.size() != v.size()) throw DimensionMismatch("complement_projector");
  const T coef = dot(grad_v, v) / grad_denominator(grad_v);
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - grad_v[i] * coef;
  return out;
}

namespace detail {

template <class T>
std::vector<T> column(const Mat<T>& g, std::size_t c) {
  std::vector<T> v(g.rows());
  for (std::size_t i = 0; i < g.rows(); ++i) v[i] = g(i, c);
  return v;
}

template <class T>
void check_values(const DynamicsValues<T>& d, std::span<const T> grad_v) {
  if (d.f.size() != grad_v.size() || d.g.rows() != grad_v.size()) {
    throw DimensionMismatch("dynamics values do not match the storage dimension");
  }
}

}  // namespace detail

// General solution of the KYP equations for given (l, W): the f and g parts
// are replaced by their complement projections plus the unique correction
// along grad V; h and j pass through.
//   f = P f^ + grad V (h'Qh - |l|^2) / |grad V|^2
//   g = P g^ + 2 grad V (h'(S + Qj) - l'W) / |grad V|^2
template <class T>
DynamicsValues<T> kyp_solution(const DynamicsValues<T>& raw, std::span<const T> grad_v, std::span<const T> l_val,
                               const Matrix& w, const SupplyRate& supply) {
  detail::check_values(raw, grad_v);
  const std::size_t n = grad_v.size(), m = raw.g.cols(), lo = raw.h.size();
  if (supply.output_dim() != lo || supply.input_dim() != m) throw DimensionMismatch("supply vs dynamics");
  if (!l_val.empty() && (w.rows() != l_val.size() || w.cols() != m)) throw DimensionMismatch("W must be q x m");
  const T denom = grad_denominator(grad_v);

  T hqh(0.0);
  for (std::size_t a = 0; a < lo; ++a)
    for (std::size_t b = 0; b < lo; ++b)
      if (supply.Q(a, b) != 0.0) hqh = hqh + raw.h[a] * supply.Q(a, b) * raw.h[b];
  const T f_coef = (hqh - dot(l_val, l_val)) / denom;

  DynamicsValues<T> out;
  out.f = complement_projector(grad_v, std::span<const T>(raw.f));
  for (std::size_t i = 0; i < n; ++i) out.f[i] = out.f[i] + grad_v[i] * f_coef;

  // S + Q j
  Matrix s_eff = supply.S;
  if (!raw.j.empty()) {
    if constexpr (std::is_same_v<T, double>) {
      s_eff += matmul(supply.Q.matrix(), raw.j);
    } else {
      throw ConfigError("a direct feedthrough term is only supported on the double path");
    }
  }

  out.g = Mat<T>(n, m);
  for (std::size_t c = 0; c < m; ++c) {
    T row(0.0);
    for (std::size_t a = 0; a < lo; ++a)
      if (s_eff(a, c) != 0.0) row = row + raw.h[a] * s_eff(a, c);
    for (std::size_t q = 0; q < l_val.size(); ++q)
      if (w(q, c) != 0.0) row = row - l_val[q] * w(q, c);
    const auto gc = detail::column(raw.g, c);
    const auto pc = complement_projector(grad_v, std::span<const T>(gc));
    const T coef = T(2.0) * row / denom;
    for (std::size_t i = 0; i < n; ++i) out.g(i, c) = pc[i] + grad_v[i] * coef;
  }
  out.h = raw.h;
  out.j = raw.j;
  return out;
}

// f - grad V ReLU(grad V' f) / |grad V|^2
template <class T>
std::vector<T> stable_drift(std::span<const T> grad_v, std::span<const T> f) {
  const T coef = relu(dot(grad_v, f)) / grad_denominator(grad_v);
  std::vector<T> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i] - grad_v[i] * coef;
  return out;
}

template <class T>
DynamicsValues<T> project_stable_values(const DynamicsValues<T>& raw, std::span<const T> grad_v) {
  detail::check_values(raw, grad_v);
  DynamicsValues<T> out = raw;
  out.f = stable_drift(grad_v, std::span<const T>(raw.f));
  return out;
}

template <class T>
DynamicsValues<T> project_io_stable_values(const DynamicsValues<T>& raw, std::span<const T> grad_v,
                                           std::span<const T> l_val, double gamma) {
  detail::check_values(raw, grad_v);
  const std::size_t n = grad_v.size(), m = raw.g.cols();
  if (l_val.size() != m) throw DimensionMismatch("l(x) must have the input dimension");
  const T denom = grad_denominator(grad_v);
  DynamicsValues<T> out = raw;
  const T f_coef = (dot(std::span<const T>(raw.h), std::span<const T>(raw.h)) + dot(l_val, l_val)) / denom;
  out.f = complement_projector(grad_v, std::span<const T>(raw.f));
  for (std::size_t i = 0; i < n; ++i) out.f[i] = out.f[i] - grad_v[i] * f_coef;
  for (std::size_t c = 0; c < m; ++c) {
    const auto gc = detail::column(raw.g, c);
    const auto pc = complement_projector(grad_v, std::span<const T>(gc));
    const T coef = T(2.0 * gamma) * l_val[c] / denom;
    for (std::size_t i = 0; i < n; ++i) out.g(i, c) = pc[i] - grad_v[i] * coef;
  }
  return out;
}

namespace detail {
template <class T>
void require_square_io(const DynamicsValues<T>& raw) {
  if (raw.h.size() != raw.g.cols()) {
    throw DimensionMismatch("passive projections need equal input and output dimensions (m=" +
                            std::to_string(raw.g.cols()) + ", l=" + std::to_string(raw.h.size()) + ")");
  }
}
}  // namespace detail

// Stable drift and g corrected along grad V so that grad V' g = 2 h'.
template <class T>
DynamicsValues<T> project_passive_beta_values(const DynamicsValues<T>& raw, std::span<const T> grad_v) {
  detail::check_values(raw, grad_v);
  detail::require_square_io(raw);
  const T denom = grad_denominator(grad_v);
  DynamicsValues<T> out = raw;
  out.f = stable_drift(grad_v, std::span<const T>(raw.f));
  for (std::size_t c = 0; c < raw.g.cols(); ++c) {
    const auto gc = detail::column(raw.g, c);
    const T coef = (dot(grad_v, std::span<const T>(gc)) - T(2.0) * raw.h[c]) / denom;
    for (std::size_t i = 0; i < grad_v.size(); ++i) out.g(i, c) = raw.g(i, c) - grad_v[i] * coef;
  }
  return out;
}

// Euclidean-nearest (g, h) on the Lur'e constraint grad V' g = 2 h'.
template <class T>
DynamicsValues<T> project_passive_alpha_values(const DynamicsValues<T>& raw, std::span<const T> grad_v) {
  detail::check_values(raw, grad_v);
  detail::require_square_io(raw);
  const T denom = T(4.0) + dot(grad_v, grad_v);
  DynamicsValues<T> out = raw;
  out.f = stable_drift(grad_v, std::span<const T>(raw.f));
  for (std::size_t c = 0; c < raw.g.cols(); ++c) {
    const auto gc = detail::column(raw.g, c);
    const T resid = dot(grad_v, std::span<const T>(gc)) - T(2.0) * raw.h[c];
    const T coef = resid / denom;
    for (std::size_t i = 0; i < grad_v.size(); ++i) out.g(i, c) = raw.g(i, c) - grad_v[i] * coef;
    out.h[c] = raw.h[c] + T(2.0) * coef;
  }
  return out;
}

// Feedthrough projection onto the ellipsoid and the matching W.
struct FeedthroughProjection {
  Matrix j;  // projected l x m
  Matrix w;  // m x m, W'W = R + j'S + S'j + j'Qj
};
FeedthroughProjection project_feedthrough(const ProjectionSpec& spec, const Matrix& j);

DynamicsValues<double> project_general_values(const ProjectionSpec& spec, const DynamicsValues<double>& raw,
                                              std::span<const double> grad_v, std::span<const double> l_val);

// W used by the KYP certificate of each kind at these projected values.
Matrix certificate_w(const ProjectionSpec& spec, const DynamicsValues<double>& projected);

template <class T>
DynamicsValues<T> project_values(const ProjectionSpec& spec, const DynamicsValues<T>& raw, std::span<const T> grad_v,
                                 std::span<const T> l_val) {
  switch (spec.kind) {
    case ProjectionKind::naive: return raw;
    case ProjectionKind::stable: return project_stable_values(raw, grad_v);
    case ProjectionKind::io_stable: return project_io_stable_values(raw, grad_v, l_val, spec.gamma);
    case ProjectionKind::conservative: return kyp_solution<T>(raw, grad_v, {}, Matrix(), spec.supply);
    case ProjectionKind::dissipative: return kyp_solution<T>(raw, grad_v, l_val, spec.sqrt_r.matrix(), spec.supply);
    case ProjectionKind::passive_beta: return project_passive_beta_values(raw, grad_v);
    case ProjectionKind::passive_alpha: return project_passive_alpha_values(raw, grad_v);
    case ProjectionKind::general:
      if constexpr (std::is_same_v<T, double>) {
        return project_general_values(spec, raw, grad_v, l_val);
      } else {
        throw ConfigError("the general (feedthrough) projection is not differentiable; use it on doubles only");
      }
  }
  return raw;
}

// ---------------------------------------------------------------------------
// Network evaluation

template <class T>
class ModelEvaluator {
 public:
  ModelEvaluator(const ProjectedModel& model, std::vector<T> flat)
      : model_(&model), flat_(std::move(flat)), layout_(ParamLayout::of(model)) {
    if (flat_.size() != layout_.total) throw DimensionMismatch("flat parameter vector length");
    const std::vector<T> origin(model.dims.n, T(0.0));
    if (model.raw.anchor_outputs) {
      h0_ = model.raw.h.template forward<T>(slice(layout_.h), origin);
      if (model.raw.j) j0_ = model.raw.j->template forward<T>(slice(layout_.j), origin);
    }
    if (model.spec.l_net && model.spec.anchor_l) l0_ = model.spec.l_net->template forward<T>(slice(layout_.l), origin);
  }

  const ProjectedModel& model() const { return *model_; }

  std::vector<T> grad_v(std::span<const T> x) const { return model_->spec.storage.template gradient<T>(x); }

  std::vector<T> l_value(std::span<const T> x) const {
    if (!model_->spec.l_net) return {};
    auto v = model_->spec.l_net->template forward<T>(slice(layout_.l), x);
    if (!l0_.empty())
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = v[i] - l0_[i];
    return v;
  }

  DynamicsValues<T> raw(std::span<const T> x) const {
    const auto& d = model_->dims;
    DynamicsValues<T> out;
    out.f = model_->raw.f.template forward<T>(slice(layout_.f), x);
    const auto gflat = model_->raw.g.template forward<T>(slice(layout_.g), x);
    out.g = Mat<T>(d.n, d.m);
    for (std::size_t c = 0; c < d.m; ++c)
      for (std::size_t i = 0; i < d.n; ++i) out.g(i, c) = gflat[i + d.n * c];
    out.h = model_->raw.h.template forward<T>(slice(layout_.h), x);
    if (!h0_.empty())
      for (std::size_t i = 0; i < out.h.size(); ++i) out.h[i] = out.h[i] - h0_[i];
    if (model_->raw.j) {
      auto jflat = model_->raw.j->template forward<T>(slice(layout_.j), x);
      if (!j0_.empty())
        for (std::size_t k = 0; k < jflat.size(); ++k) jflat[k] = jflat[k] - j0_[k];
      out.j = Mat<T>(d.l, d.m);
      for (std::size_t c = 0; c < d.m; ++c)
        for (std::size_t i = 0; i < d.l; ++i) out.j(i, c) = jflat[i + d.l * c];
    }
    return out;
  }

  // h(x) (anchored), without evaluating f and g.
  std::vector<T> h_value(std::span<const T> x) const {
    auto h = model_->raw.h.template forward<T>(slice(layout_.h), x);
    if (!h0_.empty())
      for (std::size_t i = 0; i < h.size(); ++i) h[i] = h[i] - h0_[i];
    return h;
  }

  DynamicsValues<T> projected(std::span<const T> x) const {
    const auto gv = grad_v(x);
    const auto lv = l_value(x);
    return project_values<T>(model_->spec, raw(x), gv, lv);
  }

  std::vector<T> eta(std::span<const T> y) const {
    if (!model_->eta) throw MissingEta("model has no reconstruction network");
    return model_->eta->template forward<T>(slice(layout_.eta), y);
  }

 private:
  std::span<const T> slice(const ParamLayout::Slot& s) const { return {flat_.data() + s.offset, s.count}; }

  const ProjectedModel* model_;
  std::vector<T> flat_;
  ParamLayout layout_;
  std::vector<T> h0_, j0_, l0_;
};

inline ModelEvaluator<double> evaluator(const ProjectedModel& m) { return {m, m.flat_params()}; }

// y = h + j u
template <class T>
std::vector<T> output_of(const DynamicsValues<T>& d, std::span<const T> u) {
  std::vector<T> y = d.h;
  if (!d.j.empty())
    for (std::size_t i = 0; i < y.size(); ++i)
      for (std::size_t c = 0; c < u.size(); ++c) y[i] = y[i] + d.j(i, c) * u[c];
  return y;
}

// f + g u
template <class T>
std::vector<T> drift_of(const DynamicsValues<T>& d, std::span<const T> u) {
  std::vector<T> v = d.f;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t c = 0; c < u.size(); ++c) v[i] = v[i] + d.g(i, c) * u[c];
  return v;
}

// Model-level projections at one state.
DynamicsValues<double> project_stable(const ProjectedModel& m, std::span<const double> x);
DynamicsValues<double> project_dissipative(const ProjectedModel& m, std::span<const double> x);
DynamicsValues<double> project_io_stable(const ProjectedModel& m, std::span<const double> x);
DynamicsValues<double> project_conservative(const ProjectedModel& m, std::span<const double> x);
DynamicsValues<double> project_passive_beta(const ProjectedModel& m, std::span<const double> x);
DynamicsValues<double> project_passive_alpha(const ProjectedModel& m, std::span<const double> x);
DynamicsValues<double> project_general(const ProjectedModel& m, std::span<const double> x);

double max_abs_diff(const DynamicsValues<double>& a, const DynamicsValues<double>& b);

// ---------------------------------------------------------------------------
// Construction and persistence

struct NetSpec {
  std::vector<std::size_t> hidden;
  Activation activation = Activation::relu;
  double output_scale = 1.0;
};

struct ModelArchitecture {
  Dims dims;
  NetSpec f{{32}, Activation::relu, 0.1};
  NetSpec g{{32}, Activation::relu, 1.0};
  NetSpec h{{}, Activation::relu, 1.0};
  NetSpec l{{32}, Activation::relu, 1.0};
  NetSpec eta{{}, Activation::relu, 1.0};
  bool with_feedthrough = false;
  bool anchor_outputs = true;
};

ProjectedModel build_model(const ModelArchitecture& arch, ProjectionKind kind, SupplyRate supply,
                           StorageFunction storage, std::uint64_t seed);

nlohmann::json to_json(const ProjectedModel& m);
ProjectedModel model_from_json(const nlohmann::json& j);

}  // namespace dissipnet
