#include "dissipnet/projection.hpp"

#include <cmath>
#include <random>

namespace dissipnet {

std::string to_string(ProjectionKind k) {
  switch (k) {
    case ProjectionKind::naive: return "naive";
    case ProjectionKind::stable: return "stable";
    case ProjectionKind::io_stable: return "io_stable";
    case ProjectionKind::conservative: return "conservative";
    case ProjectionKind::dissipative: return "dissipative";
    case ProjectionKind::passive_beta: return "passive_beta";
    case ProjectionKind::passive_alpha: return "passive_alpha";
    case ProjectionKind::general: return "general";
  }
  return "naive";
}

ProjectionKind projection_from_string(const std::string& s) {
  for (auto k : kAllProjectionKinds)
    if (to_string(k) == s) return k;
  throw ConfigError("unknown projection kind '" + s + "'");
}

bool needs_l_net(ProjectionKind k) {
  return k == ProjectionKind::dissipative || k == ProjectionKind::io_stable || k == ProjectionKind::general;
}

ProjectionSpec ProjectionSpec::make(ProjectionKind kind, SupplyRate supply, StorageFunction storage,
                                    std::optional<Mlp> l_net) {
  ProjectionSpec spec;
  spec.kind = kind;
  const std::size_t m = supply.input_dim(), l = supply.output_dim();

  if (needs_l_net(kind)) {
    if (!l_net) throw ConfigError(to_string(kind) + " projection needs an l network");
    if (l_net->in_dim() != storage.dim() || l_net->out_dim() != m) {
      throw DimensionMismatch("l network must map R^n -> R^m");
    }
  } else {
    l_net.reset();
  }

  if (numerics::min_eigenvalue(supply.R) >= -numerics::kTolPsd) spec.sqrt_r = numerics::psd_sqrt(supply.R);

  switch (kind) {
    case ProjectionKind::dissipative:
      require_psd_r(supply);
      break;
    case ProjectionKind::io_stable: {
      const double g2 = supply.R(0, 0);
      const bool matches = g2 > 0.0 &&
                           max_abs_diff(supply.Q.matrix(), Matrix::identity(l) * -1.0) <= 1e-12 &&
                           max_abs(supply.S) == 0.0 &&
                           max_abs_diff(supply.R.matrix(), Matrix::identity(m) * g2) <= 1e-12;
      if (!matches) throw InvalidPreset("io_stable projection needs Q = -I, S = 0, R = gamma^2 I");
      spec.gamma = std::sqrt(g2);
      break;
    }
    case ProjectionKind::conservative:
      if (max_abs(supply.R.matrix()) != 0.0) throw InvalidPreset("energy-conserving projection requires R = 0");
      break;
    case ProjectionKind::passive_beta:
    case ProjectionKind::passive_alpha:
      if (l != m) throw DimensionMismatch("passive projections need m == l");
      break;
    case ProjectionKind::general: {
      require_general_path(supply);
      const SymMatrix neg_q(supply.Q.matrix() * -1.0);
      const Matrix center = matmul(numerics::pd_inverse(neg_q).matrix(), supply.S);
      spec.feedthrough.emplace(neg_q, center, feedthrough_radius(supply));
      break;
    }
    case ProjectionKind::naive:
    case ProjectionKind::stable:
      break;
  }
  spec.supply = std::move(supply);
  spec.storage = std::move(storage);
  spec.l_net = std::move(l_net);
  return spec;
}

FeedthroughProjection project_feedthrough(const ProjectionSpec& spec, const Matrix& j) {
  if (!spec.feedthrough) throw ConfigError("spec has no feedthrough ellipsoid");
  const auto& e = *spec.feedthrough;
  const Matrix jin = j.empty() ? Matrix(e.rows(), e.cols()) : j;
  FeedthroughProjection out;
  out.j = numerics::ellipsoid_project(e, jin);
  const SymMatrix slack(e.radius.matrix() - numerics::ellipsoid_gram(e, out.j).matrix());
  out.w = numerics::psd_sqrt(numerics::ramp_eig(slack)).matrix();
  return out;
}

DynamicsValues<double> project_general_values(const ProjectionSpec& spec, const DynamicsValues<double>& raw,
                                              std::span<const double> grad_v, std::span<const double> l_val) {
  if (l_val.size() != raw.g.cols()) throw DimensionMismatch("l(x) must have the input dimension");
  auto fp = project_feedthrough(spec, raw.j);
  DynamicsValues<double> with_j = raw;
  with_j.j = std::move(fp.j);
  return kyp_solution<double>(with_j, grad_v, l_val, fp.w, spec.supply);
}

Matrix certificate_w(const ProjectionSpec& spec, const DynamicsValues<double>& projected) {
  const std::size_t m = spec.supply.input_dim();
  switch (spec.kind) {
    case ProjectionKind::dissipative: return spec.sqrt_r.matrix();
    case ProjectionKind::io_stable: return Matrix::identity(m) * spec.gamma;
    case ProjectionKind::general: return project_feedthrough(spec, projected.j).w;
    default: return {};
  }
}

ParamLayout ParamLayout::of(const ProjectedModel& m) {
  ParamLayout p;
  std::size_t off = 0;
  auto take = [&](Slot& s, std::size_t count) {
    s = {off, count};
    off += count;
  };
  take(p.f, m.raw.f.param_count());
  take(p.g, m.raw.g.param_count());
  take(p.h, m.raw.h.param_count());
  take(p.j, m.raw.j ? m.raw.j->param_count() : 0);
  take(p.l, m.spec.l_net ? m.spec.l_net->param_count() : 0);
  take(p.eta, m.eta ? m.eta->param_count() : 0);
  p.total = off;
  return p;
}

namespace {
template <class Fn>
void for_each_net(ProjectedModel& m, Fn&& fn) {
  fn(m.raw.f);
  fn(m.raw.g);
  fn(m.raw.h);
  if (m.raw.j) fn(*m.raw.j);
  if (m.spec.l_net) fn(*m.spec.l_net);
  if (m.eta) fn(*m.eta);
}
}  // namespace

std::vector<double> ProjectedModel::flat_params() const {
  std::vector<double> out;
  out.reserve(param_count());
  for_each_net(const_cast<ProjectedModel&>(*this),
               [&](const Mlp& net) { out.insert(out.end(), net.params().begin(), net.params().end()); });
  return out;
}

void ProjectedModel::set_flat_params(std::span<const double> p) {
  if (p.size() != param_count()) throw DimensionMismatch("set_flat_params length");
  std::size_t off = 0;
  for_each_net(*this, [&](Mlp& net) {
    std::copy(p.begin() + off, p.begin() + off + net.param_count(), net.params().begin());
    off += net.param_count();
  });
}

std::size_t ProjectedModel::param_count() const { return ParamLayout::of(*this).total; }

DynamicsValues<double> project_stable(const ProjectedModel& m, std::span<const double> x) {
  const auto ev = evaluator(m);
  return project_stable_values<double>(ev.raw(x), ev.grad_v(x));
}

DynamicsValues<double> project_dissipative(const ProjectedModel& m, std::span<const double> x) {
  if (!m.spec.l_net) throw ConfigError("dissipative projection needs an l network");
  require_psd_r(m.spec.supply);
  const auto ev = evaluator(m);
  const auto raw = ev.raw(x);
  if (!raw.j.empty()) throw ConfigError("the Theorem-1 path assumes no direct feedthrough");
  return kyp_solution<double>(raw, ev.grad_v(x), ev.l_value(x), m.spec.sqrt_r.matrix(), m.spec.supply);
}

DynamicsValues<double> project_io_stable(const ProjectedModel& m, std::span<const double> x) {
  if (!m.spec.l_net) throw ConfigError("io_stable projection needs an l network");
  if (!(m.spec.gamma > 0.0)) throw InvalidPreset("io_stable projection needs gamma > 0");
  const auto ev = evaluator(m);
  return project_io_stable_values<double>(ev.raw(x), ev.grad_v(x), ev.l_value(x), m.spec.gamma);
}

DynamicsValues<double> project_conservative(const ProjectedModel& m, std::span<const double> x) {
  if (max_abs(m.spec.supply.R.matrix()) != 0.0) throw InvalidPreset("energy-conserving projection requires R = 0");
  const auto ev = evaluator(m);
  return kyp_solution<double>(ev.raw(x), ev.grad_v(x), {}, Matrix(), m.spec.supply);
}

DynamicsValues<double> project_passive_beta(const ProjectedModel& m, std::span<const double> x) {
  const auto ev = evaluator(m);
  return project_passive_beta_values<double>(ev.raw(x), ev.grad_v(x));
}

DynamicsValues<double> project_passive_alpha(const ProjectedModel& m, std::span<const double> x) {
  const auto ev = evaluator(m);
  return project_passive_alpha_values<double>(ev.raw(x), ev.grad_v(x));
}

DynamicsValues<double> project_general(const ProjectedModel& m, std::span<const double> x) {
  if (!m.spec.l_net) throw ConfigError("general projection needs an l network");
  const auto ev = evaluator(m);
  return project_general_values(m.spec, ev.raw(x), ev.grad_v(x), ev.l_value(x));
}

double max_abs_diff(const DynamicsValues<double>& a, const DynamicsValues<double>& b) {
  double d = 0.0;
  auto vec = [&](const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw DimensionMismatch("max_abs_diff vector");
    for (std::size_t i = 0; i < p.size(); ++i) d = std::max(d, std::abs(p[i] - q[i]));
  };
  vec(a.f, b.f);
  vec(a.h, b.h);
  d = std::max(d, max_abs_diff(a.g, b.g));
  if (!a.j.empty() || !b.j.empty()) {
    const Matrix ja = a.j.empty() ? Matrix(b.j.rows(), b.j.cols()) : a.j;
    const Matrix jb = b.j.empty() ? Matrix(a.j.rows(), a.j.cols()) : b.j;
    d = std::max(d, max_abs_diff(ja, jb));
  }
  return d;
}

ProjectedModel build_model(const ModelArchitecture& arch, ProjectionKind kind, SupplyRate supply,
                           StorageFunction storage, std::uint64_t seed) {
  const Dims& d = arch.dims;
  if (supply.input_dim() != d.m || supply.output_dim() != d.l) {
    throw DimensionMismatch("supply rate is " + std::to_string(supply.output_dim()) + "x" +
                            std::to_string(supply.input_dim()) + " but the model has l=" + std::to_string(d.l) +
                            ", m=" + std::to_string(d.m));
  }
  if (storage.dim() != d.n) throw DimensionMismatch("storage function dimension != state dimension");
  std::mt19937_64 rng(seed);
  auto make = [&](const NetSpec& s, std::size_t in, std::size_t out) {
    return Mlp::initialized(MlpShape{in, out, s.hidden, s.activation, s.output_scale}, rng);
  };
  ProjectedModel model;
  model.dims = d;
  model.raw.f = make(arch.f, d.n, d.n);
  model.raw.g = make(arch.g, d.n, d.n * d.m);
  model.raw.h = make(arch.h, d.n, d.l);
  if (arch.with_feedthrough || kind == ProjectionKind::general) model.raw.j = make(arch.g, d.n, d.l * d.m);
  model.raw.anchor_outputs = arch.anchor_outputs;
  std::optional<Mlp> l_net;
  if (needs_l_net(kind)) l_net = make(arch.l, d.n, d.m);
  model.eta = make(arch.eta, d.l, d.n);
  model.spec = ProjectionSpec::make(kind, std::move(supply), std::move(storage), std::move(l_net));
  model.spec.anchor_l = arch.anchor_outputs;
  return model;
}

nlohmann::json to_json(const ProjectedModel& m) {
  nlohmann::json j;
  j["dims"] = {{"n", m.dims.n}, {"m", m.dims.m}, {"l", m.dims.l}};
  j["kind"] = to_string(m.spec.kind);
  j["supply"] = to_json(m.spec.supply);
  j["storage_weight"] = matrix_to_json(m.spec.storage.weight().matrix());
  j["anchor_outputs"] = m.raw.anchor_outputs;
  j["anchor_l"] = m.spec.anchor_l;
  j["f"] = to_json(m.raw.f);
  j["g"] = to_json(m.raw.g);
  j["h"] = to_json(m.raw.h);
  if (m.raw.j) j["j"] = to_json(*m.raw.j);
  if (m.spec.l_net) j["l"] = to_json(*m.spec.l_net);
  if (m.eta) j["eta"] = to_json(*m.eta);
  return j;
}

ProjectedModel model_from_json(const nlohmann::json& j) {
  ProjectedModel m;
  const auto& d = j.at("dims");
  m.dims = {d.at("n").get<std::size_t>(), d.at("m").get<std::size_t>(), d.at("l").get<std::size_t>()};
  m.raw.f = mlp_from_json(j.at("f"));
  m.raw.g = mlp_from_json(j.at("g"));
  m.raw.h = mlp_from_json(j.at("h"));
  if (j.contains("j")) m.raw.j = mlp_from_json(j.at("j"));
  m.raw.anchor_outputs = j.at("anchor_outputs").get<bool>();
  std::optional<Mlp> l_net;
  if (j.contains("l")) l_net = mlp_from_json(j.at("l"));
  if (j.contains("eta")) m.eta = mlp_from_json(j.at("eta"));
  m.spec = ProjectionSpec::make(projection_from_string(j.at("kind").get<std::string>()), supply_from_json(j.at("supply")),
                                StorageFunction(SymMatrix(matrix_from_json(j.at("storage_weight")))), std::move(l_net));
  m.spec.anchor_l = j.at("anchor_l").get<bool>();
  return m;
}

}  // namespace dissipnet
