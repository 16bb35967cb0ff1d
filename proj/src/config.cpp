#include "dissipnet/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "dissipnet/seed.hpp"

namespace dissipnet {

namespace {

using nlohmann::json;

class Section {
 public:
  Section(const json& j, std::string path, std::initializer_list<const char*> keys) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [key, _] : j_.items())
      if (!allowed.count(key)) throw ConfigError("unknown key '" + path_ + "." + key + "'");
  }

  template <class T>
  void get(const char* key, T& out) const {
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  void matrix(const char* key, Matrix& out) const {
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    out = matrix_from_json(j_.at(key));
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& at(const char* key) const { return j_.at(key); }
  std::string path(const char* key) const { return path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
};

NetSpec net_from(const Section& parent, const char* key, NetSpec d) {
  if (!parent.has(key)) return d;
  const Section s(parent.at(key), parent.path(key), {"hidden", "activation", "output_scale"});
  s.get("hidden", d.hidden);
  std::string act = to_string(d.activation);
  s.get("activation", act);
  d.activation = activation_from_string(act);
  s.get("output_scale", d.output_scale);
  return d;
}

json net_json(const NetSpec& n) {
  return {{"hidden", n.hidden}, {"activation", to_string(n.activation)}, {"output_scale", n.output_scale}};
}

json matrix_or_null(const Matrix& m) { return m.empty() ? json(nullptr) : matrix_to_json(m); }

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  const Section top(j, "config",
                    {"system", "signal", "sim", "dataset", "model", "projection", "loss", "optimizer", "verify", "seed",
                     "output_dir"});
  top.get("seed", c.seed);
  top.get("output_dir", c.output_dir);

  if (top.has("system")) {
    const Section s(top.at("system"), "system", {"kind", "n_links", "msd", "gravity", "external_files"});
    s.get("kind", c.system);
    s.get("n_links", c.n_links);
    s.get("gravity", c.gravity);
    s.get("external_files", c.external_files);
    if (s.has("msd")) {
      const Section m(s.at("msd"), "system.msd", {"m", "k", "c"});
      m.get("m", c.msd.m);
      m.get("k", c.msd.k);
      m.get("c", c.msd.c);
    }
  }
  if (c.system != "msd" && c.system != "pendulum" && c.system != "external") {
    throw ConfigError("system.kind must be msd, pendulum or external, got '" + c.system + "'");
  }

  if (top.has("signal")) {
    const Section s(top.at("signal"), "signal", {"kind", "amplitude", "min_segment", "max_segment", "variance"});
    std::string kind = to_string(c.signal.kind);
    s.get("kind", kind);
    c.signal.kind = signal_from_string(kind);
    s.get("amplitude", c.signal.amplitude);
    s.get("min_segment", c.signal.min_segment);
    s.get("max_segment", c.signal.max_segment);
    s.get("variance", c.signal.variance);
  }
  if (top.has("sim")) {
    const Section s(top.at("sim"), "sim", {"dt", "horizon", "x0"});
    s.get("dt", c.dt);
    s.get("horizon", c.horizon);
    s.get("x0", c.x0);
  }
  if (top.has("dataset")) {
    const Section s(top.at("dataset"), "dataset", {"count", "train_fraction", "substeps"});
    s.get("count", c.count);
    s.get("train_fraction", c.train_fraction);
    s.get("substeps", c.substeps);
  }
  if (top.has("model")) {
    const Section s(top.at("model"), "model",
                    {"state_dim", "f", "g", "h", "l", "eta", "anchor_outputs", "feedthrough"});
    s.get("state_dim", c.state_dim);
    c.f = net_from(s, "f", c.f);
    c.g = net_from(s, "g", c.g);
    c.h = net_from(s, "h", c.h);
    c.l = net_from(s, "l", c.l);
    c.eta = net_from(s, "eta", c.eta);
    s.get("anchor_outputs", c.anchor_outputs);
    s.get("feedthrough", c.feedthrough);
  }
  if (top.has("projection")) {
    const Section s(top.at("projection"), "projection", {"kind", "supply", "gamma2", "Q", "S", "R", "storage_weight"});
    std::string kind = to_string(c.projection);
    s.get("kind", kind);
    c.projection = projection_from_string(kind);
    s.get("supply", c.supply);
    if (c.supply != "auto") preset_from_string(c.supply);
    s.get("gamma2", c.gamma2);
    s.matrix("Q", c.Q);
    s.matrix("S", c.S);
    s.matrix("R", c.R);
    s.matrix("storage_weight", c.storage_weight);
  }
  if (top.has("loss")) {
    const Section s(top.at("loss"), "loss", {"lambda1", "lambda2", "n_proj_samples"});
    s.get("lambda1", c.loss.lambda1);
    s.get("lambda2", c.loss.lambda2);
    s.get("n_proj_samples", c.loss.n_proj_samples);
  }
  if (top.has("optimizer")) {
    const Section s(top.at("optimizer"), "optimizer",
                    {"algorithm", "learning_rate", "weight_decay", "beta1", "beta2", "eps", "momentum", "rho",
                     "grad_clip", "batch_size", "epochs"});
    std::string alg = to_string(c.optimizer.algorithm);
    s.get("algorithm", alg);
    c.optimizer.algorithm = algorithm_from_string(alg);
    s.get("learning_rate", c.optimizer.learning_rate);
    s.get("weight_decay", c.optimizer.weight_decay);
    s.get("beta1", c.optimizer.beta1);
    s.get("beta2", c.optimizer.beta2);
    s.get("eps", c.optimizer.eps);
    s.get("momentum", c.optimizer.momentum);
    s.get("rho", c.optimizer.rho);
    s.get("grad_clip", c.optimizer.grad_clip);
    s.get("batch_size", c.optimizer.batch_size);
    s.get("epochs", c.optimizer.epochs);
    c.optimizer.validate();
  }
  if (top.has("verify")) {
    const Section s(top.at("verify"), "verify",
                    {"n_samples", "kyp_threshold", "idempotence_threshold", "c_tol", "n_rollouts", "long_horizon"});
    s.get("n_samples", c.verify.n_samples);
    s.get("kyp_threshold", c.verify.kyp_threshold);
    s.get("idempotence_threshold", c.verify.idempotence_threshold);
    s.get("c_tol", c.verify.c_tol);
    s.get("n_rollouts", c.verify.n_rollouts);
    s.get("long_horizon", c.verify.long_horizon);
  }
  if (c.dt < 0.0) throw ConfigError("sim.dt must be positive");
  if (!(c.loss.lambda1 >= 0.0 && c.loss.lambda2 >= 0.0)) throw ConfigError("loss weights must be nonnegative");
  if (c.loss.n_proj_samples < 1) throw ConfigError("loss.n_proj_samples must be positive");
  if (!(c.gamma2 > 0.0)) throw ConfigError("projection.gamma2 must be positive");
  return c;
}

json to_json(const ExperimentConfig& c) {
  return {
      {"system",
       {{"kind", c.system},
        {"n_links", c.n_links},
        {"msd", {{"m", c.msd.m}, {"k", c.msd.k}, {"c", c.msd.c}}},
        {"gravity", c.gravity},
        {"external_files", c.external_files}}},
      {"signal", to_json(c.signal)},
      {"sim", {{"dt", c.dt > 0.0 ? json(c.dt) : json(nullptr)}, {"horizon", c.horizon ? json(c.horizon) : json(nullptr)}, {"x0", c.x0}}},
      {"dataset", {{"count", c.count}, {"train_fraction", c.train_fraction}, {"substeps", c.substeps}}},
      {"model",
       {{"state_dim", c.state_dim ? json(c.state_dim) : json(nullptr)},
        {"f", net_json(c.f)},
        {"g", net_json(c.g)},
        {"h", net_json(c.h)},
        {"l", net_json(c.l)},
        {"eta", net_json(c.eta)},
        {"anchor_outputs", c.anchor_outputs},
        {"feedthrough", c.feedthrough}}},
      {"projection",
       {{"kind", to_string(c.projection)},
        {"supply", c.supply},
        {"gamma2", c.gamma2},
        {"Q", matrix_or_null(c.Q)},
        {"S", matrix_or_null(c.S)},
        {"R", matrix_or_null(c.R)},
        {"storage_weight", matrix_or_null(c.storage_weight)}}},
      {"loss", {{"lambda1", c.loss.lambda1}, {"lambda2", c.loss.lambda2}, {"n_proj_samples", c.loss.n_proj_samples}}},
      {"optimizer", to_json(c.optimizer)},
      {"verify",
       {{"n_samples", c.verify.n_samples},
        {"kyp_threshold", c.verify.kyp_threshold},
        {"idempotence_threshold", c.verify.idempotence_threshold},
        {"c_tol", c.verify.c_tol},
        {"n_rollouts", c.verify.n_rollouts},
        {"long_horizon", c.verify.long_horizon}}},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
  };
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& c) {
  const std::string s = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool is_external(const ExperimentConfig& c) { return c.system == "external"; }

SystemKind system_kind(const ExperimentConfig& c) {
  if (is_external(c)) throw ConfigError("an external system has no built-in generator");
  return system_from_string(c.system);
}

double resolved_dt(const ExperimentConfig& c) {
  if (c.dt > 0.0) return c.dt;
  return c.system == "pendulum" ? 0.01 : 0.1;
}

std::size_t resolved_horizon(const ExperimentConfig& c) { return c.horizon ? c.horizon : 100; }

PendulumParams pendulum_params(const ExperimentConfig& c) {
  auto p = PendulumParams::standard(c.n_links);
  p.g_accel = c.gravity;
  return p;
}

DatasetSpec dataset_spec(const ExperimentConfig& c) {
  DatasetSpec s = DatasetSpec::standard(system_kind(c), c.n_links);
  s.msd = c.msd;
  if (s.system == SystemKind::pendulum) s.pendulum = pendulum_params(c);
  s.signal = c.signal;
  s.count = c.count;
  s.seed = c.seed;
  s.dt = resolved_dt(c);
  s.horizon = resolved_horizon(c);
  s.train_fraction = c.train_fraction;
  s.substeps = c.substeps;
  return s;
}

Dims model_dims(const ExperimentConfig& c, std::size_t m, std::size_t l) {
  Dims d;
  d.m = m;
  d.l = l;
  if (c.state_dim) d.n = c.state_dim;
  else if (c.system == "pendulum") d.n = 2 * c.n_links;
  else if (c.system == "msd") d.n = 2;
  else d.n = l;
  return d;
}

SupplyRate resolve_supply(const ExperimentConfig& c, const Dims& d) {
  PresetArgs a;
  a.output_dim = d.l;
  a.input_dim = d.m;
  a.gamma2 = c.gamma2;
  a.Q = c.Q;
  a.S = c.S;
  a.R = c.R;
  std::string name = c.supply;
  if (name == "auto") {
    switch (c.projection) {
      case ProjectionKind::stable: name = "stable"; break;
      case ProjectionKind::io_stable: name = "io_stable"; break;
      case ProjectionKind::passive_alpha:
      case ProjectionKind::passive_beta: name = "passive"; break;
      default:
        if (c.system == "external") throw ConfigError("projection.supply must be set for external systems");
        name = c.system;
    }
  }
  const PresetKind kind = preset_from_string(name);
  if (kind == PresetKind::msd) a.damping = c.msd.c;
  if (kind == PresetKind::pendulum) a.damping = pendulum_params(c).dampings[0];
  if ((kind == PresetKind::msd || kind == PresetKind::pendulum) && (d.l != 2 || d.m != 1)) {
    throw ConfigError("the mechanical supply rate needs l = 2 outputs and m = 1 input");
  }
  if ((kind == PresetKind::custom || kind == PresetKind::conservative) && (c.Q.empty() || c.S.empty())) {
    throw ConfigError("custom/conservative supply needs projection.Q and projection.S");
  }
  if (kind == PresetKind::custom && c.R.empty()) throw ConfigError("custom supply needs projection.R");
  return preset(kind, a);
}

StorageFunction resolve_storage(const ExperimentConfig& c, const Dims& d) {
  if (c.storage_weight.empty()) return StorageFunction::half_squared_norm(d.n);
  if (c.storage_weight.rows() != d.n) throw ConfigError("storage_weight must be n x n");
  return StorageFunction(SymMatrix(c.storage_weight));
}

ProjectedModel build_from_config(const ExperimentConfig& c, const Dims& d) {
  ModelArchitecture arch;
  arch.dims = d;
  arch.f = c.f;
  arch.g = c.g;
  arch.h = c.h;
  arch.l = c.l;
  arch.eta = c.eta;
  arch.anchor_outputs = c.anchor_outputs;
  arch.with_feedthrough = c.feedthrough;
  return build_model(arch, c.projection, resolve_supply(c, d), resolve_storage(c, d), mix_seed(c.seed, 0, 4));
}

LossConfig resolved_loss(const ExperimentConfig& c) {
  LossConfig l = c.loss;
  l.rng_seed = c.seed;
  return l;
}

Trajectory reference_simulate(const ExperimentConfig& c, const Matrix& u, std::size_t horizon) {
  const SimConfig cfg{resolved_dt(c), horizon, c.x0};
  if (system_kind(c) == SystemKind::msd) return simulate_msd(c.msd, u, cfg, c.substeps);
  return simulate_pendulum(pendulum_params(c), u, cfg, c.substeps);
}

StorageCallback reference_storage(const ExperimentConfig& c) {
  if (system_kind(c) == SystemKind::msd) {
    const MsdParams p = c.msd;
    return [p](std::span<const double> x) { return msd_energy(p, x); };
  }
  const PendulumParams p = pendulum_params(c);
  return [p](std::span<const double> x) { return pendulum_energy(p, x); };
}

SupplyRate reference_supply(const ExperimentConfig& c) {
  return system_kind(c) == SystemKind::msd ? msd_supply(c.msd) : pendulum_supply(pendulum_params(c));
}

}  // namespace dissipnet
