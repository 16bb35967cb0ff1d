#include "dissipnet/benchmarks.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <Eigen/Cholesky>

#include "dissipnet/seed.hpp"

namespace dissipnet {

std::string to_string(SignalKind k) {
  switch (k) {
    case SignalKind::rectangle: return "rectangle";
    case SignalKind::step: return "step";
    case SignalKind::random_walk: return "random_walk";
  }
  return "rectangle";
}

SignalKind signal_from_string(const std::string& s) {
  for (auto k : {SignalKind::rectangle, SignalKind::step, SignalKind::random_walk})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown signal kind '" + s + "'");
}

Matrix gen_signal(const SignalSpec& spec) {
  if (spec.horizon < 1) throw ConfigError("signal horizon must be at least 1");
  if (spec.dim < 1) throw ConfigError("signal dimension must be at least 1");
  Matrix u(spec.horizon, spec.dim);
  std::mt19937_64 rng(spec.seed);
  switch (spec.kind) {
    case SignalKind::step:
      for (auto& v : u.data()) v = spec.amplitude;
      break;
    case SignalKind::rectangle: {
      if (spec.min_segment < 1 || spec.max_segment < spec.min_segment) {
        throw ConfigError("rectangle segments need 1 <= min_segment <= max_segment");
      }
      std::uniform_int_distribution<std::size_t> seg(spec.min_segment, spec.max_segment);
      std::bernoulli_distribution sign(0.5);
      for (std::size_t c = 0; c < spec.dim; ++c) {
        std::size_t k = 0;
        while (k < spec.horizon) {
          const std::size_t len = seg(rng);
          const double level = sign(rng) ? spec.amplitude : -spec.amplitude;
          for (std::size_t e = std::min(spec.horizon, k + len); k < e; ++k) u(k, c) = level;
        }
      }
      break;
    }
    case SignalKind::random_walk: {
      if (!(spec.variance > 0.0)) throw ConfigError("random_walk variance must be positive");
      std::normal_distribution<double> inc(0.0, std::sqrt(spec.variance));
      for (std::size_t c = 0; c < spec.dim; ++c) {
        double level = 0.0;
        for (std::size_t k = 0; k < spec.horizon; ++k) {
          level += inc(rng);
          u(k, c) = level;
        }
      }
      break;
    }
  }
  return u;
}

void MsdParams::validate() const {
  if (!(m > 0.0 && k > 0.0 && c > 0.0)) throw ConfigError("MSD parameters m, k, c must be positive");
}

namespace {

// Classical RK4 over one grid interval split into `substeps` pieces.
template <class Rhs>
void rk4_interval(std::vector<double>& x, double dt, std::size_t substeps, Rhs&& rhs) {
  const double h = dt / static_cast<double>(substeps);
  const std::size_t n = x.size();
  std::vector<double> tmp(n);
  for (std::size_t s = 0; s < substeps; ++s) {
    const auto k1 = rhs(x);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    const auto k2 = rhs(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    const auto k3 = rhs(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
    const auto k4 = rhs(tmp);
    for (std::size_t i = 0; i < n; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
}

template <class Rhs, class Out>
Trajectory integrate(std::size_t n, const Matrix& u, const SimConfig& cfg, std::size_t substeps, Rhs&& rhs,
                     Out&& output) {
  if (u.rows() != cfg.horizon) throw DimensionMismatch("input signal rows != horizon");
  if (!(cfg.dt > 0.0)) throw ConfigError("dt must be positive");
  if (substeps < 1) throw ConfigError("substeps must be at least 1");
  std::vector<double> x = cfg.x0.empty() ? std::vector<double>(n, 0.0) : cfg.x0;
  if (x.size() != n) throw DimensionMismatch("x0 length");
  Trajectory t;
  t.times.resize(cfg.horizon + 1);
  t.u = u;
  t.x = Matrix(cfg.horizon + 1, n);
  const std::size_t l = output(x).size();
  t.y = Matrix(cfg.horizon + 1, l);
  for (std::size_t k = 0; k <= cfg.horizon; ++k) {
    t.times[k] = static_cast<double>(k) * cfg.dt;
    std::copy(x.begin(), x.end(), t.x.row(k).begin());
    const auto y = output(x);
    std::copy(y.begin(), y.end(), t.y.row(k).begin());
    if (k == cfg.horizon) break;
    const auto uk = u.row(k);
    rk4_interval(x, cfg.dt, substeps, [&](const std::vector<double>& s) { return rhs(s, uk); });
    if (state_diverged<double>(x)) throw NonFiniteState(k + 1, "reference simulation diverged");
  }
  return t;
}

SupplyRate mechanical_supply(double c) {
  PresetArgs a;
  a.output_dim = 2;
  a.input_dim = 1;
  a.damping = c;
  return preset(PresetKind::msd, a);
}

}  // namespace

Trajectory simulate_msd(const MsdParams& p, const Matrix& u, const SimConfig& cfg, std::size_t substeps) {
  p.validate();
  if (u.cols() != 1) throw DimensionMismatch("MSD takes a scalar force input");
  return integrate(
      2, u, cfg, substeps,
      [&](const std::vector<double>& x, std::span<const double> uk) {
        return std::vector<double>{x[1], (uk[0] - p.c * x[1] - p.k * x[0]) / p.m};
      },
      [](const std::vector<double>& x) { return x; });
}

double msd_energy(const MsdParams& p, std::span<const double> x) {
  return 0.5 * p.k * x[0] * x[0] + 0.5 * p.m * x[1] * x[1];
}

SupplyRate msd_supply(const MsdParams& p) { return mechanical_supply(p.c); }

PendulumParams PendulumParams::standard(std::size_t n) {
  PendulumParams p;
  p.n_links = n;
  const double nd = static_cast<double>(n);
  p.lengths.assign(n, 1.0 / nd);
  p.masses.assign(n, 2.0 * (nd + 1.0) / nd);
  p.dampings.assign(n, 1.0);
  return p;
}

void PendulumParams::validate() const {
  if (n_links < 1 || n_links > 3) throw ConfigError("n-link pendulum supports n in {1, 2, 3}, got " + std::to_string(n_links));
  if (lengths.size() != n_links || masses.size() != n_links || dampings.size() != n_links) {
    throw ConfigError("pendulum needs one length, mass and damping per link");
  }
  for (std::size_t i = 0; i < n_links; ++i)
    if (!(lengths[i] > 0.0 && masses[i] > 0.0 && dampings[i] > 0.0)) throw ConfigError("pendulum parameters must be positive");
  if (!(g_accel >= 0.0)) throw ConfigError("gravity must be nonnegative");
}

Matrix pendulum_damping_matrix(const PendulumParams& p) {
  const std::size_t n = p.n_links;
  Matrix c(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    c(i, i) = p.dampings[i] + (i + 1 < n ? p.dampings[i + 1] : 0.0);
    if (i + 1 < n) {
      c(i, i + 1) = -p.dampings[i + 1];
      c(i + 1, i) = -p.dampings[i + 1];
    }
  }
  return c;
}

namespace {

// Sum of the masses at or beyond link max(j, k).
double tail_mass(const PendulumParams& p, std::size_t j, std::size_t k) {
  double s = 0.0;
  for (std::size_t i = std::max(j, k); i < p.n_links; ++i) s += p.masses[i];
  return s;
}

// M(q) is symmetric positive definite for positive masses and lengths.
std::vector<double> solve(const Matrix& a, const std::vector<double>& b) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto n = static_cast<Eigen::Index>(b.size());
  const Eigen::Map<const RowMajor> m(a.data().data(), n, n);
  const Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw RankDeficient("pendulum mass matrix is not positive definite");
  std::vector<double> x(b.size());
  Eigen::Map<Eigen::VectorXd>(x.data(), n) = llt.solve(Eigen::Map<const Eigen::VectorXd>(b.data(), n));
  return x;
}

}  // namespace

Matrix pendulum_mass_matrix(const PendulumParams& p, std::span<const double> q) {
  const std::size_t n = p.n_links;
  Matrix m(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k)
      m(j, k) = tail_mass(p, j, k) * p.lengths[j] * p.lengths[k] * std::cos(q[j] - q[k]);
  return m;
}

std::vector<double> pendulum_accel(const PendulumParams& p, std::span<const double> q, std::span<const double> qd,
                                   double tau) {
  const std::size_t n = p.n_links;
  const Matrix c = pendulum_damping_matrix(p);
  std::vector<double> rhs(n, 0.0);
  rhs[0] = tau;
  for (std::size_t j = 0; j < n; ++j) {
    double coriolis = 0.0, damping = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      coriolis += tail_mass(p, j, k) * p.lengths[j] * p.lengths[k] * std::sin(q[j] - q[k]) * qd[k] * qd[k];
      damping += c(j, k) * qd[k];
    }
    const double gravity = p.g_accel * p.lengths[j] * std::sin(q[j]) * tail_mass(p, j, j);
    rhs[j] -= coriolis + gravity + damping;
  }
  return solve(pendulum_mass_matrix(p, q), rhs);
}

Trajectory simulate_pendulum(const PendulumParams& p, const Matrix& u, const SimConfig& cfg, std::size_t substeps) {
  p.validate();
  if (u.cols() != 1) throw DimensionMismatch("the pendulum takes a scalar torque on joint 1");
  const std::size_t n = p.n_links;
  return integrate(
      2 * n, u, cfg, substeps,
      [&](const std::vector<double>& x, std::span<const double> uk) {
        const std::span<const double> q(x.data(), n), qd(x.data() + n, n);
        const auto acc = pendulum_accel(p, q, qd, uk[0]);
        std::vector<double> dx(2 * n);
        std::copy(qd.begin(), qd.end(), dx.begin());
        std::copy(acc.begin(), acc.end(), dx.begin() + static_cast<std::ptrdiff_t>(n));
        return dx;
      },
      [n](const std::vector<double>& x) { return std::vector<double>{x[0], x[n]}; });
}

double pendulum_energy(const PendulumParams& p, std::span<const double> x) {
  const std::size_t n = p.n_links;
  const std::span<const double> q(x.data(), n), qd(x.data() + n, n);
  // Heights relative to the hanging rest configuration.
  double potential = 0.0;
  for (std::size_t j = 0; j < n; ++j) potential += p.g_accel * tail_mass(p, j, j) * p.lengths[j] * (1.0 - std::cos(q[j]));
  const Matrix m = pendulum_mass_matrix(p, q);
  double kinetic = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) kinetic += 0.5 * qd[j] * m(j, k) * qd[k];
  return potential + kinetic;
}

SupplyRate pendulum_supply(const PendulumParams& p) {
  p.validate();
  return mechanical_supply(p.dampings[0]);
}

std::string to_string(SystemKind k) { return k == SystemKind::msd ? "msd" : "pendulum"; }

SystemKind system_from_string(const std::string& s) {
  if (s == "msd") return SystemKind::msd;
  if (s == "pendulum") return SystemKind::pendulum;
  throw ConfigError("unknown system '" + s + "'");
}

DatasetSpec DatasetSpec::standard(SystemKind system, std::size_t n_links) {
  DatasetSpec s;
  s.system = system;
  if (system == SystemKind::pendulum) {
    s.pendulum = PendulumParams::standard(n_links);
    s.dt = 0.01;
    s.horizon = 100;
  } else {
    s.dt = 0.1;
    s.horizon = 100;
  }
  return s;
}

std::uint64_t trajectory_seed(const DatasetSpec& spec, std::size_t i) { return mix_seed(spec.seed, i, 3); }

Dataset generate_dataset(const DatasetSpec& spec, Exec exec) {
  if (spec.count < 2) throw ConfigError("a dataset needs at least two trajectories");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  if (spec.system == SystemKind::msd) spec.msd.validate();
  else spec.pendulum.validate();
  Dataset d;
  d.dt = spec.dt;
  d.items.resize(spec.count);
  const SimConfig cfg{spec.dt, spec.horizon, {}};
  for_each_index(spec.count, exec, [&](std::size_t i) {
    SignalSpec sig = spec.signal;
    sig.horizon = spec.horizon;
    sig.dt = spec.dt;
    sig.dim = 1;
    sig.seed = trajectory_seed(spec, i);
    const Matrix u = gen_signal(sig);
    d.items[i] = spec.system == SystemKind::msd ? simulate_msd(spec.msd, u, cfg, spec.substeps)
                                                : simulate_pendulum(spec.pendulum, u, cfg, spec.substeps);
  });
  const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(spec.count)));
  d.splits.assign(spec.count, Split::test);
  for (std::size_t i = 0; i < std::max<std::size_t>(1, std::min(n_train, spec.count - 1)); ++i) d.splits[i] = Split::train;
  return d;
}

namespace {

std::string traj_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "traj_%04zu.csv", i);
  return buf;
}

}  // namespace

nlohmann::json to_json(const SignalSpec& s) {
  return {{"kind", to_string(s.kind)},         {"amplitude", s.amplitude},     {"min_segment", s.min_segment},
          {"max_segment", s.max_segment}, {"variance", s.variance}};
}

SignalSpec signal_spec_from_json(const nlohmann::json& j) {
  SignalSpec s;
  s.kind = signal_from_string(j.at("kind").get<std::string>());
  s.amplitude = j.at("amplitude").get<double>();
  s.min_segment = j.at("min_segment").get<std::size_t>();
  s.max_segment = j.at("max_segment").get<std::size_t>();
  s.variance = j.at("variance").get<double>();
  return s;
}

nlohmann::json to_json(const DatasetSpec& s) {
  nlohmann::json params;
  if (s.system == SystemKind::msd) {
    params = {{"m", s.msd.m}, {"k", s.msd.k}, {"c", s.msd.c}};
  } else {
    params = {{"n_links", s.pendulum.n_links},
              {"g", s.pendulum.g_accel},
              {"lengths", s.pendulum.lengths},
              {"masses", s.pendulum.masses},
              {"dampings", s.pendulum.dampings}};
  }
  return {{"system", to_string(s.system)}, {"params", params},     {"signal", to_json(s.signal)},
          {"count", s.count},              {"seed", s.seed},       {"dt", s.dt},
          {"horizon", s.horizon},          {"train_fraction", s.train_fraction}, {"substeps", s.substeps}};
}

Dataset make_dataset(const DatasetSpec& spec, const std::filesystem::path& dir, Exec exec,
                     const nlohmann::json& provenance) {
  Dataset d = generate_dataset(spec, exec);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json manifest = to_json(spec);
  manifest["format"] = "dissipnet-dataset";
  nlohmann::json files = nlohmann::json::array(), splits = nlohmann::json::array(), seeds = nlohmann::json::array();
  for (std::size_t i = 0; i < d.size(); ++i) {
    files.push_back(traj_name(i));
    splits.push_back(to_string(d.splits[i]));
    seeds.push_back(trajectory_seed(spec, i));
  }
  manifest["files"] = files;
  manifest["splits"] = splits;
  manifest["trajectory_seeds"] = seeds;
  manifest["provenance"] = provenance;
  for_each_index(d.size(), exec, [&](std::size_t i) { write_trajectory(dir / traj_name(i), d.items[i]); });
  const auto path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
  return d;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  Dataset d;
  try {
    d.dt = manifest.at("dt").get<double>();
    const auto files = manifest.at("files").get<std::vector<std::string>>();
    const auto splits = manifest.at("splits").get<std::vector<std::string>>();
    if (files.size() != splits.size()) throw FormatError(path.string() + ": files and splits differ in length");
    for (std::size_t i = 0; i < files.size(); ++i) {
      d.items.push_back(read_trajectory(dir / files[i]));
      d.splits.push_back(split_from_string(splits[i]));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  try {
    d.validate();
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return d;
}

Dataset load_external(const std::vector<std::filesystem::path>& files, double train_fraction) {
  if (files.empty()) throw FormatError("no trajectory files given");
  Dataset d;
  for (const auto& f : files) {
    Trajectory t = read_trajectory(f);
    const double dt = t.dt();
    if (!(dt > 0.0)) throw FormatError(f.string() + ": time column must increase");
    for (std::size_t k = 0; k < t.times.size(); ++k) {
      if (std::abs(t.times[k] - t.times[0] - static_cast<double>(k) * dt) > 1e-6 * std::max(1.0, dt * static_cast<double>(k))) {
        throw FormatError(f.string() + ": row " + std::to_string(k) + " breaks the uniform time grid");
      }
    }
    if (!d.items.empty()) {
      const auto& r = d.items.front();
      if (t.u.cols() != r.u.cols() || t.y.cols() != r.y.cols() || t.x.cols() != r.x.cols() ||
          t.horizon() != r.horizon()) {
        throw FormatError(f.string() + ": columns or row count differ from " + files.front().string());
      }
      if (std::abs(dt - d.dt) > 1e-9 * std::max(1.0, d.dt)) throw FormatError(f.string() + ": time step differs");
    } else {
      d.dt = dt;
    }
    d.items.push_back(std::move(t));
  }
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(files.size())));
  d.splits.assign(files.size(), Split::test);
  for (std::size_t i = 0; i < std::min(n_train, files.size()); ++i) d.splits[i] = Split::train;
  return d;
}

bool same_dataset(const Dataset& a, const Dataset& b) {
  if (a.dt != b.dt || a.size() != b.size() || a.splits != b.splits) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& s = a.items[i];
    const auto& t = b.items[i];
    if (s.times != t.times || s.u.data() != t.u.data() || s.y.data() != t.y.data() || s.x.data() != t.x.data() ||
        s.u.cols() != t.u.cols() || s.y.cols() != t.y.cols() || s.x.cols() != t.x.cols()) {
      return false;
    }
  }
  return true;
}

}  // namespace dissipnet
