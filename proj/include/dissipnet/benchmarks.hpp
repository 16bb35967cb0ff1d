#pragma once

// Ground-truth generators: input signals, the mass-spring-damper, the n-link
// pendulum, and dataset directories (manifest.json + one trajectory file per
// sample).

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dissipnet/training.hpp"

namespace dissipnet {

enum class SignalKind { rectangle, step, random_walk };
std::string to_string(SignalKind k);
SignalKind signal_from_string(const std::string& s);

struct SignalSpec {
  SignalKind kind = SignalKind::rectangle;
  double amplitude = 1.0;
  std::size_t horizon = 100;
  double dt = 0.1;
  std::uint64_t seed = 0;
  std::size_t dim = 1;
  // rectangle: segment lengths drawn uniformly from [min_segment, max_segment] steps
  std::size_t min_segment = 5;
  std::size_t max_segment = 25;
  // random_walk: variance of the Gaussian increments
  double variance = 0.005;
};

// horizon x dim; deterministic given the seed.
Matrix gen_signal(const SignalSpec& spec);

struct MsdParams {
  double m = 1.0, k = 1.0, c = 1.0;
  void validate() const;
};

// State (q, qdot), y = x; RK4 on `substeps` substeps per grid interval with
// the input held constant.
Trajectory simulate_msd(const MsdParams& p, const Matrix& u, const SimConfig& cfg, std::size_t substeps = 100);
// k q^2/2 + m qdot^2/2
double msd_energy(const MsdParams& p, std::span<const double> x);
// w = -c qdot^2 + qdot u on y = (q, qdot)
SupplyRate msd_supply(const MsdParams& p);

struct PendulumParams {
  std::size_t n_links = 2;
  double g_accel = 9.81;
  std::vector<double> lengths, masses, dampings;

  // l_i = 1/n, m_i = 2(n+1)/n, c_i = 1.
  static PendulumParams standard(std::size_t n_links);
  void validate() const;
};

// Tridiagonal damping matrix of the relative dampers.
Matrix pendulum_damping_matrix(const PendulumParams& p);
Matrix pendulum_mass_matrix(const PendulumParams& p, std::span<const double> q);
// qddot for absolute angles q from the downward vertical and torque on joint 1.
std::vector<double> pendulum_accel(const PendulumParams& p, std::span<const double> q, std::span<const double> qd,
                                   double tau);
// State (q, qdot), y = (q_1, qdot_1).
Trajectory simulate_pendulum(const PendulumParams& p, const Matrix& u, const SimConfig& cfg,
                             std::size_t substeps = 100);
// P(q) - P(0) + K(q, qdot)
double pendulum_energy(const PendulumParams& p, std::span<const double> x);
SupplyRate pendulum_supply(const PendulumParams& p);

enum class SystemKind { msd, pendulum };
std::string to_string(SystemKind k);
SystemKind system_from_string(const std::string& s);

struct DatasetSpec {
  SystemKind system = SystemKind::msd;
  MsdParams msd;
  PendulumParams pendulum;
  SignalSpec signal;     // horizon/dt/seed are overridden per trajectory
  std::size_t count = 100;
  std::uint64_t seed = 0;
  double dt = 0.1;
  std::size_t horizon = 100;
  double train_fraction = 0.9;
  std::size_t substeps = 100;

  // Span [0,10] at dt 0.1 for the MSD, [0,1] at dt 0.01 for the pendulum.
  static DatasetSpec standard(SystemKind system, std::size_t n_links = 2);
};

// Seed of the input signal of trajectory i.
std::uint64_t trajectory_seed(const DatasetSpec& spec, std::size_t i);

// In-memory generation; the first floor(train_fraction N) items are train.
Dataset generate_dataset(const DatasetSpec& spec, Exec exec = Exec::parallel);
// Writes manifest.json and traj_XXXX.csv files into dir. `provenance` is
// copied into the manifest.
Dataset make_dataset(const DatasetSpec& spec, const std::filesystem::path& dir, Exec exec = Exec::parallel,
                     const nlohmann::json& provenance = nlohmann::json::object());
Dataset load_dataset(const std::filesystem::path& dir);
// Trajectory files of any origin; dims and the time grid are inferred and
// checked for consistency.
Dataset load_external(const std::vector<std::filesystem::path>& files, double train_fraction = 0.9);

bool same_dataset(const Dataset& a, const Dataset& b);

nlohmann::json to_json(const SignalSpec& s);
SignalSpec signal_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DatasetSpec& s);

}  // namespace dissipnet
