#pragma once

// Experiment configuration: one nested JSON document driving generation,
// training, evaluation and verification. Missing keys take defaults, unknown
// keys are errors.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dissipnet/benchmarks.hpp"
#include "dissipnet/verify.hpp"

namespace dissipnet {

struct VerifyConfig {
  std::size_t n_samples = 1000;
  double kyp_threshold = 1e-8;
  double idempotence_threshold = 1e-9;
  double c_tol = 1e-2;
  std::size_t n_rollouts = 20;
  std::size_t long_horizon = 1000;
};

struct ExperimentConfig {
  // system
  std::string system = "msd";  // msd | pendulum | external
  std::size_t n_links = 2;
  MsdParams msd;
  double gravity = 9.81;
  std::vector<std::string> external_files;

  SignalSpec signal;
  double dt = 0.0;            // 0: the system default
  std::size_t horizon = 0;    // 0: the system default
  std::vector<double> x0;     // empty: origin

  std::size_t count = 100;
  double train_fraction = 0.9;
  std::size_t substeps = 100;

  // model
  std::size_t state_dim = 0;  // 0: the system default
  NetSpec f{{32}, Activation::relu, 0.1};
  NetSpec g{{32}, Activation::relu, 1.0};
  NetSpec h{{}, Activation::relu, 1.0};
  NetSpec l{{32}, Activation::relu, 1.0};
  NetSpec eta{{}, Activation::relu, 1.0};
  bool anchor_outputs = true;
  bool feedthrough = false;

  // projection
  ProjectionKind projection = ProjectionKind::dissipative;
  std::string supply = "auto";  // auto or a preset name
  double gamma2 = 2.0;
  Matrix Q, S, R;               // custom/conservative presets
  Matrix storage_weight;        // empty: identity

  LossConfig loss;              // rng_seed is taken from `seed`
  OptimizerConfig optimizer;
  VerifyConfig verify;

  std::uint64_t seed = 0;
  std::string output_dir = "out";
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);
// FNV-1a of the canonical serialization.
std::string config_hash(const ExperimentConfig& c);

bool is_external(const ExperimentConfig& c);
SystemKind system_kind(const ExperimentConfig& c);
double resolved_dt(const ExperimentConfig& c);
std::size_t resolved_horizon(const ExperimentConfig& c);
DatasetSpec dataset_spec(const ExperimentConfig& c);
PendulumParams pendulum_params(const ExperimentConfig& c);

// Model dimensions; m and l come from the data (or the system defaults).
Dims model_dims(const ExperimentConfig& c, std::size_t m, std::size_t l);
SupplyRate resolve_supply(const ExperimentConfig& c, const Dims& d);
StorageFunction resolve_storage(const ExperimentConfig& c, const Dims& d);
ProjectedModel build_from_config(const ExperimentConfig& c, const Dims& d);
LossConfig resolved_loss(const ExperimentConfig& c);

// Ground-truth rollout of the configured reference system.
Trajectory reference_simulate(const ExperimentConfig& c, const Matrix& u, std::size_t horizon);
// Storage function and supply rate certified for the reference system.
StorageCallback reference_storage(const ExperimentConfig& c);
SupplyRate reference_supply(const ExperimentConfig& c);

}  // namespace dissipnet
