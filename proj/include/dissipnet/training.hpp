#pragma once

// Regularized training loss
//   total = MSE + lambda1 L_proj + lambda2 L_recons
// and a minibatch gradient-descent loop over projected models.
//
// Per-trajectory gradients are recorded on private tapes and may run on
// parallel workers; they are summed in trajectory order afterwards, so the
// serial and parallel paths produce identical parameters.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dissipnet/dynamics.hpp"
#include "dissipnet/parallel.hpp"

namespace dissipnet {

// Loss assigned to a trajectory whose rollout left the finite region.
inline constexpr double kDivergedLoss = 1e6;

enum class Split { train, val, test };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct Dataset {
  double dt = 0.1;
  std::vector<Trajectory> items;
  std::vector<Split> splits;  // one per item

  std::size_t size() const noexcept { return items.size(); }
  std::size_t horizon() const { return items.empty() ? 0 : items[0].horizon(); }
  std::size_t input_dim() const { return items.empty() ? 0 : items[0].u.cols(); }
  std::size_t output_dim() const { return items.empty() ? 0 : items[0].y.cols(); }
  std::vector<std::size_t> indices(Split s) const;
  // Throws ConfigError unless all items share dt, horizon and dimensions.
  void validate() const;
};

struct LossConfig {
  double lambda1 = 1e-3;
  double lambda2 = 1e-4;
  std::size_t n_proj_samples = 100;
  std::uint64_t rng_seed = 0;
};

enum class Algorithm { adam, adamw, rmsprop, momentum };
std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::adam;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum = 0.9;   // momentum
  double rho = 0.9;        // rmsprop decay
  double grad_clip = 0.0;  // global-norm clip; 0 disables
  std::size_t batch_size = 32;
  std::size_t epochs = 100;

  void validate() const;
};

class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerConfig cfg, std::size_t param_count);

  void step(std::vector<double>& params, std::vector<double> grad);
  std::size_t steps() const noexcept { return t_; }
  const OptimizerConfig& config() const noexcept { return cfg_; }

  nlohmann::json state_json() const;
  void load_state(const nlohmann::json& j);

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

struct LossTerms {
  double mse = 0.0;
  double l_proj = 0.0;
  double l_recons = 0.0;
  double total = 0.0;
};

struct LossWeights {
  double mse = 1.0;
  double proj = 0.0;
  double recons = 0.0;
};

// Unweighted components, the weighted total, and its gradient with respect
// to ProjectedModel::flat_params().
struct LossGrad {
  LossTerms terms;
  std::vector<double> grad;
  std::size_t diverged = 0;
};

// Rollout losses over a batch of trajectories: MSE is the mean over batch and
// time of the squared output error (summed over output dimensions);
// L_recons is the mean over all rollout states of |x - eta(h(x))|^2, with
// gradients flowing back through the rollout. L_proj is the Monte-Carlo mean of
// |f - f_d|^2 + |g - g_d|^2 over `proj_samples`.
LossGrad batch_loss(const ProjectedModel& m, const std::vector<const Trajectory*>& batch,
                    const std::vector<std::vector<double>>& proj_samples, const LossWeights& w,
                    Exec exec = Exec::parallel);

LossGrad loss_mse(const ProjectedModel& m, const std::vector<const Trajectory*>& batch, Exec exec = Exec::parallel);
// Draws cfg.n_proj_samples standard-normal states from (cfg.rng_seed, epoch).
LossGrad loss_proj(const ProjectedModel& m, const LossConfig& cfg, std::size_t epoch = 0, Exec exec = Exec::parallel);
LossGrad loss_proj(const ProjectedModel& m, const std::vector<std::vector<double>>& samples,
                   Exec exec = Exec::parallel);
LossGrad loss_recons(const ProjectedModel& m, const std::vector<std::vector<double>>& states);

std::vector<std::vector<double>> proj_samples(std::size_t dim, const LossConfig& cfg, std::size_t epoch);

struct EpochRecord {
  std::size_t epoch = 0;
  LossTerms train;        // averaged over the epoch's minibatches
  double val_mse = 0.0;   // NaN without a validation split
  double wall_ms = 0.0;
  std::size_t diverged = 0;
};

struct TrainState {
  Optimizer optimizer;
  std::size_t epoch = 0;  // epochs completed
};

struct TrainOptions {
  Exec exec = Exec::parallel;
  double val_fraction = 0.2;  // of the train split
  std::optional<TrainState> resume;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t diverged = 0;
  TrainState state;
};

// Trains until opt.epochs epochs are completed in total (counting resumed
// ones). Randomness derives from loss.rng_seed and the epoch index only.
TrainReport train(ProjectedModel& m, const Dataset& data, const LossConfig& loss, const OptimizerConfig& opt,
                  const TrainOptions& options = {});

// Train-split items used for fitting and for validation.
struct TrainSplit {
  std::vector<std::size_t> fit, val;
};
TrainSplit split_train(const Dataset& data, double val_fraction);

nlohmann::json to_json(const EpochRecord& r);
nlohmann::json to_json(const TrainReport& r);
nlohmann::json to_json(const LossConfig& c);
LossConfig loss_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OptimizerConfig& c);
OptimizerConfig optimizer_config_from_json(const nlohmann::json& j);

struct Checkpoint {
  ProjectedModel model;
  TrainState state;
  LossConfig loss;
  OptimizerConfig optimizer;
};
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Outputs of the model for each input from x0 = 0; rows of a diverged
// rollout are NaN.
std::vector<Matrix> predict(const ProjectedModel& m, const std::vector<Matrix>& inputs, double dt,
                            Exec exec = Exec::parallel);

// RMSE(t)_k = sqrt(mean over trajectories and output dims of err_k^2).
std::vector<double> rmse_t(const std::vector<Matrix>& pred, const std::vector<Matrix>& target);
// Time mean of rmse_t.
double rmse(const std::vector<Matrix>& pred, const std::vector<Matrix>& target);

}  // namespace dissipnet
