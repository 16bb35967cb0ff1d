#include "dissipnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "dissipnet/seed.hpp"
#include "dissipnet/verify.hpp"

namespace dissipnet {

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw FormatError("unknown split '" + s + "'");
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i)
    if (splits[i] == s) out.push_back(i);
  return out;
}

void Dataset::validate() const {
  if (items.empty()) throw ConfigError("dataset is empty");
  if (splits.size() != items.size()) throw ConfigError("dataset split tags do not match the item count");
  if (!(dt > 0.0)) throw ConfigError("dataset dt must be positive");
  const std::size_t h = horizon(), m = input_dim(), l = output_dim();
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& t = items[i];
    if (t.horizon() != h || t.u.cols() != m || t.y.cols() != l || t.y.rows() != h + 1) {
      throw ConfigError("dataset item " + std::to_string(i) + " does not share horizon and dimensions");
    }
    if (std::abs(t.dt() - dt) > 1e-9 * std::max(1.0, dt)) {
      throw ConfigError("dataset item " + std::to_string(i) + " has dt " + std::to_string(t.dt()));
    }
  }
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::adam: return "adam";
    case Algorithm::adamw: return "adamw";
    case Algorithm::rmsprop: return "rmsprop";
    case Algorithm::momentum: return "momentum";
  }
  return "adam";
}

Algorithm algorithm_from_string(const std::string& s) {
  for (auto a : {Algorithm::adam, Algorithm::adamw, Algorithm::rmsprop, Algorithm::momentum})
    if (to_string(a) == s) return a;
  throw ConfigError("unknown optimizer '" + s + "'");
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (weight_decay < 0.0 || grad_clip < 0.0) throw ConfigError("weight_decay and grad_clip must be nonnegative");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && rho >= 0.0 && rho < 1.0)) {
    throw ConfigError("decay constants must lie in [0, 1)");
  }
}

Optimizer::Optimizer(OptimizerConfig cfg, std::size_t param_count)
    : cfg_(std::move(cfg)), m_(param_count, 0.0), v_(param_count, 0.0) {
  cfg_.validate();
}

void Optimizer::step(std::vector<double>& p, std::vector<double> g) {
  if (p.size() != m_.size() || g.size() != m_.size()) throw DimensionMismatch("optimizer parameter count");
  if (cfg_.grad_clip > 0.0) {
    double norm = 0.0;
    for (double v : g) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > cfg_.grad_clip)
      for (auto& v : g) v *= cfg_.grad_clip / norm;
  }
  ++t_;
  const double lr = cfg_.learning_rate, wd = cfg_.weight_decay;
  switch (cfg_.algorithm) {
    case Algorithm::adam:
    case Algorithm::adamw: {
      const bool decoupled = cfg_.algorithm == Algorithm::adamw;
      const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = decoupled ? g[i] : g[i] + wd * p[i];
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * gi;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * gi * gi;
        if (decoupled) p[i] -= lr * wd * p[i];
        p[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps);
      }
      break;
    }
    case Algorithm::rmsprop:
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i] + wd * p[i];
        v_[i] = cfg_.rho * v_[i] + (1.0 - cfg_.rho) * gi * gi;
        p[i] -= lr * gi / (std::sqrt(v_[i]) + cfg_.eps);
      }
      break;
    case Algorithm::momentum:
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i] + wd * p[i];
        m_[i] = cfg_.momentum * m_[i] + gi;
        p[i] -= lr * m_[i];
      }
      break;
  }
}

nlohmann::json Optimizer::state_json() const { return {{"t", t_}, {"m", m_}, {"v", v_}}; }

void Optimizer::load_state(const nlohmann::json& j) {
  auto m = j.at("m").get<std::vector<double>>();
  auto v = j.at("v").get<std::vector<double>>();
  if (m.size() != m_.size() || v.size() != v_.size()) throw FormatError("optimizer state size mismatch");
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = j.at("t").get<std::size_t>();
}

namespace {

using ad::Var;

struct Recording {
  ad::Tape tape;
  std::vector<Var> leaves;
};

void record_leaves(Recording& r, const std::vector<double>& flat) {
  r.leaves.reserve(flat.size());
  for (double p : flat) r.leaves.push_back(Var::leaf(p));
}

// Gradient of sum_k adj_k * node_k with respect to the leaves.
std::vector<double> leaf_gradient(const Recording& r, const std::vector<Var>& nodes, const std::vector<double>& adj) {
  std::vector<std::int32_t> seeds;
  std::vector<double> seed_adj;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k].idx < 0 || adj[k] == 0.0) continue;
    seeds.push_back(nodes[k].idx);
    seed_adj.push_back(adj[k]);
  }
  std::vector<double> grad(r.leaves.size(), 0.0);
  if (seeds.empty()) return grad;
  const auto a = r.tape.backward(seeds, seed_adj);
  for (std::size_t i = 0; i < r.leaves.size(); ++i) grad[i] = a[r.leaves[i].idx];
  return grad;
}

template <class T>
std::vector<T> recon_output(const ModelEvaluator<T>& ev, std::span<const T> x) {
  // Only the alpha passive projection modifies h.
  if (ev.model().spec.kind == ProjectionKind::passive_alpha) return ev.projected(x).h;
  return ev.h_value(x);
}

struct TrajectoryTerms {
  double mse_sum = 0.0;
  double recon_sum = 0.0;
  bool diverged = false;
  std::vector<double> grad;
};

TrajectoryTerms trajectory_terms(const ProjectedModel& m, const std::vector<double>& flat, const Trajectory& t,
                                 double w_mse, double w_recon, bool recons) {
  TrajectoryTerms out;
  Recording rec;
  ad::TapeScope scope(rec.tape);
  record_leaves(rec, flat);
  const ModelEvaluator<Var> ev(m, rec.leaves);
  const SimConfig cfg{t.dt(), t.horizon(), {}};
  std::vector<std::vector<Var>> xs, ys;
  try {
    rollout<Var>(ev, t.u, cfg, xs, ys);
  } catch (const NonFiniteState&) {
    out.diverged = true;
    out.mse_sum = kDivergedLoss * static_cast<double>(t.horizon() + 1);
    out.grad.assign(flat.size(), 0.0);
    return out;
  }
  if (t.y.rows() != ys.size() || t.y.cols() != ys[0].size()) throw DimensionMismatch("target output shape");
  Var mse(0.0);
  for (std::size_t k = 0; k < ys.size(); ++k)
    for (std::size_t i = 0; i < ys[k].size(); ++i) {
      const Var e = ys[k][i] - t.y(k, i);
      mse = mse + e * e;
    }
  Var recon(0.0);
  if (recons) {
    // States stay on the tape, so the gradient is that of the reported loss.
    for (const auto& xv : xs) {
      const auto h = recon_output<Var>(ev, std::span<const Var>(xv));
      const auto r = ev.eta(h);
      for (std::size_t i = 0; i < xv.size(); ++i) {
        const Var d = xv[i] - r[i];
        recon = recon + d * d;
      }
    }
  }
  out.mse_sum = mse.val;
  out.recon_sum = recon.val;
  out.grad = leaf_gradient(rec, {mse, recon}, {w_mse, w_recon});
  return out;
}

struct SampleTerm {
  double value = 0.0;
  std::vector<double> grad;
};

SampleTerm proj_term(const ProjectedModel& m, const std::vector<double>& flat, std::span<const double> x, double w) {
  SampleTerm out;
  Recording rec;
  ad::TapeScope scope(rec.tape);
  record_leaves(rec, flat);
  const ModelEvaluator<Var> ev(m, rec.leaves);
  const std::vector<Var> xv(x.begin(), x.end());
  const auto raw = ev.raw(xv);
  const auto gv = ev.grad_v(xv);
  const auto lv = ev.l_value(xv);
  const auto pd = project_values<Var>(m.spec, raw, gv, lv);
  Var s(0.0);
  for (std::size_t i = 0; i < raw.f.size(); ++i) {
    const Var d = raw.f[i] - pd.f[i];
    s = s + d * d;
  }
  for (std::size_t k = 0; k < raw.g.data().size(); ++k) {
    const Var d = raw.g.data()[k] - pd.g.data()[k];
    s = s + d * d;
  }
  out.value = s.val;
  out.grad = leaf_gradient(rec, {s}, {w});
  return out;
}

void add_into(std::vector<double>& acc, const std::vector<double>& g) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

void require_differentiable(const ProjectedModel& m) {
  if (m.spec.kind == ProjectionKind::general || m.raw.j) {
    throw ConfigError("the feedthrough (general) projection is evaluation-only; it cannot be trained");
  }
}

}  // namespace

std::vector<std::vector<double>> proj_samples(std::size_t dim, const LossConfig& cfg, std::size_t epoch) {
  return normal_samples(dim, cfg.n_proj_samples, mix_seed(cfg.rng_seed, epoch, 2));
}

LossGrad batch_loss(const ProjectedModel& m, const std::vector<const Trajectory*>& batch,
                    const std::vector<std::vector<double>>& samples, const LossWeights& w, Exec exec) {
  require_differentiable(m);
  const auto flat = m.flat_params();
  LossGrad out;
  out.grad.assign(flat.size(), 0.0);
  const bool recons = w.recons != 0.0;
  if (recons && !m.eta) throw MissingEta("reconstruction loss needs the eta network");

  if (!batch.empty()) {
    const std::size_t rows = batch[0]->horizon() + 1;
    for (const auto* t : batch)
      if (t->horizon() + 1 != rows) throw DimensionMismatch("batch trajectories must share the horizon");
    const double scale = 1.0 / (static_cast<double>(batch.size()) * static_cast<double>(rows));
    std::vector<TrajectoryTerms> terms(batch.size());
    for_each_index(batch.size(), exec, [&](std::size_t i) {
      terms[i] = trajectory_terms(m, flat, *batch[i], w.mse * scale, w.recons * scale, recons);
    });
    for (const auto& t : terms) {
      out.terms.mse += t.mse_sum * scale;
      out.terms.l_recons += t.recon_sum * scale;
      out.diverged += t.diverged ? 1 : 0;
      add_into(out.grad, t.grad);
    }
  }

  if (!samples.empty()) {
    const double scale = 1.0 / static_cast<double>(samples.size());
    std::vector<SampleTerm> terms(samples.size());
    for_each_index(samples.size(), exec,
                   [&](std::size_t i) { terms[i] = proj_term(m, flat, samples[i], w.proj * scale); });
    for (const auto& t : terms) {
      out.terms.l_proj += t.value * scale;
      add_into(out.grad, t.grad);
    }
  }
  out.terms.total = w.mse * out.terms.mse + w.proj * out.terms.l_proj + w.recons * out.terms.l_recons;
  return out;
}

LossGrad loss_mse(const ProjectedModel& m, const std::vector<const Trajectory*>& batch, Exec exec) {
  if (batch.empty()) throw ConfigError("loss_mse needs a nonempty batch");
  return batch_loss(m, batch, {}, LossWeights{1.0, 0.0, 0.0}, exec);
}

LossGrad loss_proj(const ProjectedModel& m, const LossConfig& cfg, std::size_t epoch, Exec exec) {
  return loss_proj(m, proj_samples(m.dims.n, cfg, epoch), exec);
}

LossGrad loss_proj(const ProjectedModel& m, const std::vector<std::vector<double>>& samples, Exec exec) {
  return batch_loss(m, {}, samples, LossWeights{0.0, 1.0, 0.0}, exec);
}

LossGrad loss_recons(const ProjectedModel& m, const std::vector<std::vector<double>>& states) {
  if (!m.eta) throw MissingEta("reconstruction loss needs the eta network");
  require_differentiable(m);
  const auto flat = m.flat_params();
  LossGrad out;
  if (states.empty()) {
    out.grad.assign(flat.size(), 0.0);
    return out;
  }
  Recording rec;
  ad::TapeScope scope(rec.tape);
  record_leaves(rec, flat);
  const ModelEvaluator<Var> ev(m, rec.leaves);
  Var s(0.0);
  for (const auto& x : states) {
    const std::vector<Var> xv(x.begin(), x.end());
    const auto r = ev.eta(recon_output<Var>(ev, xv));
    for (std::size_t i = 0; i < x.size(); ++i) {
      const Var d = x[i] - r[i];
      s = s + d * d;
    }
  }
  const double scale = 1.0 / static_cast<double>(states.size());
  out.terms.l_recons = s.val * scale;
  out.terms.total = out.terms.l_recons;
  out.grad = leaf_gradient(rec, {s}, {scale});
  return out;
}

TrainSplit split_train(const Dataset& data, double val_fraction) {
  if (val_fraction < 0.0 || val_fraction >= 1.0) throw ConfigError("val_fraction must lie in [0, 1)");
  TrainSplit s;
  const auto train = data.indices(Split::train);
  const auto explicit_val = data.indices(Split::val);
  if (!explicit_val.empty()) {
    s.fit = train;
    s.val = explicit_val;
    return s;
  }
  const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(train.size())));
  s.fit.assign(train.begin(), train.end() - static_cast<std::ptrdiff_t>(n_val));
  s.val.assign(train.end() - static_cast<std::ptrdiff_t>(n_val), train.end());
  return s;
}

namespace {

double evaluate_mse(const ProjectedModel& m, const Dataset& data, const std::vector<std::size_t>& idx, Exec exec) {
  if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto ev = evaluator(m);
  std::vector<double> sums(idx.size());
  for_each_index(idx.size(), exec, [&](std::size_t i) {
    const auto& t = data.items[idx[i]];
    std::vector<std::vector<double>> xs, ys;
    try {
      rollout<double>(ev, t.u, SimConfig{t.dt(), t.horizon(), {}}, xs, ys);
    } catch (const NonFiniteState&) {
      sums[i] = kDivergedLoss * static_cast<double>(t.horizon() + 1);
      return;
    }
    double s = 0.0;
    for (std::size_t k = 0; k < ys.size(); ++k)
      for (std::size_t j = 0; j < ys[k].size(); ++j) s += (ys[k][j] - t.y(k, j)) * (ys[k][j] - t.y(k, j));
    sums[i] = s;
  });
  const double rows = static_cast<double>(data.horizon() + 1);
  return std::accumulate(sums.begin(), sums.end(), 0.0) / (rows * static_cast<double>(idx.size()));
}

}  // namespace

TrainReport train(ProjectedModel& m, const Dataset& data, const LossConfig& loss, const OptimizerConfig& opt,
                  const TrainOptions& options) {
  data.validate();
  opt.validate();
  require_differentiable(m);
  if (loss.lambda1 < 0.0 || loss.lambda2 < 0.0) throw ConfigError("loss weights must be nonnegative");
  if (data.input_dim() != m.dims.m || data.output_dim() != m.dims.l) {
    throw ConfigError("dataset has m=" + std::to_string(data.input_dim()) + ", l=" + std::to_string(data.output_dim()) +
                      " but the model has m=" + std::to_string(m.dims.m) + ", l=" + std::to_string(m.dims.l));
  }
  const auto split = split_train(data, options.val_fraction);
  if (split.fit.empty()) throw ConfigError("the training split is empty");

  TrainReport report;
  report.state = options.resume ? *options.resume : TrainState{Optimizer(opt, m.param_count()), 0};
  std::vector<double> params = m.flat_params();
  const LossWeights weights{1.0, loss.lambda1, loss.lambda2};

  for (std::size_t epoch = report.state.epoch; epoch < opt.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::size_t> order = split.fit;
    std::mt19937_64 rng(mix_seed(loss.rng_seed, epoch, 1));
    std::shuffle(order.begin(), order.end(), rng);
    const auto samples = loss.lambda1 > 0.0 ? proj_samples(m.dims.n, loss, epoch) : std::vector<std::vector<double>>{};

    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += opt.batch_size) {
      std::vector<const Trajectory*> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + opt.batch_size); ++i) batch.push_back(&data.items[order[i]]);
      auto lg = batch_loss(m, batch, samples, weights, options.exec);
      report.state.optimizer.step(params, std::move(lg.grad));
      m.set_flat_params(params);
      rec.train.mse += lg.terms.mse;
      rec.train.l_proj += lg.terms.l_proj;
      rec.train.l_recons += lg.terms.l_recons;
      rec.train.total += lg.terms.total;
      rec.diverged += lg.diverged;
      ++batches;
    }
    const double inv = 1.0 / static_cast<double>(batches);
    rec.train.mse *= inv;
    rec.train.l_proj *= inv;
    rec.train.l_recons *= inv;
    rec.train.total *= inv;
    rec.val_mse = evaluate_mse(m, data, split.val, options.exec);
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    report.diverged += rec.diverged;
    report.state.epoch = epoch + 1;
    report.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  return report;
}

// wall_ms is the only field that differs between identical reruns.
nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},       {"mse", r.train.mse},       {"l_proj", r.train.l_proj},
          {"l_recons", r.train.l_recons}, {"total", r.train.total}, {"val_mse", r.val_mse},
          {"wall_ms", r.wall_ms},   {"diverged", r.diverged}};
}

nlohmann::json to_json(const TrainReport& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs) epochs.push_back(to_json(e));
  return {{"epochs", epochs}, {"diverged_trajectories", r.diverged}, {"epochs_completed", r.state.epoch}};
}

nlohmann::json to_json(const LossConfig& c) {
  return {{"lambda1", c.lambda1}, {"lambda2", c.lambda2}, {"n_proj_samples", c.n_proj_samples}, {"rng_seed", c.rng_seed}};
}

LossConfig loss_config_from_json(const nlohmann::json& j) {
  LossConfig c;
  c.lambda1 = j.at("lambda1").get<double>();
  c.lambda2 = j.at("lambda2").get<double>();
  c.n_proj_samples = j.at("n_proj_samples").get<std::size_t>();
  c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  return c;
}

nlohmann::json to_json(const OptimizerConfig& c) {
  return {{"algorithm", to_string(c.algorithm)},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps},
          {"momentum", c.momentum},
          {"rho", c.rho},
          {"grad_clip", c.grad_clip},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs}};
}

OptimizerConfig optimizer_config_from_json(const nlohmann::json& j) {
  OptimizerConfig c;
  c.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
  c.learning_rate = j.at("learning_rate").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.eps = j.at("eps").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.rho = j.at("rho").get<double>();
  c.grad_clip = j.at("grad_clip").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  const nlohmann::json j{{"format", "dissipnet-checkpoint"},
                         {"model", to_json(c.model)},
                         {"epoch", c.state.epoch},
                         {"optimizer_state", c.state.optimizer.state_json()},
                         {"loss", to_json(c.loss)},
                         {"optimizer", to_json(c.optimizer)}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(1) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "dissipnet-checkpoint") throw FormatError(path.string() + ": not a checkpoint");
  try {
    Checkpoint c;
    c.model = model_from_json(j.at("model"));
    c.loss = loss_config_from_json(j.at("loss"));
    c.optimizer = optimizer_config_from_json(j.at("optimizer"));
    c.state.optimizer = Optimizer(c.optimizer, c.model.param_count());
    c.state.optimizer.load_state(j.at("optimizer_state"));
    c.state.epoch = j.at("epoch").get<std::size_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<Matrix> predict(const ProjectedModel& m, const std::vector<Matrix>& inputs, double dt, Exec exec) {
  const auto ev = evaluator(m);
  std::vector<Matrix> out(inputs.size());
  for_each_index(inputs.size(), exec, [&](std::size_t i) {
    std::vector<std::vector<double>> xs, ys;
    const std::size_t rows = inputs[i].rows() + 1;
    try {
      rollout<double>(ev, inputs[i], SimConfig{dt, inputs[i].rows(), {}}, xs, ys);
    } catch (const NonFiniteState&) {
      out[i] = Matrix(rows, m.dims.l, std::numeric_limits<double>::quiet_NaN());
      return;
    }
    Matrix y(rows, m.dims.l);
    for (std::size_t k = 0; k < rows; ++k) std::copy(ys[k].begin(), ys[k].end(), y.row(k).begin());
    out[i] = std::move(y);
  });
  return out;
}

std::vector<double> rmse_t(const std::vector<Matrix>& pred, const std::vector<Matrix>& target) {
  if (pred.size() != target.size() || pred.empty()) throw DimensionMismatch("rmse: trajectory counts differ or are zero");
  const std::size_t rows = pred[0].rows(), cols = pred[0].cols();
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].rows() != rows || pred[i].cols() != cols || target[i].rows() != rows || target[i].cols() != cols) {
      throw DimensionMismatch("rmse: trajectory " + std::to_string(i) + " shape differs");
    }
  }
  std::vector<double> out(rows, 0.0);
  const double denom = static_cast<double>(pred.size() * cols);
  for (std::size_t k = 0; k < rows; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
      for (std::size_t c = 0; c < cols; ++c) {
        const double e = pred[i](k, c) - target[i](k, c);
        s += e * e;
      }
    out[k] = std::sqrt(s / denom);
  }
  return out;
}

double rmse(const std::vector<Matrix>& pred, const std::vector<Matrix>& target) {
  const auto r = rmse_t(pred, target);
  return std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
}

}  // namespace dissipnet
