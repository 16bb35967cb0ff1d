// dissipnet: generate datasets, train projected models, evaluate and verify
// checkpoints.
//
// Exit codes: 0 success, 1 configuration error, 2 verification failure,
// 3 runtime or I/O error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dissipnet/config.hpp"
#include "dissipnet/seed.hpp"

namespace fs = std::filesystem;
using namespace dissipnet;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitVerify = 2;
constexpr int kExitRuntime = 3;

struct Options {
  std::string config, out, dataset, checkpoint, signal;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> horizon;
};

ExperimentConfig load(const Options& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  return c;
}

fs::path out_dir(const Options& o, const ExperimentConfig& c, const char* sub) {
  const fs::path p = o.out.empty() ? fs::path(c.output_dir) / sub : fs::path(o.out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
  return p;
}

void write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot open " + p.string() + " for writing");
  out << j.dump(2) << '\n';
}

void write_series(const fs::path& p, const std::vector<double>& series, double dt) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot open " + p.string() + " for writing");
  out << "t,rmse\n";
  char buf[64];
  for (std::size_t k = 0; k < series.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", static_cast<double>(k) * dt, series[k]);
    out << buf;
  }
}

Dataset load_data(const Options& o, const ExperimentConfig& c) {
  if (!o.dataset.empty()) {
    if (fs::exists(fs::path(o.dataset) / "manifest.json")) return load_dataset(o.dataset);
    if (fs::is_directory(o.dataset)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(o.dataset))
        if (e.path().extension() == ".csv") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      return load_external(files, c.train_fraction);
    }
    throw IoError("dataset " + o.dataset + " not found");
  }
  if (is_external(c) && !c.external_files.empty()) {
    return load_external(std::vector<fs::path>(c.external_files.begin(), c.external_files.end()), c.train_fraction);
  }
  throw ConfigError("--dataset is required");
}

std::vector<Matrix> targets_of(const Dataset& d, const std::vector<std::size_t>& idx) {
  std::vector<Matrix> out;
  for (auto i : idx) out.push_back(d.items[i].y);
  return out;
}

std::vector<Matrix> inputs_of(const Dataset& d, const std::vector<std::size_t>& idx) {
  std::vector<Matrix> out;
  for (auto i : idx) out.push_back(d.items[i].u);
  return out;
}

int cmd_generate(const Options& o) {
  const auto c = load(o);
  const auto dir = out_dir(o, c, "data");
  const auto spec = dataset_spec(c);
  const nlohmann::json provenance{{"config", to_json(c)}, {"config_hash", config_hash(c)}};
  const auto d = make_dataset(spec, dir, Exec::parallel, provenance);
  std::printf("wrote %zu trajectories (%zu train, %zu test) to %s\n", d.size(), d.indices(Split::train).size(),
              d.indices(Split::test).size(), dir.string().c_str());
  return 0;
}

int cmd_train(const Options& o) {
  const auto c = load(o);
  const auto data = load_data(o, c);
  const auto dir = out_dir(o, c, "train");
  const Dims dims = model_dims(c, data.input_dim(), data.output_dim());

  Checkpoint ck;
  TrainOptions opts;
  if (!o.checkpoint.empty()) {
    ck = load_checkpoint(o.checkpoint);
    opts.resume = ck.state;
  } else {
    ck.model = build_from_config(c, dims);
  }
  ck.loss = resolved_loss(c);
  ck.optimizer = c.optimizer;

  const auto test = data.indices(Split::test);
  const double rmse_before =
      test.empty() ? NAN : rmse(predict(ck.model, inputs_of(data, test), data.dt), targets_of(data, test));
  opts.on_epoch = [&](const EpochRecord& r) {
    if (r.epoch % 10 == 0 || r.epoch + 1 == c.optimizer.epochs) {
      std::printf("epoch %5zu  mse %.6e  l_proj %.3e  l_recons %.3e  total %.6e  val_mse %.6e  (%.0f ms)\n", r.epoch,
                  r.train.mse, r.train.l_proj, r.train.l_recons, r.train.total, r.val_mse, r.wall_ms);
      std::fflush(stdout);
    }
  };
  const auto report = train(ck.model, data, ck.loss, ck.optimizer, opts);
  ck.state = report.state;
  save_checkpoint(dir / "checkpoint.json", ck);

  nlohmann::json metrics{{"rmse_untrained", rmse_before}};
  if (!test.empty()) {
    const auto pred = predict(ck.model, inputs_of(data, test), data.dt);
    const auto series = rmse_t(pred, targets_of(data, test));
    metrics["test_rmse"] = rmse(pred, targets_of(data, test));
    write_series(dir / "rmse_t.csv", series, data.dt);
    std::printf("test RMSE %.6g (untrained %.6g)\n", metrics["test_rmse"].get<double>(), rmse_before);
  }
  write_json(dir / "report.json", {{"config", to_json(c)},
                                   {"config_hash", config_hash(c)},
                                   {"training", to_json(report)},
                                   {"metrics", metrics}});
  write_json(dir / "metrics.json", metrics);
  return 0;
}

int cmd_eval(const Options& o) {
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const auto c = load(o);
  const auto ck = load_checkpoint(o.checkpoint);
  const auto dir = out_dir(o, c, "eval");
  nlohmann::json metrics;

  if (o.signal.empty()) {
    const auto data = load_data(o, c);
    const auto test = data.indices(Split::test);
    if (test.empty()) throw ConfigError("dataset has no test split");
    const auto pred = predict(ck.model, inputs_of(data, test), data.dt);
    const auto targets = targets_of(data, test);
    metrics = {{"signal", "dataset"}, {"count", test.size()}, {"rmse", rmse(pred, targets)}};
    write_series(dir / "rmse_t.csv", rmse_t(pred, targets), data.dt);
  } else {
    SignalSpec sig = c.signal;
    sig.kind = signal_from_string(o.signal);
    sig.horizon = o.horizon.value_or(resolved_horizon(c));
    sig.dt = resolved_dt(c);
    const std::size_t count = c.verify.n_rollouts;
    std::vector<Matrix> inputs, targets;
    for (std::size_t i = 0; i < count; ++i) {
      sig.seed = mix_seed(c.seed, i, 5);
      inputs.push_back(gen_signal(sig));
      targets.push_back(reference_simulate(c, inputs.back(), sig.horizon).y);
    }
    const auto pred = predict(ck.model, inputs, sig.dt);
    bool finite = true;
    for (const auto& p : pred)
      for (double v : p.data()) finite = finite && std::isfinite(v);
    const auto series = rmse_t(pred, targets);
    metrics = {{"signal", o.signal}, {"count", count}, {"horizon", sig.horizon}, {"all_finite", finite}};
    metrics["rmse"] = finite ? nlohmann::json(rmse(pred, targets)) : nlohmann::json(nullptr);
    write_series(dir / ("rmse_t_" + o.signal + ".csv"), series, sig.dt);
    const auto traj_dir = dir / ("trajectories_" + o.signal);
    fs::create_directories(traj_dir);
    for (std::size_t i = 0; i < count; ++i) {
      Trajectory t;
      t.u = inputs[i];
      t.y = pred[i];
      t.times.resize(sig.horizon + 1);
      for (std::size_t k = 0; k <= sig.horizon; ++k) t.times[k] = static_cast<double>(k) * sig.dt;
      char name[32];
      std::snprintf(name, sizeof name, "pred_%04zu.csv", i);
      write_trajectory(traj_dir / name, t, false);
    }
  }
  write_json(dir / ("metrics_" + (o.signal.empty() ? std::string("dataset") : o.signal) + ".json"), metrics);
  std::cout << metrics.dump(2) << '\n';
  return 0;
}

bool certified_with_input(ProjectionKind k) {
  return k != ProjectionKind::naive && k != ProjectionKind::stable;
}

int cmd_verify(const Options& o) {
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const auto c = load(o);
  const auto ck = load_checkpoint(o.checkpoint);
  const auto& m = ck.model;
  const auto dir = out_dir(o, c, "verify");
  const auto kind = m.spec.kind;

  std::vector<VerifyReport> reports;
  std::vector<bool> hard;
  auto add = [&](VerifyReport r, bool is_hard) {
    if (!is_hard) r.note += r.note.empty() ? "report only" : "; report only";
    reports.push_back(std::move(r));
    hard.push_back(is_hard);
  };

  const auto xs = normal_samples(m.dims.n, c.verify.n_samples, mix_seed(c.seed, 0, 6));
  add(kyp_audit(m, xs, c.verify.kyp_threshold), true);
  if (kind != ProjectionKind::naive) add(idempotence_audit(m, xs, c.verify.idempotence_threshold), true);

  // Budget checks on fresh rollouts. Passive kinds certify V/2 against u'y.
  const double dt = resolved_dt(c);
  StorageCallback storage = [&m](std::span<const double> x) { return m.spec.storage(x); };
  SupplyRate supply = m.spec.supply;
  if (kind == ProjectionKind::passive_alpha || kind == ProjectionKind::passive_beta) {
    storage = [&m](std::span<const double> x) { return 0.5 * m.spec.storage(x); };
    PresetArgs a;
    a.input_dim = m.dims.m;
    a.output_dim = m.dims.l;
    supply = preset(PresetKind::passive, a);
  }
  const BudgetMode mode = kind == ProjectionKind::conservative ? BudgetMode::equality : BudgetMode::inequality;
  const BudgetOptions bopts{c.verify.c_tol, std::nullopt};
  auto budget = [&](const Matrix& u, const std::string& label) {
    VerifyReport r;
    try {
      r = dissipativity_check(simulate(m, u, SimConfig{dt, u.rows(), {}}), storage, supply, mode, bopts);
    } catch (const NonFiniteState& e) {
      r.check = mode == BudgetMode::equality ? "energy_balance" : "dissipation_budget";
      r.pass = false;
      r.max_residual = INFINITY;
      r.note = e.what();
    }
    r.check += "[" + label + "]";
    return r;
  };
  if (kind != ProjectionKind::stable) {
    SignalSpec sig = c.signal;
    sig.horizon = resolved_horizon(c);
    sig.dt = dt;
    sig.dim = m.dims.m;
    VerifyReport worst;
    for (std::size_t i = 0; i < c.verify.n_rollouts; ++i) {
      sig.seed = mix_seed(c.seed, i, 7);
      auto r = budget(gen_signal(sig), to_string(sig.kind));
      if (i == 0 || !r.pass || r.max_residual > worst.max_residual) worst = r;
      if (!r.pass) break;
    }
    add(worst, certified_with_input(kind));
    SignalSpec step = sig;
    step.kind = SignalKind::step;
    step.horizon = c.verify.long_horizon;
    add(budget(gen_signal(step), "long_step"), certified_with_input(kind));
  }
  if (kind == ProjectionKind::io_stable) {
    add(hj_check(m, xs, m.spec.gamma, HjForm::stated), true);
    add(hj_check(m, xs, m.spec.gamma, HjForm::standard), true);
    SignalSpec sig = c.signal;
    sig.kind = SignalKind::rectangle;
    sig.horizon = resolved_horizon(c);
    sig.dim = m.dims.m;
    std::vector<Matrix> inputs;
    for (std::size_t i = 0; i < c.verify.n_rollouts; ++i) {
      sig.seed = mix_seed(c.seed, i, 8);
      inputs.push_back(gen_signal(sig));
    }
    add(gain_check(m, inputs, m.spec.gamma, SimConfig{dt, sig.horizon, {}}), true);
  }

  bool ok = true;
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    auto j = to_json(reports[i]);
    j["hard"] = static_cast<bool>(hard[i]);
    out.push_back(j);
    if (hard[i] && !reports[i].pass) ok = false;
  }
  std::cout << "projection: " << to_string(kind) << '\n' << format_table(reports);
  write_json(dir / "verify_report.json", {{"projection", to_string(kind)}, {"pass", ok}, {"checks", out}});
  std::cout << (ok ? "all hard checks passed\n" : "hard check failed\n");
  return ok ? 0 : kExitVerify;
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidPreset& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn dissipative input-output dynamics by projection"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Override the config seed");
  };
  auto* gen = app.add_subcommand("generate", "Write a ground-truth dataset");
  common(gen);
  auto* tr = app.add_subcommand("train", "Train a projected model");
  common(tr);
  tr->add_option("--dataset", o.dataset, "Dataset directory");
  tr->add_option("--checkpoint", o.checkpoint, "Resume from this checkpoint")->check(CLI::ExistingFile);
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  common(ev);
  ev->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("--dataset", o.dataset, "Dataset directory (test split)");
  ev->add_option("--signal", o.signal, "Evaluate on fresh inputs of this kind")
      ->check(CLI::IsMember({"rectangle", "step", "random_walk"}));
  ev->add_option("--horizon", o.horizon, "Steps per evaluation input");
  auto* ve = app.add_subcommand("verify", "Audit a checkpoint's certificates");
  common(ve);
  ve->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  if (gen->parsed()) return guarded([&] { return cmd_generate(o); });
  if (tr->parsed()) return guarded([&] { return cmd_train(o); });
  if (ev->parsed()) return guarded([&] { return cmd_eval(o); });
  return guarded([&] { return cmd_verify(o); });
}
