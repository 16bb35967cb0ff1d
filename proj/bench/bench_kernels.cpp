// Serial vs OpenMP timings of the hot kernels. Each kernel runs once per path
// after a warm-up; results are checked for bitwise agreement.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "dissipnet/benchmarks.hpp"
#include "dissipnet/verify.hpp"
#include "support.hpp"

using namespace dissipnet;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count() / reps;
}

void row(const std::string& name, double serial, double parallel, bool same) {
  std::printf("%-28s %12.3f %12.3f %9.2fx  %s\n", name.c_str(), serial, parallel, serial / parallel,
              same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::stoi(argv[1]) : 3;
  std::printf("workers: %d, repetitions: %d\n", worker_count(), reps);
  std::printf("%-28s %12s %12s %10s  %s\n", "kernel", "serial_ms", "parallel_ms", "speedup", "result");

  const Dims d{4, 2, 2};
  const auto xs = normal_samples(d.n, 2000, 1);

  for (auto kind : {ProjectionKind::dissipative, ProjectionKind::general}) {
    const auto m = testing::random_model(kind, d, 2);
    VerifyReport a, b;
    const double s = time_ms([&] { a = kyp_audit(m, xs, 1e-8, Exec::serial); }, reps);
    const double p = time_ms([&] { b = kyp_audit(m, xs, 1e-8, Exec::parallel); }, reps);
    row("kyp_audit/" + to_string(kind), s, p, a.max_residual == b.max_residual);
    const double s2 = time_ms([&] { a = idempotence_audit(m, xs, 1e-9, Exec::serial); }, reps);
    const double p2 = time_ms([&] { b = idempotence_audit(m, xs, 1e-9, Exec::parallel); }, reps);
    row("idempotence/" + to_string(kind), s2, p2, a.max_residual == b.max_residual);
  }

  {
    std::mt19937_64 rng(3);
    const auto truth = testing::random_model(ProjectionKind::conservative, d, 4);
    std::vector<Trajectory> items;
    for (int i = 0; i < 32; ++i)
      items.push_back(simulate(truth, testing::random_rectangle(100, d.m, rng), SimConfig{0.1, 100, {}}));
    std::vector<const Trajectory*> batch;
    for (const auto& t : items) batch.push_back(&t);
    const auto m = testing::random_model(ProjectionKind::dissipative, d, 5);
    const std::vector<std::vector<double>> samples(xs.begin(), xs.begin() + 100);
    const LossWeights w{1.0, 1e-3, 1e-4};
    LossGrad a, b;
    const double s = time_ms([&] { a = batch_loss(m, batch, samples, w, Exec::serial); }, reps);
    const double p = time_ms([&] { b = batch_loss(m, batch, samples, w, Exec::parallel); }, reps);
    row("batch_loss/32x100", s, p, a.grad == b.grad && a.terms.total == b.terms.total);
  }

  {
    auto spec = DatasetSpec::standard(SystemKind::pendulum, 3);
    spec.count = 64;
    Dataset a, b;
    const double s = time_ms([&] { a = generate_dataset(spec, Exec::serial); }, reps);
    const double p = time_ms([&] { b = generate_dataset(spec, Exec::parallel); }, reps);
    row("generate_dataset/pendulum3", s, p, same_dataset(a, b));
  }
  return 0;
}
