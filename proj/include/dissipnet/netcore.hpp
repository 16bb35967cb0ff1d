#pragma once

// Fully connected networks evaluated either on doubles or on tape variables.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dissipnet/autodiff.hpp"
#include "dissipnet/errors.hpp"

namespace dissipnet {

enum class Activation { relu, leaky_relu, sigmoid };

inline constexpr double kLeakySlope = 0.01;

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

template <class T>
T activate(Activation a, const T& x) {
  switch (a) {
    case Activation::relu: return relu(x);
    case Activation::leaky_relu: return leaky_relu(x, kLeakySlope);
    case Activation::sigmoid: return sigmoid(x);
  }
  return x;
}

struct MlpShape {
  std::size_t in_dim = 1;
  std::size_t out_dim = 1;
  std::vector<std::size_t> hidden;  // empty: a single affine map
  Activation activation = Activation::relu;
  double output_scale = 1.0;
};

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(MlpShape shape);

  // Weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero.
  static Mlp initialized(MlpShape shape, std::mt19937_64& rng);

  const MlpShape& shape() const noexcept { return shape_; }
  std::size_t in_dim() const noexcept { return shape_.in_dim; }
  std::size_t out_dim() const noexcept { return shape_.out_dim; }
  std::size_t param_count() const noexcept { return params_.size(); }

  std::vector<double>& params() noexcept { return params_; }
  const std::vector<double>& params() const noexcept { return params_; }

  // Per layer: weights row-major (fan_out x fan_in), then fan_out biases.
  static std::size_t param_count_for(const MlpShape& shape);

  template <class T>
  std::vector<T> forward(std::span<const T> params, std::span<const T> x) const;

  std::vector<double> operator()(std::span<const double> x) const {
    return forward<double>(params_, x);
  }

 private:
  MlpShape shape_;
  std::vector<double> params_;
};

template <class T>
std::vector<T> Mlp::forward(std::span<const T> params, std::span<const T> x) const {
  if (x.size() != shape_.in_dim) {
    throw DimensionMismatch("network input has " + std::to_string(x.size()) + " entries, expected " +
                            std::to_string(shape_.in_dim));
  }
  if (params.size() != param_count_for(shape_)) throw DimensionMismatch("network parameter count");
  std::vector<T> cur(x.begin(), x.end());
  std::size_t offset = 0;
  const std::size_t layers = shape_.hidden.size() + 1;
  for (std::size_t layer = 0; layer < layers; ++layer) {
    const std::size_t fan_in = cur.size();
    const std::size_t fan_out = layer < shape_.hidden.size() ? shape_.hidden[layer] : shape_.out_dim;
    const T* w = params.data() + offset;
    const T* b = w + fan_in * fan_out;
    std::vector<T> next(fan_out);
    for (std::size_t o = 0; o < fan_out; ++o) {
      next[o] = dot_affine(std::span<const T>(w + o * fan_in, fan_in), std::span<const T>(cur), b[o]);
      if (layer + 1 < layers) next[o] = activate(shape_.activation, next[o]);
    }
    offset += (fan_in + 1) * fan_out;
    cur = std::move(next);
  }
  if (shape_.output_scale != 1.0) {
    for (auto& v : cur) v = v * T(shape_.output_scale);
  }
  return cur;
}

// One recorded forward pass: parameters and outputs live on `tape`.
struct MlpRecording {
  ad::Tape tape;
  std::vector<ad::Var> params;
  std::vector<ad::Var> outputs;
};

MlpRecording record_forward(const Mlp& net, std::span<const double> x);

// d<cotangent, output>/d params by a reverse sweep over the recording.
std::vector<double> grad_params(const MlpRecording& rec, std::span<const double> output_cotangent);

// max over params of |analytic - numeric| / max(1, |numeric|), with the
// scalar probe sum(outputs) and central differences of step eps.
double finite_diff_check(const Mlp& net, std::span<const double> x, double eps);

nlohmann::json to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);

}  // namespace dissipnet
