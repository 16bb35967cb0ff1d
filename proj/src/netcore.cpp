#include "dissipnet/netcore.hpp"

#include <algorithm>
#include <cmath>

namespace dissipnet {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "relu";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "leaky_relu") return Activation::leaky_relu;
  if (s == "sigmoid") return Activation::sigmoid;
  throw ConfigError("unknown activation '" + s + "'");
}

std::size_t Mlp::param_count_for(const MlpShape& shape) {
  std::size_t count = 0;
  std::size_t fan_in = shape.in_dim;
  for (std::size_t h : shape.hidden) {
    count += (fan_in + 1) * h;
    fan_in = h;
  }
  return count + (fan_in + 1) * shape.out_dim;
}

Mlp::Mlp(MlpShape shape) : shape_(std::move(shape)) {
  if (shape_.in_dim == 0 || shape_.out_dim == 0) throw ConfigError("network dimensions must be positive");
  if (std::any_of(shape_.hidden.begin(), shape_.hidden.end(), [](std::size_t h) { return h == 0; })) {
    throw ConfigError("hidden layer widths must be positive");
  }
  if (!(shape_.output_scale > 0.0)) throw ConfigError("output_scale must be positive");
  params_.assign(param_count_for(shape_), 0.0);
}

Mlp Mlp::initialized(MlpShape shape, std::mt19937_64& rng) {
  Mlp net(std::move(shape));
  std::size_t offset = 0;
  std::size_t fan_in = net.shape_.in_dim;
  const std::size_t layers = net.shape_.hidden.size() + 1;
  for (std::size_t layer = 0; layer < layers; ++layer) {
    const std::size_t fan_out = layer < net.shape_.hidden.size() ? net.shape_.hidden[layer] : net.shape_.out_dim;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t k = 0; k < fan_in * fan_out; ++k) net.params_[offset + k] = dist(rng);
    offset += (fan_in + 1) * fan_out;
    fan_in = fan_out;
  }
  return net;
}

MlpRecording record_forward(const Mlp& net, std::span<const double> x) {
  MlpRecording rec;
  ad::TapeScope scope(rec.tape);
  rec.params.reserve(net.param_count());
  for (double p : net.params()) rec.params.push_back(ad::Var::leaf(p));
  std::vector<ad::Var> xv(x.begin(), x.end());
  rec.outputs = net.forward<ad::Var>(rec.params, xv);
  return rec;
}

std::vector<double> grad_params(const MlpRecording& rec, std::span<const double> output_cotangent) {
  if (output_cotangent.size() != rec.outputs.size()) {
    throw TapeMismatch("cotangent has " + std::to_string(output_cotangent.size()) + " entries, recording has " +
                       std::to_string(rec.outputs.size()) + " outputs");
  }
  std::vector<std::int32_t> seeds;
  for (const auto& o : rec.outputs) seeds.push_back(o.idx);
  const auto adj = rec.tape.backward(seeds, output_cotangent);
  std::vector<double> grad(rec.params.size());
  for (std::size_t k = 0; k < rec.params.size(); ++k) grad[k] = adj[rec.params[k].idx];
  return grad;
}

double finite_diff_check(const Mlp& net, std::span<const double> x, double eps) {
  const auto rec = record_forward(net, x);
  const std::vector<double> ones(net.out_dim(), 1.0);
  const auto analytic = grad_params(rec, ones);

  auto probe = [&](const std::vector<double>& p) {
    const auto y = net.forward<double>(p, x);
    double s = 0.0;
    for (double v : y) s += v;
    return s;
  };
  std::vector<double> p = net.params();
  double worst = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double orig = p[k];
    p[k] = orig + eps;
    const double up = probe(p);
    p[k] = orig - eps;
    const double down = probe(p);
    p[k] = orig;
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(analytic[k] - numeric) / std::max(1.0, std::abs(numeric)));
  }
  return worst;
}

nlohmann::json to_json(const Mlp& net) {
  const auto& s = net.shape();
  return {{"in_dim", s.in_dim},
          {"out_dim", s.out_dim},
          {"hidden", s.hidden},
          {"activation", to_string(s.activation)},
          {"output_scale", s.output_scale},
          {"params", net.params()}};
}

Mlp mlp_from_json(const nlohmann::json& j) {
  MlpShape s;
  s.in_dim = j.at("in_dim").get<std::size_t>();
  s.out_dim = j.at("out_dim").get<std::size_t>();
  s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  s.activation = activation_from_string(j.at("activation").get<std::string>());
  s.output_scale = j.at("output_scale").get<double>();
  Mlp net(s);
  auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != net.param_count()) {
    throw FormatError("checkpoint network has " + std::to_string(params.size()) + " parameters, architecture needs " +
                      std::to_string(net.param_count()));
  }
  net.params() = std::move(params);
  return net;
}

}  // namespace dissipnet
