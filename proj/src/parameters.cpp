#include "spheretopic/parameters.hpp"

#include <cmath>

namespace spheretopic {

Parameters Parameters::zeros_like(const Parameters& other) {
  Parameters z;
  z.attention = AttentionParams::zeros_like(other.attention);
  z.model.encoder = Mlp::zeros_like(other.model.encoder);
  z.model.decoder = Mlp::zeros_like(other.model.decoder);
  z.model.topics = Eigen::MatrixXd::Zero(other.model.topics.rows(), other.model.topics.cols());
  z.model.kappa = other.model.kappa;
  return z;
}

namespace {

template <typename Dense>
TensorView view(std::string name, Dense& m) {
  return {std::move(name), m.data(), static_cast<std::size_t>(m.size())};
}

void add_mlp(std::vector<TensorView>& out, const std::string& prefix, Mlp& mlp) {
  for (std::size_t l = 0; l < mlp.layers().size(); ++l) {
    out.push_back(view(prefix + ".layer" + std::to_string(l) + ".weight", mlp.layers()[l].weight));
    out.push_back(view(prefix + ".layer" + std::to_string(l) + ".bias", mlp.layers()[l].bias));
  }
}

}  // namespace

std::vector<TensorView> tensors(Parameters& params) {
  std::vector<TensorView> out;
  out.push_back(view("attention.weight", params.attention.weight));
  out.push_back(view("attention.bias", params.attention.bias));
  out.push_back(view("attention.query", params.attention.query));
  add_mlp(out, "encoder", params.model.encoder);
  add_mlp(out, "decoder", params.model.decoder);
  out.push_back(view("topics", params.model.topics));
  return out;
}

Adam::Adam(const Parameters& shape, Options options)
    : options_(options),
      first_moment_(Parameters::zeros_like(shape)),
      second_moment_(Parameters::zeros_like(shape)) {}

void Adam::step(Parameters& params, Parameters& grad) {
  ++step_;
  const double correction1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
  auto p = tensors(params);
  auto g = tensors(grad);
  auto m = tensors(first_moment_);
  auto v = tensors(second_moment_);
  for (std::size_t t = 0; t < p.size(); ++t) {
    for (std::size_t i = 0; i < p[t].size; ++i) {
      const double gi = g[t].data[i];
      m[t].data[i] = options_.beta1 * m[t].data[i] + (1.0 - options_.beta1) * gi;
      v[t].data[i] = options_.beta2 * v[t].data[i] + (1.0 - options_.beta2) * gi * gi;
      const double m_hat = m[t].data[i] / correction1;
      const double v_hat = v[t].data[i] / correction2;
      p[t].data[i] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

}  // namespace spheretopic
