#include "spheretopic/mlp.hpp"

#include <cmath>

#include "spheretopic/errors.hpp"

namespace spheretopic {

Mlp::Mlp(const std::vector<std::size_t>& dims, Rng& rng) {
  if (dims.size() < 2) throw ParameterError("an Mlp needs at least input and output dims");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(dims[l]);
    const auto out = static_cast<Eigen::Index>(dims[l + 1]);
    if (in == 0 || out == 0) throw ParameterError("Mlp layer dims must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    Layer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    // Fill order is part of the determinism contract: row-major weight, then bias.
    for (Eigen::Index i = 0; i < out; ++i) {
      for (Eigen::Index j = 0; j < in; ++j) layer.weight(i, j) = uniform(rng);
    }
    for (Eigen::Index i = 0; i < out; ++i) layer.bias(i) = uniform(rng);
    layers_.push_back(std::move(layer));
  }
}

Mlp Mlp::zeros(const std::vector<std::size_t>& dims) {
  if (dims.size() < 2) throw ParameterError("an Mlp needs at least input and output dims");
  Mlp mlp;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    mlp.layers_.push_back({Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dims[l + 1]),
                                                 static_cast<Eigen::Index>(dims[l])),
                           Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims[l + 1]))});
  }
  return mlp;
}

Mlp Mlp::zeros_like(const Mlp& other) { return zeros(other.dims()); }

std::size_t Mlp::input_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols());
}

std::size_t Mlp::output_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.rows());
}

std::vector<std::size_t> Mlp::dims() const {
  std::vector<std::size_t> dims;
  if (layers_.empty()) return dims;
  dims.push_back(input_dim());
  for (const Layer& l : layers_) dims.push_back(static_cast<std::size_t>(l.weight.rows()));
  return dims;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd pre = layers_[l].weight * a;
    pre.colwise() += layers_[l].bias;
    a = (l + 1 < layers_.size()) ? Eigen::MatrixXd(pre.cwiseMax(0.0)) : std::move(pre);
  }
  return a;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Tape& tape) const {
  tape.inputs.assign(layers_.size(), {});
  tape.pre_activations.assign(layers_.size(), {});
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd pre = layers_[l].weight * a;
    pre.colwise() += layers_[l].bias;
    tape.inputs[l] = std::move(a);
    a = (l + 1 < layers_.size()) ? Eigen::MatrixXd(pre.cwiseMax(0.0)) : pre;
    tape.pre_activations[l] = std::move(pre);
  }
  return a;
}

Eigen::MatrixXd Mlp::backward(const Tape& tape, const Eigen::MatrixXd& grad_out, Mlp& grad) const {
  Eigen::MatrixXd delta = grad_out;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    if (l + 1 < layers_.size()) {
      delta = (tape.pre_activations[l].array() > 0.0).select(delta, 0.0);
    }
    grad.layers_[l].weight.noalias() += delta * tape.inputs[l].transpose();
    grad.layers_[l].bias += delta.rowwise().sum();
    delta = layers_[l].weight.transpose() * delta;
  }
  return delta;
}

}  // namespace spheretopic
