#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "spheretopic/rng.hpp"

namespace spheretopic {

// Fully connected network, ReLU on hidden layers and identity on the output.
// Batches are column-per-sample.
class Mlp {
 public:
  struct Layer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
  };

  // Activations cached by forward() for backward().
  struct Tape {
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::MatrixXd> pre_activations;
  };

  Mlp() = default;
  // dims = {in, hidden..., out}; weights uniform in +-1/sqrt(fan_in).
  Mlp(const std::vector<std::size_t>& dims, Rng& rng);

  static Mlp zeros(const std::vector<std::size_t>& dims);
  static Mlp zeros_like(const Mlp& other);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::vector<std::size_t> dims() const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Tape& tape) const;

  // Accumulates parameter gradients into `grad` (same shape as *this) and
  // returns the gradient with respect to the input batch.
  Eigen::MatrixXd backward(const Tape& tape, const Eigen::MatrixXd& grad_out, Mlp& grad) const;

 private:
  std::vector<Layer> layers_;
};

}  // namespace spheretopic
