#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "spheretopic/attention.hpp"
#include "spheretopic/latent.hpp"

namespace spheretopic {

// Everything the M-step updates.
struct Parameters {
  AttentionParams attention;
  LatentModel model;

  static Parameters zeros_like(const Parameters& other);
};

// Flat view of one learnable tensor.
struct TensorView {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
};

// Attention, encoder layers, decoder layers, topics; stable order.
std::vector<TensorView> tensors(Parameters& params);

// Adaptive-moment optimizer with bias correction.
class Adam {
 public:
  struct Options {
    double learning_rate = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  Adam(const Parameters& shape, Options options);

  void step(Parameters& params, Parameters& grad);
  std::size_t steps() const { return step_; }

 private:
  Options options_;
  Parameters first_moment_;
  Parameters second_moment_;
  std::size_t step_ = 0;
};

}  // namespace spheretopic
