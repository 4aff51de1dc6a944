#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "spheretopic/mlp.hpp"
#include "spheretopic/rng.hpp"

namespace spheretopic {

// Encoder f: H -> sphere in R^r', decoder g: R^r' -> H, unit-norm topic
// directions (rows of `topics`) and the shared vMF concentration.
struct LatentModel {
  Mlp encoder;
  Mlp decoder;
  Eigen::MatrixXd topics;  // K x r'
  double kappa = 10.0;

  std::size_t input_dim() const { return encoder.input_dim(); }
  std::size_t latent_dim() const { return encoder.output_dim(); }
  std::size_t num_topics() const { return static_cast<std::size_t>(topics.rows()); }
};

struct LatentShape {
  std::size_t input_dim = 768;
  std::size_t latent_dim = 100;
  std::size_t num_topics = 100;
  std::vector<std::size_t> encoder_hidden{500, 500, 1000};
  std::vector<std::size_t> decoder_hidden{1000, 500, 500};
};

// Random encoder/decoder; topics are random unit vectors until k-means runs.
LatentModel make_latent_model(const LatentShape& shape, double kappa, Rng& rng);

void normalize_topics(Eigen::MatrixXd& topics);

// z = f_raw(h) / ||f_raw(h)||. Throws NumericError if ||f_raw(h)|| < 1e-12.
Eigen::VectorXd encode(const LatentModel& model, const Eigen::VectorXd& h);
// Column-wise encode of an r x n batch.
Eigen::MatrixXd encode_batch(const LatentModel& model, const Eigen::MatrixXd& tokens);
// Same as encode_batch, evaluated over fixed-size column chunks in parallel.
Eigen::MatrixXd encode_all(const LatentModel& model, const Eigen::MatrixXd& tokens);

Eigen::VectorXd decode(const LatentModel& model, const Eigen::VectorXd& z);

// P[i,k] = softmax_k(kappa * cos(z_i, t_k)); latents r' x n, result n x K.
// Throws ParameterError for kappa < 0.
Eigen::MatrixXd topic_posterior(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& topics,
                                double kappa);

// Sharpened, frequency-balanced target: Q[i,k] ∝ P[i,k]^2 / s_k with
// s_k = sum_i P[i,k] (floored at 1e-12).
Eigen::MatrixXd target_distribution(const Eigen::MatrixXd& probs);

struct SphericalKMeansResult {
  Eigen::MatrixXd centroids;         // K x r', unit rows
  std::vector<std::size_t> assignment;
  std::vector<double> objective;     // sum of cosines after each iteration
  std::size_t iterations = 0;
};

// Farthest-point seeding from a random first centroid, then Lloyd iterations
// until the assignment stops changing or max_iters is reached.
SphericalKMeansResult spherical_kmeans(const Eigen::MatrixXd& latents, std::size_t k,
                                       std::uint64_t seed, std::size_t max_iters = 100);

Eigen::MatrixXd init_topics_spherical_kmeans(const Eigen::MatrixXd& latents, std::size_t k,
                                             std::uint64_t seed, std::size_t max_iters = 100);

}  // namespace spheretopic
