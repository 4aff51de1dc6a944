#pragma once

// Data-parallel inner loops of the E-step. Each kernel has a plain serial
// reference and an OpenMP version; tests hold the two together.
//
// Layout: latent batches are r' x n (column per item), topic matrices are
// K x r' (row per topic), probability matrices are n x K (row per item).

#include <Eigen/Dense>

namespace spheretopic::kernels {

inline constexpr double kEpsilon = 1e-12;
// Rows per partial sum in reductions. Fixed so results do not depend on the
// number of threads.
inline constexpr Eigen::Index kReductionChunk = 1024;

namespace serial {

Eigen::MatrixXd cosine(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& topics);
Eigen::MatrixXd topic_posterior(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& topics,
                                double kappa);
Eigen::VectorXd column_sums(const Eigen::MatrixXd& probs);
Eigen::MatrixXd target_distribution(const Eigen::MatrixXd& probs);

}  // namespace serial

namespace parallel {

Eigen::MatrixXd cosine(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& topics);
Eigen::MatrixXd topic_posterior(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& topics,
                                double kappa);
Eigen::VectorXd column_sums(const Eigen::MatrixXd& probs);
Eigen::MatrixXd target_distribution(const Eigen::MatrixXd& probs);

}  // namespace parallel

}  // namespace spheretopic::kernels
